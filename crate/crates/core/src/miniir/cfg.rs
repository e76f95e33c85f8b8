//! Dominators and natural loops.

use std::collections::BTreeSet;

use super::ast::Function;
use super::MiniIrError;

/// Immediate dominators over an arbitrary graph, by the iterative
/// algorithm of Cooper, Harvey and Kennedy.
#[derive(Debug, Clone)]
pub struct Dominators {
    idom: Vec<Option<usize>>,
    /// Reverse postorder number; `usize::MAX` when unreachable.
    order: Vec<usize>,
    rpo: Vec<usize>,
}

fn reverse_postorder(succs: &[Vec<usize>], entry: usize) -> Vec<usize> {
    let n = succs.len();
    let mut seen = vec![false; n];
    let mut post = Vec::with_capacity(n);
    let mut stack = vec![(entry, 0usize)];
    seen[entry] = true;
    while let Some((b, i)) = stack.pop() {
        if i < succs[b].len() {
            stack.push((b, i + 1));
            let s = succs[b][i];
            if !seen[s] {
                seen[s] = true;
                stack.push((s, 0));
            }
        } else {
            post.push(b);
        }
    }
    post.reverse();
    post
}

impl Dominators {
    pub fn compute(f: &Function) -> Self {
        Self::from_graph(&f.succs, &f.preds, 0)
    }

    /// Post-dominators: dominators of the reversed graph, with a virtual
    /// exit node (index `n`) joined to every block without successors.
    pub fn post(f: &Function) -> Self {
        let n = f.blocks.len();
        let mut succs: Vec<Vec<usize>> = f.preds.clone();
        let mut preds: Vec<Vec<usize>> = f.succs.clone();
        succs.push(Vec::new());
        preds.push(Vec::new());
        for b in 0..n {
            if f.succs[b].is_empty() {
                succs[n].push(b);
                preds[b].push(n);
            }
        }
        Self::from_graph(&succs, &preds, n)
    }

    pub fn from_graph(succs: &[Vec<usize>], preds: &[Vec<usize>], entry: usize) -> Self {
        let n = succs.len();
        let rpo = reverse_postorder(succs, entry);
        let mut order = vec![usize::MAX; n];
        for (i, &b) in rpo.iter().enumerate() {
            order[b] = i;
        }
        let mut idom: Vec<Option<usize>> = vec![None; n];
        idom[entry] = Some(entry);
        let intersect = |idom: &[Option<usize>], mut a: usize, mut b: usize| -> usize {
            while a != b {
                while order[a] > order[b] {
                    a = idom[a].unwrap();
                }
                while order[b] > order[a] {
                    b = idom[b].unwrap();
                }
            }
            a
        };
        let mut changed = true;
        while changed {
            changed = false;
            for &b in rpo.iter().skip(1) {
                let mut new: Option<usize> = None;
                for &p in &preds[b] {
                    if idom[p].is_none() {
                        continue;
                    }
                    new = Some(match new {
                        None => p,
                        Some(q) => intersect(&idom, p, q),
                    });
                }
                if new.is_some() && idom[b] != new {
                    idom[b] = new;
                    changed = true;
                }
            }
        }
        Dominators { idom, order, rpo }
    }

    pub fn reachable(&self, b: usize) -> bool {
        self.order.get(b).is_some_and(|&o| o != usize::MAX)
    }

    pub fn idom(&self, b: usize) -> Option<usize> {
        match self.idom.get(b).copied().flatten() {
            Some(d) if d != b => Some(d),
            _ => None,
        }
    }

    /// `a` dominates `b` (reflexive).
    pub fn dominates(&self, a: usize, b: usize) -> bool {
        if !self.reachable(a) || !self.reachable(b) {
            return false;
        }
        let mut x = b;
        loop {
            if x == a {
                return true;
            }
            match self.idom(x) {
                Some(d) => x = d,
                None => return false,
            }
        }
    }

    pub fn reverse_postorder(&self) -> &[usize] {
        &self.rpo
    }
}

/// A natural loop: header plus every block that reaches a back edge
/// without passing through the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopNest {
    pub header: usize,
    pub latches: Vec<usize>,
    pub body: BTreeSet<usize>,
    pub parent: Option<usize>,
    pub depth: usize,
}

#[derive(Debug, Clone)]
pub struct LoopForest {
    /// Outer loops before inner ones.
    pub loops: Vec<LoopNest>,
    /// Innermost loop of each block.
    pub innermost: Vec<Option<usize>>,
}

impl LoopForest {
    pub fn compute(f: &Function, dom: &Dominators) -> Result<Self, MiniIrError> {
        let n = f.blocks.len();
        // every retreating edge of a DFS must be a back edge (target dominates source)
        let mut state = vec![0u8; n];
        let mut stack = vec![(0usize, 0usize)];
        state[0] = 1;
        while let Some((b, i)) = stack.pop() {
            if i < f.succs[b].len() {
                stack.push((b, i + 1));
                let s = f.succs[b][i];
                match state[s] {
                    0 => {
                        state[s] = 1;
                        stack.push((s, 0));
                    }
                    1 if !dom.dominates(s, b) => {
                        return Err(MiniIrError::IrreducibleCfg(f.blocks[s].label.clone()));
                    }
                    _ => {}
                }
            } else {
                state[b] = 2;
            }
        }
        let mut loops: Vec<LoopNest> = Vec::new();
        for &h in dom.reverse_postorder() {
            let latches: Vec<usize> = f.preds[h].iter().copied().filter(|&p| dom.dominates(h, p)).collect();
            if latches.is_empty() {
                continue;
            }
            let mut body: BTreeSet<usize> = BTreeSet::from([h]);
            let mut work: Vec<usize> = latches.clone();
            while let Some(b) = work.pop() {
                if body.insert(b) {
                    work.extend(f.preds[b].iter().copied());
                }
            }
            loops.push(LoopNest {
                header: h,
                latches,
                body,
                parent: None,
                depth: 0,
            });
        }
        // headers in reverse postorder: an enclosing loop comes first
        for i in 0..loops.len() {
            let parent = (0..i)
                .rev()
                .find(|&j| loops[j].body.contains(&loops[i].header) && loops[j].body.is_superset(&loops[i].body));
            loops[i].parent = parent;
            loops[i].depth = parent.map_or(1, |p| loops[p].depth + 1);
        }
        let mut innermost: Vec<Option<usize>> = vec![None; n];
        for (i, l) in loops.iter().enumerate() {
            for &b in &l.body {
                match innermost[b] {
                    Some(j) if loops[j].depth >= l.depth => {}
                    _ => innermost[b] = Some(i),
                }
            }
        }
        Ok(LoopForest { loops, innermost })
    }

    /// Loops containing `b`, outermost first.
    pub fn enclosing(&self, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.innermost[b];
        while let Some(l) = cur {
            out.push(l);
            cur = self.loops[l].parent;
        }
        out.reverse();
        out
    }

    pub fn children(&self, parent: Option<usize>) -> Vec<usize> {
        (0..self.loops.len()).filter(|&l| self.loops[l].parent == parent).collect()
    }
}
