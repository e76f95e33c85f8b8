//! Run a kernel on a concrete sparse matrix and compare the races found in
//! the access log with the symbolic verdict narrowed to the same instance.
//!
//! ```bash
//! cargo run -p raceset --example oracle_cross_check
//! ```

use std::error::Error;

use raceset::depcheck::{races, CheckOptions};
use raceset::miniir::{extract_with_layout, parse, ExtractOptions};
use raceset::oracle::{detect_races, run_ir, ConcreteInstance};

const INSTANCE: &str = include_str!("../fixtures/instances/gespmm.inst");
const KERNELS: [(&str, &str); 2] = [
    ("gespmm_alg2", include_str!("../fixtures/gespmm_alg2.mir")),
    ("gespmm_nobarrier", include_str!("../fixtures/gespmm_nobarrier.mir")),
];

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let inst = ConcreteInstance::parse(INSTANCE)?;
    for (name, src) in KERNELS {
        let f = parse(src)?;
        let x = extract_with_layout(&f, &ExtractOptions::default())?;
        let log = run_ir(&inst, &f, Some(&x))?;
        let oracle = detect_races(&log);
        let opts = CheckOptions {
            specialize: Some(inst.specialization(&x.model)),
            ..Default::default()
        };
        let symbolic = races(&x.model, &opts)?.verdict;
        println!(
            "{name}: {} accesses, {} conflicting pairs; oracle {}, symbolic {}",
            log.len(),
            oracle.pairs.len(),
            oracle.token(),
            symbolic.token()
        );
        if let Some(p) = oracle.pairs.first() {
            println!(
                "  e.g. {:?} {}{:?} by thread {:?} and {:?} by thread {:?}, both in phase {}",
                p.first.kind, p.first.array, p.first.cell, p.first.thread, p.second.kind, p.second.thread, p.first.phase
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
