//! From mini-IR to a kernel model: loops, grid iterators, propagated index
//! expressions and the recovered statements.
//!
//! ```bash
//! cargo run -p raceset --example miniir_extraction
//! ```

use std::error::Error;

use raceset::miniir::{barrier_count, extract_model, find_grid_iterators, find_loops, parse, propagate, ExtractOptions};
use raceset::modeltext::render_model;

const KERNEL: &str = include_str!("../fixtures/gespmm_alg2.mir");

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let f = parse(KERNEL)?;
    println!("kernel @{}: {} blocks, {} barriers", f.name, f.blocks.len(), barrier_count(&f));
    for l in find_loops(&f)? {
        println!(
            "loop at {}: %{} from {} step {}",
            l.header, l.induction.phi, l.induction.init, l.induction.step
        );
    }
    for b in find_grid_iterators(&f)? {
        println!("%{} is {} ({})", b.register, b.intrinsic.name(), b.model_name);
    }
    let values = propagate(&f)?;
    for r in ["p", "q", "kc", "rs"] {
        println!("%{r} = {}", values[r]);
    }
    let model = extract_model(&f, &ExtractOptions::default())?;
    print!("{}", render_model(&model));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
