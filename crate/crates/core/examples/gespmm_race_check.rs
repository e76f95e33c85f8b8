//! Race check of the Ge-SpMM kernel, as a hand-written model and as mini-IR,
//! with and without the barrier between staging and use of shared memory.
//!
//! ```bash
//! cargo run -p raceset --example gespmm_race_check
//! ```

use std::error::Error;

use raceset::depcheck::{races, CheckOptions, Verdict};
use raceset::miniir::{extract_model, parse, ExtractOptions};
use raceset::modeltext::parse_model;

const MODELS: [(&str, &str); 2] = [
    ("gespmm_alg2.model", include_str!("../fixtures/gespmm_alg2.model")),
    ("gespmm_nobarrier.model", include_str!("../fixtures/gespmm_nobarrier.model")),
];
const KERNELS: [(&str, &str); 2] = [
    ("gespmm_alg2.mir", include_str!("../fixtures/gespmm_alg2.mir")),
    ("gespmm_nobarrier.mir", include_str!("../fixtures/gespmm_nobarrier.mir")),
];

fn show(name: &str, v: &Verdict) {
    println!("{name}: {}", v.token());
    if let Verdict::RaceFound(ws) = v {
        for w in ws {
            println!(
                "  {} on {}{:?}: {}{:?} vs {}{:?}",
                w.kind.name(),
                w.array,
                w.cell,
                w.source.statement,
                w.source.values,
                w.target.statement,
                w.target.values
            );
        }
    }
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let opts = CheckOptions::default();
    for (name, src) in MODELS {
        let report = races(&parse_model(src)?, &opts)?;
        show(name, &report.verdict);
    }
    for (name, src) in KERNELS {
        let model = extract_model(&parse(src)?, &ExtractOptions::default())?;
        let report = races(&model, &opts)?;
        show(name, &report.verdict);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
