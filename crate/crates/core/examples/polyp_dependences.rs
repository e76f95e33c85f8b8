//! Dependences of the polynomial-product loop nest: which instances of T
//! read a cell of C that an instance of S wrote.
//!
//! ```bash
//! cargo run -p raceset --example polyp_dependences
//! ```

use std::error::Error;

use raceset::depcheck::{dependences, CheckOptions, DependenceKind, PairVerdict};
use raceset::iset::SolveOptions;
use raceset::modeltext::parse_model;
use raceset::oracle::{enumerate_set, EnumBox};

const POLYP: &str = include_str!("../fixtures/polyp.model");

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let model = parse_model(POLYP)?;
    let opts = CheckOptions {
        solve: SolveOptions::default().with_param("n", 4),
        ..Default::default()
    };
    for kind in DependenceKind::ALL {
        for d in dependences(&model, kind, &opts)? {
            let state = match &d.verdict {
                PairVerdict::Empty => "empty".to_string(),
                PairVerdict::Found(_) => "non-empty".to_string(),
                PairVerdict::Inconclusive(r) => format!("undecided ({r})"),
            };
            println!("{} {} -> {} on {}: {state}", kind.name(), d.source, d.target, d.array);
        }
    }
    let raw = dependences(&model, DependenceKind::RaW, &opts)?
        .into_iter()
        .find(|d| d.source == "S" && d.target == "T")
        .ok_or("no S -> T dependence")?;
    println!("RaW S -> T: {}", raw.relation);
    let params = [("n".to_string(), 4)].into();
    for p in enumerate_set(raw.relation.wrapped(), &params, EnumBox::new(0, 3))? {
        println!("  S[{}] -> T[{}, {}]", p[0], p[1], p[2]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
