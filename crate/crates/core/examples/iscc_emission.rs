//! Print the ISCC script for the polynomial-product model.
//!
//! ```bash
//! cargo run -p raceset --example iscc_emission
//! ```

use std::error::Error;

use raceset::isccemit::emit;
use raceset::modeltext::parse_model;

const POLYP: &str = include_str!("../fixtures/polyp.model");

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let script = emit(&parse_model(POLYP)?)?;
    print!("{script}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
