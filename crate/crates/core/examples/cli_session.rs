//! Drive the command line in-process: check, dump and run the oracle on
//! the shipped fixtures.
//!
//! ```bash
//! cargo run -p raceset --example cli_session
//! ```

use std::error::Error;

use raceset::cli;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let runs = [
        vec!["check".to_string(), format!("{dir}/gespmm_alg2.mir")],
        vec!["check".to_string(), format!("{dir}/gespmm_nobarrier.model")],
        vec!["check".to_string(), format!("{dir}/stencil.mir"), "--grid".into(), "2/4".into()],
        vec![
            "oracle".to_string(),
            format!("{dir}/stencil_nobarrier.mir"),
            format!("{dir}/instances/stencil.inst"),
        ],
        vec!["check".to_string(), format!("{dir}/missing.mir")],
    ];
    for args in runs {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = cli::run(std::iter::once("raceset".to_string()).chain(args.iter().cloned()), &mut out, &mut err);
        let out = String::from_utf8(out)?;
        let err = String::from_utf8(err)?;
        println!("$ raceset {}  -> exit {code}", args.join(" ").replace(dir, "fixtures"));
        for line in out.lines().take(3).chain(err.lines()) {
            println!("  {}", line.replace(dir, "fixtures"));
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
