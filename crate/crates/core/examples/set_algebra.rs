//! Integer set algebra: build sets and relations from text, combine them,
//! decide emptiness and enumerate the points.
//!
//! ```bash
//! cargo run -p raceset --example set_algebra
//! ```

use std::collections::BTreeMap;
use std::error::Error;

use raceset::iset::text::{parse_rel, parse_set};
use raceset::iset::{lex_lt, EmptinessVerdict, IntRel, SolveOptions};
use raceset::oracle::{enumerate_set, EnumBox};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let a = parse_set("{ S[k] : 0 <= k < 2 }")?;
    let b = parse_set("{ S[k] : 1 <= k < 4 }")?;
    let none = BTreeMap::new();
    let bx = EnumBox::new(0, 10);

    let u = a.union_same(&b)?;
    println!("union      {u}  -> {:?}", enumerate_set(&u, &none, bx)?);
    let d = parse_set("{ S[k] : 0 <= k < 4 }")?.subtract(&parse_set("{ S[k] : k = 2 }")?)?;
    println!("subtract   {d}  -> {:?}", enumerate_set(&d, &none, bx)?);

    // join S writes and T reads through the cell they touch
    let w = parse_rel("[n] -> { S[k] -> C[k] : 0 <= k < n }")?;
    let r = parse_rel("[n] -> { T[i, j] -> C[i] : 0 <= i < n and 0 <= j < n }")?;
    let joined = IntRel::compose(&w, &r.inverse())?;
    println!("compose    {joined}");

    let at4 = SolveOptions::default().with_param("n", 4);
    match joined.is_empty(&at4) {
        EmptinessVerdict::NonEmpty(p) => println!("at n = 4 the join holds, e.g. {:?}", p.dim_values),
        other => println!("at n = 4: {other:?}"),
    }
    let pairs = enumerate_set(joined.wrapped(), &BTreeMap::from([("n".to_string(), 4)]), EnumBox::new(0, 3))?;
    println!("{} instance pairs at n = 4", pairs.len());

    let before = lex_lt(2);
    println!("lex_lt(2)  {before}");
    let self_before = before.intersect(&before.inverse())?;
    println!("lex_lt ∩ inverse is empty: {}", self_before.is_empty(&SolveOptions::default()) == EmptinessVerdict::Empty);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
