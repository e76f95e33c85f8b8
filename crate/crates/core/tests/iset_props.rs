mod common;

use common::{property_suite, seed};

#[test]
fn thousand_random_cases_agree_with_enumeration() {
    let s = seed();
    let rep = property_suite(s, 1000);
    eprintln!("seed {s}: {} cases {:?}", rep.cases, rep.per_op);
    for m in rep.mismatches.iter().take(10) {
        eprintln!("{m}");
    }
    assert_eq!(rep.cases, 1000);
    assert!(rep.mismatches.is_empty(), "{} mismatches (seed {s})", rep.mismatches.len());
    assert_eq!(rep.unsound_empty, 0);
    assert_eq!(rep.inconclusive_bounded, 0);
}

#[test]
fn other_seeds_agree_too() {
    for s in [1, 2, 3] {
        let rep = property_suite(s, 90);
        assert!(rep.ok(), "seed {s}: {:?}", &rep.mismatches[..rep.mismatches.len().min(5)]);
    }
}
