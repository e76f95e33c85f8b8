mod common;

use common::*;
use raceset::depcheck::{full_report, races, CheckOptions};
use raceset::isccemit::{emit, emit_report_structured, emit_report_text};
use raceset::miniir::{self, ExtractOptions};
use raceset::modeltext::parse_model;

#[test]
fn golden_scripts() {
    for name in ["polyp", "gespmm_alg2"] {
        let m = parse_model(&fixture(&format!("{name}.model"))).unwrap();
        let first = emit(&m).unwrap().text();
        let second = emit(&m).unwrap().text();
        assert_eq!(first, second);
        assert_eq!(first, fixture(&format!("golden/{name}.iscc")), "{name}");
    }
}

#[test]
fn script_sections() {
    let m = parse_model(&fixture("polyp.model")).unwrap();
    let s = emit(&m).unwrap();
    for (part, key) in [(&s.domain, "Domain"), (&s.read, "Read"), (&s.write, "Write"), (&s.schedule, "Schedule")] {
        assert!(part.starts_with(key), "{part}");
        assert!(part.trim_end().ends_with(';'), "{part}");
    }
    assert!(s.write.contains("S[k] -> C[k, k]"), "{}", s.write);
    assert!(s.tail.contains("RaW"));
    assert!(s.text().ends_with('\n'));
}

#[test]
fn empty_model_still_emits() {
    let m = parse_model("kernel nothing\n").unwrap();
    let s = emit(&m).unwrap().text();
    assert!(s.contains("Domain"));
    assert_eq!(s, emit(&m).unwrap().text());

    let f = miniir::parse(&fixture("empty.mir")).unwrap();
    let m = miniir::extract_model(&f, &ExtractOptions::default()).unwrap();
    assert!(emit(&m).unwrap().text().contains("Domain"));
}

#[test]
fn extracted_models_emit_deterministically() {
    let f = miniir::parse(&fixture("gespmm_alg2.mir")).unwrap();
    let a = emit(&miniir::extract_model(&f, &ExtractOptions::default()).unwrap()).unwrap();
    let b = emit(&miniir::extract_model(&f, &ExtractOptions::default()).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn reports_render() {
    let m = parse_model(&fixture("gespmm_nobarrier.model")).unwrap();
    let r = races(&m, &CheckOptions::default()).unwrap();
    let text = emit_report_text(&r);
    assert!(text.contains("verdict: RaceFound"), "{text}");
    let v = emit_report_structured(&r);
    assert_eq!(v["verdict"], "RaceFound");
    assert!(v["races"].as_array().unwrap().iter().any(|r| r["verdict"] == "found"));

    let m = parse_model(&fixture("polyp.model")).unwrap();
    let r = full_report(&m, &CheckOptions::default()).unwrap();
    let v = emit_report_structured(&r);
    assert!(!v["dependences"].as_array().unwrap().is_empty());
    assert_eq!(emit_report_text(&r), emit_report_text(&full_report(&m, &CheckOptions::default()).unwrap()));
}
