mod common;

use std::process::Command;

use common::*;
use raceset::cli;
use raceset::iset::IntSet;
use raceset::modeltext::parse_model;
use raceset::oracle::{enumerate_set, EnumBox};

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn raceset(args: &[&str]) -> Out {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("raceset").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    Out {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn path(rel: &str) -> String {
    fixture_path(rel).to_string_lossy().into_owned()
}

#[test]
fn check_exit_codes() {
    let free = raceset(&["check", &path("gespmm_alg2.model")]);
    assert_eq!(free.code, 0, "{}", free.stderr);
    assert!(free.stdout.contains("RaceFree"));

    let racy = raceset(&["check", &path("gespmm_nobarrier.model")]);
    assert_eq!(racy.code, 1);
    assert!(racy.stdout.contains("RaceFound"));
    assert!(racy.stdout.contains("sm_k") || racy.stdout.contains("sm_v"));

    assert_eq!(raceset(&["check", &path("stencil.mir"), "--grid", "2/4"]).code, 0);
    assert_eq!(raceset(&["check", &path("stencil_nobarrier.mir"), "--grid", "2/4"]).code, 1);
}

#[test]
fn input_errors_exit_3() {
    let missing = raceset(&["check", &path("no_such_kernel.model")]);
    assert_eq!(missing.code, 3);
    assert!(missing.stderr.starts_with("error: "), "{}", missing.stderr);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mir");
    std::fs::write(&bad, "kernel @k() {\nentry:\n  %x = frobnicate i32 1, 2\n  ret\n}\n").unwrap();
    let out = raceset(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.code, 3);
    assert!(out.stderr.contains(":3:"), "{}", out.stderr);

    let bad_model = dir.path().join("bad.model");
    std::fs::write(&bad_model, "kernel k\nstatement S [i]\n  domain i <\n").unwrap();
    assert_eq!(raceset(&["check", bad_model.to_str().unwrap()]).code, 3);

    let out = raceset(&["oracle", &path("spmv_csr.mir"), &path("instances/bad_csr.inst"), "--grid", "2/4"]);
    assert_eq!(out.code, 3, "{}", out.stderr);
}

#[test]
fn bad_arguments_exit_3() {
    assert_eq!(raceset(&[]).code, 3);
    assert_eq!(raceset(&["frobnicate"]).code, 3);
    assert_eq!(raceset(&["check", &path("polyp.model"), "--box", "0"]).code, 3);
    assert_eq!(raceset(&["check", &path("polyp.model"), "--mode", "sideways"]).code, 3);
    assert_eq!(raceset(&["check", &path("stencil.mir"), "--grid", "two/four"]).code, 3);
    assert_eq!(raceset(&["check", &path("polyp.model"), "--params", "n"]).code, 3);
    let help = raceset(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("emit-iscc"));
}

#[test]
fn analysis_errors_exit_4() {
    // the block size is needed to make the row index affine
    let out = raceset(&["check", &path("stencil.mir")]);
    assert_eq!(out.code, 4, "{}", out.stderr);
    assert!(out.stderr.contains("grid"), "{}", out.stderr);
    assert_eq!(raceset(&["check", &path("id_misuse.mir")]).code, 4);
}

#[test]
fn structured_output_is_json() {
    let out = raceset(&["check", &path("gespmm_nobarrier.model"), "--format", "structured"]);
    assert_eq!(out.code, 1);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["kernel"], "gespmm_nobarrier");
    let races = v["races"].as_array().unwrap();
    assert!(races.iter().any(|r| r["verdict"] == "found" && r["witness"].is_object()));

    let out = raceset(&["oracle", &path("stencil_nobarrier.mir"), &path("instances/stencil.inst"), "--format", "structured"]);
    assert_eq!(out.code, 1, "{}", out.stderr);
    serde_json::from_str::<serde_json::Value>(&out.stdout).unwrap();
}

#[test]
fn out_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.txt");
    let out = raceset(&["check", &path("polyp.model"), "--out", target.to_str().unwrap()]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&target).unwrap().contains("RaceFree"));
}

#[test]
fn instance_narrows_the_check() {
    let scatter = path("spmv_scatter.mir");
    assert_eq!(raceset(&["check", &scatter, "--grid", "2/4"]).code, 1);
    let tight = raceset(&["check", &scatter, "--instance", &path("instances/spmv_tight.inst")]);
    assert_eq!(tight.code, 0, "{}{}", tight.stdout, tight.stderr);
    assert_eq!(raceset(&["check", &scatter, "--instance", &path("instances/spmv_loose.inst")]).code, 1);
    assert_eq!(raceset(&["oracle", &scatter, &path("instances/spmv_tight.inst")]).code, 0);
    assert_eq!(raceset(&["oracle", &scatter, &path("instances/spmv_loose.inst")]).code, 1);
}

#[test]
fn dependence_mode_lists_relations() {
    let out = raceset(&["check", &path("polyp.model"), "--mode", "dep"]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.contains("RaW S -> T on C"));
    assert!(out.stdout.contains("S[k] -> T[k, k]"), "{}", out.stdout);
}

#[test]
fn emit_matches_golden() {
    for name in ["polyp", "gespmm_alg2"] {
        let out = raceset(&["emit-iscc", &path(&format!("{name}.model"))]);
        assert_eq!(out.code, 0);
        assert_eq!(out.stdout, fixture(&format!("golden/{name}.iscc")));
    }
}

/// Points of `s` in a small box with the parameters in `params`.
fn points(s: &IntSet, params: &[(&str, i64)]) -> Vec<Vec<i64>> {
    let p = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    enumerate_set(s, &p, EnumBox::radius(6)).unwrap()
}

#[test]
fn dump_model_round_trips() {
    let cases: [(&str, &[&str], &[(&str, i64)]); 3] = [
        ("polyp.model", &[], &[("n", 4)]),
        ("gespmm_alg2.model", &[], &[("M", 3), ("N", 2), ("K", 4), ("A_S", 5), ("griddim_x", 3), ("rs", 1), ("re", 4)]),
        ("spmv_csr.mir", &["--grid", "2/4"], &[("M", 5), ("N", 3), ("nnz", 6), ("rs", 0), ("re", 3)]),
    ];
    for (file, extra, params) in cases {
        let p = path(file);
        let mut args = vec!["dump-model", p.as_str()];
        args.extend_from_slice(extra);
        let out = raceset(&args);
        assert_eq!(out.code, 0, "{}", out.stderr);
        let first = parse_model(&out.stdout).unwrap_or_else(|e| panic!("{file}: {e}\n{}", out.stdout));

        // dump the dump: stable text, same statement sets
        let dir = tempfile::tempdir().unwrap();
        let again = dir.path().join("again.model");
        std::fs::write(&again, &out.stdout).unwrap();
        let out2 = raceset(&["dump-model", again.to_str().unwrap()]);
        assert_eq!(out2.stdout, out.stdout, "{file}: dump is not a fixed point");
        let second = parse_model(&out2.stdout).unwrap();
        for (a, b) in first.statements.iter().zip(&second.statements) {
            assert_eq!(a.label, b.label);
            assert_eq!(points(&a.domain, params), points(&b.domain, params), "{file}: {}", a.label);
        }
        if file.ends_with(".model") {
            let orig = parse_model(&fixture(file)).unwrap();
            for (a, b) in orig.statements.iter().zip(&first.statements) {
                let pa = points(&a.domain, params);
                assert!(!pa.is_empty(), "{file}: {} has no points", a.label);
                assert_eq!(pa, points(&b.domain, params), "{file}: {}", a.label);
            }
        }
    }
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_raceset");
    let st = Command::new(bin).args(["check", &path("gespmm_nobarrier.model")]).status().unwrap();
    assert_eq!(st.code(), Some(1));
    let st = Command::new(bin).args(["check", &path("gespmm_alg2.mir")]).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let st = Command::new(bin).args(["check", "--bogus"]).output().unwrap();
    assert_eq!(st.status.code(), Some(3));
}
