use std::path::PathBuf;

use serde_json::Value;
use symkit_cli::{corpus_root, run_args, Report, EXIT_FAILED, EXIT_INPUT, EXIT_OK};

fn table(stem: &str) -> String {
    corpus_root()
        .join("tables")
        .join(format!("{stem}.sys"))
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Report {
    run_args(std::iter::once("symkit").chain(args.iter().copied()))
}

fn scratch(name: &str, text: &str) -> String {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn check_reports_symmetry() {
    let r = run(&["check", &table("rd_cubic"), "--gen", "X3"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(r.stdout.trim(), "symmetry: yes");
}

#[test]
fn check_rejects_non_symmetry() {
    let file = scratch(
        "not_a_symmetry.sys",
        "indep x t\ndep u\neq u_t - u_xx = u^3\ngen B: eta_u = 1\n",
    );
    let r = run(&["check", &file, "--gen", "B"]);
    assert_eq!(r.code, EXIT_FAILED);
    assert!(r.stdout.contains("symmetry: no"), "{}", r.stdout);
}

#[test]
fn input_errors_exit_two() {
    let missing = run(&["check", "/nonexistent/system.sys"]);
    assert_eq!(missing.code, EXIT_INPUT);
    assert!(missing.stderr.starts_with("error:"));

    let broken = scratch("broken.sys", "indep x t\ndep u\neq u_t - * = 0\n");
    assert_eq!(run(&["check", &broken]).code, EXIT_INPUT);

    assert_eq!(run(&["check", &table("rd_cubic"), "--gen", "X9"]).code, EXIT_INPUT);
    assert_eq!(run(&["frobnicate"]).code, EXIT_INPUT);
    assert_eq!(run(&["check", &table("rd_cubic"), "--json", "--latex"]).code, EXIT_INPUT);
}

#[test]
fn json_reports_are_versioned() {
    let r = run(&["check", &table("rd_cubic"), "--json"]);
    assert_eq!(r.code, EXIT_OK);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["symmetries"].as_array().unwrap().len(), 3);
}

#[test]
fn find_accepts_comma_separated_atoms() {
    let r = run(&["find", &table("rd_cubic"), "--degree", "1", "--atoms", "e^t,u^(1/3)"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.starts_with("# 3 point symmetries"), "{}", r.stdout);
}

#[test]
fn ips_renders_latex() {
    let r = run(&["ips", &table("rd_cubic"), "--sym", "X3", "--map", "scale", "--latex"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.starts_with("\\begin{aligned}"), "{}", r.stdout);
    assert_eq!(r.stdout.matches("=0").count(), 2);
    assert!(r.stdout.contains("\\beta_{T}"));
}

#[test]
fn reports_are_deterministic() {
    for args in [
        vec!["find", &table("rd_logarithmic")[..]],
        vec!["ips", &table("rd_cubic")[..], "--sym", "X3", "--map", "scale"],
        vec!["check", &table("wave_power")[..], "--json"],
    ] {
        let (a, b) = (run(&args), run(&args));
        assert_eq!(a.code, b.code);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn verify_corpus_subset() {
    let dir = corpus_root().join("trees").display().to_string();
    let r = run(&["verify-corpus", &dir]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stdout);
    assert!(r.stdout.contains("0 failed"), "{}", r.stdout);
}
