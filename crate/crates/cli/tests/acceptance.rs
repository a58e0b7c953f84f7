//! One pass/fail line per acceptance criterion, driven by the bundled corpus.
//! Runs without the libtest harness so the report is always printed:
//! `cargo test -p symkit-cli --test acceptance`.

#[path = "../../core/tests/props/mod.rs"]
mod props;

use std::collections::BTreeSet;

use symkit::dsl::parse_document;
use symkit_cli::corpus::{Corpus, Outcome};
use symkit_cli::corpus_root;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(failures: Vec<String>, checked: usize) -> Verdict {
    if failures.is_empty() {
        Verdict {
            pass: checked > 0,
            detail: format!("{checked} checks"),
        }
    } else {
        Verdict {
            pass: false,
            detail: failures.join("; "),
        }
    }
}

fn line(o: &Outcome) -> String {
    format!("{} :: {} :: {}", o.file, o.check, o.detail)
}

/// Outcomes of `files` whose check starts with one of `prefixes`, plus every
/// `(file, prefix)` in `required` that has no outcome at all.
fn judge(
    outcomes: &[Outcome],
    files: &BTreeSet<String>,
    prefixes: &[&str],
    required: &[(&str, &str)],
) -> Verdict {
    let picked: Vec<&Outcome> = outcomes
        .iter()
        .filter(|o| files.contains(&o.file) && prefixes.iter().any(|p| o.check.starts_with(p)))
        .collect();
    let mut failures: Vec<String> = picked.iter().filter(|o| !o.pass).map(|o| line(o)).collect();
    for (file, check) in required {
        let hit = picked
            .iter()
            .any(|o| o.file == *file && o.check.starts_with(check));
        if !hit {
            failures.push(format!("{file} :: {check} :: missing"));
        }
    }
    verdict(failures, picked.len())
}

fn stems(c: &Corpus, sub: &str) -> BTreeSet<String> {
    c.stems(Some(sub)).into_iter().collect()
}

/// A golden with one equation altered must fail and print a diff.
fn corrupted_golden_is_caught(c: &Corpus) -> Result<(), String> {
    let path = c.root.join("golden/rd_x_ips.sys");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let bad = text.replacen("eq w = ", "eq w = t + ", 1);
    if bad == text {
        return Err("could not alter rd_x_ips".into());
    }
    let doc = parse_document(&bad, "rd_x_ips").map_err(|e| e.to_string())?;
    let recipes: Vec<Outcome> = c
        .verify_document("rd_x_ips", &doc)
        .into_iter()
        .filter(|o| o.check.starts_with("recipe"))
        .collect();
    let caught = !recipes.is_empty()
        && recipes.iter().all(|o| {
            !o.pass && o.detail.contains("\n  - ") && o.detail.contains("\n  + ")
        });
    if caught {
        Ok(())
    } else {
        Err(format!("altered golden was not reported: {recipes:?}"))
    }
}

fn main() {
    let corpus = Corpus::load(&corpus_root()).expect("corpus loads");
    let outcomes = corpus.verify(None);
    let (tables, golden, trees) = (
        stems(&corpus, "tables"),
        stems(&corpus, "golden"),
        stems(&corpus, "trees"),
    );
    let everything: BTreeSet<String> = tables.union(&golden).cloned().collect();

    let mut report: Vec<(&str, Verdict)> = Vec::new();

    report.push((
        "1 listed generators are symmetries",
        judge(&outcomes, &tables, &["symmetry "], &[
            ("rd_power", "symmetry X3"),
            ("pd_system_inverse_square", "symmetry Yinf3"),
            ("nd_minus_four_thirds", "symmetry X6"),
            ("ipd_inverse_square", "symmetry Vinf3"),
            ("hpd_arctan", "symmetry W5"),
            ("wave_minus_two_thirds", "symmetry X7"),
            ("usub_minus_two_thirds", "symmetry W7"),
        ]),
    ));

    report.push((
        "2 symmetry dimensions and spans",
        judge(&outcomes, &tables, &["count", "span"], &[
            ("rd_cubic", "count 3"),
            ("rd_exponential", "count 3"),
            ("rd_logarithmic", "count 4"),
            ("nd_arbitrary", "count 3"),
            ("nd_power", "count 4"),
            ("nd_exponential", "count 4"),
            ("nd_minus_four_thirds", "count 5"),
            ("hpd_arbitrary", "count 2"),
            ("hpd_power", "count 3"),
            ("hpd_exponential", "count 3"),
            ("hpd_arctan", "count 3"),
            ("hpd_inverse_square", "count 4"),
            ("wave_arbitrary", "count 3"),
            ("wave_power", "count 4"),
            ("wave_exponential", "count 4"),
            ("wave_inverse_square", "count 5"),
            ("wave_minus_two_thirds", "count 5"),
            ("pd_system_inverse_square", "span"),
            ("ipd_inverse_square", "span"),
            ("usub_power", "count 4"),
            ("usub_minus_two_thirds", "count 5"),
        ]),
    ));

    let mut golden_verdict = judge(&outcomes, &golden, &["recipe"], &[
        ("rd_x_hodograph", "recipe"),
        ("rd_x_ips", "recipe"),
        ("rd_t_ips", "recipe"),
        ("rd_cubic_ips", "recipe"),
        ("rd_exponential_ips", "recipe"),
        ("rd_logarithmic_ips", "recipe"),
        ("rd_logarithmic_gauss_ips", "recipe"),
        ("pd_x_ips", "recipe"),
        ("pd_t_ips", "recipe"),
        ("pd_scaled_ips", "recipe"),
        ("pd_v_ips", "recipe"),
        ("nd_x_ips", "recipe"),
        ("wave_rho_ips", "recipe"),
        ("rd_x_ips_reduced", "recipe"),
        ("rd_logarithmic_ips_reduced", "recipe"),
        ("rd_logarithmic_gauss_ips_reduced", "recipe"),
        ("pd_x_ips_reduced", "recipe"),
        ("pd_v_ips_reduced", "recipe"),
        ("nd_x_ips_reduced", "recipe"),
        ("wave_rho_reduced", "recipe"),
        ("wave_linear", "recipe"),
    ]);
    if let Err(e) = corrupted_golden_is_caught(&corpus) {
        golden_verdict.pass = false;
        golden_verdict.detail.push_str(&format!("; {e}"));
    }
    report.push(("3 golden constructions", golden_verdict));

    report.push((
        "4 canonical coordinates",
        judge(&outcomes, &everything, &["canonical"], &[
            ("rd_cubic", "canonical X3 scale"),
            ("rd_exponential", "canonical X4 scale"),
            ("rd_logarithmic", "canonical X5 shift"),
            ("rd_logarithmic", "canonical X6 gauss"),
            ("vx_diffusion", "canonical Y3 scale"),
            ("wave_potential", "canonical Y1 rho"),
            ("rd_arbitrary", "canonical_for X1"),
        ]),
    ));

    report.push((
        "5 nonlocal versus local symmetries",
        judge(&outcomes, &everything, &["classify"], &[
            ("nd_minus_four_thirds", "classify X6"),
            ("usub_inverse_square", "classify W6"),
            ("usub_minus_two_thirds", "classify W7"),
            ("wave_potential", "classify W3lift"),
            ("usub_power", "classify W4"),
            ("usub_exponential", "classify W5"),
        ]),
    ));

    report.push((
        "6 no low-order conservation laws",
        judge(&outcomes, &tables, &["multipliers"], &[("rd_arbitrary", "multipliers 0")]),
    ));

    let failures: Vec<String> = props::all()
        .into_iter()
        .filter_map(|(name, suite)| suite().err().map(|e| format!("{name}: {e}")))
        .collect();
    report.push((
        "7 randomized invariants",
        Verdict {
            pass: failures.is_empty(),
            detail: if failures.is_empty() {
                format!("{} suites x {} cases", props::all().len(), props::CASES)
            } else {
                failures.join("; ")
            },
        },
    ));

    report.push((
        "8 tree shapes",
        judge(&outcomes, &trees, &["tree shape"], &[
            ("rd_arbitrary_tree", "tree shape"),
            ("rd_cubic_tree", "tree shape"),
            ("rd_exponential_tree", "tree shape"),
            ("rd_logarithmic_tree", "tree shape"),
            ("pd_tree", "tree shape"),
        ]),
    ));

    for (name, v) in &report {
        println!("{} criterion {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed = report.iter().filter(|(_, v)| !v.pass).count();
    println!("{} of {} criteria passed", report.len() - failed, report.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
