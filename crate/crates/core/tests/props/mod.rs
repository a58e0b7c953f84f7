//! Randomized invariants shared by the `properties` test target and the
//! acceptance run. Every suite uses a fixed seed and at least 200 cases.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use symkit::construct::systems_equivalent;
use symkit::dsl::parse_document;
use symkit::expr::{normalize, parse, parse_rf, q, qf, Name, Rf, Symbol, Q};
use symkit::jet::{JetSpace, PdeSystem};
use symkit::transform::{change_variables, PointTransformation};
use symkit::vfield::{is_symmetry, prolong, SymmetryVerdict, VectorField};

pub const CASES: u32 = 256;
const SEED: [u8; 32] = *b"symmetry-invariants-fixed-seed-1";

pub fn runner() -> TestRunner {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &SEED))
}

fn space() -> JetSpace {
    JetSpace::new(&["x", "t"], &["u"])
}

fn name(s: &str) -> Name {
    Name::new(s)
}

fn leaf(jets: bool) -> BoxedStrategy<String> {
    let mut names = vec!["x", "t", "u", "u_x"];
    if jets {
        names.extend(["u_t", "u_xx", "u_xt", "K(u)", "K(u_x)"]);
    }
    prop_oneof![
        proptest::sample::select(names).prop_map(String::from),
        (-3i64..=3).prop_map(|n| format!("({n})")),
        (1i64..=4, 2i64..=5).prop_map(|(n, d)| format!("({n}/{d})")),
    ]
    .boxed()
}

/// Random expression text over `x, t, u` and low-order jets.
pub fn expr_text(jets: bool, depth: u32) -> BoxedStrategy<String> {
    leaf(jets)
        .prop_recursive(depth, 16, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/(1 + ({b})^2)")),
                inner.clone().prop_map(|a| format!("({a})^3")),
                inner.clone().prop_map(|a| format!("exp({a})")),
                inner.clone().prop_map(|a| format!("arctan({a})")),
                inner.clone().prop_map(|a| format!("ln(1 + ({a})^2)")),
            ]
        })
        .boxed()
}

fn rf(text: &str) -> Result<Rf, TestCaseError> {
    parse_rf(text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))
}

fn run<S: Strategy>(
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

/// `D_x D_t e = D_t D_x e`.
pub fn total_derivatives_commute() -> Result<(), String> {
    let sp = space();
    run(expr_text(true, 3), |s| {
        let e = rf(&s)?;
        let xt = sp.total_derivative(&sp.total_derivative(&e, &name("t")), &name("x"));
        let tx = sp.total_derivative(&sp.total_derivative(&e, &name("x")), &name("t"));
        prop_assert_eq!(xt, tx, "for {}", s);
        Ok(())
    })
}

/// `D_x(f g) = D_x f · g + f · D_x g`.
pub fn leibniz_rule() -> Result<(), String> {
    let sp = space();
    run((expr_text(true, 2), expr_text(true, 2)), |(a, b)| {
        let (f, g) = (rf(&a)?, rf(&b)?);
        let x = name("x");
        let lhs = sp.total_derivative(&(&f * &g), &x);
        let rhs = &(&sp.total_derivative(&f, &x) * &g) + &(&f * &sp.total_derivative(&g, &x));
        prop_assert_eq!(lhs, rhs, "for {} and {}", a, b);
        Ok(())
    })
}

pub fn normalize_is_idempotent() -> Result<(), String> {
    run(expr_text(true, 3), |s| {
        let e = parse(&s).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let once = normalize(&e).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let twice = normalize(&once).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(once, twice, "for {}", s);
        Ok(())
    })
}

pub fn print_parse_round_trip() -> Result<(), String> {
    run(expr_text(true, 3), |s| {
        let e = rf(&s)?;
        let printed = e.to_string();
        let back = rf(&printed)?;
        prop_assert_eq!(&back, &e, "printed as {}", printed);
        Ok(())
    })
}

fn poly_text(monos: &'static [&'static str]) -> BoxedStrategy<String> {
    proptest::collection::vec(-2i64..=2, monos.len())
        .prop_map(move |cs| {
            let terms: Vec<String> = cs
                .iter()
                .zip(monos)
                .filter(|(c, _)| **c != 0)
                .map(|(c, m)| format!("({c})*{m}"))
                .collect();
            if terms.is_empty() {
                "0".into()
            } else {
                terms.join(" + ")
            }
        })
        .boxed()
}

fn at(e: &Rf, b: &BTreeMap<Symbol, Rf>) -> Result<Q, TestCaseError> {
    e.subs(b)
        .ok()
        .and_then(|v| v.as_constant())
        .ok_or_else(|| TestCaseError::reject("singular evaluation point"))
}

fn to_f64(v: &Q) -> f64 {
    use num_traits::ToPrimitive;
    v.to_f64().unwrap_or(f64::NAN)
}

/// Moves the graph of `u = f(x, t)` along the field for time `eps` (to first
/// order in the map) and compares the image's slopes with the first
/// prolongation. Correct prolongation leaves an `O(eps²)` discrepancy, so
/// halving `eps` divides it by about four.
pub fn prolongation_matches_flow() -> Result<(), String> {
    const FIELD: &[&str] = &["1", "x", "t", "u", "x*u", "u^2", "x*t"];
    const GRAPH: &[&str] = &["1", "x", "t", "x^2", "x*t", "t^2", "x^3"];
    let strategy = (
        poly_text(FIELD),
        poly_text(FIELD),
        poly_text(FIELD),
        poly_text(GRAPH),
        (-3i64..=3, 1i64..=3),
        (-3i64..=3, 1i64..=3),
    );
    let sp = space();
    run(strategy, |(xi, tau, eta, f, (xn, xd), (tn, td))| {
        let (xi, tau, eta, f) = (rf(&xi)?, rf(&tau)?, rf(&eta)?, rf(&f)?);
        let v = VectorField::new("V")
            .with_xi("x", xi.clone())
            .with_xi("t", tau.clone())
            .with_eta("u", eta.clone());
        let p = prolong(&v, 1, &sp);
        let (sx, st, su) = (Symbol::var("x"), Symbol::var("t"), Symbol::var("u"));
        let (ux, ut) = (
            Symbol::jet(&name("u"), [name("x")]),
            Symbol::jet(&name("u"), [name("t")]),
        );
        let (fx, ft) = (f.diff(&sx), f.diff(&st));
        let on_graph = BTreeMap::from([
            (su.clone(), f.clone()),
            (ux.clone(), fx.clone()),
            (ut.clone(), ft.clone()),
        ]);
        let point = BTreeMap::from([
            (sx.clone(), Rf::from(qf(xn, xd))),
            (st.clone(), Rf::from(qf(tn, td))),
        ]);
        let graph = |e: &Rf| e.subs(&on_graph).map_err(|e| TestCaseError::fail(e.to_string()));
        let (xi_g, tau_g, eta_g) = (graph(&xi)?, graph(&tau)?, graph(&eta)?);
        let eta_x = at(&graph(&p.eta_jet(&ux))?, &point)?;
        let eta_t = at(&graph(&p.eta_jet(&ut))?, &point)?;
        let (fx0, ft0) = (at(&fx, &point)?, at(&ft, &point)?);
        let errors = |eps: &Q| -> Result<(Q, Q), TestCaseError> {
            let e = Rf::from(eps.clone());
            let big_x = &Rf::var("x") + &(&e * &xi_g);
            let big_t = &Rf::var("t") + &(&e * &tau_g);
            let big_u = &f + &(&e * &eta_g);
            let d = |g: &Rf, s: &Symbol| at(&g.diff(s), &point);
            let (xx, xt) = (d(&big_x, &sx)?, d(&big_x, &st)?);
            let (tx, tt) = (d(&big_t, &sx)?, d(&big_t, &st)?);
            let (uxv, utv) = (d(&big_u, &sx)?, d(&big_u, &st)?);
            let jac = &xx * &tt - &xt * &tx;
            if jac == q(0) {
                return Err(TestCaseError::reject("degenerate image"));
            }
            let slope_x = (&uxv * &tt - &utv * &tx) / &jac;
            let slope_t = (&utv * &xx - &uxv * &xt) / &jac;
            let ex = slope_x - (&fx0 + eps * &eta_x);
            let et = slope_t - (&ft0 + eps * &eta_t);
            Ok((ex, et))
        };
        let eps = qf(1, 100_000_000);
        let (ex1, et1) = errors(&eps)?;
        let (ex2, et2) = errors(&(&eps / q(2)))?;
        for (e1, e2, which) in [(ex1, ex2, "u_x"), (et1, et2, "u_t")] {
            if e1 == q(0) && e2 == q(0) {
                continue;
            }
            let ratio = to_f64(&e1).abs() / to_f64(&e2).abs();
            prop_assert!(ratio > 3.5, "{} discrepancy shrinks by {} only", which, ratio);
        }
        Ok(())
    })
}

/// A random invertible affine map and its inverse on `(x, t; u)`.
fn affine_map(a: i64, b: i64, c: Q, d: i64, e: i64) -> PointTransformation {
    let sp = space();
    let c_txt = format!("({}/{})", c.numer(), c.denom());
    let fwd = [
        ("X", format!("x + ({a})*t")),
        ("T", format!("t + ({b})")),
        ("U", format!("{c_txt}*u + ({d})*x + ({e})*t")),
    ];
    let inv = [
        ("x", format!("X - ({a})*(T - ({b}))")),
        ("t", format!("T - ({b})")),
        (
            "u",
            format!("(U - ({d})*(X - ({a})*(T - ({b}))) - ({e})*(T - ({b})))/{c_txt}"),
        ),
    ];
    let pair = |(k, v): &(&str, String)| (name(k), parse_rf(v).expect("affine map parses"));
    PointTransformation::new(
        "affine",
        &sp,
        fwd.iter().map(pair).collect(),
        inv.iter().map(pair).collect(),
    )
    .expect("affine map is well formed")
}

pub fn change_variables_round_trip() -> Result<(), String> {
    let strategy = (
        expr_text(false, 2),
        (-2i64..=2, -2i64..=2, -2i64..=2, -2i64..=2),
        proptest::sample::select(vec![(1, 1), (2, 1), (-1, 1), (1, 2), (-3, 2)]),
    );
    run(strategy, |(g, (a, b, d, e), (cn, cd))| {
        let eq = rf(&format!("u_t - u_xx - ({g})"))?;
        let sys = PdeSystem::new(space(), vec![eq]);
        let tr = affine_map(a, b, qf(cn, cd), d, e);
        let fail = |e: symkit::Error| TestCaseError::fail(e.to_string());
        let there = change_variables(&sys, &tr).map_err(fail)?;
        let back = change_variables(&there, &tr.inverse()).map_err(fail)?;
        prop_assert!(
            systems_equivalent(&back, &sys),
            "u_t = u_xx + {} does not survive the round trip",
            g
        );
        Ok(())
    })
}

struct Transport {
    gens: Vec<VectorField>,
    map: PointTransformation,
    image: PdeSystem,
}

const TRANSPORT_CASES: &[(&str, &str, &str)] = &[
    (
        "rd_cubic",
        include_str!("../../../cli/corpus/tables/rd_cubic.sys"),
        "scale",
    ),
    (
        "rd_exponential",
        include_str!("../../../cli/corpus/tables/rd_exponential.sys"),
        "scale",
    ),
    (
        "rd_logarithmic",
        include_str!("../../../cli/corpus/tables/rd_logarithmic.sys"),
        "gauss",
    ),
    (
        "vx_diffusion",
        include_str!("../../../cli/corpus/tables/vx_diffusion.sys"),
        "scale",
    ),
    (
        "wave_potential",
        include_str!("../../../cli/corpus/golden/wave_potential.sys"),
        "rho",
    ),
];

fn transports() -> &'static [Transport] {
    static CELL: OnceLock<Vec<Transport>> = OnceLock::new();
    CELL.get_or_init(|| {
        TRANSPORT_CASES
            .iter()
            .map(|(stem, text, map)| {
                let doc = parse_document(text, stem).expect("corpus document parses");
                let map = doc.map(map).expect("corpus map exists");
                let image = change_variables(&doc.system, &map).expect("corpus map applies");
                let gens = doc
                    .gens
                    .iter()
                    .filter(|g| is_symmetry(&doc.system, g) == SymmetryVerdict::Yes)
                    .cloned()
                    .collect();
                Transport { gens, map, image }
            })
            .collect()
    })
}

/// Pushing a symmetry forward through a corpus map gives a symmetry of the
/// mapped system.
pub fn symmetries_transport() -> Result<(), String> {
    let strategy = (
        0..TRANSPORT_CASES.len(),
        proptest::collection::vec(-3i64..=3, 4),
    );
    run(strategy, |(k, coeffs)| {
        let case = &transports()[k];
        let mut v = VectorField::new("V");
        for (g, c) in case.gens.iter().zip(&coeffs) {
            v = v.add(&g.scale(&Rf::from(q(*c))));
        }
        prop_assume!(!v.is_zero());
        let w = case
            .map
            .push_forward(&v)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(
            is_symmetry(&case.image, &w),
            SymmetryVerdict::Yes,
            "{} pushed through {}",
            v.to_dsl(),
            case.map.name
        );
        Ok(())
    })
}

pub type Suite = fn() -> Result<(), String>;

/// Every suite by name, in a fixed order.
#[allow(dead_code)] // only the acceptance runner iterates the suites
pub fn all() -> Vec<(&'static str, Suite)> {
    vec![
        ("total derivatives commute", total_derivatives_commute),
        ("Leibniz rule", leibniz_rule),
        ("normalize is idempotent", normalize_is_idempotent),
        ("print/parse round trip", print_parse_round_trip),
        ("prolongation matches the flow", prolongation_matches_flow),
        ("change of variables round trip", change_variables_round_trip),
        ("symmetries transport", symmetries_transport),
    ]
}
