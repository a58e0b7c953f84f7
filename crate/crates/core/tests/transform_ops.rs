use symkit::expr::{parse_rf, Name, Rf};
use symkit::jet::{clear_equation, JetSpace, PdeSystem};
use symkit::transform::{
    canonical_for, change_variables, hodograph, verify_canonical, PointTransformation,
};
use symkit::vfield::VectorField;

fn r(s: &str) -> Rf {
    parse_rf(s).unwrap()
}

fn sys(indep: &[&str], deps: &[&str], eqs: &[&str]) -> PdeSystem {
    PdeSystem::new(
        JetSpace::new(indep, deps),
        eqs.iter().map(|e| r(e)).collect(),
    )
}

fn map(old: &JetSpace, fwd: &[(&str, &str)], inv: &[(&str, &str)]) -> PointTransformation {
    let f = fwd.iter().map(|(n, e)| (Name::new(n), r(e))).collect();
    let i = inv.iter().map(|(n, e)| (Name::new(n), r(e))).collect();
    let t = PointTransformation::new("m", old, f, i).unwrap();
    t.check_inverse().unwrap();
    t
}

fn assert_same_eq(got: &Rf, want: &str) {
    let w = clear_equation(&r(want));
    assert_eq!(clear_equation(got), w, "\n got: {got}\nwant: {w}");
}

fn rd(q: &str) -> PdeSystem {
    sys(&["x", "t"], &["u"], &[&format!("u_t - u_xx - ({q})")])
}

#[test]
fn hodograph_in_x_gives_solved_x_t() {
    let h = hodograph(&rd("Q(u)"), &[(Name::new("x"), Name::new("u"))]).unwrap();
    assert_eq!(h.space, JetSpace::new(&["u", "t"], &["x"]));
    assert_same_eq(&h.equations[0], "x_t - (x_uu - Q(u)*x_u^3)/x_u^2");
}

#[test]
fn hodograph_in_t_gives_implicit_form() {
    let h = hodograph(&rd("Q(u)"), &[(Name::new("t"), Name::new("u"))]).unwrap();
    assert_same_eq(
        &h.equations[0],
        "t_u^2 - Q(u)*t_u^3 + t_u^2*t_xx - 2*t_x*t_u*t_ux + t_x^2*t_uu",
    );
}

#[test]
fn cubic_reaction_in_scaling_coordinates() {
    let s = rd("u^3");
    let t = map(
        &s.space,
        &[("X", "x*u"), ("T", "t/x^2"), ("U", "-ln(x)")],
        &[("x", "exp(-U)"), ("t", "T*exp(-2*U)"), ("u", "X*exp(U)")],
    );
    let out = change_variables(&s, &t).unwrap();
    assert_same_eq(
        &out.equations[0],
        "-3*U_X^2 - 2*X*U_X^3 - X^3*U_X^3 - U_X^2*U_T + 10*T*U_X^2*U_T + U_XX - 4*T*U_T*U_XX \
         + 4*T^2*U_T^2*U_XX + 4*T^2*U_X^2*U_TT + 4*T*U_X*U_TX - 8*T^2*U_X*U_T*U_TX",
    );
}

#[test]
fn exponential_reaction_in_scaling_coordinates() {
    let s = rd("exp(u)");
    let t = map(
        &s.space,
        &[("X", "u + 2*ln(x)"), ("T", "t/x^2"), ("U", "-2*ln(x)")],
        &[("x", "exp(-U/2)"), ("t", "T*exp(-U)"), ("u", "X + U")],
    );
    let out = change_variables(&s, &t).unwrap();
    assert_same_eq(
        &out.equations[0],
        "-2*U_X^2 - 2*U_X^3 - exp(X)*U_X^3 - U_X^2*U_T + 6*T*U_X^2*U_T + 4*U_XX - 8*T*U_T*U_XX \
         + 4*T^2*U_T^2*U_XX + 4*T^2*U_X^2*U_TT + 8*T*U_X*U_TX - 8*T^2*U_X*U_T*U_TX",
    );
}

#[test]
fn logarithmic_reaction_coordinates() {
    let s = rd("u*ln(u)");
    let t = map(
        &s.space,
        &[("X", "x"), ("T", "t"), ("U", "exp(-t)*ln(u)")],
        &[("x", "X"), ("t", "T"), ("u", "exp(U*exp(T))")],
    );
    let out = change_variables(&s, &t).unwrap();
    assert_same_eq(&out.equations[0], "U_T - U_XX - exp(T)*U_X^2");

    let t2 = map(
        &s.space,
        &[("X", "exp(x^2/4)*u"), ("T", "t"), ("U", "exp(-t)*x/2")],
        &[
            ("x", "2*U*exp(T)"),
            ("t", "T"),
            ("u", "X*exp(-U^2*exp(2*T))"),
        ],
    );
    let out = change_variables(&s, &t2).unwrap();
    assert_same_eq(
        &out.equations[0],
        "U_T - (exp(-2*T)*U_XX + 2*X*U_X^3 - 4*X*ln(X)*U_X^3)/(4*U_X^2)",
    );
}

#[test]
fn wave_potential_system_under_rho() {
    let s = sys(&["x", "t"], &["u", "v"], &["v_x - u_t", "v_t - c(u)^2*u_x"]);
    let t = map(
        &s.space,
        &[("X", "x"), ("T", "u"), ("U", "t + v"), ("V", "v")],
        &[("x", "X"), ("t", "U - V"), ("u", "T"), ("v", "V")],
    );
    let dt = VectorField::new("Y1").with_xi("t", r("1"));
    assert!(verify_canonical(&dt, &t, &Name::new("U")));
    let mixed = VectorField::new("Y")
        .with_eta("v", r("1"))
        .with_xi("t", r("-1"));
    assert!(verify_canonical(&mixed, &t, &Name::new("V")));
    assert!(!verify_canonical(&mixed, &t, &Name::new("U")));
    let out = change_variables(&s, &t).unwrap();
    let eqs: Vec<Rf> = out.equations.iter().map(clear_equation).collect();
    let a = clear_equation(&r("V_X*U_T - V_T*U_X - 1"));
    let b = clear_equation(&r("V_T + c(T)^2*U_X - c(T)^2*V_X"));
    assert_eq!(eqs.len(), 2);
    assert!(eqs.contains(&a) && eqs.contains(&b), "{eqs:?}");
}

#[test]
fn canonical_coordinates_from_heuristics() {
    let space = JetSpace::new(&["x", "t"], &["u"]);
    let x4 = VectorField::new("X4")
        .with_eta("u", r("1"))
        .with_xi("t", r("-t"))
        .with_xi("x", r("-x/2"));
    let (t, u) = canonical_for(&x4, &space).unwrap();
    assert_eq!(u, Name::new("U"));
    assert_eq!(t.forward_of(&Name::new("X")).unwrap(), &r("u + 2*ln(x)"));
    assert_eq!(t.forward_of(&Name::new("T")).unwrap(), &r("t/x^2"));
    assert_eq!(t.forward_of(&Name::new("U")).unwrap(), &r("-2*ln(x)"));

    let x5 = VectorField::new("X5").with_eta("u", r("u*exp(t)"));
    let (t, _) = canonical_for(&x5, &space).unwrap();
    assert_eq!(t.forward_of(&Name::new("U")).unwrap(), &r("exp(-t)*ln(u)"));
    assert_eq!(t.forward_of(&Name::new("X")).unwrap(), &r("x"));

    let x3 = VectorField::new("X3")
        .with_eta("u", r("u"))
        .with_xi("t", r("-2*t"))
        .with_xi("x", r("-x"));
    let (t, _) = canonical_for(&x3, &space).unwrap();
    assert_eq!(t.forward_of(&Name::new("X")).unwrap(), &r("x*u"));
    assert_eq!(t.forward_of(&Name::new("U")).unwrap(), &r("-ln(x)"));

    let dx = VectorField::new("X1").with_xi("x", r("1"));
    let (t, u) = canonical_for(&dx, &space).unwrap();
    assert!(verify_canonical(&dx, &t, &u));
}
