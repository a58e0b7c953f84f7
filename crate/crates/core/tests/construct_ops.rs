use symkit::construct::{exclude_variable, is_conservation_form, systems_equivalent};
use symkit::expr::{parse_rf, Name, Rf};
use symkit::jet::{JetSpace, PdeSystem};

fn r(s: &str) -> Rf {
    parse_rf(s).unwrap()
}

fn sys(indep: &[&str], deps: &[&str], eqs: &[&str]) -> PdeSystem {
    PdeSystem::new(
        JetSpace::new(indep, deps),
        eqs.iter().map(|e| r(e)).collect(),
    )
}

#[test]
fn equivalence_ignores_order_sign_and_factors() {
    let a = sys(&["u", "t"], &["x"], &["x_t - (x_uu - Q(u)*x_u^3)/x_u^2"]);
    let b = sys(&["u", "t"], &["x"], &["x_u^2*x_t - x_uu + Q(u)*x_u^3"]);
    assert!(systems_equivalent(&a, &b));

    let heat = sys(&["x", "t"], &["u"], &["u_t - u_xx"]);
    let backward = sys(&["x", "t"], &["u"], &["u_t + u_xx"]);
    assert!(!systems_equivalent(&heat, &backward));

    let a = sys(&["x", "t"], &["a", "b"], &["a_x - b_t", "a - F(x)"]);
    let b = sys(&["x", "t"], &["a", "b"], &["F(x) - a", "b_t - a_x"]);
    assert!(systems_equivalent(&a, &b));
}

#[test]
fn divergence_forms_are_recovered() {
    let space = JetSpace::new(&["u", "t"], &["v"]);
    let flux = r("(v_u - Q(u)*v^3)/v^2");
    let eq = &r("v_t") - &space.total_derivative(&flux, &Name::new("u"));
    let cl = is_conservation_form(&eq, &space).expect("divergence form");
    assert_eq!(cl.divergence(&space), eq);
    assert_eq!(cl.density, r("v"));

    let space = JetSpace::new(&["X", "T"], &["p"]);
    let eq = r("p_T - p_XX - 2*exp(T)*p*p_X");
    let cl = is_conservation_form(&eq, &space).expect("divergence form");
    assert_eq!(cl.divergence(&space), eq);
}

#[test]
fn quadratic_source_is_not_a_divergence() {
    let space = JetSpace::new(&["x", "t"], &["u"]);
    assert!(is_conservation_form(&r("u_t - u_xx - u^2"), &space).is_none());
}

#[test]
fn excluding_the_potential_cross_differentiates() {
    let potential = sys(&["x", "t"], &["u", "v"], &["v_x - u", "v_t - K(u)*u_x"]);
    let out = exclude_variable(&potential, &Name::new("v")).unwrap();
    assert!(out.nonlocal);
    let want = sys(&["x", "t"], &["u"], &["u_t - K'(u)*u_x^2 - K(u)*u_xx"]);
    assert!(systems_equivalent(&out.system, &want), "{:?}", out.system);
}

#[test]
fn excluding_a_solved_variable_substitutes() {
    let potential = sys(&["x", "t"], &["u", "v"], &["v_x - u", "v_t - K(u)*u_x"]);
    let out = exclude_variable(&potential, &Name::new("u")).unwrap();
    assert!(!out.nonlocal);
    let want = sys(&["x", "t"], &["v"], &["v_t - K(v_x)*v_xx"]);
    assert!(systems_equivalent(&out.system, &want), "{:?}", out.system);
}
