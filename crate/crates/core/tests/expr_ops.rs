use std::collections::BTreeMap;

use symkit::expr::{diff, normalize, parse, parse_rf, substitute, Expr, Name, Rf, Symbol};
use symkit::Error;

fn n(s: &str) -> Expr {
    normalize(&parse(s).unwrap()).unwrap()
}

fn same(a: &str, b: &str) {
    let (x, y) = (parse_rf(a).unwrap(), parse_rf(b).unwrap());
    assert!((&x - &y).is_zero(), "{a}  vs  {b}: {x} != {y}");
}

#[test]
fn identities_fold() {
    assert_eq!(n("x + 0"), n("x"));
    assert_eq!(n("u_x*u_x*u_x/u_x").to_string(), "u_x^2");
    assert_eq!(n("0"), Expr::int(0));
}

#[test]
fn scattered_terms_reach_one_normal_form() {
    let parsed = n("(v_u - Q(u)*v^3)/v^2");
    let scattered = n("v_u/v^2 - v*Q(u) + 0*v_u");
    assert_eq!(parsed, scattered);
    assert_eq!(n("1/(x+1) + 1/(x+1)"), n("2/(1+x)"));
}

#[test]
fn partial_derivatives() {
    let v = Symbol::var("v");
    let u = Symbol::var("u");
    assert_eq!(
        diff(&parse("Q(u)*v^3").unwrap(), &v).unwrap(),
        n("3*Q(u)*v^2")
    );
    assert_eq!(diff(&parse("Q(u)").unwrap(), &u).unwrap(), n("Q'(u)"));
}

#[test]
fn arctan_quotient_derivative_at_zero_lambda() {
    let lam = Symbol::var("lambda");
    let u = Symbol::var("u");
    let f = parse_rf("exp(lambda*arctan(u))/(1+u^2)").unwrap();
    let got = f.diff(&u).subs1(&lam, &Rf::zero()).unwrap();
    // quotient rule with numerator 1 and denominator g = 1 + u^2: -g'/g^2
    let g = parse_rf("1 + u^2").unwrap();
    let want = (-&g.diff(&u)).div(&g.powi(2).unwrap()).unwrap();
    assert!((&got - &want).is_zero());
    same(&got.to_string(), "-2*u/(1+u^2)^2");
}

#[test]
fn function_substitution() {
    let e = parse_rf("u_t - u_xx - Q(u)").unwrap();
    let w = Symbol::var("w");
    let body = parse_rf("w^3").unwrap();
    let got = e.subs_func(&Name::new("Q"), &[w], &body).unwrap();
    same(&got.to_string(), "u_t - u_xx - u^3");
    let d = parse_rf("Q''(u)")
        .unwrap()
        .subs_func(&Name::new("Q"), &[Symbol::var("w")], &body)
        .unwrap();
    same(&d.to_string(), "6*u");
}

#[test]
fn symbol_substitution() {
    let mut b = BTreeMap::new();
    b.insert(Symbol::var("x"), Expr::int(0));
    b.insert(Symbol::var("t"), Expr::int(0));
    assert_eq!(
        substitute(&parse("x + t").unwrap(), &b).unwrap(),
        Expr::int(0)
    );
    let mut b = BTreeMap::new();
    b.insert(Symbol::var("alpha"), parse("U_T").unwrap());
    assert_eq!(
        substitute(&parse("alpha*beta").unwrap(), &b).unwrap(),
        n("U_T*beta")
    );
}

#[test]
fn zero_denominator_is_an_error() {
    assert_eq!(parse_rf("1/(x - x)").unwrap_err(), Error::ZeroDenominator);
    let mut b = BTreeMap::new();
    b.insert(Symbol::var("x"), Expr::int(1));
    assert_eq!(
        substitute(&parse("1/(x-1)").unwrap(), &b).unwrap_err(),
        Error::ZeroDenominator
    );
}

#[test]
fn exp_and_ln_cancel_at_construction() {
    same("exp(ln(u))", "u");
    same("ln(exp(x^2))", "x^2");
    same("exp(-ln(x))", "1/x");
    same("ln(x*u)", "ln(x) + ln(u)");
    same("exp(t)*exp(-t)", "1");
    same("exp(x/2)^2", "exp(x)");
    same("exp(2*ln(x) + t)", "x^2*exp(t)");
}

#[test]
fn rational_powers_fold() {
    same("u^(1/3)*u^(2/3)", "u");
    same("u^(-4/3)*u^(1/3)", "1/u");
    same("T^(2/3)*T^(-1/3)", "T^(1/3)");
    same("sqrt(4)", "2");
    same("(x^2)^(1/2)", "x");
}

#[test]
fn chain_rule_through_atoms() {
    let x = Symbol::var("x");
    same(
        &parse_rf("exp(x^2/4)").unwrap().diff(&x).to_string(),
        "x*exp(x^2/4)/2",
    );
    same(
        &parse_rf("u^(-4/3)")
            .unwrap()
            .diff(&Symbol::var("u"))
            .to_string(),
        "-4/3*u^(-7/3)",
    );
    same(
        &parse_rf("ln(1 + x^2)").unwrap().diff(&x).to_string(),
        "2*x/(1+x^2)",
    );
    same(
        &parse_rf("int(c(s)^2, s, T)")
            .unwrap()
            .diff(&Symbol::var("T"))
            .to_string(),
        "c(T)^2",
    );
    same(&parse_rf("int(s^2, s, T)").unwrap().to_string(), "T^3/3");
}

#[test]
fn printed_forms_reparse() {
    for s in [
        "x_uu/x_u^2 - Q(u)*x_u",
        "-3*U_X^2 - 2*X*U_X^3 - X^3*U_X^3",
        "(x*T^(-1/3) - x^2/3)",
        "exp(-t)*ln(u)",
        "1/(1+u^2)*exp(arctan(u))",
        "int(c(s)^2, s, T) + X",
        "F[1,0](x, y) - F[0,2](x, y)",
    ] {
        let e = n(s);
        let again = normalize(&parse(&e.to_string()).unwrap()).unwrap();
        assert_eq!(e, again, "{s} -> {e}");
    }
}
