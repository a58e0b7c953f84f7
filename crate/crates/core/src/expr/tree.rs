use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use super::atom::{AtomKind, Name, Symbol};
use super::poly::{q, Monomial, Poly, Q};
use super::rf::Rf;
use crate::error::{Error, Result};

/// Expression tree as written by users and printers.
///
/// Arithmetic is carried out on [`Rf`]; trees are the exchange format.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Expr {
    Num(Q),
    Sym(Symbol),
    Func {
        name: Name,
        derivs: Vec<u32>,
        args: Vec<Expr>,
    },
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, Q),
    Exp(Box<Expr>),
    Ln(Box<Expr>),
    Atan(Box<Expr>),
    Integral {
        body: Box<Expr>,
        var: Symbol,
        arg: Box<Expr>,
    },
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Num(q(n))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Sym(Symbol::parse_name(name))
    }

    pub fn neg(self) -> Expr {
        Expr::Mul(vec![Expr::int(-1), self])
    }

    pub fn to_rf(&self) -> Result<Rf> {
        Rf::from_expr(self)
    }

    /// Unique normal form: round trip through the rational-function form.
    pub fn normalize(&self) -> Result<Expr> {
        Ok(self.to_rf()?.to_expr())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::print::expr_to_dsl(self))
    }
}

impl Rf {
    pub fn from_expr(e: &Expr) -> Result<Rf> {
        Ok(match e {
            Expr::Num(c) => Rf::constant(c.clone()),
            Expr::Sym(s) => Rf::sym(s.clone()),
            Expr::Func { name, derivs, args } => {
                let args = args.iter().map(Rf::from_expr).collect::<Result<Vec<_>>>()?;
                let derivs = if derivs.is_empty() {
                    vec![0; args.len()]
                } else {
                    derivs.clone()
                };
                if derivs.len() != args.len() {
                    return Err(Error::Invalid(format!(
                        "derivative orders of {name} do not match its arguments"
                    )));
                }
                Rf::func(name, derivs, args)
            }
            Expr::Add(xs) => Rf::sum(xs.iter().map(Rf::from_expr).collect::<Result<Vec<_>>>()?),
            Expr::Mul(xs) => {
                let mut acc = Rf::one();
                for x in xs {
                    acc = &acc * &Rf::from_expr(x)?;
                }
                acc
            }
            Expr::Pow(b, r) if r.is_integer() && r.is_negative() => inverse_power(b, r)?,
            Expr::Pow(b, r) => Rf::from_expr(b)?.pow(r)?,
            Expr::Exp(a) => Rf::exp(&Rf::from_expr(a)?),
            Expr::Ln(a) => Rf::ln(&Rf::from_expr(a)?)?,
            Expr::Atan(a) => Rf::atan(&Rf::from_expr(a)?),
            Expr::Integral { body, var, arg } => {
                Rf::integral(&Rf::from_expr(body)?, var, &Rf::from_expr(arg)?)?
            }
        })
    }

    pub fn to_expr(&self) -> Expr {
        let num = poly_to_expr(self.num());
        if self.den().is_empty() {
            return num;
        }
        let mut factors = vec![num];
        for (f, k) in self.den() {
            factors.push(Expr::Pow(Box::new(poly_to_expr(f)), q(-(*k as i64))));
        }
        Expr::Mul(factors)
    }
}

/// `b^r` for a negative integer `r`, inverting products and integer powers
/// factor by factor so `a/(f^2*g)` keeps `f` and `g` as separate denominator
/// factors, as the printer writes them.
fn inverse_power(b: &Expr, r: &Q) -> Result<Rf> {
    match b {
        Expr::Mul(xs) => {
            let mut acc = Rf::one();
            for x in xs {
                acc = &acc * &inverse_power(x, r)?;
            }
            Ok(acc)
        }
        Expr::Pow(inner, s) if s.is_integer() => {
            let k = s * r;
            if k.is_negative() {
                inverse_power(inner, &k)
            } else {
                Rf::from_expr(inner)?.pow(&k)
            }
        }
        _ => Rf::from_expr(b)?.pow(r),
    }
}

pub(crate) fn poly_to_expr(p: &Poly) -> Expr {
    let mut terms: Vec<Expr> = p.terms().rev().map(|(m, c)| term_to_expr(c, m)).collect();
    match terms.len() {
        0 => Expr::int(0),
        1 => terms.pop().unwrap(),
        _ => Expr::Add(terms),
    }
}

/// Renders one term, merging root atoms back into rational powers of their base.
fn term_to_expr(c: &Q, m: &Monomial) -> Expr {
    let mut powers: BTreeMap<ExprKey, (Expr, Q)> = BTreeMap::new();
    let mut order: Vec<ExprKey> = Vec::new();
    let mut push = |e: Expr, r: Q, key: ExprKey| {
        if let Some(slot) = powers.get_mut(&key) {
            slot.1 += r;
        } else {
            order.push(key.clone());
            powers.insert(key, (e, r));
        }
    };
    let mut exps: Vec<Expr> = Vec::new();
    for (a, e) in m.factors() {
        let e = q(*e as i64);
        match &**a {
            AtomKind::Root { base, q: qq } => {
                let r = &e / q(*qq as i64);
                match base.as_single_atom() {
                    Some(b) => match &*b {
                        AtomKind::Exp(arg) => {
                            exps.push(Expr::Exp(Box::new(arg.scale(&r).to_expr())))
                        }
                        _ => {
                            let ex = atom_to_expr(&b);
                            push(ex, r, ExprKey::Atom(b.clone()));
                        }
                    },
                    None => push(base.to_expr(), r, ExprKey::Rf(base.clone())),
                }
            }
            AtomKind::Exp(arg) => exps.push(Expr::Exp(Box::new(arg.scale(&e).to_expr()))),
            _ => push(atom_to_expr(a), e, ExprKey::Atom(a.clone())),
        }
    }
    let mut factors = Vec::new();
    if !c.is_one() || (order.is_empty() && exps.is_empty()) {
        factors.push(Expr::Num(c.clone()));
    }
    for key in order {
        let (base, r) = powers.remove(&key).unwrap();
        if r.is_zero() {
            continue;
        }
        if r.is_one() {
            factors.push(base);
        } else {
            factors.push(Expr::Pow(Box::new(base), r));
        }
    }
    factors.extend(exps);
    if factors.len() == 1 {
        factors.pop().unwrap()
    } else {
        Expr::Mul(factors)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
enum ExprKey {
    Atom(super::atom::Atom),
    Rf(Rf),
}

pub(crate) fn atom_to_expr(a: &super::atom::Atom) -> Expr {
    match &**a {
        AtomKind::Sym(s) => Expr::Sym(s.clone()),
        AtomKind::Func { name, derivs, args } => Expr::Func {
            name: name.clone(),
            derivs: derivs.clone(),
            args: args.iter().map(Rf::to_expr).collect(),
        },
        AtomKind::Exp(m) => Expr::Exp(Box::new(m.to_expr())),
        AtomKind::Ln(m) => Expr::Ln(Box::new(m.to_expr())),
        AtomKind::Atan(m) => Expr::Atan(Box::new(m.to_expr())),
        AtomKind::Root { base, q: qq } => Expr::Pow(
            Box::new(base.to_expr()),
            Q::new(1.into(), (*qq as i64).into()),
        ),
        AtomKind::Integral { body, var, arg } => Expr::Integral {
            body: Box::new(body.to_expr()),
            var: var.clone(),
            arg: Box::new(arg.to_expr()),
        },
    }
}

/// Sign of the leading coefficient in printed order, used by printers.
pub(crate) fn is_negative_term(e: &Expr) -> bool {
    match e {
        Expr::Num(c) => c.is_negative(),
        Expr::Mul(xs) => xs.first().map(is_negative_term).unwrap_or(false),
        _ => false,
    }
}
