//! Exact expressions: trees for input and output, rational functions over
//! atoms for arithmetic.

mod atom;
mod parse;
mod poly;
pub mod print;
mod rf;
mod tree;

use std::collections::BTreeMap;

pub use atom::{sym_atom, Atom, AtomKind, Name, Symbol};
pub use parse::{parse, parse_rf, parse_with, Decls};
pub use poly::{q, qf, Monomial, Poly, Q};
pub use rf::Rf;
pub use tree::Expr;

use crate::error::Result;

pub fn normalize(e: &Expr) -> Result<Expr> {
    e.normalize()
}

/// Partial derivative treating every other atom as constant.
pub fn diff(e: &Expr, s: &Symbol) -> Result<Expr> {
    Ok(Rf::from_expr(e)?.diff(s).to_expr())
}

/// Simultaneous substitution followed by normalization.
pub fn substitute(e: &Expr, bindings: &BTreeMap<Symbol, Expr>) -> Result<Expr> {
    let b = bindings
        .iter()
        .map(|(k, v)| Ok((k.clone(), Rf::from_expr(v)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Rf::from_expr(e)?.subs(&b)?.to_expr())
}
