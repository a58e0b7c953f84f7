//! Determining equations for point symmetries and conservation-law
//! multipliers over a finite coefficient ansatz.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::expr::{Atom, Monomial, Name, Poly, Rf, Symbol, Q};
use crate::jet::{JetSpace, PdeSystem};
use crate::linalg::{self, Row};
use crate::vfield::{self, VectorField};
use num_traits::Zero;

/// Coefficient space: monomials in `vars` of total degree at most `degree`,
/// each multiplied by `1` or by one of the extra `atoms`.
#[derive(Clone, Debug)]
pub struct Ansatz {
    pub degree: u32,
    pub atoms: Vec<Rf>,
    /// Defaults to every independent and dependent variable.
    pub vars: Option<Vec<Name>>,
}

impl Default for Ansatz {
    fn default() -> Self {
        Ansatz {
            degree: 3,
            atoms: Vec::new(),
            vars: None,
        }
    }
}

impl Ansatz {
    pub fn degree(d: u32) -> Self {
        Ansatz {
            degree: d,
            ..Default::default()
        }
    }

    pub fn with_atoms(mut self, atoms: Vec<Rf>) -> Self {
        self.atoms = atoms;
        self
    }

    /// Distinct basis functions in a fixed order: by extra atom, then degree,
    /// then monomial.
    pub fn basis(&self, space: &JetSpace) -> Result<Vec<Rf>> {
        for a in &self.atoms {
            if space.jets_in(a).iter().any(|s| s.order() > 0) {
                return Err(Error::AnsatzCollision(a.to_string()));
            }
        }
        let vars = self.vars.clone().unwrap_or_else(|| {
            space
                .indep
                .iter()
                .chain(space.deps.iter())
                .cloned()
                .collect()
        });
        let mut monos: Vec<Rf> = vec![Rf::one()];
        let mut last = vec![(Rf::one(), 0usize)];
        for _ in 0..self.degree {
            let mut next = Vec::new();
            for (m, start) in &last {
                for (i, v) in vars.iter().enumerate().skip(*start) {
                    next.push((m * &Rf::sym(Symbol::Var(v.clone())), i));
                }
            }
            monos.extend(next.iter().map(|(m, _)| m.clone()));
            last = next;
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for a in std::iter::once(Rf::one()).chain(self.atoms.iter().cloned()) {
            for m in &monos {
                let b = m * &a;
                if !b.is_zero() && seen.insert(b.clone()) {
                    out.push(b);
                }
            }
        }
        Ok(independent(out))
    }
}

/// The leftmost maximal subset of `fs` that is linearly independent over the
/// rationals. Atoms can collapse onto monomials, e.g. `T^3·∫ s^-4 ds`.
fn independent(fs: Vec<Rf>) -> Vec<Rf> {
    let parts = fs.iter().map(|f| vec![f.clone()]).collect();
    let (eqs, _) = split_linear(parts, 1);
    let rows: Vec<Row> = eqs.into_iter().map(|e| e.coeffs).collect();
    let pivots: BTreeSet<usize> = linalg::rref(&rows).into_iter().map(|(p, _)| p).collect();
    fs.into_iter()
        .enumerate()
        .filter(|(j, _)| pivots.contains(j))
        .map(|(_, f)| f)
        .collect()
}

/// One split equation: `Σ coeffs[j]·c_j = 0`, taken from the coefficient of
/// `source` in the numerator of equation `equation`'s residual.
#[derive(Clone, Debug)]
pub struct SplitEquation {
    pub coeffs: Row,
    pub source: Monomial,
    pub equation: usize,
}

/// Unknown `c_j` multiplies basis function `basis` in component `target`.
#[derive(Clone, Debug)]
pub struct Unknown {
    pub target: Name,
    pub basis: Rf,
}

#[derive(Clone, Debug)]
pub struct LinearDeterminingSystem {
    pub unknowns: Vec<Unknown>,
    pub equations: Vec<SplitEquation>,
    /// Residual numerators before splitting, one per source equation.
    pub residuals: Vec<Poly>,
}

/// Placeholder atom for unknown `j`; the name cannot come from the parser.
pub fn unknown_symbol(j: usize) -> Symbol {
    Symbol::Var(Name::new(&format!("c#{j}")))
}

fn unknown_index(a: &Atom) -> Option<usize> {
    let s = a.as_symbol()?;
    match s {
        Symbol::Var(n) => n.as_str().strip_prefix("c#")?.parse().ok(),
        _ => None,
    }
}

/// Sums `Σ c_j·parts[j]` per equation and splits each numerator over every
/// monomial free of unknowns.
pub fn split_linear(per_unknown: Vec<Vec<Rf>>, neq: usize) -> (Vec<SplitEquation>, Vec<Poly>) {
    let mut equations = Vec::new();
    let mut residuals = Vec::new();
    for k in 0..neq {
        let total = Rf::sum(
            per_unknown
                .iter()
                .enumerate()
                .filter(|(_, r)| !r[k].is_zero())
                .map(|(j, r)| &Rf::sym(unknown_symbol(j)) * &r[k]),
        );
        let num = total.num().clone();
        for (mono, lin) in num.split_by(&|a| unknown_index(a).is_none()) {
            let mut row = Row::new();
            for (m, c) in lin.terms() {
                let j = match m.factors() {
                    [(a, 1)] => unknown_index(a).expect("split leaves unknowns only"),
                    _ => unreachable!("residual is linear in the unknowns"),
                };
                row.insert(j, c.clone());
            }
            equations.push(SplitEquation {
                coeffs: row,
                source: mono,
                equation: k,
            });
        }
        residuals.push(num);
    }
    (equations, residuals)
}

fn field_for(target: &Name, space: &JetSpace, c: Rf) -> VectorField {
    let v = VectorField::new("");
    if space.is_indep(target) {
        v.with_xi(target.as_str(), c)
    } else {
        v.with_eta(target.as_str(), c)
    }
}

/// Invariance conditions for the candidate field `Σ c_j·(basis_j ∂_target)`.
pub fn determining_equations(sys: &PdeSystem, a: &Ansatz) -> Result<LinearDeterminingSystem> {
    let p = sys.solve_leading()?;
    let basis = a.basis(&sys.space)?;
    let mut unknowns = Vec::new();
    for target in sys.space.indep.iter().chain(sys.space.deps.iter()) {
        for b in &basis {
            unknowns.push(Unknown {
                target: target.clone(),
                basis: b.clone(),
            });
        }
    }
    let per_unknown: Vec<Vec<Rf>> = unknowns
        .iter()
        .map(|u| vfield::residuals(&p, &field_for(&u.target, &sys.space, u.basis.clone())))
        .collect();
    let (equations, residuals) = split_linear(per_unknown, sys.equations.len());
    Ok(LinearDeterminingSystem {
        unknowns,
        equations,
        residuals,
    })
}

pub fn solve_linear(lds: &LinearDeterminingSystem) -> Vec<Vec<Q>> {
    let rows: Vec<Row> = lds.equations.iter().map(|e| e.coeffs.clone()).collect();
    linalg::nullspace(&rows, lds.unknowns.len())
}

fn assemble(lds: &LinearDeterminingSystem, space: &JetSpace, v: &[Q], name: String) -> VectorField {
    let mut f = VectorField::new(&name);
    for (u, c) in lds.unknowns.iter().zip(v) {
        if c.is_zero() {
            continue;
        }
        let term = field_for(&u.target, space, u.basis.scale(c));
        f = f.add(&term);
    }
    f.name = name;
    f
}

/// Basis of the point symmetries inside the ansatz, named `S1, S2, ...`.
pub fn find_symmetries(sys: &PdeSystem, a: &Ansatz) -> Result<Vec<VectorField>> {
    let lds = determining_equations(sys, a)?;
    let mut out = Vec::new();
    for (i, v) in solve_linear(&lds).iter().enumerate() {
        let f = assemble(&lds, &sys.space, v, format!("S{}", i + 1));
        if vfield::is_symmetry(sys, &f) != vfield::SymmetryVerdict::Yes {
            return Err(Error::Invalid(format!(
                "solver returned a non-symmetry {f}"
            )));
        }
        out.push(f);
    }
    Ok(out)
}

/// True iff `g` is a constant-coefficient combination of `fields`.
pub fn span_contains(fields: &[VectorField], g: &VectorField) -> bool {
    let mut names: BTreeSet<Name> = BTreeSet::new();
    for f in fields.iter().chain(std::iter::once(g)) {
        names.extend(f.xi.keys().cloned());
        names.extend(f.eta.keys().cloned());
    }
    let k = fields.len();
    let mut rows: Vec<Row> = Vec::new();
    let mut rhs: Vec<Q> = Vec::new();
    for n in &names {
        let parts: Vec<Vec<Rf>> = fields
            .iter()
            .map(|f| vec![f.component(n)])
            .chain([vec![-&g.component(n)]])
            .collect();
        let (eqs, _) = split_linear(parts, 1);
        for e in eqs {
            let mut row = e.coeffs.clone();
            let b = row.remove(&k).map(|c| -c).unwrap_or_default();
            rows.push(row);
            rhs.push(b);
        }
    }
    linalg::solve(&rows, &rhs, k).is_some()
}

/// Multipliers `Λ(x, t, u)` from the ansatz whose product with the equations
/// is a total divergence, detected by the Euler operator vanishing
/// identically. Each result holds one multiplier per equation.
pub fn find_cl_multipliers(sys: &PdeSystem, a: &Ansatz) -> Result<Vec<Vec<Rf>>> {
    let basis = a.basis(&sys.space)?;
    let neq = sys.equations.len();
    let mut unknowns = Vec::new();
    for k in 0..neq {
        for b in &basis {
            unknowns.push((k, b.clone()));
        }
    }
    let per_unknown: Vec<Vec<Rf>> = unknowns
        .iter()
        .map(|(k, b)| {
            let prod = b * &sys.equations[*k];
            sys.space
                .deps
                .iter()
                .map(|u| sys.space.euler_operator(&prod, u))
                .collect()
        })
        .collect();
    let (equations, _) = split_linear(per_unknown, sys.space.deps.len());
    let rows: Vec<Row> = equations.into_iter().map(|e| e.coeffs).collect();
    let mut out = Vec::new();
    for v in linalg::nullspace(&rows, unknowns.len()) {
        let mut lam = vec![Rf::zero(); neq];
        for ((k, b), c) in unknowns.iter().zip(&v) {
            if !c.is_zero() {
                lam[*k] = &lam[*k] + &b.scale(c);
            }
        }
        out.push(lam);
    }
    Ok(out)
}
