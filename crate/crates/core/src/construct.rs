//! Potential systems, intermediate and inverse potential systems, subsystems
//! by exclusion, conservation-form detection, nonlocality tests and trees of
//! related systems.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::detsys::{self, Ansatz};
use crate::error::{Error, Result};
use crate::expr::{AtomKind, Monomial, Name, Poly, Rf, Symbol};
use crate::jet::{affine_in, clear_equation, JetSpace, PdeSystem};
use crate::linalg::{self, Row};
use crate::transform::{canonical_for, change_variables, hodograph, verify_canonical};
use crate::transform::PointTransformation;
use crate::vfield::{self, SymmetryVerdict, VectorField};

/// `D_t Φ + D_x Ψ = 0`, with `t` the last independent variable.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservationLaw {
    pub density: Rf,
    pub flux: Rf,
}

impl ConservationLaw {
    /// `D_t Φ + D_x Ψ` as an expression on the jet space.
    pub fn divergence(&self, space: &JetSpace) -> Rf {
        let (x, t) = (&space.indep[0], &space.indep[1]);
        &space.total_derivative(&self.density, t) + &space.total_derivative(&self.flux, x)
    }
}

fn two_dim(space: &JetSpace) -> Result<()> {
    if space.indep.len() != 2 {
        return Err(Error::Invalid(format!(
            "needs two independent variables, got {}",
            space.indep.len()
        )));
    }
    Ok(())
}

/// Adds `v` with `v_x = Φ`, `v_t = -Ψ`. Source equations that reduce to zero
/// on the new pair are dropped.
pub fn potential_system(sys: &PdeSystem, cl: &ConservationLaw, v: &Name) -> Result<PdeSystem> {
    two_dim(&sys.space)?;
    if sys.space.dep_index(v).is_some() || sys.space.is_indep(v) {
        return Err(Error::Invalid(format!("{v} is already a variable")));
    }
    let mut space = sys.space.clone();
    space.deps.push(v.clone());
    let (x, t) = (&space.indep[0], &space.indep[1]);
    let pair = vec![
        &Rf::sym(Symbol::jet(v, [x.clone()])) - &cl.density,
        &Rf::sym(Symbol::jet(v, [t.clone()])) + &cl.flux,
    ];
    let p = sys.with_space(space.clone(), pair.clone()).prepare();
    let mut eqs = pair;
    for e in &sys.equations {
        if !p.reduce(e).is_zero() {
            eqs.push(e.clone());
        }
    }
    Ok(sys.with_space(space, eqs))
}

/// A system with variables for the first derivatives of `translated`.
#[derive(Clone, Debug)]
pub struct IntermediateSystem {
    pub system: PdeSystem,
    pub translated: Name,
    /// `vars[i]` stands for the derivative of `translated` in `indep[i]`.
    pub vars: Vec<Name>,
}

/// `alpha` for the last independent variable and `beta` for the first in two
/// dimensions, `alpha1..alphan` otherwise.
pub fn default_derivative_names(space: &JetSpace) -> Vec<Name> {
    match space.indep.len() {
        2 => vec![Name::new("beta"), Name::new("alpha")],
        n => (1..=n).map(|i| Name::new(&format!("alpha{i}"))).collect(),
    }
}

/// Replaces each derivative of `u` by a derivative of the variable for the
/// latest-declared index it carries.
fn rewrite_derivatives(e: &Rf, space: &JetSpace, u: &Name, vars: &[Name]) -> Result<Rf> {
    e.map_atoms(&|a| match &**a {
        AtomKind::Sym(s @ Symbol::Jet { .. }) if s.base() == u => {
            let (i, x) = space
                .indep
                .iter()
                .enumerate()
                .rev()
                .find(|(_, x)| s.count(x) > 0)?;
            let mut idx = s.idx().to_vec();
            let pos = idx.iter().position(|n| n == x)?;
            idx.remove(pos);
            Some(Rf::sym(Symbol::jet(&vars[i], idx)))
        }
        _ => None,
    })
}

pub fn intermediate_system(
    sys: &PdeSystem,
    translated: &Name,
    names: Option<&[Name]>,
) -> Result<IntermediateSystem> {
    let space = &sys.space;
    if space.dep_index(translated).is_none() {
        return Err(Error::Invalid(format!(
            "{translated} is not a dependent variable"
        )));
    }
    let vars: Vec<Name> = match names {
        Some(n) => n.to_vec(),
        None => default_derivative_names(space),
    };
    if vars.len() != space.indep.len() {
        return Err(Error::Invalid(format!(
            "need {} derivative names, got {}",
            space.indep.len(),
            vars.len()
        )));
    }
    for v in &vars {
        if space.is_indep(v) || space.dep_index(v).is_some() || sys.params.contains(v) {
            return Err(Error::Invalid(format!("{v} is already in use")));
        }
    }
    let shift = VectorField::translation(translated, space);
    if vfield::is_symmetry(sys, &shift) != SymmetryVerdict::Yes {
        return Err(Error::NotTranslationInvariant(translated.to_string()));
    }
    let mut new_space = space.clone();
    new_space.deps.extend(vars.iter().cloned());
    let mut eqs: Vec<Rf> = vars
        .iter()
        .zip(&space.indep)
        .map(|(v, x)| &Rf::sym(Symbol::Var(v.clone())) - &Rf::sym(Symbol::jet(translated, [x.clone()])))
        .collect();
    for e in &sys.equations {
        eqs.push(rewrite_derivatives(e, space, translated, &vars)?);
    }
    Ok(IntermediateSystem {
        system: sys.with_space(new_space, eqs),
        translated: translated.clone(),
        vars,
    })
}

/// Drops `translated` and the definitions of its derivatives, adding the
/// compatibility conditions `∂_j vars[i] = ∂_i vars[j]`.
pub fn inverse_potential_system(inter: &IntermediateSystem) -> Result<PdeSystem> {
    let sys = &inter.system;
    let n = inter.vars.len();
    let u = &inter.translated;
    let space = JetSpace {
        indep: sys.space.indep.clone(),
        deps: sys
            .space
            .deps
            .iter()
            .filter(|d| *d != u)
            .cloned()
            .collect(),
    };
    let x = &space.indep;
    let mut eqs = Vec::new();
    // In two dimensions this reads `beta_t - alpha_x`, so an evolution
    // equation for `beta` comes out with a positive time derivative.
    for i in 0..n {
        for j in i + 1..n {
            eqs.push(
                &Rf::sym(Symbol::jet(&inter.vars[i], [x[j].clone()]))
                    - &Rf::sym(Symbol::jet(&inter.vars[j], [x[i].clone()])),
            );
        }
    }
    for e in &sys.equations[n..] {
        if e.symbols().iter().any(|s| s.base() == u) {
            return Err(Error::ExcludedVariablePresent(u.to_string()));
        }
        eqs.push(e.clone());
    }
    Ok(sys.with_space(space, eqs))
}

/// The n-dimensional form; requires at least three independent variables.
pub fn inverse_potential_system_nd(inter: &IntermediateSystem) -> Result<PdeSystem> {
    if inter.vars.len() < 3 {
        return Err(Error::Invalid(
            "curl compatibility needs at least three independent variables".into(),
        ));
    }
    inverse_potential_system(inter)
}

/// Output of [`exclude_variable`].
#[derive(Clone, Debug)]
pub struct Exclusion {
    pub system: PdeSystem,
    /// Set when the variable was removed by cross-differentiation, so the
    /// result is only nonlocally related to the input.
    pub nonlocal: bool,
}

fn mentions(e: &Rf, w: &Name) -> bool {
    e.symbols().iter().any(|s| s.base() == w)
}

/// Substitutes `w = value` together with all total derivatives.
fn substitute_dep(e: &Rf, space: &JetSpace, w: &Name, value: &Rf) -> Result<Rf> {
    e.map_atoms(&|a| match &**a {
        AtomKind::Sym(s) if s.base() == w && space.dep_index(w).is_some() => {
            Some(space.total_derivative_multi(value, s.idx()))
        }
        _ => None,
    })
}

pub fn exclude_variable(sys: &PdeSystem, w: &Name) -> Result<Exclusion> {
    let space = &sys.space;
    if space.dep_index(w).is_none() {
        return Err(Error::Invalid(format!("{w} is not a dependent variable")));
    }
    let mut new_space = space.clone();
    new_space.deps.retain(|d| d != w);
    let plain = Symbol::Var(w.clone());

    // Substitution: an equation solvable for `w` with no derivatives of `w`.
    let mut best: Option<(usize, Rf)> = None;
    for (k, e) in sys.equations.iter().enumerate() {
        if space.jets_in(e).iter().any(|s| s.base() == w && s.order() > 0) {
            continue;
        }
        let Some((a, b)) = affine_in(e, &plain) else {
            continue;
        };
        if a.is_zero() || mentions(&a, w) || mentions(&b, w) {
            continue;
        }
        let Ok(value) = (-&b).div(&a) else { continue };
        let size = value.num().len() + value.den().len();
        if best
            .as_ref()
            .is_none_or(|(_, v)| size < v.num().len() + v.den().len())
        {
            best = Some((k, value));
        }
    }
    if let Some((k, value)) = best {
        let mut eqs = Vec::new();
        for (j, e) in sys.equations.iter().enumerate() {
            if j == k {
                continue;
            }
            let r = substitute_dep(e, space, w, &value)?;
            if !r.is_zero() {
                eqs.push(r);
            }
        }
        return Ok(Exclusion {
            system: sys.with_space(new_space, eqs),
            nonlocal: false,
        });
    }

    // Cross-differentiation: two equations linear in the first derivatives
    // of `w` and free of `w` otherwise.
    if space.indep.len() == 2 {
        let (x, t) = (&space.indep[0], &space.indep[1]);
        let wx = Symbol::jet(w, [x.clone()]);
        let wt = Symbol::jet(w, [t.clone()]);
        let linear = |e: &Rf| -> Option<(Rf, Rf, Rf)> {
            let (a, rest) = affine_in(e, &wx).unwrap_or((Rf::zero(), e.clone()));
            let (b, c) = affine_in(&rest, &wt).unwrap_or((Rf::zero(), rest.clone()));
            if [&a, &b, &c].iter().any(|p| mentions(p, w)) {
                return None;
            }
            Some((a, b, c))
        };
        let with_w: Vec<usize> = (0..sys.equations.len())
            .filter(|&k| mentions(&sys.equations[k], w))
            .collect();
        if let [i, j] = with_w[..] {
            if let (Some((a1, b1, c1)), Some((a2, b2, c2))) =
                (linear(&sys.equations[i]), linear(&sys.equations[j]))
            {
                let det = &(&a1 * &b2) - &(&a2 * &b1);
                if !det.is_zero() {
                    let p = (&(&c2 * &b1) - &(&c1 * &b2)).div(&det)?;
                    let q = (&(&a2 * &c1) - &(&a1 * &c2)).div(&det)?;
                    let compat =
                        &space.total_derivative(&p, t) - &space.total_derivative(&q, x);
                    let mut eqs: Vec<Rf> = sys
                        .equations
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != i && *k != j)
                        .map(|(_, e)| e.clone())
                        .collect();
                    eqs.push(clear_equation(&compat));
                    return Ok(Exclusion {
                        system: sys.with_space(new_space, eqs),
                        nonlocal: true,
                    });
                }
            }
        }
    }
    Err(Error::CannotEliminate(w.to_string()))
}

/// Antiderivative of `a` in the atom of `s` when `a` is a Laurent polynomial
/// in it (without a `1/s` term) over a denominator free of `s`.
fn integrate_in(a: &Rf, s: &Symbol) -> Option<Rf> {
    let atom = crate::expr::sym_atom(s.clone());
    if a.den().iter().any(|(f, _)| f.atoms().contains(&atom)) {
        return None;
    }
    if a.num()
        .atoms()
        .iter()
        .any(|b| *b != atom && Rf::atom(b.clone()).depends_on(s))
    {
        return None;
    }
    let mut out = Poly::zero();
    for (m, c) in a.num().terms() {
        let k = m.exponent(&atom);
        if k == -1 {
            return None;
        }
        let (_, step) = m.mul(&Monomial::atom(atom.clone()));
        out.add_term(step, c / crate::expr::Q::from_integer((k + 1).into()));
    }
    let den = Rf::from_parts(Poly::one(), a.den().to_vec()).ok()?;
    Some(&Rf::from_poly(out) * &den)
}

const MAX_FLUX_STEPS: usize = 64;

/// Density and flux with `eq = D_t Φ + D_x Ψ` identically, if the Euler
/// operator annihilates `eq` and the flux can be recovered by integrating the
/// highest-ranked jet step by step.
pub fn is_conservation_form(eq: &Rf, space: &JetSpace) -> Option<ConservationLaw> {
    if space.indep.len() != 2 {
        return None;
    }
    if space
        .deps
        .iter()
        .any(|u| !space.euler_operator(eq, u).is_zero())
    {
        return None;
    }
    let t = &space.indep[1];
    let mut rem = eq.clone();
    let mut phi = Rf::zero();
    let mut psi = Rf::zero();
    for _ in 0..MAX_FLUX_STEPS {
        if rem.is_zero() {
            return Some(ConservationLaw {
                density: phi,
                flux: psi,
            });
        }
        let top = space
            .jets_in(&rem)
            .into_iter()
            .filter(|s| s.order() > 0)
            .max_by(|a, b| space.rank_cmp(a, b))?;
        let a = rem.diff(&top);
        if a.depends_on(&top) {
            return None;
        }
        let i = if top.count(t) > 0 {
            t.clone()
        } else {
            space.indep[0].clone()
        };
        let mut idx = top.idx().to_vec();
        let pos = idx.iter().position(|n| *n == i)?;
        idx.remove(pos);
        let base = Symbol::jet(top.base(), idx);
        let prim = integrate_in(&a, &base)?;
        rem = &rem - &space.total_derivative(&prim, &i);
        if i == *t {
            phi = &phi + &prim;
        } else {
            psi = &psi + &prim;
        }
    }
    None
}

/// Canonical form of one equation for comparison: cleared, with every
/// monomial factor common to all terms removed.
fn comparison_key(e: &Rf) -> Rf {
    let c = clear_equation(e);
    let content = c.num().monomial_content();
    let p = c.num().mul_monomial(&content.inv());
    clear_equation(&Rf::from_poly(p))
}

fn same_variables(a: &PdeSystem, b: &PdeSystem) -> bool {
    let set = |v: &[Name]| v.iter().cloned().collect::<BTreeSet<_>>();
    set(&a.space.indep) == set(&b.space.indep) && set(&a.space.deps) == set(&b.space.deps)
}

/// Every equation of `a` vanishes on the solutions of `b`.
fn reduces_on(a: &PdeSystem, b: &PdeSystem) -> bool {
    let p = b.prepare();
    a.equations.iter().all(|e| {
        let r = p.reduce(e);
        r.is_zero()
            || p.implicit()
                .iter()
                .any(|g| r.num().div_exact(g.num()).is_some())
    })
}

/// Equal equation sets after normalization, or failing that, each system's
/// equations vanish on the other's solution manifold (forms that differ by
/// differential consequences such as the compatibility condition).
pub fn systems_equivalent(a: &PdeSystem, b: &PdeSystem) -> bool {
    if !same_variables(a, b) {
        return false;
    }
    let keys = |s: &PdeSystem| -> BTreeSet<Rf> {
        s.equations
            .iter()
            .map(comparison_key)
            .filter(|e| !e.is_zero())
            .collect()
    };
    if keys(a) == keys(b) {
        return true;
    }
    // Reordering the dependents changes which jets lead, not the solutions.
    let mut b_as_a = b.clone();
    b_as_a.space = a.space.clone();
    reduces_on(a, &b_as_a.with_equations(b.equations.clone()))
        && reduces_on(b, &a.with_equations(a.equations.clone()))
}

/// Renames variables, jets included, throughout a system.
pub fn rename(sys: &PdeSystem, map: &[(Name, Name)]) -> Result<PdeSystem> {
    let m: BTreeMap<&Name, &Name> = map.iter().map(|(a, b)| (a, b)).collect();
    let r = |n: &Name| m.get(n).map(|x| (*x).clone()).unwrap_or_else(|| n.clone());
    let space = JetSpace {
        indep: sys.space.indep.iter().map(r).collect(),
        deps: sys.space.deps.iter().map(r).collect(),
    };
    let eqs = sys
        .equations
        .iter()
        .map(|e| {
            e.map_atoms(&|a| match &**a {
                AtomKind::Sym(Symbol::Var(n)) if m.contains_key(n) => {
                    Some(Rf::sym(Symbol::Var(r(n))))
                }
                AtomKind::Sym(s @ Symbol::Jet { .. }) => {
                    let idx: Vec<Name> = s.idx().iter().map(r).collect();
                    Some(Rf::sym(Symbol::jet(&r(s.base()), idx)))
                }
                _ => None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sys.with_space(space, eqs))
}

/// The steps from a system with a point symmetry to its inverse potential
/// system.
#[derive(Clone, Debug)]
pub struct IpsPipeline {
    /// The system in coordinates where the symmetry is a translation.
    pub transformed: PdeSystem,
    pub transformation: Option<PointTransformation>,
    pub intermediate: IntermediateSystem,
    pub ips: PdeSystem,
}

fn pure_translation(v: &VectorField) -> Option<(Name, bool)> {
    let one = |m: &BTreeMap<Name, Rf>| match m.iter().next() {
        Some((k, c)) if m.len() == 1 && c.is_one() => Some(k.clone()),
        _ => None,
    };
    match (v.xi.is_empty(), v.eta.is_empty()) {
        (true, false) => one(&v.eta).map(|k| (k, false)),
        (false, true) => one(&v.xi).map(|k| (k, true)),
        _ => None,
    }
}

/// Brings `v` to a translation (directly, by a hodograph, by `map`, or by
/// canonical coordinates) and builds the inverse potential system.
pub fn ips_from_symmetry(
    sys: &PdeSystem,
    v: &VectorField,
    map: Option<&PointTransformation>,
    names: Option<&[Name]>,
) -> Result<IpsPipeline> {
    let (transformed, translated, transformation) = match (map, pure_translation(v)) {
        (None, Some((u, false))) => (sys.clone(), u, None),
        (None, Some((x, true))) if sys.space.deps.len() == 1 => {
            let pair = [(x.clone(), sys.space.deps[0].clone())];
            let tr = PointTransformation::swap(&sys.space, &pair)?;
            (hodograph(sys, &pair)?, x, Some(tr))
        }
        (Some(tr), _) => {
            let u = tr
                .new
                .deps
                .iter()
                .find(|u| verify_canonical(v, tr, u))
                .cloned()
                .ok_or_else(|| {
                    Error::Invalid(format!("map {} does not translate {}", tr.name, v.name))
                })?;
            (change_variables(sys, tr)?, u, Some(tr.clone()))
        }
        (None, _) => {
            let (tr, u) = canonical_for(v, &sys.space)?;
            (change_variables(sys, &tr)?, u, Some(tr))
        }
    };
    let intermediate = intermediate_system(&transformed, &translated, names)?;
    let ips = inverse_potential_system(&intermediate)?;
    Ok(IpsPipeline {
        transformed,
        transformation,
        intermediate,
        ips,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Locality {
    Local,
    Nonlocal,
    Undetermined,
}

impl fmt::Display for Locality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Locality::Local => "local",
            Locality::Nonlocal => "nonlocal",
            Locality::Undetermined => "undetermined",
        })
    }
}

/// How the system carrying the symmetry relates to the base system.
#[derive(Clone, Debug)]
pub enum Link {
    /// The symmetry acts on a potential system of the base system.
    Potential { potentials: Vec<Name> },
    /// The symmetry acts on a system obtained by excluding variables from
    /// `lifted`. An extension to `lifted` is searched for; a point extension
    /// is mapped to the base coordinates by `back` and judged by its
    /// dependence on `potentials`.
    Extension {
        lifted: PdeSystem,
        back: Option<PointTransformation>,
        potentials: Vec<Name>,
    },
}

#[derive(Clone, Debug)]
pub struct ClassifyOptions {
    pub ansatz: Ansatz,
    /// Highest derivative order allowed in a non-point extension.
    pub order: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            ansatz: Ansatz::default(),
            order: 2,
        }
    }
}

fn depends_on_any(v: &VectorField, coords: &[Name], vars: &[Name]) -> bool {
    coords.iter().any(|c| {
        v.component(c)
            .symbols()
            .iter()
            .any(|s| vars.contains(s.base()))
    })
}

/// Solves `residuals(fixed) + Σ c_j residuals(basis_j) = 0` for constants.
fn solve_extension(fixed: Vec<Rf>, parts: Vec<Vec<Rf>>) -> Option<Vec<crate::expr::Q>> {
    let k = parts.len();
    let neq = fixed.len();
    let mut all = parts;
    all.push(fixed);
    let (eqs, _) = detsys::split_linear(all, neq);
    let mut rows: Vec<Row> = Vec::new();
    let mut rhs = Vec::new();
    for e in eqs {
        let mut row = e.coeffs;
        let b = row.remove(&k).map(|c| -c).unwrap_or_default();
        rows.push(row);
        rhs.push(b);
    }
    linalg::solve(&rows, &rhs, k)
}

/// A point field on `lifted` agreeing with `v` on the shared coordinates.
fn point_extension(
    lifted: &PdeSystem,
    v: &VectorField,
    extra: &[Name],
    a: &Ansatz,
) -> Result<Option<VectorField>> {
    let p = lifted.solve_leading()?;
    let basis = a.basis(&lifted.space)?;
    let mut unknowns = Vec::new();
    for w in extra {
        for b in &basis {
            unknowns.push((w.clone(), b.clone()));
        }
    }
    let parts: Vec<Vec<Rf>> = unknowns
        .iter()
        .map(|(w, b)| vfield::residuals(&p, &VectorField::new("").with_eta(w.as_str(), b.clone())))
        .collect();
    let fixed = vfield::residuals(&p, v);
    Ok(solve_extension(fixed, parts).map(|c| {
        let mut out = v.clone();
        for ((w, b), c) in unknowns.iter().zip(&c) {
            out.set_eta(w, &out.eta(w) + &b.scale(c));
        }
        out
    }))
}

/// `Σ D_J(Q^k) ∂e/∂u^k_J` for characteristics `q` of an evolutionary field.
fn evolutionary_apply(space: &JetSpace, q: &BTreeMap<Name, Rf>, e: &Rf) -> Rf {
    Rf::sum(space.jets_in(e).into_iter().filter_map(|s| {
        let qk = q.get(s.base())?;
        Some(&space.total_derivative_multi(qk, s.idx()) * &e.diff(&s))
    }))
}

/// An evolutionary field on `lifted` whose characteristics for the shared
/// dependents come from `v` and whose characteristics for `extra` are drawn
/// from the ansatz extended by jets of the shared dependents up to `order`.
fn evolutionary_extension(
    lifted: &PdeSystem,
    v: &VectorField,
    extra: &[Name],
    opts: &ClassifyOptions,
) -> Result<bool> {
    let p = lifted.solve_leading()?;
    let space = &lifted.space;
    let shared: Vec<Name> = space
        .deps
        .iter()
        .filter(|d| !extra.contains(d))
        .cloned()
        .collect();
    let mut q: BTreeMap<Name, Rf> = BTreeMap::new();
    for u in &shared {
        let mut c = v.eta(u);
        for x in &space.indep {
            c = &c - &(&v.xi(x) * &Rf::sym(Symbol::jet(u, [x.clone()])));
        }
        q.insert(u.clone(), c);
    }
    let mut vars: Vec<Name> = space.indep.iter().chain(space.deps.iter()).cloned().collect();
    for k in 1..=opts.order {
        for idx in space.multi_indices(k) {
            for u in &shared {
                vars.push(Name::new(&Symbol::jet(u, idx.clone()).to_string()));
            }
        }
    }
    let mut a = opts.ansatz.clone();
    a.vars = Some(vars);
    let basis = a.basis(&JetSpace {
        indep: space.indep.clone(),
        deps: Vec::new(),
    })?;
    let basis: Vec<Rf> = basis.into_iter().map(|b| as_jets(&b)).collect();
    let mut red = p.reducer();
    let fixed: Vec<Rf> = lifted
        .equations
        .iter()
        .map(|e| red.reduce(&evolutionary_apply(space, &q, e)))
        .collect();
    let mut parts = Vec::new();
    for w in extra {
        for b in &basis {
            let mut qw = BTreeMap::new();
            qw.insert(w.clone(), b.clone());
            parts.push(
                lifted
                    .equations
                    .iter()
                    .map(|e| red.reduce(&evolutionary_apply(space, &qw, e)))
                    .collect(),
            );
        }
    }
    Ok(solve_extension(fixed, parts).is_some())
}

/// Basis monomials were built from names like `u_x`; turn them into jets.
fn as_jets(b: &Rf) -> Rf {
    b.map_atoms(&|a| match &**a {
        AtomKind::Sym(Symbol::Var(n)) if n.as_str().contains('_') => {
            Some(Rf::sym(Symbol::parse_name(n.as_str())))
        }
        _ => None,
    })
    .expect("renaming symbols cannot fail")
}

/// Decides whether `v`, a point symmetry of `related`, is a local symmetry of
/// `base` in the sense fixed by `link`. Results from the extension search are
/// bounded by the ansatz.
pub fn classify_nonlocal(
    base: &PdeSystem,
    related: &PdeSystem,
    v: &VectorField,
    link: &Link,
    opts: &ClassifyOptions,
) -> Locality {
    if vfield::is_symmetry(related, v) != SymmetryVerdict::Yes {
        return Locality::Undetermined;
    }
    let base_coords: Vec<Name> = base
        .space
        .indep
        .iter()
        .chain(base.space.deps.iter())
        .cloned()
        .collect();
    match link {
        Link::Potential { potentials } => {
            if depends_on_any(v, &base_coords, potentials) {
                Locality::Nonlocal
            } else {
                Locality::Local
            }
        }
        Link::Extension {
            lifted,
            back,
            potentials,
        } => {
            let extra: Vec<Name> = lifted
                .space
                .deps
                .iter()
                .filter(|d| related.space.dep_index(d).is_none())
                .cloned()
                .collect();
            let shared_ok = related
                .space
                .deps
                .iter()
                .all(|d| lifted.space.dep_index(d).is_some())
                && related.space.indep == lifted.space.indep;
            if !shared_ok || extra.is_empty() {
                return Locality::Undetermined;
            }
            match point_extension(lifted, v, &extra, &opts.ansatz) {
                Ok(Some(ext)) => {
                    let ext = match back {
                        Some(tr) => match tr.push_forward(&ext) {
                            Ok(e) => e,
                            Err(_) => return Locality::Undetermined,
                        },
                        None => ext,
                    };
                    if depends_on_any(&ext, &base_coords, potentials) {
                        Locality::Nonlocal
                    } else {
                        Locality::Local
                    }
                }
                Ok(None) => match evolutionary_extension(lifted, v, &extra, opts) {
                    Ok(true) => Locality::Local,
                    Ok(false) => Locality::Nonlocal,
                    Err(_) => Locality::Undetermined,
                },
                Err(_) => Locality::Undetermined,
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    Potential,
    Intermediate,
    InversePotential,
    Subsystem,
    Invertible,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Potential => "potential",
            EdgeKind::Intermediate => "intermediate",
            EdgeKind::InversePotential => "inverse-potential",
            EdgeKind::Subsystem => "subsystem",
            EdgeKind::Invertible => "invertible",
        })
    }
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub label: String,
    pub system: PdeSystem,
}

#[derive(Clone, Debug)]
pub struct TreeEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    pub provenance: String,
}

#[derive(Clone, Debug, Default)]
pub struct SystemTree {
    pub nodes: Vec<TreeNode>,
    pub edges: Vec<TreeEdge>,
}

/// One step applied to an existing node of the tree.
#[derive(Clone, Debug)]
pub enum Move {
    /// Inverse potential system from a point symmetry, after first excluding
    /// `exclude` from the node's system.
    Ips {
        at: usize,
        symmetry: VectorField,
        map: Option<PointTransformation>,
        exclude: Vec<Name>,
        names: Option<Vec<Name>>,
    },
    Exclude {
        at: usize,
        var: Name,
    },
    Potential {
        at: usize,
        law: ConservationLaw,
        var: Name,
    },
}

impl SystemTree {
    /// Adds a node unless an equivalent one exists; returns its index.
    fn add(&mut self, sys: PdeSystem) -> usize {
        if let Some(i) = self
            .nodes
            .iter()
            .position(|n| systems_equivalent(&n.system, &sys))
        {
            return i;
        }
        self.nodes.push(TreeNode {
            label: format!("n{}", self.nodes.len()),
            system: sys,
        });
        self.nodes.len() - 1
    }

    pub fn children(&self, i: usize) -> impl Iterator<Item = &TreeEdge> {
        self.edges.iter().filter(move |e| e.from == i)
    }
}

pub fn build_tree(seed: &PdeSystem, moves: &[Move]) -> Result<SystemTree> {
    let mut tree = SystemTree::default();
    tree.nodes.push(TreeNode {
        label: "n0".into(),
        system: seed.clone(),
    });
    for m in moves {
        let at = match m {
            Move::Ips { at, .. } | Move::Exclude { at, .. } | Move::Potential { at, .. } => *at,
        };
        let src = tree
            .nodes
            .get(at)
            .ok_or_else(|| Error::Invalid(format!("no tree node {at}")))?
            .system
            .clone();
        let (sys, kind, provenance) = match m {
            Move::Ips {
                symmetry,
                map,
                exclude,
                names,
                ..
            } => {
                let mut s = src;
                let mut steps = Vec::new();
                for w in exclude {
                    s = exclude_variable(&s, w)?.system;
                    steps.push(format!("exclude {w}"));
                }
                let p = ips_from_symmetry(&s, symmetry, map.as_ref(), names.as_deref())?;
                steps.push(match map {
                    Some(tr) => format!("symmetry {} via map {}", symmetry.name, tr.name),
                    None => format!("symmetry {}", symmetry.name),
                });
                (p.ips, EdgeKind::InversePotential, steps.join("; "))
            }
            Move::Exclude { var, .. } => {
                let ex = exclude_variable(&src, var)?;
                (ex.system, EdgeKind::Subsystem, format!("exclude {var}"))
            }
            Move::Potential { law, var, .. } => (
                potential_system(&src, law, var)?,
                EdgeKind::Potential,
                format!("conservation law with density {}", law.density),
            ),
        };
        let to = tree.add(sys);
        tree.edges.push(TreeEdge {
            from: at,
            to,
            kind,
            provenance,
        });
    }
    Ok(tree)
}
