//! Point transformations: canonical coordinates, hodographs and the induced
//! change of variables on PDE systems.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::expr::{Name, Rf, Symbol};
use crate::jet::{clear_equation, JetSpace, PdeSystem};
use crate::vfield::VectorField;

/// An invertible change of point coordinates with both directions explicit.
///
/// `forward` lists the new coordinates in the order of `new.indep` followed by
/// `new.deps`; `inverse` lists the old coordinates the same way.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTransformation {
    pub name: String,
    pub old: JetSpace,
    pub new: JetSpace,
    pub forward: Vec<(Name, Rf)>,
    pub inverse: Vec<(Name, Rf)>,
}

fn lookup<'a>(map: &'a [(Name, Rf)], n: &Name) -> Option<&'a Rf> {
    map.iter().find(|(k, _)| k == n).map(|(_, v)| v)
}

fn bindings(map: &[(Name, Rf)]) -> BTreeMap<Symbol, Rf> {
    map.iter()
        .map(|(k, v)| (Symbol::Var(k.clone()), v.clone()))
        .collect()
}

impl PointTransformation {
    /// Builds a transformation whose first `old.indep.len()` forward entries
    /// are the new independent variables.
    pub fn new(
        name: &str,
        old: &JetSpace,
        forward: Vec<(Name, Rf)>,
        inverse: Vec<(Name, Rf)>,
    ) -> Result<Self> {
        let n = old.indep.len();
        let total = n + old.deps.len();
        if forward.len() != total {
            return Err(Error::Invalid(format!(
                "map {name} defines {} new coordinates, expected {total}",
                forward.len()
            )));
        }
        let new = JetSpace {
            indep: forward[..n].iter().map(|(k, _)| k.clone()).collect(),
            deps: forward[n..].iter().map(|(k, _)| k.clone()).collect(),
        };
        let mut ordered = Vec::with_capacity(total);
        for c in old.indep.iter().chain(old.deps.iter()) {
            let v = lookup(&inverse, c)
                .ok_or_else(|| Error::Invalid(format!("map {name} has no inverse for {c}")))?;
            ordered.push((c.clone(), v.clone()));
        }
        Ok(PointTransformation {
            name: name.to_string(),
            old: old.clone(),
            new,
            forward,
            inverse: ordered,
        })
    }

    /// Interchanges each `(independent, dependent)` pair, keeping names.
    pub fn swap(old: &JetSpace, pairs: &[(Name, Name)]) -> Result<Self> {
        let mut indep = old.indep.clone();
        let mut deps = old.deps.clone();
        let mut seen = Vec::new();
        for (x, u) in pairs {
            let i = old.indep.iter().position(|n| n == x);
            let k = old.dep_index(u);
            let (Some(i), Some(k)) = (i, k) else {
                return Err(Error::Invalid(format!("cannot swap {x} and {u}")));
            };
            if seen.contains(x) || seen.contains(u) {
                return Err(Error::Invalid("swap pairs must be disjoint".into()));
            }
            seen.push(x.clone());
            seen.push(u.clone());
            indep[i] = u.clone();
            deps[k] = x.clone();
        }
        let forward: Vec<(Name, Rf)> = indep
            .iter()
            .chain(deps.iter())
            .map(|n| (n.clone(), Rf::sym(Symbol::Var(n.clone()))))
            .collect();
        let inverse = forward.clone();
        let names: Vec<String> = pairs.iter().map(|(x, u)| format!("{x}<->{u}")).collect();
        PointTransformation::new(&format!("swap {}", names.join(", ")), old, forward, inverse)
    }

    pub fn inverse(&self) -> PointTransformation {
        PointTransformation {
            name: format!("{}^-1", self.name),
            old: self.new.clone(),
            new: self.old.clone(),
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    pub fn forward_of(&self, n: &Name) -> Option<&Rf> {
        lookup(&self.forward, n)
    }

    pub fn inverse_of(&self, n: &Name) -> Option<&Rf> {
        lookup(&self.inverse, n)
    }

    /// Rewrites a point expression in old coordinates in terms of the new ones.
    pub fn to_new(&self, e: &Rf) -> Result<Rf> {
        e.subs(&bindings(&self.inverse))
    }

    pub fn to_old(&self, e: &Rf) -> Result<Rf> {
        e.subs(&bindings(&self.forward))
    }

    /// Checks that both compositions of the maps reduce to the identity.
    pub fn check_inverse(&self) -> Result<()> {
        for (n, f) in &self.forward {
            let back = self.to_new(f)?;
            if !(&back - &Rf::sym(Symbol::Var(n.clone()))).is_zero() {
                return Err(Error::Invalid(format!(
                    "map {}: {n} does not round-trip, got {back}",
                    self.name
                )));
            }
        }
        for (n, g) in &self.inverse {
            let back = self.to_old(g)?;
            if !(&back - &Rf::sym(Symbol::Var(n.clone()))).is_zero() {
                return Err(Error::Invalid(format!(
                    "map {}: {n} does not round-trip, got {back}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Jacobian determinant of the forward map in old coordinates; the
    /// transformation is only claimed where it does not vanish.
    pub fn side_condition(&self) -> Rf {
        let coords: Vec<Symbol> = self
            .old
            .indep
            .iter()
            .chain(self.old.deps.iter())
            .map(|n| Symbol::Var(n.clone()))
            .collect();
        let m: Vec<Vec<Rf>> = self
            .forward
            .iter()
            .map(|(_, f)| coords.iter().map(|c| f.diff(c)).collect())
            .collect();
        determinant(m)
    }

    /// Image of a point field: components `v(f_a)` rewritten in new coordinates.
    pub fn push_forward(&self, v: &VectorField) -> Result<VectorField> {
        let mut out = VectorField::new(&v.name);
        let n = self.new.indep.len();
        for (i, (name, f)) in self.forward.iter().enumerate() {
            let c = self.to_new(&v.apply_point(f))?;
            if i < n {
                out.set_xi(name, c);
            } else {
                out.set_eta(name, c);
            }
        }
        Ok(out)
    }
}

fn determinant(mut m: Vec<Vec<Rf>>) -> Rf {
    let n = m.len();
    let mut det = Rf::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return Rf::zero();
        };
        if p != col {
            m.swap(p, col);
            det = -&det;
        }
        let piv = m[col][col].clone();
        det = &det * &piv;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].div(&piv).expect("pivot is nonzero");
            for c in col..n {
                let t = &m[r][c] - &(&f * &m[col][c]);
                m[r][c] = t;
            }
        }
    }
    det
}

/// Inverse of a square matrix over rational functions, `None` when singular.
fn invert(m: &[Vec<Rf>]) -> Option<Vec<Vec<Rf>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rf>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rf::one() } else { Rf::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let p = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(p, col);
        let inv = a[col][col].inv().ok()?;
        for c in 0..2 * n {
            a[col][c] = &a[col][c] * &inv;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in 0..2 * n {
                let t = &a[r][c] - &(&f * &a[col][c]);
                a[r][c] = t;
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Rewrites `sys` in the new coordinates of `tr`.
///
/// Old first derivatives solve `D_a g = Σ_i (D_a x^i) ∂g/∂x^i` over the new
/// total derivatives `D_a`; higher jets follow by repeated old-coordinate
/// total differentiation. Each equation is then cleared of nonvanishing
/// factors by [`clear_equation`].
pub fn change_variables(sys: &PdeSystem, tr: &PointTransformation) -> Result<PdeSystem> {
    if sys.space != tr.old {
        return Err(Error::Invalid(format!(
            "map {} does not act on this system's variables",
            tr.name
        )));
    }
    let new = &tr.new;
    let n = new.indep.len();
    let m: Vec<Vec<Rf>> = new
        .indep
        .iter()
        .map(|a| {
            (0..n)
                .map(|i| new.total_derivative(&tr.inverse[i].1, a))
                .collect()
        })
        .collect();
    let p = invert(&m).ok_or(Error::SingularJacobian)?;
    let mut old_jets = OldJets {
        tr,
        p,
        cache: HashMap::new(),
    };
    let mut eqs = Vec::new();
    for eq in &sys.equations {
        let mut b = bindings(&tr.inverse);
        for s in sys.space.jets_in(eq) {
            if s.order() > 0 {
                let v = old_jets.value(&s);
                b.insert(s, v);
            }
        }
        let r = eq.subs(&b)?;
        let c = clear_equation(&r);
        if c.is_zero() {
            return Err(Error::Invalid(format!(
                "equation {eq} vanishes identically under {}",
                tr.name
            )));
        }
        eqs.push(c);
    }
    Ok(sys.with_space(new.clone(), eqs))
}

struct OldJets<'a> {
    tr: &'a PointTransformation,
    p: Vec<Vec<Rf>>,
    cache: HashMap<Symbol, Rf>,
}

impl OldJets<'_> {
    /// `D^old_i F = Σ_a P[i][a] D^new_a F` with `P` the inverse Jacobian.
    fn d_old(&self, f: &Rf, i: usize) -> Rf {
        let new = &self.tr.new;
        Rf::sum(
            new.indep
                .iter()
                .enumerate()
                .filter(|(a, _)| !self.p[i][*a].is_zero())
                .map(|(a, x)| &self.p[i][a] * &new.total_derivative(f, x)),
        )
    }

    fn value(&mut self, s: &Symbol) -> Rf {
        if s.order() == 0 {
            return self
                .tr
                .inverse_of(s.base())
                .cloned()
                .unwrap_or_else(|| Rf::sym(s.clone()));
        }
        if let Some(v) = self.cache.get(s) {
            return v.clone();
        }
        let mut idx = s.idx().to_vec();
        let x = idx.pop().unwrap();
        let parent = self.value(&Symbol::jet(s.base(), idx));
        let i = self
            .tr
            .old
            .indep
            .iter()
            .position(|n| *n == x)
            .expect("jet index is an independent variable");
        let v = self.d_old(&parent, i);
        self.cache.insert(s.clone(), v.clone());
        v
    }
}

/// Interchanges independent and dependent variables pairwise.
pub fn hodograph(sys: &PdeSystem, pairs: &[(Name, Name)]) -> Result<PdeSystem> {
    change_variables(sys, &PointTransformation::swap(&sys.space, pairs)?)
}

/// True iff `v` annihilates every new coordinate except `translated`, on
/// which it evaluates to 1.
pub fn verify_canonical(v: &VectorField, tr: &PointTransformation, translated: &Name) -> bool {
    tr.forward.iter().all(|(n, f)| {
        let r = v.apply_point(f);
        if n == translated {
            r.is_one()
        } else {
            r.is_zero()
        }
    })
}

/// How one component of a field acts on its own coordinate.
#[derive(Clone, Debug)]
enum Shape {
    Fixed,
    /// `v(z) = g`, with `g` invariant.
    Shift(Rf),
    /// `v(z) = (z + c)·g`, with `g` invariant.
    Scale(Rf, Rf),
}

fn upper(n: &Name, taken: &[Name]) -> Name {
    let mut s: String = n.as_str().to_uppercase();
    while taken.iter().any(|t| t.as_str() == s) {
        s.push('1');
    }
    Name::new(&s)
}

/// Canonical coordinates for translations, scalings, their combinations and
/// fields like `u·e^t ∂u` whose coefficients depend only on invariant
/// coordinates. Returns the transformation and the translated new variable.
pub fn canonical_for(v: &VectorField, space: &JetSpace) -> Result<(PointTransformation, Name)> {
    let unsupported = || Error::UnsupportedGenerator(v.to_dsl());
    if !v.is_point(space) || v.is_zero() {
        return Err(unsupported());
    }
    let coords: Vec<Name> = space
        .indep
        .iter()
        .chain(space.deps.iter())
        .cloned()
        .collect();
    let fixed: Vec<Symbol> = coords
        .iter()
        .filter(|c| v.component(c).is_zero())
        .map(|c| Symbol::Var(c.clone()))
        .collect();
    let invariant = |e: &Rf| {
        e.symbols()
            .iter()
            .all(|s| fixed.contains(s) || !coords.contains(s.base()))
    };
    let mut shapes = Vec::new();
    for c in &coords {
        let comp = v.component(c);
        let z = Rf::sym(Symbol::Var(c.clone()));
        let shape = if comp.is_zero() {
            Shape::Fixed
        } else if invariant(&comp) {
            Shape::Shift(comp)
        } else {
            let zs = Symbol::Var(c.clone());
            let slope = comp.diff(&zs);
            if slope.is_zero() || !invariant(&slope) || !comp.diff(&zs).diff(&zs).is_zero() {
                return Err(unsupported());
            }
            let rest = &comp - &(&slope * &z);
            let off = rest.div(&slope)?;
            if !invariant(&off) {
                return Err(unsupported());
            }
            Shape::Scale(off, slope)
        };
        shapes.push(shape);
    }
    // Scalings first, then shifts; earlier coordinates win ties.
    let pivot = shapes
        .iter()
        .position(|s| matches!(s, Shape::Scale(..)))
        .or_else(|| shapes.iter().position(|s| matches!(s, Shape::Shift(_))))
        .ok_or_else(unsupported)?;
    let n = space.indep.len();
    let taken: Vec<Name> = coords.clone();
    let new_names: Vec<Name> = coords.iter().map(|c| upper(c, &taken)).collect();
    let z = |i: usize| Rf::sym(Symbol::Var(coords[i].clone()));
    let big = |i: usize| Rf::sym(Symbol::Var(new_names[i].clone()));

    // Slot assignment: if the pivot is independent, the first dependent moves
    // into its slot and the pivot becomes that dependent's new variable.
    let mut source: Vec<usize> = (0..coords.len()).collect();
    if pivot < n {
        source.swap(pivot, n);
    }
    // Invariant coordinates inside coefficients, renamed to their new slot.
    let rename: BTreeMap<Symbol, Rf> = source
        .iter()
        .enumerate()
        .map(|(slot, &k)| (Symbol::Var(coords[k].clone()), big(slot)))
        .collect();
    let dep_slot = source.iter().position(|&s| s == pivot).unwrap();

    let u_expr = match &shapes[pivot] {
        Shape::Shift(g) => z(pivot).div(g)?,
        Shape::Scale(c, g) => Rf::ln(&(&z(pivot) + c))?.div(g)?,
        Shape::Fixed => unreachable!(),
    };
    let u_name = new_names[dep_slot].clone();
    let u_new = big(dep_slot);
    let mut forward = Vec::new();
    let mut inverse_vals: Vec<Rf> = vec![Rf::zero(); coords.len()];
    for (slot, &k) in source.iter().enumerate() {
        let name = new_names[slot].clone();
        if k == pivot {
            forward.push((name, u_expr.clone()));
            continue;
        }
        let f = match &shapes[k] {
            Shape::Fixed => z(k),
            Shape::Shift(g) => &z(k) - &(g * &u_expr),
            Shape::Scale(c, g) => &(&z(k) + c) * &Rf::exp(&(-&(g * &u_expr))),
        };
        forward.push((name, f));
    }
    // Inverse: the pivot from U, then the others from their invariants.
    for (slot, &k) in source.iter().enumerate() {
        let me = big(slot);
        let val = if k == pivot {
            match &shapes[k] {
                Shape::Shift(g) => &g.subs(&rename)? * &me,
                Shape::Scale(c, g) => &Rf::exp(&(&g.subs(&rename)? * &me)) - &c.subs(&rename)?,
                Shape::Fixed => unreachable!(),
            }
        } else {
            match &shapes[k] {
                Shape::Fixed => me,
                Shape::Shift(g) => &me + &(&g.subs(&rename)? * &u_new),
                Shape::Scale(c, g) => {
                    &(&me * &Rf::exp(&(&g.subs(&rename)? * &u_new))) - &c.subs(&rename)?
                }
            }
        };
        inverse_vals[k] = val;
    }
    let inverse: Vec<(Name, Rf)> = coords.iter().cloned().zip(inverse_vals).collect();
    let tr = PointTransformation::new(&format!("canonical {}", v.name), space, forward, inverse)?;
    tr.check_inverse()?;
    if !verify_canonical(v, &tr, &u_name) {
        return Err(unsupported());
    }
    Ok((tr, u_name))
}
