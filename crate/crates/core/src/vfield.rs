//! Point-symmetry generators, their prolongation and the invariance test.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::expr::{Name, Rf, Symbol};
use crate::jet::{JetSpace, PdeSystem};

/// `X = Σ ξ^i ∂/∂x^i + Σ η^k ∂/∂u^k`; missing components are zero.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct VectorField {
    pub name: String,
    pub xi: BTreeMap<Name, Rf>,
    pub eta: BTreeMap<Name, Rf>,
}

impl VectorField {
    pub fn new(name: &str) -> Self {
        VectorField {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn with_xi(mut self, x: &str, c: Rf) -> Self {
        self.set_xi(&Name::new(x), c);
        self
    }

    pub fn with_eta(mut self, u: &str, c: Rf) -> Self {
        self.set_eta(&Name::new(u), c);
        self
    }

    pub fn set_xi(&mut self, x: &Name, c: Rf) {
        if c.is_zero() {
            self.xi.remove(x);
        } else {
            self.xi.insert(x.clone(), c);
        }
    }

    pub fn set_eta(&mut self, u: &Name, c: Rf) {
        if c.is_zero() {
            self.eta.remove(u);
        } else {
            self.eta.insert(u.clone(), c);
        }
    }

    /// Pure translation `∂/∂var` in whichever role `var` plays.
    pub fn translation(var: &Name, space: &JetSpace) -> Self {
        let mut v = VectorField::new(&format!("d_{var}"));
        if space.is_indep(var) {
            v.set_xi(var, Rf::one());
        } else {
            v.set_eta(var, Rf::one());
        }
        v
    }

    pub fn xi(&self, x: &Name) -> Rf {
        self.xi.get(x).cloned().unwrap_or_default()
    }

    pub fn eta(&self, u: &Name) -> Rf {
        self.eta.get(u).cloned().unwrap_or_default()
    }

    /// Component along any coordinate, independent or dependent.
    pub fn component(&self, n: &Name) -> Rf {
        self.xi
            .get(n)
            .or_else(|| self.eta.get(n))
            .cloned()
            .unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.xi.is_empty() && self.eta.is_empty()
    }

    /// Point fields never involve derivatives of the dependent variables.
    pub fn is_point(&self, space: &JetSpace) -> bool {
        self.xi
            .values()
            .chain(self.eta.values())
            .all(|c| space.jets_in(c).iter().all(|s| s.order() == 0))
    }

    /// The field as a first-order operator on point coordinates.
    pub fn apply_point(&self, e: &Rf) -> Rf {
        e.derive(&|s: &Symbol| match s {
            Symbol::Var(n) => self.component(n),
            _ => Rf::zero(),
        })
    }

    pub fn scale(&self, c: &Rf) -> VectorField {
        let mut out = VectorField::new(&self.name);
        for (k, v) in &self.xi {
            out.set_xi(k, v * c);
        }
        for (k, v) in &self.eta {
            out.set_eta(k, v * c);
        }
        out
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        let mut out = self.clone();
        for (k, v) in &other.xi {
            out.set_xi(k, &out.xi(k) + v);
        }
        for (k, v) in &other.eta {
            out.set_eta(k, &out.eta(k) + v);
        }
        out
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.add(&other.scale(&Rf::int(-1)))
    }

    /// Lie bracket `[self, other]` of point fields.
    pub fn bracket(&self, other: &VectorField) -> VectorField {
        let mut out = VectorField::new(&format!("[{},{}]", self.name, other.name));
        let keys: Vec<(Name, bool)> = self
            .xi
            .keys()
            .chain(other.xi.keys())
            .map(|k| (k.clone(), true))
            .chain(
                self.eta
                    .keys()
                    .chain(other.eta.keys())
                    .map(|k| (k.clone(), false)),
            )
            .collect();
        for (k, is_x) in keys {
            let c =
                &self.apply_point(&other.component(&k)) - &other.apply_point(&self.component(&k));
            if is_x {
                out.set_xi(&k, c);
            } else {
                out.set_eta(&k, c);
            }
        }
        out
    }

    /// Substitutes an opaque function inside every component.
    pub fn subs_func(
        &self,
        name: &Name,
        params: &[Symbol],
        body: &Rf,
    ) -> crate::Result<VectorField> {
        let mut out = VectorField::new(&self.name);
        for (k, v) in &self.xi {
            out.set_xi(k, v.subs_func(name, params, body)?);
        }
        for (k, v) in &self.eta {
            out.set_eta(k, v.subs_func(name, params, body)?);
        }
        Ok(out)
    }

    pub fn subs(&self, b: &BTreeMap<Symbol, Rf>) -> crate::Result<VectorField> {
        let mut out = VectorField::new(&self.name);
        for (k, v) in &self.xi {
            out.set_xi(k, v.subs(b)?);
        }
        for (k, v) in &self.eta {
            out.set_eta(k, v.subs(b)?);
        }
        Ok(out)
    }

    /// `xi_x = ...; eta_u = ...` in the generator DSL.
    pub fn to_dsl(&self) -> String {
        let mut parts: Vec<String> = self
            .xi
            .iter()
            .map(|(k, v)| format!("xi_{k} = {v}"))
            .collect();
        parts.extend(self.eta.iter().map(|(k, v)| format!("eta_{k} = {v}")));
        if parts.is_empty() {
            return "0".into();
        }
        parts.join("; ")
    }

    /// `ξ ∂_x + ...` with components in a fixed coordinate order.
    pub fn to_operator(&self, space: &JetSpace, latex: bool) -> String {
        let mut parts = Vec::new();
        let coords = space.indep.iter().chain(space.deps.iter());
        for c in coords {
            let v = self.component(c);
            if v.is_zero() {
                continue;
            }
            let s = if latex {
                crate::expr::print::to_latex(&v)
            } else {
                v.to_string()
            };
            let d = if latex {
                format!("\\partial_{{{c}}}")
            } else {
                format!("d_{c}")
            };
            if v.is_one() {
                parts.push(d);
            } else if v.num().len() > 1 || !v.den().is_empty() && v.num().len() > 1 {
                parts.push(format!("({s})*{d}"));
            } else {
                parts.push(format!("{s}*{d}"));
            }
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.to_dsl())
    }
}

/// A field extended to jet coordinates. Infinitesimals for jets beyond the
/// requested order are computed on demand.
#[derive(Debug)]
pub struct ProlongedField {
    pub base: VectorField,
    pub space: JetSpace,
    pub order: usize,
    ext: RefCell<HashMap<Symbol, Rf>>,
    dxi: RefCell<HashMap<(Name, Name), Rf>>,
}

pub fn prolong(v: &VectorField, order: usize, space: &JetSpace) -> ProlongedField {
    let p = ProlongedField {
        base: v.clone(),
        space: space.clone(),
        order,
        ext: RefCell::new(HashMap::new()),
        dxi: RefCell::new(HashMap::new()),
    };
    for k in 1..=order {
        for idx in space.multi_indices(k) {
            for u in &space.deps {
                p.eta_jet(&Symbol::jet(u, idx.clone()));
            }
        }
    }
    p
}

impl ProlongedField {
    fn d_xi(&self, i: &Name, j: &Name) -> Rf {
        if let Some(r) = self.dxi.borrow().get(&(i.clone(), j.clone())) {
            return r.clone();
        }
        let r = self.space.total_derivative(&self.base.xi(j), i);
        self.dxi
            .borrow_mut()
            .insert((i.clone(), j.clone()), r.clone());
        r
    }

    /// Extended infinitesimal `η^{k,J}`:
    /// `η^{J+i} = D_i η^J - Σ_j u_{J+j} D_i ξ^j`.
    pub fn eta_jet(&self, s: &Symbol) -> Rf {
        if s.order() == 0 {
            return self.base.eta(s.base());
        }
        if let Some(r) = self.ext.borrow().get(s) {
            return r.clone();
        }
        let mut idx = s.idx().to_vec();
        let i = idx.pop().unwrap();
        let parent = Symbol::jet(s.base(), idx);
        let pe = self.eta_jet(&parent);
        let mut terms = vec![self.space.total_derivative(&pe, &i)];
        for j in &self.space.indep {
            let dx = self.d_xi(&i, j);
            if dx.is_zero() {
                continue;
            }
            terms.push(-&(&Rf::sym(parent.differentiate(j)) * &dx));
        }
        let r = Rf::sum(terms);
        self.ext.borrow_mut().insert(s.clone(), r.clone());
        r
    }

    /// `pr X (e)`.
    pub fn apply(&self, e: &Rf) -> Rf {
        e.derive(&|s: &Symbol| match s {
            Symbol::Var(n) if self.space.is_indep(n) => self.base.xi(n),
            _ if self.space.is_jet(s) => self.eta_jet(s),
            _ => Rf::zero(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryVerdict {
    Yes,
    No,
    Undetermined,
}

impl fmt::Display for SymmetryVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymmetryVerdict::Yes => "yes",
            SymmetryVerdict::No => "no",
            SymmetryVerdict::Undetermined => "undetermined",
        })
    }
}

/// Residuals `pr X(eq)` reduced on the solution manifold, one per equation.
pub fn residuals(sys: &PdeSystem, v: &VectorField) -> Vec<Rf> {
    let prepared;
    let p = if sys.is_prepared() {
        sys
    } else {
        prepared = sys.prepare();
        &prepared
    };
    let pr = prolong(v, 0, &p.space);
    let mut red = p.reducer();
    sys.equations
        .iter()
        .map(|eq| red.reduce(&pr.apply(eq)))
        .collect()
}

pub fn is_symmetry(sys: &PdeSystem, v: &VectorField) -> SymmetryVerdict {
    let p = if sys.is_prepared() {
        sys.clone()
    } else {
        sys.prepare()
    };
    let mut verdict = SymmetryVerdict::Yes;
    for r in residuals(&p, v) {
        if r.is_zero() {
            continue;
        }
        if p.implicit().is_empty() {
            return SymmetryVerdict::No;
        }
        let divisible = p
            .implicit()
            .iter()
            .any(|g| r.num().div_exact(g.num()).is_some());
        if !divisible {
            verdict = SymmetryVerdict::Undetermined;
        }
    }
    verdict
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_rf;

    fn r(s: &str) -> Rf {
        parse_rf(s).unwrap()
    }

    #[test]
    fn scaling_prolongation() {
        let j = JetSpace::new(&["x", "t"], &["u"]);
        let v = VectorField::new("X3")
            .with_xi("x", r("x"))
            .with_xi("t", r("2*t"));
        let p = prolong(&v, 2, &j);
        assert_eq!(p.eta_jet(&Symbol::parse_name("u_x")), r("-u_x"));
        assert_eq!(p.eta_jet(&Symbol::parse_name("u_t")), r("-2*u_t"));
        assert_eq!(p.eta_jet(&Symbol::parse_name("u_xx")), r("-2*u_xx"));
    }

    #[test]
    fn bracket_of_translation_and_scaling() {
        let a = VectorField::new("a").with_xi("x", r("1"));
        let b = VectorField::new("b").with_xi("x", r("x"));
        assert_eq!(a.bracket(&b).xi(&Name::new("x")), r("1"));
    }
}
