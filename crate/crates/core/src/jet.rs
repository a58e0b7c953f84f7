//! Jet coordinates, total derivatives and reduction modulo solved equations.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::expr::{AtomKind, Name, Rf, Symbol};

/// Independent and dependent variable names of a system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetSpace {
    pub indep: Vec<Name>,
    pub deps: Vec<Name>,
}

impl JetSpace {
    pub fn new<S: AsRef<str>>(indep: &[S], deps: &[S]) -> Self {
        JetSpace {
            indep: indep.iter().map(|s| Name::new(s.as_ref())).collect(),
            deps: deps.iter().map(|s| Name::new(s.as_ref())).collect(),
        }
    }

    pub fn is_indep(&self, n: &Name) -> bool {
        self.indep.contains(n)
    }

    pub fn dep_index(&self, n: &Name) -> Option<usize> {
        self.deps.iter().position(|d| d == n)
    }

    /// True for `u` and `u_J` with `u` dependent.
    pub fn is_jet(&self, s: &Symbol) -> bool {
        self.dep_index(s.base()).is_some()
    }

    pub fn indep_symbol(&self, i: usize) -> Symbol {
        Symbol::Var(self.indep[i].clone())
    }

    pub fn dep_symbol(&self, k: usize) -> Symbol {
        Symbol::Var(self.deps[k].clone())
    }

    pub fn total_derivative(&self, e: &Rf, x: &Name) -> Rf {
        e.derive(&|s: &Symbol| match s {
            Symbol::Var(n) if n == x => Rf::one(),
            _ if self.is_jet(s) => Rf::sym(s.differentiate(x)),
            _ => Rf::zero(),
        })
    }

    /// `D^J e` for a multi-index given as a list of independent names.
    pub fn total_derivative_multi(&self, e: &Rf, idx: &[Name]) -> Rf {
        idx.iter()
            .fold(e.clone(), |acc, x| self.total_derivative(&acc, x))
    }

    /// Variational derivative `E_u(e) = Σ_J (-D)_J ∂e/∂u_J` over the jets of `u`
    /// present in `e`.
    pub fn euler_operator(&self, e: &Rf, u: &Name) -> Rf {
        let terms = self
            .jets_in(e)
            .into_iter()
            .filter(|s| s.base() == u)
            .map(|s| {
                let d = self.total_derivative_multi(&e.diff(&s), s.idx());
                if s.order() % 2 == 1 {
                    -&d
                } else {
                    d
                }
            });
        Rf::sum(terms)
    }

    /// Every jet symbol occurring in `e`, including inside function arguments.
    pub fn jets_in(&self, e: &Rf) -> BTreeSet<Symbol> {
        e.symbols().into_iter().filter(|s| self.is_jet(s)).collect()
    }

    pub fn order_of(&self, e: &Rf) -> usize {
        self.jets_in(e).iter().map(Symbol::order).max().unwrap_or(0)
    }

    /// All multi-indices of exactly `order` entries, sorted.
    pub fn multi_indices(&self, order: usize) -> Vec<Vec<Name>> {
        fn rec(
            n: &[Name],
            start: usize,
            left: usize,
            cur: &mut Vec<Name>,
            out: &mut Vec<Vec<Name>>,
        ) {
            if left == 0 {
                let mut c = cur.clone();
                c.sort();
                out.push(c);
                return;
            }
            for i in start..n.len() {
                cur.push(n[i].clone());
                rec(n, i, left - 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(&self.indep, 0, order, &mut Vec::new(), &mut out);
        out.sort();
        out.dedup();
        out
    }

    /// Ranking on jet symbols; `Greater` means higher rank.
    ///
    /// Earlier-declared dependents dominate; within one dependent, derivatives in
    /// later-declared independents weigh more (evolution variable last), then
    /// total order.
    pub fn rank_cmp(&self, a: &Symbol, b: &Symbol) -> Ordering {
        let da = self.dep_index(a.base()).unwrap_or(usize::MAX);
        let db = self.dep_index(b.base()).unwrap_or(usize::MAX);
        db.cmp(&da)
            .then_with(|| {
                for x in self.indep.iter().rev() {
                    match a.count(x).cmp(&b.count(x)) {
                        Ordering::Equal => {}
                        o => return o,
                    }
                }
                Ordering::Equal
            })
            .then_with(|| a.order().cmp(&b.order()))
    }

    /// True if `s` is `leader` differentiated zero or more times.
    pub fn is_derivative_of(s: &Symbol, leader: &Symbol) -> bool {
        s.base() == leader.base() && multiset_contains(s.idx(), leader.idx())
    }
}

fn multiset_contains(big: &[Name], small: &[Name]) -> bool {
    let mut counts: BTreeMap<&Name, i32> = BTreeMap::new();
    for n in big {
        *counts.entry(n).or_insert(0) += 1;
    }
    for n in small {
        let c = counts.entry(n).or_insert(0);
        *c -= 1;
        if *c < 0 {
            return false;
        }
    }
    true
}

/// Smallest multi-index containing both.
fn multiset_union(a: &[Name], b: &[Name]) -> Vec<Name> {
    let mut out = a.to_vec();
    out.extend(multiset_minus(b, a));
    out.sort();
    out
}

fn multiset_minus(big: &[Name], small: &[Name]) -> Vec<Name> {
    let mut rest = big.to_vec();
    for n in small {
        if let Some(i) = rest.iter().position(|m| m == n) {
            rest.remove(i);
        }
    }
    rest
}

fn is_exponential(a: &crate::expr::Atom) -> bool {
    match &**a {
        AtomKind::Exp(_) => true,
        AtomKind::Root { base, .. } => base
            .as_single_atom()
            .is_some_and(|b| matches!(&*b, AtomKind::Exp(_))),
        _ => false,
    }
}

/// Numerator of `e = 0` with factors that never vanish removed: denominators,
/// exponential atoms, negative powers and rational content. The result has a
/// positive leading coefficient.
pub fn clear_equation(e: &Rf) -> Rf {
    let num = e.num();
    if num.is_zero() {
        return Rf::zero();
    }
    let content = num.monomial_content();
    let strip: Vec<(crate::expr::Atom, i32)> = content
        .factors()
        .iter()
        .filter(|(a, k)| is_exponential(a) || *k < 0)
        .cloned()
        .collect();
    let (_, m) = crate::expr::Monomial::from_factors(strip);
    let p = num.mul_monomial(&m.inv());
    let mut c = p.rational_content();
    if p.is_negative_leading() {
        c = -c;
    }
    Rf::from_poly(p.scale(&c.recip()))
}

/// Bound on integrability-condition rounds in [`PdeSystem::prepare`].
const MAX_COMPLETION_ROUNDS: usize = 4;

/// A leading jet and the expression it equals on solutions.
#[derive(Clone, Debug, PartialEq)]
pub struct Solved {
    pub leader: Symbol,
    pub rhs: Rf,
}

/// A system of equations `eq = 0` over a jet space.
#[derive(Clone, Debug)]
pub struct PdeSystem {
    pub space: JetSpace,
    pub equations: Vec<Rf>,
    /// Symbols that are neither variables nor jets (constants such as `lambda`).
    pub params: Vec<Name>,
    /// Declared opaque functions with their arities.
    pub funcs: Vec<(Name, usize)>,
    solved: Vec<Solved>,
    implicit: Vec<Rf>,
}

impl PartialEq for PdeSystem {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space && self.equations == other.equations
    }
}

/// Splits `num = a·s + b` when `num` is affine in the atom of `s`.
pub fn affine_in(e: &Rf, s: &Symbol) -> Option<(Rf, Rf)> {
    let atom = crate::expr::sym_atom(s.clone());
    if e.den()
        .iter()
        .any(|(f, _)| f.atoms().iter().any(|a| deep_mentions(a, s)))
    {
        return None;
    }
    for a in e.num().atoms() {
        if a != atom && deep_mentions(&a, s) {
            return None;
        }
    }
    let (lo, hi) = e.num().degree_range(&atom);
    if lo < 0 || hi != 1 {
        return None;
    }
    let parts = e.num().split_by(&|b| *b == atom);
    let mut a = Rf::zero();
    let mut b = Rf::zero();
    for (m, p) in parts {
        if m.is_one() {
            b = Rf::from_poly(p);
        } else {
            a = Rf::from_poly(p);
        }
    }
    let den = Rf::from_parts(crate::expr::Poly::one(), e.den().to_vec()).ok()?;
    Some((&a * &den, &b * &den))
}

fn deep_mentions(a: &crate::expr::Atom, s: &Symbol) -> bool {
    match &**a {
        AtomKind::Sym(t) => t == s,
        _ => Rf::atom(a.clone()).symbols().contains(s),
    }
}

impl PdeSystem {
    pub fn new(space: JetSpace, equations: Vec<Rf>) -> Self {
        PdeSystem {
            space,
            equations,
            params: Vec::new(),
            funcs: Vec::new(),
            solved: Vec::new(),
            implicit: Vec::new(),
        }
    }

    pub fn with_decls(mut self, params: Vec<Name>, funcs: Vec<(Name, usize)>) -> Self {
        self.params = params;
        self.funcs = funcs;
        self
    }

    /// Number of equations `s` and dependent variables `m`.
    pub fn shape(&self) -> (usize, usize) {
        (self.equations.len(), self.space.deps.len())
    }

    pub fn solved(&self) -> &[Solved] {
        &self.solved
    }

    /// Equations kept in implicit form after [`PdeSystem::prepare`].
    pub fn implicit(&self) -> &[Rf] {
        &self.implicit
    }

    pub fn is_prepared(&self) -> bool {
        !self.solved.is_empty() || !self.implicit.is_empty() || self.equations.is_empty()
    }

    pub fn order(&self) -> usize {
        self.equations
            .iter()
            .map(|e| self.space.order_of(e))
            .max()
            .unwrap_or(0)
    }

    /// Solves every equation for its highest-ranked jet, failing if any
    /// equation is not affine in it.
    pub fn solve_leading(&self) -> Result<PdeSystem> {
        let p = self.prepare();
        if let Some(e) = p.implicit.first() {
            return Err(Error::NotSolvable(format!(
                "{e} is not affine in its leading derivative"
            )));
        }
        Ok(p)
    }

    /// Like [`PdeSystem::solve_leading`], keeping unsolvable equations implicit.
    pub fn prepare(&self) -> PdeSystem {
        let mut solved: Vec<Solved> = Vec::new();
        let mut implicit: Vec<Rf> = Vec::new();
        let mut queue: Vec<Rf> = self.equations.clone();
        queue.reverse();
        let mut checked: Vec<(Symbol, Symbol)> = Vec::new();
        let mut rounds = 0;
        loop {
            while let Some(eq) = queue.pop() {
                let tmp = self.with_solved(solved.clone(), Vec::new());
                let r = tmp.reduce(&eq);
                if r.is_zero() {
                    continue;
                }
                let Some(leader) = self
                    .space
                    .jets_in(&r)
                    .into_iter()
                    .max_by(|a, b| self.space.rank_cmp(a, b))
                else {
                    implicit.push(r);
                    continue;
                };
                let Some((a, b)) = affine_in(&r, &leader) else {
                    implicit.push(r);
                    continue;
                };
                let Ok(rhs) = (-&b).div(&a) else {
                    implicit.push(r);
                    continue;
                };
                let mut keep = Vec::new();
                for s in solved.drain(..) {
                    if PdeSystem::is_derivative_of_leader(&s.leader, &leader) {
                        queue.push(&Rf::sym(s.leader.clone()) - &s.rhs);
                    } else {
                        keep.push(s);
                    }
                }
                let single = self.with_solved(
                    vec![Solved {
                        leader: leader.clone(),
                        rhs: rhs.clone(),
                    }],
                    Vec::new(),
                );
                for s in keep.iter_mut() {
                    s.rhs = single.reduce(&s.rhs);
                }
                keep.push(Solved { leader, rhs });
                solved = keep;
            }
            if rounds < MAX_COMPLETION_ROUNDS {
                rounds += 1;
                let tmp = self.with_solved(solved.clone(), Vec::new());
                for (a, b) in solved
                    .iter()
                    .enumerate()
                    .flat_map(|(i, a)| solved[i + 1..].iter().map(move |b| (a, b)))
                {
                    let key = (a.leader.clone(), b.leader.clone());
                    if a.leader.base() != b.leader.base() || checked.contains(&key) {
                        continue;
                    }
                    checked.push(key);
                    let lcm = multiset_union(a.leader.idx(), b.leader.idx());
                    let da = self
                        .space
                        .total_derivative_multi(&a.rhs, &multiset_minus(&lcm, a.leader.idx()));
                    let db = self
                        .space
                        .total_derivative_multi(&b.rhs, &multiset_minus(&lcm, b.leader.idx()));
                    let c = tmp.reduce(&(&da - &db));
                    if !c.is_zero() {
                        queue.push(c);
                    }
                }
            }
            if queue.is_empty() {
                break;
            }
        }
        let base = self.with_solved(solved.clone(), Vec::new());
        let implicit = implicit
            .into_iter()
            .map(|e| base.reduce(&e))
            .filter(|e| !e.is_zero())
            .collect();
        self.with_solved(solved, implicit)
    }

    fn is_derivative_of_leader(s: &Symbol, leader: &Symbol) -> bool {
        JetSpace::is_derivative_of(s, leader)
    }

    fn with_solved(&self, solved: Vec<Solved>, implicit: Vec<Rf>) -> PdeSystem {
        PdeSystem {
            solved,
            implicit,
            ..self.clone()
        }
    }

    /// Representative of `e` on the solution manifold: every derivative of a
    /// solved leader is replaced by the matching derivative of its solved form.
    pub fn reduce(&self, e: &Rf) -> Rf {
        Reducer::new(self).reduce(e)
    }

    pub fn reducer(&self) -> Reducer<'_> {
        Reducer::new(self)
    }

    /// Replaces the system's equations, dropping any solved forms.
    pub fn with_equations(&self, equations: Vec<Rf>) -> PdeSystem {
        PdeSystem {
            equations,
            solved: Vec::new(),
            implicit: Vec::new(),
            ..self.clone()
        }
    }

    pub fn with_space(&self, space: JetSpace, equations: Vec<Rf>) -> PdeSystem {
        PdeSystem {
            space,
            equations,
            solved: Vec::new(),
            implicit: Vec::new(),
            ..self.clone()
        }
    }

    /// Substitutes an opaque function by `λ params. body` in every equation.
    pub fn instantiate(&self, name: &str, params: &[&str], body: &Rf) -> Result<PdeSystem> {
        let ps: Vec<Symbol> = params.iter().map(|p| Symbol::var(p)).collect();
        let n = Name::new(name);
        let eqs = self
            .equations
            .iter()
            .map(|e| e.subs_func(&n, &ps, body))
            .collect::<Result<Vec<_>>>()?;
        let mut out = self.with_equations(eqs);
        out.funcs.retain(|(f, _)| *f != n);
        Ok(out)
    }
}

/// Memoizing manifold reduction.
pub struct Reducer<'a> {
    sys: &'a PdeSystem,
    cache: HashMap<Symbol, Option<Rf>>,
}

impl<'a> Reducer<'a> {
    pub fn new(sys: &'a PdeSystem) -> Self {
        Reducer {
            sys,
            cache: HashMap::new(),
        }
    }

    fn leader_for(&self, s: &Symbol) -> Option<&'a Solved> {
        self.sys
            .solved
            .iter()
            .filter(|l| JetSpace::is_derivative_of(s, &l.leader))
            .max_by_key(|l| l.leader.order())
    }

    fn jet_value(&mut self, s: &Symbol) -> Option<Rf> {
        if let Some(v) = self.cache.get(s) {
            return v.clone();
        }
        let v = self.leader_for(s).map(|l| {
            if *s == l.leader {
                self.reduce(&l.rhs)
            } else {
                let rest = multiset_minus(s.idx(), l.leader.idx());
                let x = rest.last().unwrap().clone();
                let mut idx = s.idx().to_vec();
                let pos = idx.iter().position(|n| *n == x).unwrap();
                idx.remove(pos);
                let prev = Symbol::jet(s.base(), idx);
                let pv = self
                    .jet_value(&prev)
                    .expect("prefix of a leader derivative is reducible");
                let d = self.sys.space.total_derivative(&pv, &x);
                self.reduce(&d)
            }
        });
        self.cache.insert(s.clone(), v.clone());
        v
    }

    pub fn reduce(&mut self, e: &Rf) -> Rf {
        if self.sys.solved.is_empty() {
            return e.clone();
        }
        let mut bind = BTreeMap::new();
        for s in self.sys.space.jets_in(e) {
            if let Some(v) = self.jet_value(&s) {
                bind.insert(s, v);
            }
        }
        if bind.is_empty() {
            return e.clone();
        }
        e.subs(&bind)
            .expect("solved forms keep denominators nonzero")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_rf;

    fn sys(indep: &[&str], deps: &[&str], eqs: &[&str]) -> PdeSystem {
        PdeSystem::new(
            JetSpace::new(indep, deps),
            eqs.iter().map(|e| parse_rf(e).unwrap()).collect(),
        )
    }

    #[test]
    fn total_derivative_chain_rule() {
        let j = JetSpace::new(&["x", "t"], &["u"]);
        let d = j.total_derivative(&parse_rf("Q(u)").unwrap(), &Name::new("x"));
        assert_eq!(d, parse_rf("Q'(u)*u_x").unwrap());
    }

    #[test]
    fn heat_leader_is_time_derivative() {
        let s = sys(&["x", "t"], &["u"], &["u_t - u_xx - Q(u)"])
            .solve_leading()
            .unwrap();
        assert_eq!(s.solved()[0].leader, Symbol::parse_name("u_t"));
        assert_eq!(s.solved()[0].rhs, parse_rf("u_xx + Q(u)").unwrap());
    }

    #[test]
    fn algebraic_leader_reduces_earlier_equation() {
        let s = sys(&["u", "t"], &["w", "v"], &["w_u - v_t", "w - v_u/v^2"]).prepare();
        let leaders: Vec<String> = s.solved().iter().map(|l| l.leader.to_string()).collect();
        assert!(leaders.contains(&"w".to_string()), "{leaders:?}");
        assert!(leaders.contains(&"v_t".to_string()), "{leaders:?}");
    }
}
