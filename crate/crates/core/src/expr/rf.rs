use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::atom::{sym_atom, Atom, AtomKind, Name, Symbol};
use super::poly::{pow_q, q, Monomial, Poly, Q};
use crate::error::{Error, Result};

/// Rational function `num / Π f^k` over atoms.
///
/// Denominator factors are monic, carry no monomial content, are nonconstant and
/// sorted; monomial denominators live in the numerator as negative exponents.
/// Zero testing is exact; structural uniqueness holds up to the factorization
/// of the denominator, which is never refined beyond trial division.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rf {
    num: Poly,
    den: Vec<(Poly, u32)>,
}

/// Splits `p = c·m·f` with `f` monic and free of monomial content.
fn decompose(p: &Poly) -> (Q, Monomial, Poly) {
    let m = p.monomial_content();
    let f0 = if m.is_one() {
        p.clone()
    } else {
        p.mul_monomial(&m.inv())
    };
    let mut c = f0.rational_content();
    if f0.is_negative_leading() {
        c = -c;
    }
    let f = f0.scale(&c.recip());
    (c, m, f)
}

impl Rf {
    pub fn zero() -> Self {
        Rf::default()
    }

    pub fn one() -> Self {
        Rf::from_poly(Poly::one())
    }

    pub fn constant(c: Q) -> Self {
        Rf::from_poly(Poly::constant(c))
    }

    pub fn int(n: i64) -> Self {
        Rf::constant(q(n))
    }

    pub fn frac(n: i64, d: i64) -> Self {
        Rf::constant(super::poly::qf(n, d))
    }

    pub fn from_poly(p: Poly) -> Self {
        Rf {
            num: p,
            den: Vec::new(),
        }
    }

    pub fn atom(a: Atom) -> Self {
        Rf::from_poly(Poly::atom(a))
    }

    pub fn sym(s: Symbol) -> Self {
        Rf::atom(sym_atom(s))
    }

    /// A variable or jet symbol from its textual name (`u`, `u_tx`).
    pub fn var(name: &str) -> Self {
        Rf::sym(Symbol::parse_name(name))
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &[(Poly, u32)] {
        &self.den
    }

    /// Builds `num / Π den` from arbitrary nonzero factors.
    pub fn from_parts(num: Poly, den: Vec<(Poly, u32)>) -> Result<Self> {
        let mut num = num;
        let mut map: BTreeMap<Poly, u32> = BTreeMap::new();
        for (p, k) in den {
            if p.is_zero() {
                return Err(Error::ZeroDenominator);
            }
            if k == 0 {
                continue;
            }
            let (c, m, f) = decompose(&p);
            let (cm, mm) = m.pow(-(k as i32));
            num = num.mul_monomial(&mm).scale(&(pow_q(&c, -(k as i32)) * cm));
            if f.as_constant().is_none() {
                *map.entry(f).or_insert(0) += k;
            }
        }
        Ok(Rf::cancel(num, map))
    }

    fn cancel(mut num: Poly, den: BTreeMap<Poly, u32>) -> Self {
        if num.is_zero() {
            return Rf::zero();
        }
        let mut out = Vec::with_capacity(den.len());
        for (f, mut k) in den {
            while k > 0 {
                match num.div_exact(&f) {
                    Some(qt) => {
                        num = qt;
                        k -= 1;
                    }
                    None => break,
                }
            }
            if k > 0 {
                out.push((f, k));
            }
        }
        Rf { num, den: out }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_empty() && self.num == Poly::one()
    }

    pub fn as_constant(&self) -> Option<Q> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn as_poly(&self) -> Option<&Poly> {
        self.den.is_empty().then_some(&self.num)
    }

    /// The atom `a` when `self` is exactly `a`.
    pub fn as_single_atom(&self) -> Option<Atom> {
        if !self.den.is_empty() {
            return None;
        }
        let (m, c) = self.num.as_term()?;
        match m.factors() {
            [(a, 1)] if c.is_one() => Some(a.clone()),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<Symbol> {
        self.as_single_atom().and_then(|a| a.as_symbol().cloned())
    }

    /// Expanded denominator product.
    pub fn den_poly(&self) -> Poly {
        self.den
            .iter()
            .fold(Poly::one(), |acc, (f, k)| &acc * &f.pow(*k))
    }

    pub fn inv(&self) -> Result<Rf> {
        if self.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let (c, m, f) = decompose(&self.num);
        let num = self.den_poly().mul_monomial(&m.inv()).scale(&c.recip());
        let mut den = BTreeMap::new();
        if f.as_constant().is_none() {
            den.insert(f, 1);
        }
        Ok(Rf::cancel(num, den))
    }

    pub fn div(&self, other: &Rf) -> Result<Rf> {
        Ok(self * &other.inv()?)
    }

    pub fn scale(&self, c: &Q) -> Rf {
        if c.is_zero() {
            return Rf::zero();
        }
        Rf {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn powi(&self, k: i32) -> Result<Rf> {
        if k < 0 {
            return self.inv()?.powi(-k);
        }
        if k == 0 {
            return Ok(Rf::one());
        }
        let k = k as u32;
        let num = self.num.pow(k);
        let den: BTreeMap<Poly, u32> = self.den.iter().map(|(f, e)| (f.clone(), e * k)).collect();
        Ok(Rf::cancel(num, den))
    }

    /// Rational power. Fractional powers of monomials become root atoms of
    /// single atoms; other bases become one root atom of the whole base.
    pub fn pow(&self, r: &Q) -> Result<Rf> {
        if r.is_integer() {
            let k: i32 = r
                .to_integer()
                .try_into()
                .map_err(|_| Error::Invalid("exponent too large".into()))?;
            return self.powi(k);
        }
        if self.is_zero() {
            return if r.is_positive() {
                Ok(Rf::zero())
            } else {
                Err(Error::ZeroDenominator)
            };
        }
        if self.den.is_empty() {
            if let Some((m, c)) = self.num.as_term() {
                let mut acc = const_pow(c, r)?;
                for (a, e) in m.factors() {
                    acc = &acc * &atom_pow(a, &(r * q(*e as i64)))?;
                }
                return Ok(acc);
            }
        }
        let (c, m, f) = decompose(&self.num);
        let mut acc = const_pow(&c, r)?;
        for (a, e) in m.factors() {
            acc = &acc * &atom_pow(a, &(r * q(*e as i64)))?;
        }
        let base = Rf {
            num: f,
            den: self.den.clone(),
        };
        let d = r.denom().clone();
        let n = r.numer().clone();
        let (k, rem) = n.div_mod_floor(&d);
        let qd: u32 = d
            .try_into()
            .map_err(|_| Error::Invalid("root order too large".into()))?;
        let k: i32 = k
            .try_into()
            .map_err(|_| Error::Invalid("exponent too large".into()))?;
        let rem: i32 = rem.try_into().unwrap();
        let root = Arc::new(AtomKind::Root {
            base: base.clone(),
            q: qd,
        });
        acc = &acc * &base.powi(k)?;
        Ok(&acc * &Rf::from_poly(Poly::atom_pow(root, rem)))
    }

    pub fn sqrt(&self) -> Result<Rf> {
        self.pow(&super::poly::qf(1, 2))
    }

    /// Canonical exponential: additive arguments split into products.
    pub fn exp(arg: &Rf) -> Rf {
        if arg.den.is_empty() {
            let mut acc = Rf::one();
            for (m, c) in arg.num.terms() {
                let factor = match m.factors() {
                    [(a, 1)] if matches!(&**a, AtomKind::Ln(_)) => {
                        let AtomKind::Ln(b) = &**a else {
                            unreachable!()
                        };
                        b.pow(c).unwrap_or_else(|_| {
                            exp_atom_pow(Rf::from_poly(Poly::term(Q::one(), m.clone())), c)
                        })
                    }
                    _ => exp_atom_pow(Rf::from_poly(Poly::term(Q::one(), m.clone())), c),
                };
                acc = &acc * &factor;
            }
            return acc;
        }
        if arg.num.is_negative_leading() {
            let a = Arc::new(AtomKind::Exp(-arg));
            return Rf::from_poly(Poly::atom_pow(a, -1));
        }
        Rf::atom(Arc::new(AtomKind::Exp(arg.clone())))
    }

    /// Canonical logarithm: products split into sums; `ln(exp(M)) = M`.
    pub fn ln(arg: &Rf) -> Result<Rf> {
        if arg.is_zero() {
            return Err(Error::Invalid("logarithm of zero".into()));
        }
        let (c, m, f) = decompose(&arg.num);
        let mut terms = Vec::new();
        terms.extend(ln_constant(&c));
        for (a, e) in m.factors() {
            terms.push(ln_atom(a)?.scale(&q(*e as i64)));
        }
        if f.as_constant().is_none() {
            terms.push(Rf::atom(Arc::new(AtomKind::Ln(Rf::from_poly(f)))));
        }
        for (f, k) in &arg.den {
            terms.push(
                Rf::atom(Arc::new(AtomKind::Ln(Rf::from_poly(f.clone())))).scale(&q(-(*k as i64))),
            );
        }
        Ok(Rf::sum(terms))
    }

    pub fn atan(arg: &Rf) -> Rf {
        if arg.is_zero() {
            return Rf::zero();
        }
        if arg.num.is_negative_leading() {
            return -&Rf::atom(Arc::new(AtomKind::Atan(-arg)));
        }
        Rf::atom(Arc::new(AtomKind::Atan(arg.clone())))
    }

    pub fn func(name: &Name, derivs: Vec<u32>, args: Vec<Rf>) -> Rf {
        Rf::atom(Arc::new(AtomKind::Func {
            name: name.clone(),
            derivs,
            args,
        }))
    }

    /// `∫^arg body(var) d var`. Sums of terms `c·var^r` (`r ≠ -1`) and
    /// `c·exp(var)^r` are integrated in closed form.
    pub fn integral(body: &Rf, var: &Symbol, arg: &Rf) -> Result<Rf> {
        if let Some(p) = body.as_poly() {
            let at = BTreeMap::from([(var.clone(), arg.clone())]);
            let mut acc = Vec::new();
            for (m, c) in p.terms() {
                let term = Rf::from_poly(Poly::term(c.clone(), m.clone())).subs(&at)?;
                match term_rate(m, var) {
                    Some(Rate::Power(r)) if r != -Q::one() => {
                        acc.push((&term * arg).scale(&(r + Q::one()).recip()))
                    }
                    Some(Rate::Exp(r)) => acc.push(term.scale(&r.recip())),
                    _ => {
                        acc.clear();
                        break;
                    }
                }
            }
            if !acc.is_empty() {
                return Ok(Rf::sum(acc));
            }
        }
        Ok(Rf::atom(Arc::new(AtomKind::Integral {
            body: body.clone(),
            var: var.clone(),
            arg: arg.clone(),
        })))
    }

    /// Sum of many rational functions over one common denominator.
    pub fn sum<I: IntoIterator<Item = Rf>>(items: I) -> Rf {
        let items: Vec<Rf> = items.into_iter().filter(|r| !r.is_zero()).collect();
        if items.iter().all(|r| r.den.is_empty()) {
            let mut num = Poly::zero();
            for r in items {
                for (m, c) in r.num.into_terms() {
                    num.add_term(m, c);
                }
            }
            return Rf::from_poly(num);
        }
        let mut lcm: BTreeMap<Poly, u32> = BTreeMap::new();
        for r in &items {
            for (f, k) in &r.den {
                let e = lcm.entry(f.clone()).or_insert(0);
                *e = (*e).max(*k);
            }
        }
        let mut num = Poly::zero();
        for r in items {
            let have: BTreeMap<&Poly, u32> = r.den.iter().map(|(f, k)| (f, *k)).collect();
            let mut mult = Poly::one();
            for (f, k) in &lcm {
                let miss = k - have.get(f).copied().unwrap_or(0);
                if miss > 0 {
                    mult = &mult * &f.pow(miss);
                }
            }
            let t = if mult == Poly::one() {
                r.num
            } else {
                &r.num * &mult
            };
            for (m, c) in t.into_terms() {
                num.add_term(m, c);
            }
        }
        Rf::cancel(num, lcm)
    }

    pub fn product<I: IntoIterator<Item = Rf>>(items: I) -> Rf {
        items.into_iter().fold(Rf::one(), |a, b| &a * &b)
    }

    /// Every free symbol, including those nested inside atoms.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        for a in self.atoms() {
            atom_symbols(&a, out);
        }
    }

    /// Top-level atoms of numerator and denominator.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut s = self.num.atoms();
        for (f, _) in &self.den {
            s.extend(f.atoms());
        }
        s
    }

    /// Every atom at any nesting depth.
    pub fn atoms_deep(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        for a in self.atoms() {
            atom_deep(&a, &mut out);
        }
        out
    }

    pub fn depends_on(&self, s: &Symbol) -> bool {
        self.symbols().contains(s)
    }

    /// Derivation extending `d` from symbols to all atoms by the chain rule.
    pub fn derive(&self, d: &dyn Fn(&Symbol) -> Rf) -> Rf {
        let mut cache = HashMap::new();
        derive_rf(self, d, &mut cache)
    }

    pub fn diff(&self, s: &Symbol) -> Rf {
        self.derive(&|t: &Symbol| if t == s { Rf::one() } else { Rf::zero() })
    }

    /// Rebuilds the expression, replacing atoms for which `f` returns a value.
    /// Atoms not replaced are rebuilt from their mapped arguments.
    pub fn map_atoms(&self, f: &dyn Fn(&Atom) -> Option<Rf>) -> Result<Rf> {
        let mut cache = HashMap::new();
        map_rf(self, f, &mut cache)
    }

    /// Simultaneous substitution of symbols.
    pub fn subs(&self, bindings: &BTreeMap<Symbol, Rf>) -> Result<Rf> {
        if bindings.is_empty() {
            return Ok(self.clone());
        }
        self.map_atoms(&|a: &Atom| match &**a {
            AtomKind::Sym(s) => bindings.get(s).cloned(),
            _ => None,
        })
    }

    pub fn subs1(&self, s: &Symbol, v: &Rf) -> Result<Rf> {
        let mut b = BTreeMap::new();
        b.insert(s.clone(), v.clone());
        self.subs(&b)
    }

    /// Replaces the opaque function `name` by `λ params. body`, including its
    /// formal derivatives.
    pub fn subs_func(&self, name: &Name, params: &[Symbol], body: &Rf) -> Result<Rf> {
        self.map_atoms(&|a: &Atom| match &**a {
            AtomKind::Func {
                name: n,
                derivs,
                args,
            } if n == name && args.len() == params.len() => instantiate(params, body, derivs, args),
            _ => None,
        })
    }

    /// Opaque functions appearing anywhere, by name.
    pub fn func_names(&self) -> BTreeSet<Name> {
        self.atoms_deep()
            .into_iter()
            .filter_map(|a| match &*a {
                AtomKind::Func { name, .. } => Some(name.clone()),
                _ => None,
            })
            .collect()
    }
}

fn instantiate(params: &[Symbol], body: &Rf, derivs: &[u32], args: &[Rf]) -> Option<Rf> {
    let mut b = body.clone();
    for (p, k) in params.iter().zip(derivs) {
        for _ in 0..*k {
            b = b.diff(p);
        }
    }
    let bind: BTreeMap<Symbol, Rf> = params.iter().cloned().zip(args.iter().cloned()).collect();
    b.subs(&bind).ok()
}

fn const_pow(c: &Q, r: &Q) -> Result<Rf> {
    if r.is_integer() {
        let k: i32 = r
            .to_integer()
            .try_into()
            .map_err(|_| Error::Invalid("exponent too large".into()))?;
        return Ok(Rf::constant(pow_q(c, k)));
    }
    if c.is_one() {
        return Ok(Rf::one());
    }
    let d: u32 = r
        .denom()
        .clone()
        .try_into()
        .map_err(|_| Error::Invalid("root order too large".into()))?;
    let n: i32 = r
        .numer()
        .clone()
        .try_into()
        .map_err(|_| Error::Invalid("exponent too large".into()))?;
    if c.is_negative() {
        if d.is_multiple_of(2) {
            return Err(Error::Invalid("even root of a negative constant".into()));
        }
        let s = if n % 2 == 0 { Q::one() } else { -Q::one() };
        return Ok(const_pow(&-c, r)?.scale(&s));
    }
    let rn = c.numer().nth_root(d);
    let rd = c.denom().nth_root(d);
    if num_traits::pow(rn.clone(), d as usize) == *c.numer()
        && num_traits::pow(rd.clone(), d as usize) == *c.denom()
    {
        return Ok(Rf::constant(pow_q(&Q::new(rn, rd), n)));
    }
    let root = Arc::new(AtomKind::Root {
        base: Rf::constant(c.clone()),
        q: d,
    });
    let (k, m) = Monomial::from_factors(vec![(root, n)]);
    Ok(Rf::from_poly(Poly::term(k, m)))
}

/// `a^r` for one atom.
fn atom_pow(a: &Atom, r: &Q) -> Result<Rf> {
    match &**a {
        AtomKind::Exp(m) => Ok(Rf::exp(&m.scale(r))),
        AtomKind::Root { base, q: qq } => base.pow(&(r / q(*qq as i64))),
        _ => Ok(root_pow(a.clone(), r)),
    }
}

fn root_pow(a: Atom, r: &Q) -> Rf {
    if r.is_integer() {
        let k: i32 = r.to_integer().try_into().unwrap_or(i32::MAX);
        return Rf::from_poly(Poly::atom_pow(a, k));
    }
    let d: u32 = r.denom().clone().try_into().unwrap_or(u32::MAX);
    let n: i32 = r.numer().clone().try_into().unwrap_or(i32::MAX);
    let root = Arc::new(AtomKind::Root {
        base: Rf::atom(a),
        q: d,
    });
    let (k, m) = Monomial::from_factors(vec![(root, n)]);
    Rf::from_poly(Poly::term(k, m))
}

/// `exp(m)^c` for a monomial argument `m` with unit coefficient.
fn exp_atom_pow(m: Rf, c: &Q) -> Rf {
    if m.is_one() && c.is_zero() {
        return Rf::one();
    }
    root_pow(Arc::new(AtomKind::Exp(m)), c)
}

fn ln_atom(a: &Atom) -> Result<Rf> {
    match &**a {
        AtomKind::Exp(m) => Ok(m.clone()),
        AtomKind::Root { base, q: qq } => Ok(Rf::ln(base)?.scale(&super::poly::qf(1, *qq as i64))),
        _ => Ok(Rf::atom(Arc::new(AtomKind::Ln(Rf::atom(a.clone()))))),
    }
}

fn atom_symbols(a: &Atom, out: &mut BTreeSet<Symbol>) {
    match &**a {
        AtomKind::Sym(s) => {
            out.insert(s.clone());
        }
        AtomKind::Func { args, .. } => args.iter().for_each(|r| r.collect_symbols(out)),
        AtomKind::Exp(r) | AtomKind::Ln(r) | AtomKind::Atan(r) => r.collect_symbols(out),
        AtomKind::Root { base, .. } => base.collect_symbols(out),
        AtomKind::Integral { body, var, arg } => {
            let mut inner = BTreeSet::new();
            body.collect_symbols(&mut inner);
            inner.remove(var);
            out.extend(inner);
            arg.collect_symbols(out);
        }
    }
}

fn atom_deep(a: &Atom, out: &mut BTreeSet<Atom>) {
    if !out.insert(a.clone()) {
        return;
    }
    let mut visit = |r: &Rf| {
        for b in r.atoms() {
            atom_deep(&b, out);
        }
    };
    match &**a {
        AtomKind::Sym(_) => {}
        AtomKind::Func { args, .. } => args.iter().for_each(visit),
        AtomKind::Exp(r) | AtomKind::Ln(r) | AtomKind::Atan(r) => visit(r),
        AtomKind::Root { base, .. } => visit(base),
        AtomKind::Integral { body, arg, .. } => {
            visit(body);
            visit(arg);
        }
    }
}

type DCache = HashMap<Atom, Rf>;

fn derive_atom(a: &Atom, d: &dyn Fn(&Symbol) -> Rf, cache: &mut DCache) -> Rf {
    if let Some(r) = cache.get(a) {
        return r.clone();
    }
    let r = match &**a {
        AtomKind::Sym(s) => d(s),
        AtomKind::Func { name, derivs, args } => {
            let mut terms = Vec::new();
            for (i, arg) in args.iter().enumerate() {
                let da = derive_rf(arg, d, cache);
                if da.is_zero() {
                    continue;
                }
                let mut nd = derivs.clone();
                nd[i] += 1;
                terms.push(&Rf::func(name, nd, args.clone()) * &da);
            }
            Rf::sum(terms)
        }
        AtomKind::Exp(m) => {
            let dm = derive_rf(m, d, cache);
            &Rf::atom(a.clone()) * &dm
        }
        AtomKind::Ln(b) => {
            let db = derive_rf(b, d, cache);
            if db.is_zero() {
                Rf::zero()
            } else {
                db.div(b).expect("logarithm argument is nonzero")
            }
        }
        AtomKind::Atan(b) => {
            let db = derive_rf(b, d, cache);
            if db.is_zero() {
                Rf::zero()
            } else {
                let den = &Rf::one() + &(b * b);
                db.div(&den).expect("1 + b^2 is nonzero")
            }
        }
        AtomKind::Root { base, q: qq } => {
            let db = derive_rf(base, d, cache);
            if db.is_zero() {
                Rf::zero()
            } else {
                let r = &Rf::atom(a.clone()) * &db;
                r.div(base)
                    .expect("root base is nonzero")
                    .scale(&super::poly::qf(1, *qq as i64))
            }
        }
        AtomKind::Integral { body, var, arg } => {
            let da = derive_rf(arg, d, cache);
            if da.is_zero() {
                Rf::zero()
            } else {
                let b = body
                    .subs1(var, arg)
                    .expect("integrand defined at its argument");
                &b * &da
            }
        }
    };
    cache.insert(a.clone(), r.clone());
    r
}

fn derive_poly(p: &Poly, d: &dyn Fn(&Symbol) -> Rf, cache: &mut DCache) -> Rf {
    let mut terms = Vec::new();
    for a in p.atoms() {
        let da = derive_atom(&a, d, cache);
        if da.is_zero() {
            continue;
        }
        let pa = Rf::from_poly(p.partial_atom(&a));
        terms.push(&pa * &da);
    }
    Rf::sum(terms)
}

fn derive_rf(r: &Rf, d: &dyn Fn(&Symbol) -> Rf, cache: &mut DCache) -> Rf {
    let dn = derive_poly(&r.num, d, cache);
    if r.den.is_empty() {
        return dn;
    }
    let mut terms = vec![
        Rf {
            num: Poly::one(),
            den: r.den.clone(),
        } * dn,
    ];
    for (i, (f, k)) in r.den.iter().enumerate() {
        let df = derive_poly(f, d, cache);
        if df.is_zero() {
            continue;
        }
        let mut den = r.den.clone();
        den[i].1 += 1;
        let t = Rf {
            num: r.num.scale(&q(-(*k as i64))),
            den,
        };
        terms.push(&t * &df);
    }
    Rf::sum(terms)
}

type MCache = HashMap<Atom, Option<Rf>>;

fn map_atom(a: &Atom, f: &dyn Fn(&Atom) -> Option<Rf>, cache: &mut MCache) -> Result<Option<Rf>> {
    if let Some(r) = cache.get(a) {
        return Ok(r.clone());
    }
    let r = if let Some(r) = f(a) {
        Some(r)
    } else {
        match &**a {
            AtomKind::Sym(_) => None,
            AtomKind::Func { name, derivs, args } => {
                let mut changed = false;
                let mut nargs = Vec::with_capacity(args.len());
                for x in args {
                    let y = map_rf(x, f, cache)?;
                    changed |= y != *x;
                    nargs.push(y);
                }
                changed.then(|| Rf::func(name, derivs.clone(), nargs))
            }
            AtomKind::Exp(m) => {
                let y = map_rf(m, f, cache)?;
                (y != *m).then(|| Rf::exp(&y))
            }
            AtomKind::Ln(m) => {
                let y = map_rf(m, f, cache)?;
                if y != *m {
                    Some(Rf::ln(&y)?)
                } else {
                    None
                }
            }
            AtomKind::Atan(m) => {
                let y = map_rf(m, f, cache)?;
                (y != *m).then(|| Rf::atan(&y))
            }
            AtomKind::Root { base, q: qq } => {
                let y = map_rf(base, f, cache)?;
                if y != *base {
                    Some(y.pow(&super::poly::qf(1, *qq as i64))?)
                } else {
                    None
                }
            }
            AtomKind::Integral { body, var, arg } => {
                let guard = |b: &Atom| match &**b {
                    AtomKind::Sym(s) if s == var => None,
                    _ => f(b),
                };
                let nb = body.map_atoms(&guard)?;
                let na = map_rf(arg, f, cache)?;
                if nb != *body || na != *arg {
                    Some(Rf::integral(&nb, var, &na)?)
                } else {
                    None
                }
            }
        }
    };
    cache.insert(a.clone(), r.clone());
    Ok(r)
}

fn map_poly(p: &Poly, f: &dyn Fn(&Atom) -> Option<Rf>, cache: &mut MCache) -> Result<Option<Rf>> {
    let mut any = false;
    let mut images: HashMap<Atom, Rf> = HashMap::new();
    for a in p.atoms() {
        if let Some(r) = map_atom(&a, f, cache)? {
            any = true;
            images.insert(a, r);
        }
    }
    if !any {
        return Ok(None);
    }
    let mut terms = Vec::with_capacity(p.len());
    for (m, c) in p.terms() {
        let mut keep = Vec::new();
        let mut acc = Rf::one();
        for (a, e) in m.factors() {
            match images.get(a) {
                Some(r) => acc = &acc * &r.powi(*e)?,
                None => keep.push((a.clone(), *e)),
            }
        }
        let (k, mm) = Monomial::from_factors(keep);
        terms.push(&acc * &Rf::from_poly(Poly::term(c * k, mm)));
    }
    Ok(Some(Rf::sum(terms)))
}

fn map_rf(r: &Rf, f: &dyn Fn(&Atom) -> Option<Rf>, cache: &mut MCache) -> Result<Rf> {
    let num = map_poly(&r.num, f, cache)?;
    let mut changed = num.is_some();
    let mut dens = Vec::with_capacity(r.den.len());
    for (p, k) in &r.den {
        let m = map_poly(p, f, cache)?;
        changed |= m.is_some();
        dens.push((m.unwrap_or_else(|| Rf::from_poly(p.clone())), *k));
    }
    if !changed {
        return Ok(r.clone());
    }
    let mut acc = num.unwrap_or_else(|| Rf::from_poly(r.num.clone()));
    for (d, k) in dens {
        if d.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        acc = &acc * &d.powi(-(k as i32))?;
    }
    Ok(acc)
}

impl Add for &Rf {
    type Output = Rf;
    fn add(self, rhs: &Rf) -> Rf {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        Rf::sum([self.clone(), rhs.clone()])
    }
}

impl Sub for &Rf {
    type Output = Rf;
    fn sub(self, rhs: &Rf) -> Rf {
        self + &(-rhs)
    }
}

impl Neg for &Rf {
    type Output = Rf;
    fn neg(self) -> Rf {
        Rf {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Mul for &Rf {
    type Output = Rf;
    fn mul(self, rhs: &Rf) -> Rf {
        if self.is_zero() || rhs.is_zero() {
            return Rf::zero();
        }
        let num = &self.num * &rhs.num;
        if self.den.is_empty() && rhs.den.is_empty() {
            return Rf::from_poly(num);
        }
        let mut den: BTreeMap<Poly, u32> = self.den.iter().cloned().collect();
        for (f, k) in &rhs.den {
            *den.entry(f.clone()).or_insert(0) += k;
        }
        Rf::cancel(num, den)
    }
}

impl Mul<Rf> for Rf {
    type Output = Rf;
    fn mul(self, rhs: Rf) -> Rf {
        &self * &rhs
    }
}

impl Add<Rf> for Rf {
    type Output = Rf;
    fn add(self, rhs: Rf) -> Rf {
        &self + &rhs
    }
}

impl Sub<Rf> for Rf {
    type Output = Rf;
    fn sub(self, rhs: Rf) -> Rf {
        &self - &rhs
    }
}

impl Neg for Rf {
    type Output = Rf;
    fn neg(self) -> Rf {
        -&self
    }
}

impl From<i64> for Rf {
    fn from(n: i64) -> Self {
        Rf::int(n)
    }
}

impl From<Q> for Rf {
    fn from(c: Q) -> Self {
        Rf::constant(c)
    }
}

impl From<BigInt> for Rf {
    fn from(n: BigInt) -> Self {
        Rf::constant(Q::from_integer(n))
    }
}

impl fmt::Debug for Rf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", super::print::to_dsl(self))
    }
}

impl fmt::Display for Rf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", super::print::to_dsl(self))
    }
}

enum Rate {
    /// `var^r`, including `r = 0`.
    Power(Q),
    /// `exp(var)^r` with `r ≠ 0`.
    Exp(Q),
}

/// Classifies a monomial as a pure power of `var` or of `exp(var)`.
fn term_rate(m: &Monomial, var: &Symbol) -> Option<Rate> {
    let is_var = |r: &Rf| r.as_symbol().as_ref() == Some(var);
    let is_exp = |r: &Rf| {
        r.as_single_atom()
            .is_some_and(|a| matches!(&*a, AtomKind::Exp(x) if is_var(x)))
    };
    let (mut pow, mut exp) = (Q::zero(), Q::zero());
    for (a, e) in m.factors() {
        let e = q(*e as i64);
        match &**a {
            AtomKind::Sym(s) if s == var => pow += e,
            AtomKind::Exp(x) if is_var(x) => exp += e,
            AtomKind::Root { base, q: d } if is_var(base) => pow += e / q(*d as i64),
            AtomKind::Root { base, q: d } if is_exp(base) => exp += e / q(*d as i64),
            _ => return None,
        }
    }
    match (pow.is_zero(), exp.is_zero()) {
        (_, true) => Some(Rate::Power(pow)),
        (true, false) => Some(Rate::Exp(exp)),
        _ => None,
    }
}

/// Trial divisors stop here; a larger leftover cofactor keeps its own `ln`.
const LN_TRIAL_LIMIT: u64 = 1 << 16;

/// `ln c` as `Σ e_p·ln p` over the primes of `c`, plus `ln(-1)` when `c < 0`,
/// so logarithms of rationals cancel exactly.
fn ln_constant(c: &Q) -> Vec<Rf> {
    let ln_of = |n: BigInt| Rf::atom(Arc::new(AtomKind::Ln(Rf::constant(Q::from_integer(n)))));
    let mut out = Vec::new();
    if c.is_negative() {
        out.push(ln_of(BigInt::from(-1)));
    }
    for (n, sign) in [(c.numer().abs(), 1i64), (c.denom().clone(), -1)] {
        let mut n = n;
        let mut p = 2u64;
        while p < LN_TRIAL_LIMIT && BigInt::from(p * p) <= n {
            let bp = BigInt::from(p);
            let mut e = 0i64;
            while n.is_multiple_of(&bp) {
                n /= &bp;
                e += 1;
            }
            if e > 0 {
                out.push(ln_of(bp).scale(&q(sign * e)));
            }
            p += if p == 2 { 1 } else { 2 };
        }
        if !n.is_one() {
            out.push(ln_of(n).scale(&q(sign)));
        }
    }
    out
}
