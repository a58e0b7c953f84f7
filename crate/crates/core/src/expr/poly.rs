use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::atom::{Atom, AtomKind};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Laurent monomial: atoms sorted ascending, exponents nonzero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Atom, i32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn atom(a: Atom) -> Self {
        Monomial(vec![(a, 1)])
    }

    /// Builds a monomial from unsorted factors, folding root powers.
    /// Roots of a common base combine into one root of the least common
    /// order, with whole powers moved onto the base. Folding a root of a
    /// constant yields a rational factor, hence the pair.
    pub fn from_factors(factors: Vec<(Atom, i32)>) -> (Q, Monomial) {
        let mut map: BTreeMap<Atom, i32> = BTreeMap::new();
        let mut roots: BTreeMap<super::Rf, Q> = BTreeMap::new();
        for (a, e) in factors {
            if let AtomKind::Root { base, q } = &*a {
                *roots.entry(base.clone()).or_insert_with(Q::zero) += qf(e as i64, *q as i64);
            } else {
                *map.entry(a).or_insert(0) += e;
            }
        }
        let mut coeff = Q::one();
        for (base, r) in roots {
            if r.is_zero() {
                continue;
            }
            let whole = r.floor();
            let frac = &r - &whole;
            let w: i32 = whole.to_integer().try_into().unwrap_or(i32::MAX);
            let rest = if let Some(c) = base.as_constant() {
                coeff *= pow_q(&c, w);
                frac
            } else if let Some(b) = base.as_single_atom() {
                *map.entry(b).or_insert(0) += w;
                frac
            } else {
                r
            };
            if !rest.is_zero() {
                let d: u32 = rest.denom().try_into().unwrap_or(u32::MAX);
                let n: i32 = rest.numer().try_into().unwrap_or(i32::MAX);
                let root = std::sync::Arc::new(AtomKind::Root { base, q: d });
                *map.entry(root).or_insert(0) += n;
            }
        }
        map.retain(|_, e| *e != 0);
        (coeff, Monomial(map.into_iter().collect()))
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(Atom, i32)] {
        &self.0
    }

    pub fn degree(&self) -> i64 {
        self.0.iter().map(|(_, e)| *e as i64).sum()
    }

    pub fn exponent(&self, a: &Atom) -> i32 {
        self.0
            .binary_search_by(|(b, _)| b.cmp(a))
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> (Q, Monomial) {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Monomial::from_factors(v)
    }

    pub fn inv(&self) -> Monomial {
        Monomial(self.0.iter().map(|(a, e)| (a.clone(), -e)).collect())
    }

    pub fn pow(&self, k: i32) -> (Q, Monomial) {
        Monomial::from_factors(self.0.iter().map(|(a, e)| (a.clone(), e * k)).collect())
    }

    /// Exponent-wise minimum, treating missing atoms as exponent 0.
    pub fn min_with(&self, other: &Monomial) -> Monomial {
        let atoms: BTreeSet<&Atom> = self
            .0
            .iter()
            .chain(other.0.iter())
            .map(|(a, _)| a)
            .collect();
        Monomial(
            atoms
                .into_iter()
                .filter_map(|a| {
                    let e = self.exponent(a).min(other.exponent(a));
                    (e != 0).then(|| (a.clone(), e))
                })
                .collect(),
        )
    }

    /// Divides without folding; callers guarantee `other` has no root atoms with
    /// exponents that could underflow into a fold.
    pub fn div_raw(&self, other: &Monomial) -> Monomial {
        let mut map: BTreeMap<Atom, i32> = self.0.iter().cloned().collect();
        for (a, e) in &other.0 {
            *map.entry(a.clone()).or_insert(0) -= e;
        }
        map.retain(|_, e| *e != 0);
        Monomial(map.into_iter().collect())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|(_, e)| *e >= 0)
    }

    /// Splits into the part over atoms satisfying `pred` and the rest.
    pub fn split(&self, pred: &dyn Fn(&Atom) -> bool) -> (Monomial, Monomial) {
        let (a, b): (Vec<_>, Vec<_>) = self.0.iter().cloned().partition(|(a, _)| pred(a));
        (Monomial(a), Monomial(b))
    }
}

impl Ord for Monomial {
    /// Graded lexicographic; among equal degrees the smaller atom weighs more.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some((_, e)), None) => return e.cmp(&0),
                (None, Some((_, e))) => return 0.cmp(e),
                (Some((x, e)), Some((y, f))) => match x.cmp(y) {
                    Ordering::Less => return e.cmp(&0),
                    Ordering::Greater => return 0.cmp(f),
                    Ordering::Equal => {
                        if e != f {
                            return e.cmp(f);
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

pub fn pow_q(c: &Q, k: i32) -> Q {
    if k >= 0 {
        num_traits::pow(c.clone(), k as usize)
    } else {
        num_traits::pow(c.recip(), (-k) as usize)
    }
}

/// Sparse Laurent polynomial with rational coefficients over atoms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Q>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        Poly::term(c, Monomial::one())
    }

    pub fn term(c: Q, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn atom(a: Atom) -> Self {
        Poly::term(Q::one(), Monomial::atom(a))
    }

    pub fn atom_pow(a: Atom, e: i32) -> Self {
        let (c, m) = Monomial::from_factors(vec![(a, e)]);
        Poly::term(c, m)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn as_term(&self) -> Option<(&Monomial, &Q)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Monomial, Q)> {
        self.terms.into_iter()
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Q)>>(it: I) -> Self {
        let mut p = Poly::zero();
        for (m, c) in it {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn leading(&self) -> Option<(&Monomial, &Q)> {
        self.terms.iter().next_back()
    }

    pub fn scale(&self, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Poly {
        let mut out = Poly::zero();
        for (n, c) in &self.terms {
            let (k, mn) = n.mul(m);
            out.add_term(mn, c * k);
        }
        out
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().iter().map(|(a, _)| a.clone()))
            .collect()
    }

    /// Largest monomial dividing every term (exponents may be negative).
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        it.fold(first.clone(), |acc, m| acc.min_with(m))
    }

    /// Positive rational `c` such that `self / c` has coprime integer coefficients.
    pub fn rational_content(&self) -> Q {
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for c in self.terms.values() {
            num = num.gcd(c.numer());
            den = den.lcm(c.denom());
        }
        if num.is_zero() {
            return Q::one();
        }
        Q::new(num, den)
    }

    pub fn leading_coeff(&self) -> Q {
        self.leading()
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Q::zero)
    }

    /// Max and min exponent of `a` over all terms.
    pub fn degree_range(&self, a: &Atom) -> (i32, i32) {
        let mut lo = i32::MAX;
        let mut hi = i32::MIN;
        for m in self.terms.keys() {
            let e = m.exponent(a);
            lo = lo.min(e);
            hi = hi.max(e);
        }
        (lo, hi)
    }

    /// Exact quotient `self / d`, if `d` divides `self` in the Laurent ring.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some((m, c)) = d.as_term() {
            let inv = m.inv();
            let ci = c.recip();
            return Some(self.mul_monomial(&inv).scale(&ci));
        }
        let dm = d.monomial_content();
        let d0 = if dm.is_one() {
            d.clone()
        } else {
            d.mul_monomial(&dm.inv())
        };
        let sm = self.monomial_content();
        let mut r = if sm.is_one() {
            self.clone()
        } else {
            self.mul_monomial(&sm.inv())
        };
        for a in d0.atoms() {
            let (_, dh) = d0.degree_range(&a);
            let (_, rh) = r.degree_range(&a);
            if rh < dh {
                return None;
            }
        }
        if r.len() < 2 {
            return None;
        }
        let (dl, dc) = {
            let (m, c) = d0.leading().unwrap();
            (m.clone(), c.clone())
        };
        let mut quot = Poly::zero();
        while let Some((rl, rc)) = r.leading().map(|(m, c)| (m.clone(), c.clone())) {
            let t = rl.div_raw(&dl);
            if !t.is_nonnegative() {
                return None;
            }
            let c = rc / &dc;
            r = &r - &d0.mul_monomial(&t).scale(&c);
            quot.add_term(t, c);
        }
        let shift = sm.div_raw(&dm);
        Some(quot.mul_monomial(&shift))
    }

    /// Groups terms by their component over atoms satisfying `pred`.
    pub fn split_by(&self, pred: &dyn Fn(&Atom) -> bool) -> BTreeMap<Monomial, Poly> {
        let mut out: BTreeMap<Monomial, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (s, rest) = m.split(pred);
            out.entry(s).or_default().add_term(rest, c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    /// Partial derivative with respect to an atom, treating atoms as independent.
    pub fn partial_atom(&self, a: &Atom) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(a);
            if e == 0 {
                continue;
            }
            let mut f: Vec<(Atom, i32)> = m.factors().to_vec();
            for (b, k) in f.iter_mut() {
                if b == a {
                    *k -= 1;
                }
            }
            let (k, mm) = Monomial::from_factors(f);
            out.add_term(mm, c * q(e as i64) * k);
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&Q) -> Q) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), f(c))))
    }

    pub fn is_negative_leading(&self) -> bool {
        self.leading()
            .map(|(_, c)| c.is_negative())
            .unwrap_or(false)
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly{:?}", self.terms)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let (big, small) = if self.len() >= rhs.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            for (n, d) in &rhs.terms {
                let (k, mn) = m.mul(n);
                out.add_term(mn, c * d * k);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::atom::{sym_atom, Symbol};

    fn v(s: &str) -> Poly {
        Poly::atom(sym_atom(Symbol::var(s)))
    }

    #[test]
    fn exact_division_recovers_factor() {
        let x = v("x");
        let y = v("y");
        let a = &(&x + &y) * &(&x - &Poly::one());
        let b = &(&x * &y) + &Poly::constant(q(3));
        let p = &a * &b;
        assert_eq!(p.div_exact(&a), Some(b.clone()));
        assert_eq!(p.div_exact(&b), Some(a));
        assert_eq!(b.div_exact(&(&x + &y)), None);
    }

    #[test]
    fn laurent_division() {
        let x = v("x");
        let xi = Poly::atom_pow(sym_atom(Symbol::var("x")), -2);
        let f = &x + &Poly::one();
        let p = &(&xi * &f) * &f;
        let got = p.div_exact(&f).unwrap();
        assert_eq!(got, &xi * &f);
    }

    #[test]
    fn monomial_order_is_multiplicative() {
        let x = sym_atom(Symbol::var("x"));
        let y = sym_atom(Symbol::var("y"));
        let a = Monomial::atom(x.clone());
        let b = Monomial::atom(y.clone());
        let c = Monomial::atom(x);
        assert!(a > b);
        assert!(a.mul(&c).1 > b.mul(&c).1);
    }
}
