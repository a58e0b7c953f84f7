//! Exact nullspaces of sparse rational matrices.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::expr::Q;

/// A sparse row: column index to nonzero coefficient.
pub type Row = BTreeMap<usize, Q>;

/// Reduced row echelon form with leftmost pivots. Returns the nonzero rows and
/// their pivot columns, both in increasing pivot order.
pub fn rref(rows: &[Row]) -> Vec<(usize, Row)> {
    let mut done: Vec<(usize, Row)> = Vec::new();
    for r in rows {
        let mut r = r.clone();
        r.retain(|_, v| !v.is_zero());
        for (p, pr) in &done {
            if let Some(c) = r.get(p).cloned() {
                axpy(&mut r, &-c, pr);
            }
        }
        let Some((&p, c)) = r.iter().next() else {
            continue;
        };
        let inv = c.recip();
        for v in r.values_mut() {
            *v *= &inv;
        }
        for (_, other) in done.iter_mut() {
            if let Some(c) = other.get(&p).cloned() {
                axpy(other, &-c, &r);
            }
        }
        let pos = done.partition_point(|(q, _)| *q < p);
        done.insert(pos, (p, r));
    }
    done
}

/// `a += c·b`, dropping cancelled entries.
fn axpy(a: &mut Row, c: &Q, b: &Row) {
    for (k, v) in b {
        let e = a.entry(*k).or_insert_with(Q::zero);
        *e += c * v;
        if e.is_zero() {
            a.remove(k);
        }
    }
}

/// Basis of `{x : rows·x = 0}` over `ncols` unknowns, one vector per free
/// column in increasing order, scaled by [`primitive`].
pub fn nullspace(rows: &[Row], ncols: usize) -> Vec<Vec<Q>> {
    let red = rref(rows);
    let pivots: BTreeMap<usize, &Row> = red.iter().map(|(p, r)| (*p, r)).collect();
    let mut out = Vec::new();
    for f in 0..ncols {
        if pivots.contains_key(&f) {
            continue;
        }
        let mut v = vec![Q::zero(); ncols];
        v[f] = Q::one();
        for (p, r) in &pivots {
            if let Some(c) = r.get(&f) {
                v[*p] = -c.clone();
            }
        }
        out.push(primitive(v));
    }
    out
}

/// Scales a rational vector to coprime integers with its first nonzero entry
/// positive.
pub fn primitive(v: Vec<Q>) -> Vec<Q> {
    let mut l = BigInt::one();
    let mut g = BigInt::zero();
    for c in &v {
        l = l.lcm(c.denom());
    }
    for c in &v {
        let n = c.numer() * (&l / c.denom());
        g = g.gcd(&n);
    }
    if g.is_zero() {
        return v;
    }
    let mut s = Q::new(l, g.abs());
    if v.iter()
        .find(|c| !c.is_zero())
        .is_some_and(|c| c.is_negative())
    {
        s = -s;
    }
    v.into_iter().map(|c| c * &s).collect()
}

/// Solves `rows·x = rhs` (rhs given per row), returning one solution.
pub fn solve(rows: &[Row], rhs: &[Q], ncols: usize) -> Option<Vec<Q>> {
    let aug: Vec<Row> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut r = r.clone();
            if !b.is_zero() {
                r.insert(ncols, -b.clone());
            }
            r
        })
        .collect();
    let ns = nullspace(&aug, ncols + 1);
    let v = ns.into_iter().find(|v| !v[ncols].is_zero())?;
    let s = v[ncols].recip();
    Some(v[..ncols].iter().map(|c| c * &s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{q, qf};

    fn row(entries: &[(usize, Q)]) -> Row {
        entries.iter().cloned().collect()
    }

    #[test]
    fn empty_system_gives_identity() {
        assert_eq!(nullspace(&[], 2), vec![vec![q(1), q(0)], vec![q(0), q(1)]]);
    }

    #[test]
    fn single_relation() {
        assert_eq!(
            nullspace(&[row(&[(0, q(1)), (1, q(1))])], 2),
            vec![vec![q(1), q(-1)]]
        );
    }

    #[test]
    fn primitive_scaling() {
        let r = row(&[(0, q(2)), (2, qf(1, 3))]);
        assert_eq!(
            nullspace(&[r], 3),
            vec![vec![q(0), q(1), q(0)], vec![q(1), q(0), q(-6)]]
        );
    }

    #[test]
    fn inhomogeneous_solve() {
        let rows = vec![row(&[(0, q(1)), (1, q(1))]), row(&[(0, q(1)), (1, q(-1))])];
        assert_eq!(solve(&rows, &[q(3), q(1)], 2), Some(vec![q(2), q(1)]));
        assert_eq!(
            solve(&[row(&[(0, q(0))]), row(&[])], &[q(0), q(1)], 1),
            None
        );
    }
}
