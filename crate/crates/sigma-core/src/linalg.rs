//! Exact linear algebra over `Rat` and `Z`.
//!
//! Dense reduced row echelon form for small systems, a sparse front end that
//! splits a system into connected components before eliminating, and an
//! integer kernel (lattice basis) computed by unimodular row reduction.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::rat::Rat;

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(rows: &mut Vec<Vec<Rat>>, ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = Rat::one() / &rows[r][c];
        if !inv.is_one() {
            for v in rows[r].iter_mut() {
                *v *= &inv;
            }
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (k, pv) in pivot_row.iter().enumerate().skip(c) {
                if !pv.is_zero() {
                    row[k] -= &f * pv;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r.max(0));
    pivots
}

pub fn rank(rows: &[Vec<Rat>], ncols: usize) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m, ncols).len()
}

/// Basis of `{x : A x = 0}` for `A` given by rows. One vector per free
/// column, with that column set to 1, in increasing column order.
pub fn nullspace(rows: &[Vec<Rat>], ncols: usize) -> Vec<Vec<Rat>> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m, ncols);
    let mut is_pivot = vec![false; ncols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|&c| !is_pivot[c]) {
        let mut v = vec![Rat::zero(); ncols];
        v[free] = Rat::one();
        for (row, &p) in m.iter().zip(&pivots) {
            v[p] = -row[free].clone();
        }
        basis.push(v);
    }
    basis
}

/// One solution of `A x = b` (free variables set to zero), or `None`.
pub fn solve(rows: &[Vec<Rat>], rhs: &[Rat], ncols: usize) -> Option<Vec<Rat>> {
    let mut m: Vec<Vec<Rat>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut r = r.clone();
            r.push(b.clone());
            r
        })
        .collect();
    let pivots = rref(&mut m, ncols + 1);
    if pivots.last() == Some(&ncols) {
        return None;
    }
    let mut x = vec![Rat::zero(); ncols];
    for (row, &p) in m.iter().zip(&pivots) {
        x[p] = row[ncols].clone();
    }
    Some(x)
}

/// Sparse linear system given column by column: `Σ_j x_j·col_j = rhs`.
#[derive(Clone, Debug, Default)]
pub struct SparseSystem {
    pub columns: Vec<BTreeMap<usize, Rat>>,
}

type SparseVec = BTreeMap<usize, Rat>;

/// `a -= f·b` on sparse vectors.
fn axpy(a: &mut SparseVec, f: &Rat, b: &SparseVec) {
    for (k, v) in b {
        let e = a.entry(*k).or_insert_with(Rat::zero);
        *e -= f * v;
        if e.is_zero() {
            a.remove(k);
        }
    }
}

/// Column echelon form built incrementally: each pivot is keyed by its
/// largest row and remembers which combination of input columns it is.
struct Echelon {
    pivots: BTreeMap<usize, (SparseVec, SparseVec)>,
    kernel: Vec<SparseVec>,
}

impl Echelon {
    fn build(columns: &[SparseVec]) -> Self {
        let mut e = Echelon { pivots: BTreeMap::new(), kernel: Vec::new() };
        for (j, col) in columns.iter().enumerate() {
            let mut v = col.clone();
            let mut comb = SparseVec::new();
            comb.insert(j, Rat::one());
            e.reduce(&mut v, &mut comb);
            match v.keys().next_back().copied() {
                Some(r) => {
                    e.pivots.insert(r, (v, comb));
                }
                None => e.kernel.push(comb),
            }
        }
        e
    }

    /// Reduces `v` against the pivots, recording in `comb` the combination
    /// of input columns subtracted so far (with `comb` tracking `v` itself).
    fn reduce(&self, v: &mut SparseVec, comb: &mut SparseVec) {
        while let Some((&r, lead)) = v.iter().next_back() {
            let Some((p, pc)) = self.pivots.get(&r) else { break };
            let f = lead / &p[&r];
            axpy(v, &f, p);
            axpy(comb, &f, pc);
        }
    }
}

fn dense_of(v: &SparseVec, n: usize) -> Vec<Rat> {
    let mut x = vec![Rat::zero(); n];
    for (k, val) in v {
        x[*k] = val.clone();
    }
    x
}

impl SparseSystem {
    pub fn new() -> Self {
        SparseSystem::default()
    }

    pub fn push_column(&mut self, col: BTreeMap<usize, Rat>) {
        self.columns.push(col);
    }

    /// Some solution of the inhomogeneous system, or `None` if inconsistent.
    pub fn solve(&self, rhs: &BTreeMap<usize, Rat>) -> Option<Vec<Rat>> {
        let e = Echelon::build(&self.columns);
        let mut v: SparseVec = rhs.iter().filter(|(_, x)| !x.is_zero()).map(|(k, x)| (*k, x.clone())).collect();
        // comb tracks −x: v = rhs − Σ x_j col_j.
        let mut comb = SparseVec::new();
        e.reduce(&mut v, &mut comb);
        if !v.is_empty() {
            return None;
        }
        let x: SparseVec = comb.into_iter().map(|(k, c)| (k, -c)).collect();
        Some(dense_of(&x, self.columns.len()))
    }

    /// A nonzero kernel vector, the first found in column order.
    pub fn kernel_vector(&self) -> Option<Vec<Rat>> {
        Echelon::build(&self.columns)
            .kernel
            .into_iter()
            .next()
            .map(|k| dense_of(&k, self.columns.len()))
    }

    /// A kernel basis: one vector per column dependent on earlier columns.
    pub fn kernel_basis(&self) -> Vec<Vec<Rat>> {
        Echelon::build(&self.columns)
            .kernel
            .into_iter()
            .map(|k| dense_of(&k, self.columns.len()))
            .collect()
    }
}

/// Basis of the lattice `{z ∈ Z^k : Σ z_i·row_i = 0}` for integer rows.
/// Computed by unimodular row reduction of `[rows | I]`.
pub fn integer_kernel(rows: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let k = rows.len();
    if k == 0 {
        return Vec::new();
    }
    let m = rows[0].len();
    let mut a: Vec<Vec<BigInt>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut v = r.clone();
            v.extend((0..k).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
            v
        })
        .collect();
    let mut r = 0;
    for c in 0..m {
        if r == k {
            break;
        }
        // Euclid on column c among rows r..k until a single nonzero remains.
        loop {
            let nz: Vec<usize> = (r..k).filter(|&i| !a[i][c].is_zero()).collect();
            if nz.is_empty() {
                break;
            }
            let p = *nz.iter().min_by_key(|&&i| a[i][c].abs()).unwrap();
            a.swap(r, p);
            let mut done = true;
            for i in r + 1..k {
                if a[i][c].is_zero() {
                    continue;
                }
                let q = a[i][c].div_floor(&a[r][c]);
                let pivot = a[r].clone();
                for (x, y) in a[i].iter_mut().zip(&pivot) {
                    *x -= &q * y;
                }
                if !a[i][c].is_zero() {
                    done = false;
                }
            }
            if done {
                r += 1;
                break;
            }
        }
    }
    let mut basis: Vec<Vec<BigInt>> = a[r..].iter().map(|row| row[m..].to_vec()).collect();
    // Canonical orientation: first nonzero entry positive.
    for v in basis.iter_mut() {
        if let Some(first) = v.iter().find(|x| !x.is_zero()) {
            if first.is_negative() {
                for x in v.iter_mut() {
                    *x = -x.clone();
                }
            }
        }
    }
    basis
}
