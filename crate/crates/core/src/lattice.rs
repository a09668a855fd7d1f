//! Integer matrix normal forms: determinant, Hermite and Smith forms, kernels.
//!
//! Matrices are dense row-major `Vec<Vec<BigInt>>`. Row-style conventions are
//! used throughout: a lattice is the Z-span of the rows of its basis matrix.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type IMat = Vec<Vec<BigInt>>;
pub type QMat = Vec<Vec<BigRational>>;

pub fn from_i64(m: &[Vec<i64>]) -> IMat {
    m.iter()
        .map(|row| row.iter().map(|x| BigInt::from(*x)).collect())
        .collect()
}

pub fn to_i64(m: &IMat) -> Result<Vec<Vec<i64>>> {
    m.iter()
        .map(|row| {
            row.iter()
                .map(|x| x.to_i64().ok_or(Error::Overflow("integer matrix entry")))
                .collect()
        })
        .collect()
}

pub fn identity(n: usize) -> IMat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect()
}

pub fn transpose<T: Clone>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len())
        .map(|j| m.iter().map(|row| row[j].clone()).collect())
        .collect()
}

pub fn mat_mul(a: &IMat, b: &IMat) -> IMat {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).fold(BigInt::zero(), |acc, k| acc + &row[k] * &b[k][j]))
                .collect()
        })
        .collect()
}

pub fn vec_mat(v: &[BigInt], m: &IMat) -> Vec<BigInt> {
    let cols = m.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| v.iter().zip(m).fold(BigInt::zero(), |acc, (x, row)| acc + x * &row[j]))
        .collect()
}

fn is_square(m: &[Vec<BigInt>]) -> bool {
    m.iter().all(|row| row.len() == m.len())
}

/// Determinant by fraction-free (Bareiss) elimination.
pub fn det(m: &IMat) -> BigInt {
    assert!(is_square(m), "determinant of a non-square matrix");
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.clone();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
            a[i][k] = BigInt::zero();
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// Row Hermite normal form: returns `(h, u)` with `u·m = h`, `u` unimodular,
/// `h` in row echelon form with positive pivots and entries above each pivot
/// reduced into `[0, pivot)`. Zero rows come last.
pub fn hermite(m: &IMat) -> (IMat, IMat) {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut h = m.clone();
    let mut u = identity(rows);
    let mut pivot_row = 0;
    for col in 0..cols {
        if pivot_row == rows {
            break;
        }
        loop {
            let best = (pivot_row..rows)
                .filter(|&r| !h[r][col].is_zero())
                .min_by(|&a, &b| h[a][col].abs().cmp(&h[b][col].abs()));
            let Some(best) = best else { break };
            h.swap(pivot_row, best);
            u.swap(pivot_row, best);
            let mut done = true;
            for r in pivot_row + 1..rows {
                if h[r][col].is_zero() {
                    continue;
                }
                let q = h[r][col].div_floor(&h[pivot_row][col]);
                row_sub(&mut h, r, pivot_row, &q);
                row_sub(&mut u, r, pivot_row, &q);
                if !h[r][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if h[pivot_row][col].is_zero() {
            continue;
        }
        if h[pivot_row][col].is_negative() {
            negate_row(&mut h, pivot_row);
            negate_row(&mut u, pivot_row);
        }
        for r in 0..pivot_row {
            let q = h[r][col].div_floor(&h[pivot_row][col]);
            if !q.is_zero() {
                row_sub(&mut h, r, pivot_row, &q);
                row_sub(&mut u, r, pivot_row, &q);
            }
        }
        pivot_row += 1;
    }
    (h, u)
}

fn row_sub(m: &mut IMat, target: usize, source: usize, q: &BigInt) {
    let src = m[source].clone();
    for (x, s) in m[target].iter_mut().zip(src) {
        *x -= q * s;
    }
}

fn negate_row(m: &mut IMat, r: usize) {
    for x in m[r].iter_mut() {
        *x = -x.clone();
    }
}

/// Nonzero rows of the Hermite form: a canonical basis of the row lattice.
pub fn row_lattice_basis(m: &IMat) -> IMat {
    let (h, _) = hermite(m);
    h.into_iter().filter(|row| row.iter().any(|x| !x.is_zero())).collect()
}

/// A Z-basis of `{ v ∈ Z^rows : v·m = 0 }`, in Hermite form.
pub fn left_kernel(m: &IMat) -> IMat {
    let (h, u) = hermite(m);
    let kernel: IMat = h
        .iter()
        .zip(u)
        .filter(|(row, _)| row.iter().all(Zero::is_zero))
        .map(|(_, urow)| urow)
        .collect();
    if kernel.is_empty() {
        kernel
    } else {
        row_lattice_basis(&kernel)
    }
}

/// Invariant factors (Smith normal form diagonal) of `m`, as nonnegative
/// integers in divisibility order; length `min(rows, cols)`.
pub fn smith_diagonal(m: &IMat) -> Vec<BigInt> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut a = m.clone();
    let n = rows.min(cols);
    for t in 0..n {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    if a[i][j].is_zero() {
                        continue;
                    }
                    if best.is_none_or(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((bi, bj)) = best else {
                return (0..n).map(|k| a[k][k].abs()).collect();
            };
            a.swap(t, bi);
            for row in a.iter_mut() {
                row.swap(t, bj);
            }
            let mut clean = true;
            for i in t + 1..rows {
                let q = a[i][t].div_floor(&a[t][t]);
                row_sub(&mut a, i, t, &q);
                if !a[i][t].is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..cols {
                let q = a[t][j].div_floor(&a[t][t]);
                for i in 0..rows {
                    let s = a[i][t].clone();
                    a[i][j] -= &q * s;
                }
                if !a[t][j].is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            let pivot = a[t][t].clone();
            let offender = (t + 1..rows)
                .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| !(&a[i][j] % &pivot).is_zero());
            match offender {
                Some((i, _)) => {
                    let src = a[i].clone();
                    for (x, s) in a[t].iter_mut().zip(src) {
                        *x += s;
                    }
                }
                None => break,
            }
        }
    }
    (0..n).map(|k| a[k][k].abs()).collect()
}

pub fn to_rational(m: &IMat) -> QMat {
    m.iter()
        .map(|row| row.iter().map(|x| BigRational::from_integer(x.clone())).collect())
        .collect()
}

/// Inverse over Q; `None` if singular.
pub fn inverse_rational(m: &QMat) -> Option<QMat> {
    let n = m.len();
    let mut a: QMat = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let p = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, p);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x *= &inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let src = a[col].clone();
                for (x, s) in a[r].iter_mut().zip(src) {
                    *x -= &f * s;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Integer inverse of a unimodular matrix.
pub fn inverse_unimodular(m: &IMat) -> Result<IMat> {
    let inv = inverse_rational(&to_rational(m)).ok_or(Error::Singular)?;
    inv.into_iter()
        .map(|row| {
            row.into_iter()
                .map(|q| {
                    if q.is_integer() {
                        Ok(q.to_integer())
                    } else {
                        Err(Error::precondition("matrix is not unimodular"))
                    }
                })
                .collect()
        })
        .collect()
}

/// Rank over Q of a rational matrix.
pub fn rational_rank(m: &QMat) -> usize {
    let mut a = m.to_vec();
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for r in rank + 1..rows {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &a[rank][col];
            let src = a[rank].clone();
            for (x, s) in a[r].iter_mut().zip(src) {
                *x -= &f * s;
            }
        }
        rank += 1;
    }
    rank
}

/// Solves `x·m = target` over Q for a row vector `x`, if a solution exists.
pub fn solve_left_rational(m: &QMat, target: &[BigRational]) -> Option<Vec<BigRational>> {
    // Transpose to an ordinary system mᵗ·xᵗ = targetᵗ and eliminate.
    let rows = m.len();
    let cols = target.len();
    let mut aug: QMat = (0..cols)
        .map(|j| {
            let mut r: Vec<BigRational> = (0..rows).map(|i| m[i][j].clone()).collect();
            r.push(target[j].clone());
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..rows {
        let Some(p) = (rank..cols).find(|&r| !aug[r][col].is_zero()) else {
            continue;
        };
        aug.swap(rank, p);
        let inv = aug[rank][col].recip();
        for x in aug[rank].iter_mut() {
            *x *= &inv;
        }
        for r in 0..cols {
            if r != rank && !aug[r][col].is_zero() {
                let f = aug[r][col].clone();
                let src = aug[rank].clone();
                for (x, s) in aug[r].iter_mut().zip(src) {
                    *x -= &f * s;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    if aug[rank..].iter().any(|row| !row[rows].is_zero()) {
        return None;
    }
    let mut x = vec![BigRational::zero(); rows];
    for (r, &col) in pivots.iter().enumerate() {
        x[col] = aug[r][rows].clone();
    }
    Some(x)
}

/// Scales a rational matrix by the least common denominator, returning the
/// integer matrix. Row lattices of the rational matrix and the result differ
/// by that common scale factor only.
pub fn clear_denominators(m: &QMat) -> IMat {
    let lcm = m
        .iter()
        .flatten()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    m.iter()
        .map(|row| {
            row.iter()
                .map(|q| (q * BigRational::from_integer(lcm.clone())).to_integer())
                .collect()
        })
        .collect()
}
