//! Exact integer and rational linear algebra.
//!
//! Everything here works over `BigInt` / `BigRational`; no floating point is
//! involved. The Smith normal form uses a deterministic pivot rule (smallest
//! nonzero absolute value, ties broken by lowest row-major index), so the
//! transforms `U`, `V` are reproducible.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: &BigInt) -> Rational {
    Rational::from_integer(n.clone())
}

/// Fractional part `{x} = x - floor(x)`, always in `[0, 1)`.
pub fn frac(x: &Rational) -> Rational {
    x - x.floor()
}

pub fn rat_to_f64(x: &Rational) -> f64 {
    // numerators and denominators here are small; the division is exact enough.
    let n: f64 = x.numer().to_string().parse().unwrap_or(f64::NAN);
    let d: f64 = x.denom().to_string().parse().unwrap_or(f64::NAN);
    n / d
}

/// Dense integer matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "IntMatrix needs rows, cols >= 1");
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> Self {
        assert!(!rows.is_empty(), "IntMatrix needs at least one row");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, x) in r.iter().enumerate() {
                m.data[i * cols + j] = x.clone().into();
            }
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(cols: &[Vec<BigInt>]) -> Self {
        Self::from_rows(cols).transpose()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: BigInt) {
        self.data[i * self.cols + j] = x;
    }

    pub fn row(&self, i: usize) -> Vec<BigInt> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * &v[j]).sum())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn to_rational_rows(&self) -> Vec<Vec<Rational>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(rat_int).collect())
            .collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += k * row[src]
    fn add_row(&mut self, dst: usize, src: usize, k: &BigInt) {
        for j in 0..self.cols {
            let v = self.get(dst, j) + k * self.get(src, j);
            self.set(dst, j, v);
        }
    }

    /// col[dst] += k * col[src]
    fn add_col(&mut self, dst: usize, src: usize, k: &BigInt) {
        for i in 0..self.rows {
            let v = self.get(i, dst) + k * self.get(i, src);
            self.set(i, dst, v);
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -self.get(i, j);
            self.set(i, j, v);
        }
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.to_string()).collect())
            .collect();
        write!(f, "{:?}", rows)
    }
}

/// `U * A * V = S`, with `U`, `V` unimodular and `S` diagonal with a
/// divisibility chain `d_1 | d_2 | ...` of nonnegative entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SnfDecomposition {
    pub u: IntMatrix,
    pub s: IntMatrix,
    pub v: IntMatrix,
}

impl SnfDecomposition {
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.s.rows().min(self.s.cols())).map(|i| self.s.get(i, i).clone()).collect()
    }

    pub fn rank(&self) -> usize {
        self.diagonal().iter().filter(|d| !d.is_zero()).count()
    }
}

pub fn smith_normal_form(a: &IntMatrix) -> SnfDecomposition {
    let (m, n) = (a.rows(), a.cols());
    let mut s = a.clone();
    let mut u = IntMatrix::identity(m);
    let mut v = IntMatrix::identity(n);

    for t in 0..m.min(n) {
        loop {
            // smallest nonzero |entry| in the trailing block, lowest index on ties
            let mut pivot: Option<(usize, usize)> = None;
            for i in t..m {
                for j in t..n {
                    let x = s.get(i, j);
                    if x.is_zero() {
                        continue;
                    }
                    match pivot {
                        Some((pi, pj)) if s.get(pi, pj).abs() <= x.abs() => {}
                        _ => pivot = Some((i, j)),
                    }
                }
            }
            let Some((pi, pj)) = pivot else { break };
            s.swap_rows(t, pi);
            u.swap_rows(t, pi);
            s.swap_cols(t, pj);
            v.swap_cols(t, pj);

            let p = s.get(t, t).clone();
            let mut dirty = false;
            for i in t + 1..m {
                if s.get(i, t).is_zero() {
                    continue;
                }
                let q = s.get(i, t).div_floor(&p);
                let k = -q;
                s.add_row(i, t, &k);
                u.add_row(i, t, &k);
                if !s.get(i, t).is_zero() {
                    dirty = true;
                }
            }
            for j in t + 1..n {
                if s.get(t, j).is_zero() {
                    continue;
                }
                let q = s.get(t, j).div_floor(&p);
                let k = -q;
                s.add_col(j, t, &k);
                v.add_col(j, t, &k);
                if !s.get(t, j).is_zero() {
                    dirty = true;
                }
            }
            if dirty {
                continue;
            }
            // divisibility: pull an offending row into row t and retry
            let mut offender = None;
            'search: for i in t + 1..m {
                for j in t + 1..n {
                    if !s.get(i, j).is_multiple_of(&p) {
                        offender = Some(i);
                        break 'search;
                    }
                }
            }
            if let Some(i) = offender {
                let one = BigInt::one();
                s.add_row(t, i, &one);
                u.add_row(t, i, &one);
                continue;
            }
            if p.is_negative() {
                s.negate_row(t);
                u.negate_row(t);
            }
            break;
        }
    }
    SnfDecomposition { u, s, v }
}

/// A Z-basis of the (saturated) kernel lattice `{x in Z^cols : A x = 0}`.
/// Each vector is normalized so its first nonzero entry is positive.
pub fn integer_kernel(a: &IntMatrix) -> Vec<Vec<BigInt>> {
    let snf = smith_normal_form(a);
    let r = snf.rank();
    (r..a.cols())
        .map(|j| {
            let mut col = snf.v.col(j);
            if let Some(first) = col.iter().find(|x| !x.is_zero()) {
                if first.is_negative() {
                    col.iter_mut().for_each(|x| *x = -x.clone());
                }
            }
            col
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CokernelOrder {
    Finite(BigInt),
    Infinite,
}

/// Order of `Z^rows / A Z^cols`.
pub fn cokernel_order(a: &IntMatrix) -> CokernelOrder {
    let snf = smith_normal_form(a);
    if snf.rank() < a.rows() {
        return CokernelOrder::Infinite;
    }
    CokernelOrder::Finite(snf.diagonal().iter().filter(|d| !d.is_zero()).product())
}

/// Solve `A x = b` over Q. Free variables are set to zero. `None` when the
/// system is inconsistent.
pub fn solve_rational(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let m = a.len();
    assert_eq!(m, b.len(), "rhs length mismatch");
    let n = if m == 0 { 0 } else { a[0].len() };
    let mut aug: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..m).find(|&i| !aug[i][col].is_zero()) else { continue };
        aug.swap(row, p);
        let inv = aug[row][col].recip();
        for x in aug[row].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..m {
            if i != row && !aug[i][col].is_zero() {
                let f = aug[i][col].clone();
                for j in 0..=n {
                    let d = &f * &aug[row][j];
                    aug[i][j] -= d;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == m {
            break;
        }
    }
    if aug[row..].iter().any(|r| !r[n].is_zero()) {
        return None;
    }
    let mut x = vec![Rational::zero(); n];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = aug[i][n].clone();
    }
    Some(x)
}

/// `rational_solve(A, b)` for an integer matrix.
pub fn rational_solve(a: &IntMatrix, b: &[Rational]) -> Result<Vec<Rational>> {
    if b.len() != a.rows() {
        return Err(Error::Dimension(format!("rhs has {} entries, matrix has {} rows", b.len(), a.rows())));
    }
    solve_rational(&a.to_rational_rows(), b).ok_or_else(|| Error::Dimension("inconsistent system".into()))
}

pub fn det_rational(a: &[Vec<Rational>]) -> Rational {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else { return Rational::zero() };
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c].clone();
        for i in c + 1..n {
            if !m[i][c].is_zero() {
                let f = &m[i][c] / &m[c][c];
                for j in c..n {
                    let d = &f * &m[c][j];
                    m[i][j] -= d;
                }
            }
        }
    }
    det
}

pub fn rank_rational(a: &[Vec<Rational>]) -> usize {
    if a.is_empty() {
        return 0;
    }
    let n = a[0].len();
    let mut m = a.to_vec();
    let mut row = 0;
    for c in 0..n {
        let Some(p) = (row..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(row, p);
        for i in row + 1..m.len() {
            if !m[i][c].is_zero() {
                let f = &m[i][c] / &m[row][c];
                for j in c..n {
                    let d = &f * &m[row][j];
                    m[i][j] -= d;
                }
            }
        }
        row += 1;
    }
    row
}

/// Inverse of a square rational matrix, `None` if singular.
pub fn inverse_rational(a: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    if det_rational(a).is_zero() {
        return None;
    }
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let e: Vec<Rational> = (0..n).map(|i| if i == j { Rational::one() } else { Rational::zero() }).collect();
        cols.push(solve_rational(a, &e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

pub fn lcm_all<'a>(xs: impl IntoIterator<Item = &'a BigInt>) -> BigInt {
    xs.into_iter().fold(BigInt::one(), |acc, x| acc.lcm(x))
}
