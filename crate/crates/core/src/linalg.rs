//! Small dense real linear algebra.
//!
//! Everything here works on row-major `f64` storage and is sized for the
//! detector problems at hand (a few dozen rows at most). Kernels that sit on a
//! detector's hot path report their arithmetic to [`crate::opcount`].

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::opcount;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Real column vector. Plain `Vec<f64>`; functions take `&[f64]`.
pub type RealVector = Vec<f64>;

impl RealMatrix {
    /// Builds a matrix from row-major data, rejecting empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!("empty {rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(RealMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        RealMatrix { rows, cols, data }
    }

    /// Convenience constructor for literals; panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        RealMatrix { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> RealMatrix {
        RealMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Keeps only the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> RealMatrix {
        RealMatrix::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    /// Principal-style submatrix with the given row and column index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> RealMatrix {
        RealMatrix::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn matmul(&self, other: &RealMatrix) -> RealMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = RealMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        opcount::arith(2 * self.rows * self.cols * other.cols);
        out
    }

    pub fn matvec(&self, x: &[f64]) -> RealVector {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        opcount::arith(2 * self.rows * self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ · x` without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> RealVector {
        assert_eq!(self.rows, x.len(), "tr_matvec shape mismatch");
        opcount::arith(2 * self.rows * self.cols);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    /// `selfᵀ · self`, filling the symmetric result from its upper triangle.
    pub fn gram(&self) -> RealMatrix {
        let n = self.cols;
        let mut g = RealMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for r in 0..self.rows {
                    s += self[(r, i)] * self[(r, j)];
                }
                g[(i, j)] = s;
                g[(j, i)] = s;
            }
        }
        opcount::arith(self.rows * n * (n + 1));
        g
    }

    pub fn add_diag(&mut self, v: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] += v;
        }
        opcount::arith(n);
    }

    pub fn scale(&self, s: f64) -> RealMatrix {
        RealMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn sub(&self, other: &RealMatrix) -> RealMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        opcount::arith(self.data.len());
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &RealMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `|a_ij - a_ji|`; infinite for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for RealMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RealMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `L·D·Lᵀ` factors of a symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LdlFactors {
    pub unit_lower: RealMatrix,
    pub diag: Vec<f64>,
}

impl LdlFactors {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Rebuilds `L·D·Lᵀ`.
    pub fn reconstruct(&self) -> RealMatrix {
        let n = self.dim();
        let l = &self.unit_lower;
        RealMatrix::from_fn(n, n, |i, j| (0..=i.min(j)).map(|k| l[(i, k)] * self.diag[k] * l[(j, k)]).sum())
    }

    /// `L⁻ᵀ D⁻¹ L⁻¹` given `L⁻¹`, built from its upper triangle.
    pub fn inverse_with(&self, l_inv: &RealMatrix) -> RealMatrix {
        let n = self.dim();
        // Y = D⁻¹ L⁻¹ (row k scaled by 1/d_k); only the lower triangle is nonzero.
        let mut y = RealMatrix::zeros(n, n);
        for k in 0..n {
            let inv_d = 1.0 / self.diag[k];
            for j in 0..=k {
                y[(k, j)] = l_inv[(k, j)] * inv_d;
            }
        }
        opcount::arith(n + n * (n + 1) / 2);
        let mut out = RealMatrix::zeros(n, n);
        let mut ops = 0;
        for j in 0..n {
            for i in 0..=j {
                let mut s = 0.0;
                for k in j..n {
                    s += l_inv[(k, i)] * y[(k, j)];
                }
                ops += 2 * (n - j);
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        opcount::arith(ops);
        out
    }
}

/// Plain (unpivoted) `L·D·Lᵀ` factorization.
pub fn ldl_decompose(a: &RealMatrix) -> Result<LdlFactors> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("LDL of {}x{} matrix", a.rows(), a.cols())));
    }
    let n = a.rows();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let asym = a.asymmetry();
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    let pivot_floor = 1e-14 * max_diag.max(0.0);

    let mut l = RealMatrix::identity(n);
    let mut d = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut ops = 0;
    for j in 0..n {
        for k in 0..j {
            v[k] = l[(j, k)] * d[k];
        }
        let mut dj = a[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * v[k];
        }
        ops += 3 * j;
        if !(dj > pivot_floor) || dj <= 0.0 {
            opcount::arith(ops);
            return Err(Error::NotPositiveDefinite { index: j, pivot: dj });
        }
        d[j] = dj;
        let inv = 1.0 / dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * v[k];
            }
            l[(i, j)] = s * inv;
            ops += 2 * j + 1;
        }
        ops += 1;
    }
    opcount::arith(ops);
    Ok(LdlFactors { unit_lower: l, diag: d })
}

/// Inverse of a unit lower-triangular matrix by forward substitution.
pub fn invert_unit_lower(l: &RealMatrix) -> Result<RealMatrix> {
    if !l.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", l.rows(), l.cols())));
    }
    let n = l.rows();
    for i in 0..n {
        if l[(i, i)] != 1.0 {
            return Err(Error::DimensionMismatch(format!("diagonal entry {i} is not 1")));
        }
        if (i + 1..n).any(|j| l[(i, j)] != 0.0) {
            return Err(Error::DimensionMismatch(format!("row {i} has entries above the diagonal")));
        }
    }
    let mut x = RealMatrix::identity(n);
    let mut ops = 0;
    for j in 0..n {
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s;
            ops += 2 * (i - j);
        }
    }
    opcount::arith(ops);
    Ok(x)
}

/// Inverse of a symmetric positive-definite matrix via `L⁻ᵀ D⁻¹ L⁻¹`.
pub fn spd_inverse(a: &RealMatrix) -> Result<RealMatrix> {
    let f = ldl_decompose(a)?;
    let l_inv = invert_unit_lower(&f.unit_lower)?;
    Ok(f.inverse_with(&l_inv))
}

/// Closed-form (adjugate) inverse for dimensions 1 through 4.
pub fn small_inverse(a: &RealMatrix) -> Result<RealMatrix> {
    if !a.is_square() || a.rows() > 4 {
        return Err(Error::DimensionMismatch(format!(
            "closed-form inverse needs a square matrix of dimension <= 4, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let scale = a.max_abs().powi(n as i32);
    let check = |det: f64| -> Result<f64> {
        if !(det.abs() > 1e-14 * scale) {
            Err(Error::Singular { det })
        } else {
            Ok(1.0 / det)
        }
    };
    let m = |i: usize, j: usize| a[(i, j)];
    match n {
        1 => {
            let inv = check(m(0, 0))?;
            opcount::arith(1);
            Ok(RealMatrix::from_rows(&[&[inv]]))
        }
        2 => {
            let det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
            let inv = check(det)?;
            opcount::arith(8);
            Ok(RealMatrix::from_rows(&[
                &[m(1, 1) * inv, -m(0, 1) * inv],
                &[-m(1, 0) * inv, m(0, 0) * inv],
            ]))
        }
        3 => {
            let c00 = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
            let c01 = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
            let c02 = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
            let det = m(0, 0) * c00 + m(0, 1) * c01 + m(0, 2) * c02;
            let inv = check(det)?;
            let c10 = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
            let c11 = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
            let c12 = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
            let c20 = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
            let c21 = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
            let c22 = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
            opcount::arith(27 + 5 + 1 + 9);
            // inverse = adjugate / det, adjugate = cofactorᵀ
            Ok(RealMatrix::from_rows(&[
                &[c00 * inv, c10 * inv, c20 * inv],
                &[c01 * inv, c11 * inv, c21 * inv],
                &[c02 * inv, c12 * inv, c22 * inv],
            ]))
        }
        _ => {
            let a = a.as_slice();
            let s0 = a[0] * a[5] - a[4] * a[1];
            let s1 = a[0] * a[6] - a[4] * a[2];
            let s2 = a[0] * a[7] - a[4] * a[3];
            let s3 = a[1] * a[6] - a[5] * a[2];
            let s4 = a[1] * a[7] - a[5] * a[3];
            let s5 = a[2] * a[7] - a[6] * a[3];
            let c5 = a[10] * a[15] - a[14] * a[11];
            let c4 = a[9] * a[15] - a[13] * a[11];
            let c3 = a[9] * a[14] - a[13] * a[10];
            let c2 = a[8] * a[15] - a[12] * a[11];
            let c1 = a[8] * a[14] - a[12] * a[10];
            let c0 = a[8] * a[13] - a[12] * a[9];
            let det = s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0;
            let inv = check(det)?;
            let out = [
                (a[5] * c5 - a[6] * c4 + a[7] * c3) * inv,
                (-a[1] * c5 + a[2] * c4 - a[3] * c3) * inv,
                (a[13] * s5 - a[14] * s4 + a[15] * s3) * inv,
                (-a[9] * s5 + a[10] * s4 - a[11] * s3) * inv,
                (-a[4] * c5 + a[6] * c2 - a[7] * c1) * inv,
                (a[0] * c5 - a[2] * c2 + a[3] * c1) * inv,
                (-a[12] * s5 + a[14] * s2 - a[15] * s1) * inv,
                (a[8] * s5 - a[10] * s2 + a[11] * s1) * inv,
                (a[4] * c4 - a[5] * c2 + a[7] * c0) * inv,
                (-a[0] * c4 + a[1] * c2 - a[3] * c0) * inv,
                (a[12] * s4 - a[13] * s2 + a[15] * s0) * inv,
                (-a[8] * s4 + a[9] * s2 - a[11] * s0) * inv,
                (-a[4] * c3 + a[5] * c1 - a[6] * c0) * inv,
                (a[0] * c3 - a[1] * c1 + a[2] * c0) * inv,
                (-a[12] * s3 + a[13] * s1 - a[14] * s0) * inv,
                (a[8] * s3 - a[9] * s1 + a[10] * s0) * inv,
            ];
            opcount::arith(36 + 11 + 1 + 16 * 6);
            RealMatrix::new(4, 4, out.to_vec())
        }
    }
}

/// `log(eᵃ + eᵇ)` evaluated as `max + log1p(exp(-|a-b|))`.
#[inline]
pub fn jacobian_log_sum(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    opcount::arith(2);
    opcount::transcendental(2);
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `xᵀ · q_inv · x`, where `q_inv` is already the inverted weight matrix.
pub fn quadratic_norm(x: &[f64], q_inv: &RealMatrix) -> f64 {
    assert_eq!(q_inv.rows(), x.len());
    assert_eq!(q_inv.cols(), x.len());
    opcount::arith(2 * x.len() * x.len() + x.len());
    (0..x.len()).map(|i| x[i] * dot(q_inv.row(i), x)).sum()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &RealMatrix) -> Vec<f64> {
    assert!(a.is_square());
    let n = a.rows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum();
        let total: f64 = m.as_slice().iter().map(|v| v * v).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// 2-norm condition number of a matrix with Gram matrix `gram`.
pub fn condition_number_from_gram(gram: &RealMatrix) -> f64 {
    if gram.rows() == 0 {
        return 1.0;
    }
    let ev = symmetric_eigenvalues(gram);
    let lo = ev[0];
    let hi = ev[ev.len() - 1];
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).sqrt()
    }
}
