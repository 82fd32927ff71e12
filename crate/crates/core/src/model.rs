//! Channel and signal model.
//!
//! The complex baseband system `y_c = H_c s_c + e_c` is handled in its
//! stacked real form `y = H s + e`, with `e ~ N(0, (N0/2) I)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, got: data.len() });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("complex matrix"));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `[[Re, -Im], [Im, Re]]` block form.
    pub fn to_real(&self) -> RealMatrix {
        let (r, c) = (self.rows, self.cols);
        RealMatrix::from_fn(2 * r, 2 * c, |i, j| {
            let z = self.get(i % r, j % c);
            match (i < r, j < c) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        })
    }
}

/// Stacks a complex vector as `[Re; Im]`.
pub fn complex_vector_to_real(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

pub fn complex_to_real(hc: &ComplexMatrix, yc: &[Complex64]) -> Result<(RealMatrix, Vec<f64>)> {
    if yc.len() != hc.rows() {
        return Err(Error::LengthMismatch { expected: hc.rows(), got: yc.len() });
    }
    Ok((hc.to_real(), complex_vector_to_real(yc)))
}

fn complex_gaussian(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// `n_r x n_t` matrix of i.i.d. `CN(0, 1)` entries.
pub fn sample_rayleigh(n_t: usize, n_r: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let data = (0..n_t * n_r).map(|_| complex_gaussian(rng, 1.0)).collect();
    ComplexMatrix { rows: n_r, cols: n_t, data }
}

/// Real PAM alphabet with Gray bit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<f64>,
    labels: Vec<usize>,
    bits: usize,
    point_of_label: Vec<usize>,
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, idx: usize) -> f64 {
        self.points[idx]
    }

    pub fn label(&self, idx: usize) -> usize {
        self.labels[idx]
    }

    /// Bit `j` (MSB first) of the label of point `idx`.
    #[inline]
    pub fn bit(&self, idx: usize, j: usize) -> usize {
        (self.labels[idx] >> (self.bits - 1 - j)) & 1
    }

    pub fn index_of_label(&self, label: usize) -> usize {
        self.point_of_label[label]
    }

    /// Index of the point closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &p) in self.points.iter().enumerate() {
            let d = (x - p).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        best
    }

    pub fn is_constant_modulus(&self) -> bool {
        let first = self.points[0].abs();
        self.points.iter().all(|p| (p.abs() - first).abs() < 1e-12)
    }

    /// Mean of `p^2` over the alphabet.
    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p * p).sum::<f64>() / self.order() as f64
    }
}

pub fn make_constellation(m: usize) -> Result<Constellation> {
    let norm: f64 = match m {
        2 => 1.0,
        4 => 5.0,
        8 => 21.0,
        _ => return Err(Error::UnsupportedOrder(m)),
    };
    let scale = norm.sqrt();
    let points = (0..m).map(|i| (2.0 * i as f64 - (m as f64 - 1.0)) / scale).collect();
    let labels: Vec<usize> = (0..m).map(|i| i ^ (i >> 1)).collect();
    let mut point_of_label = vec![0; m];
    for (i, &l) in labels.iter().enumerate() {
        point_of_label[l] = i;
    }
    Ok(Constellation { points, labels, bits: m.trailing_zeros() as usize, point_of_label })
}

/// Symbol indices for a bit vector, `bits_per_symbol` bits per symbol, MSB first.
pub fn bits_to_indices(bits: &[u8], c: &Constellation, n_t: usize) -> Result<Vec<usize>> {
    let b = c.bits_per_symbol();
    if bits.len() != n_t * b {
        return Err(Error::LengthMismatch { expected: n_t * b, got: bits.len() });
    }
    Ok(bits
        .chunks(b)
        .map(|chunk| {
            let label = chunk.iter().fold(0usize, |acc, &bit| (acc << 1) | (bit & 1) as usize);
            c.index_of_label(label)
        })
        .collect())
}

pub fn modulate(bits: &[u8], c: &Constellation, n_t: usize) -> Result<Vec<f64>> {
    Ok(bits_to_indices(bits, c, n_t)?.into_iter().map(|i| c.point(i)).collect())
}

/// Nearest-point slicing followed by label lookup.
pub fn hard_demap(s: &[f64], c: &Constellation) -> Vec<u8> {
    let b = c.bits_per_symbol();
    let mut out = Vec::with_capacity(s.len() * b);
    for &x in s {
        let idx = c.nearest(x);
        out.extend((0..b).map(|j| c.bit(idx, j) as u8));
    }
    out
}

/// Noise parameter `N0` for unit-energy real symbols carrying
/// `code_rate * log2(M)` information bits each.
pub fn ebn0_to_n0(ebn0_db: f64, code_rate: f64, c: &Constellation) -> f64 {
    let eb = 1.0 / (code_rate * c.bits_per_symbol() as f64);
    eb / 10f64.powf(ebn0_db / 10.0)
}

/// Real-valued channel `H` (N_R x N_T) with noise parameter `N0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealChannel {
    h: RealMatrix,
    n0: f64,
}

impl RealChannel {
    pub fn new(h: RealMatrix, n0: f64) -> Result<Self> {
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(Error::InvalidChannel(format!("noise parameter must be positive, got {n0}")));
        }
        if h.rows() < h.cols() {
            return Err(Error::InvalidChannel(format!(
                "need at least as many receive as transmit dimensions, got {}x{}",
                h.rows(),
                h.cols()
            )));
        }
        if h.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("channel"));
        }
        Ok(RealChannel { h, n0 })
    }

    pub fn h(&self) -> &RealMatrix {
        &self.h
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn n_t(&self) -> usize {
        self.h.cols()
    }

    pub fn n_r(&self) -> usize {
        self.h.rows()
    }

    pub fn with_n0(&self, n0: f64) -> Result<Self> {
        RealChannel::new(self.h.clone(), n0)
    }

    /// `H s + e` with `e ~ N(0, (N0/2) I)`.
    pub fn transmit(&self, s: &[f64], rng: &mut impl Rng) -> Vec<f64> {
        let sigma = (self.n0 / 2.0).sqrt();
        let mut y = self.h.matvec(s);
        for v in &mut y {
            let e: f64 = StandardNormal.sample(rng);
            *v += sigma * e;
        }
        y
    }
}

/// Channel estimate `Ĥ = H + Δ` and the per-complex-entry error variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: RealMatrix,
    pub delta2: f64,
}

/// Adds a block-structured error with i.i.d. `CN(0, δ²)` complex entries to a
/// real channel produced by [`complex_to_real`].
pub fn corrupt_channel(h: &RealMatrix, delta2: f64, rng: &mut impl Rng) -> Result<ChannelEstimate> {
    if !(delta2 >= 0.0 && delta2.is_finite()) {
        return Err(Error::InvalidConfig(format!("error variance must be non-negative, got {delta2}")));
    }
    if h.rows() % 2 != 0 || h.cols() % 2 != 0 {
        return Err(Error::DimensionMismatch("channel lacks the complex block structure".into()));
    }
    if delta2 == 0.0 {
        return Ok(ChannelEstimate { h_hat: h.clone(), delta2 });
    }
    let (r, c) = (h.rows() / 2, h.cols() / 2);
    let data = (0..r * c).map(|_| complex_gaussian(rng, delta2)).collect();
    let delta = ComplexMatrix { rows: r, cols: c, data }.to_real();
    let h_hat = RealMatrix::from_fn(h.rows(), h.cols(), |i, j| h[(i, j)] + delta[(i, j)]);
    Ok(ChannelEstimate { h_hat, delta2 })
}
