//! Per-symbol a priori distributions.

use crate::error::{Error, Result};
use crate::model::Constellation;

/// Variance at or below which a symbol is treated as known.
pub const KNOWN_SYMBOL_VARIANCE: f64 = 1e-12;

/// One probability vector over the constellation points per transmitted symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorInfo {
    pmf: Vec<Vec<f64>>,
}

impl PriorInfo {
    pub fn uniform(n_t: usize, c: &Constellation) -> Self {
        let m = c.order();
        PriorInfo { pmf: vec![vec![1.0 / m as f64; m]; n_t] }
    }

    pub fn from_pmfs(pmf: Vec<Vec<f64>>, c: &Constellation) -> Result<Self> {
        for (k, row) in pmf.iter().enumerate() {
            if row.len() != c.order() {
                return Err(Error::InvalidPrior(format!("symbol {k}: {} probabilities for {} points", row.len(), c.order())));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidPrior(format!("symbol {k}: negative or non-finite probability")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidPrior(format!("symbol {k}: probabilities sum to {total}")));
            }
        }
        Ok(PriorInfo { pmf })
    }

    /// Per-symbol pmfs from independent bit LLRs (positive favours bit 1).
    pub fn from_bit_llrs(llrs: &[f64], c: &Constellation) -> Result<Self> {
        let b = c.bits_per_symbol();
        if llrs.len() % b != 0 {
            return Err(Error::LengthMismatch { expected: llrs.len().div_ceil(b) * b, got: llrs.len() });
        }
        if llrs.iter().any(|l| l.is_nan()) {
            return Err(Error::NonFinite("prior LLRs"));
        }
        let pmf = llrs
            .chunks(b)
            .map(|bits| {
                // log P(bit = v) = -log(1 + exp(∓L))
                let mut logp: Vec<f64> = (0..c.order())
                    .map(|idx| {
                        bits.iter()
                            .enumerate()
                            .map(|(j, &l)| {
                                let signed = if c.bit(idx, j) == 1 { l } else { -l };
                                -softplus(-signed)
                            })
                            .sum()
                    })
                    .collect();
                let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in &mut logp {
                    *v = (*v - max).exp();
                    total += *v;
                }
                logp.iter().map(|v| v / total).collect()
            })
            .collect();
        Ok(PriorInfo { pmf })
    }

    pub fn n_t(&self) -> usize {
        self.pmf.len()
    }

    pub fn pmf(&self, k: usize) -> &[f64] {
        &self.pmf[k]
    }

    pub fn log_pmf(&self) -> Vec<Vec<f64>> {
        self.pmf.iter().map(|row| row.iter().map(|p| p.ln()).collect()).collect()
    }

    pub fn means(&self, c: &Constellation) -> Vec<f64> {
        self.pmf.iter().map(|row| row.iter().zip(c.points()).map(|(p, x)| p * x).sum()).collect()
    }

    /// Central second moments, never negative.
    pub fn variances(&self, c: &Constellation) -> Vec<f64> {
        self.pmf
            .iter()
            .map(|row| {
                let mean: f64 = row.iter().zip(c.points()).map(|(p, x)| p * x).sum();
                row.iter().zip(c.points()).map(|(p, x)| p * (x - mean).powi(2)).sum()
            })
            .collect()
    }

    pub fn is_uniform(&self) -> bool {
        self.pmf.iter().all(|row| {
            let u = 1.0 / row.len() as f64;
            row.iter().all(|p| (p - u).abs() < 1e-15)
        })
    }

    /// Keeps the listed symbols, in order.
    pub fn select(&self, keep: &[usize]) -> PriorInfo {
        PriorInfo { pmf: keep.iter().map(|&k| self.pmf[k].clone()).collect() }
    }

    /// Bit LLRs implied by the pmfs, clipped to `±clip`.
    pub fn bit_llrs(&self, c: &Constellation, clip: f64) -> Vec<f64> {
        let log = self.log_pmf();
        log.iter().flat_map(|row| symbol_bit_llrs(row, c, clip)).collect()
    }
}

/// Running sum of per-symbol log priors over a Gray walk; tolerates `-inf`.
pub(crate) struct LogPriorSum<'a> {
    table: Vec<&'a [f64]>,
    finite: f64,
    impossible: usize,
}

impl<'a> LogPriorSum<'a> {
    pub(crate) fn new(table: Vec<&'a [f64]>, digits: &[usize]) -> Self {
        let mut me = LogPriorSum { table, finite: 0.0, impossible: 0 };
        for (k, &d) in digits.iter().enumerate() {
            me.add(k, d, true);
        }
        me
    }

    fn add(&mut self, k: usize, d: usize, plus: bool) {
        let v = self.table[k][d];
        if v == f64::NEG_INFINITY {
            if plus {
                self.impossible += 1;
            } else {
                self.impossible -= 1;
            }
        } else {
            self.finite += if plus { v } else { -v };
            crate::opcount::arith(1);
        }
    }

    pub(crate) fn update(&mut self, k: usize, from: usize, to: usize) {
        self.add(k, from, false);
        self.add(k, to, true);
    }

    pub(crate) fn value(&self) -> f64 {
        if self.impossible > 0 {
            f64::NEG_INFINITY
        } else {
            self.finite
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Bit LLRs of one symbol from unnormalized per-point log weights.
pub(crate) fn symbol_bit_llrs(log_w: &[f64], c: &Constellation, clip: f64) -> Vec<f64> {
    let b = c.bits_per_symbol();
    (0..b)
        .map(|j| {
            let mut acc = [f64::NEG_INFINITY; 2];
            for (idx, &w) in log_w.iter().enumerate() {
                let v = c.bit(idx, j);
                acc[v] = crate::linalg::jacobian_log_sum(acc[v], w);
            }
            clip_llr(acc[1] - acc[0], clip)
        })
        .collect()
}

#[inline]
pub(crate) fn clip_llr(v: f64, clip: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-clip, clip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_constellation;

    #[test]
    fn uniform_moments() {
        let c = make_constellation(4).unwrap();
        let p = PriorInfo::uniform(3, &c);
        assert!(p.is_uniform());
        assert!(p.means(&c).iter().all(|m| m.abs() < 1e-15));
        assert!(p.variances(&c).iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn from_llrs_bpsk() {
        let c = make_constellation(2).unwrap();
        let p = PriorInfo::from_bit_llrs(&[0.0, 2.0, -40.0], &c).unwrap();
        assert_eq!(p.pmf(0), &[0.5, 0.5]);
        let p1 = 1.0 / (1.0 + (-2f64).exp());
        assert!((p.pmf(1)[1] - p1).abs() < 1e-15);
        assert!((p.means(&c)[1] - 1f64.tanh()).abs() < 1e-12);
        let back = p.bit_llrs(&c, 50.0);
        assert!((back[1] - 2.0).abs() < 1e-12);
        assert!((back[2] + 40.0).abs() < 1e-6);
    }

    #[test]
    fn from_llrs_pam4_independent_bits() {
        let c = make_constellation(4).unwrap();
        let l = [1.5, -0.5];
        let p = PriorInfo::from_bit_llrs(&l, &c).unwrap();
        let pb = |llr: f64, v: usize| if v == 1 { 1.0 / (1.0 + (-llr).exp()) } else { 1.0 / (1.0 + llr.exp()) };
        for idx in 0..4 {
            let want = pb(l[0], c.bit(idx, 0)) * pb(l[1], c.bit(idx, 1));
            assert!((p.pmf(0)[idx] - want).abs() < 1e-14);
        }
        let back = p.bit_llrs(&c, 50.0);
        assert!((back[0] - l[0]).abs() < 1e-12 && (back[1] - l[1]).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let c = make_constellation(2).unwrap();
        assert!(PriorInfo::from_pmfs(vec![vec![0.5, 0.6]], &c).is_err());
        assert!(PriorInfo::from_pmfs(vec![vec![1.0, 0.0, 0.0]], &c).is_err());
        assert!(PriorInfo::from_pmfs(vec![vec![1.0, 0.0]], &c).is_ok());
        let certain = PriorInfo::from_pmfs(vec![vec![1.0, 0.0]], &c).unwrap();
        assert_eq!(certain.bit_llrs(&c, 50.0), vec![-50.0]);
    }
}
