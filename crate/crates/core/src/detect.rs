//! Reference detectors: exact LLR, max-log, ZF-DF and partial marginalization.

use crate::error::{Error, Result};
use crate::gray::{check_enumerable, GrayWalker};
use crate::linalg::{condition_number_from_gram, dot, jacobian_log_sum, RealMatrix};
use crate::model::{Constellation, RealChannel};
use crate::opcount;
use crate::prior::{clip_llr, symbol_bit_llrs, LogPriorSum, PriorInfo};
use crate::sumis::Partition;

/// Default LLR saturation.
pub const DEFAULT_LLR_CLIP: f64 = 50.0;

/// Walks all `M^N_T` transmit vectors in Gray order and hands each one to
/// `visit` together with `‖y − Hs‖²`, which is updated differentially.
pub fn for_each_hypothesis(
    h: &RealMatrix,
    gram: &RealMatrix,
    y: &[f64],
    c: &Constellation,
    mut visit: impl FnMut(&[usize], f64),
) -> Result<()> {
    let n = h.cols();
    check_enumerable(n, c.order())?;
    if y.len() != h.rows() {
        return Err(Error::LengthMismatch { expected: h.rows(), got: y.len() });
    }
    let z = h.tr_matvec(y);
    let mut s = vec![c.point(0); n];
    let mut gs = gram.matvec(&s);
    let mut metric = dot(y, y) - 2.0 * dot(&z, &s) + dot(&s, &gs);
    opcount::arith(2 * y.len() + 4 * n + 2);

    let mut walker = GrayWalker::new(n, c.order());
    visit(walker.digits(), metric);
    while let Some(step) = walker.advance() {
        let j = step.coord;
        let delta = c.point(step.to) - c.point(step.from);
        metric += delta * (2.0 * (gs[j] - z[j]) + delta * gram[(j, j)]);
        s[j] += delta;
        for (g, col) in gs.iter_mut().zip(0..n) {
            *g += delta * gram[(col, j)];
        }
        opcount::arith(8 + 2 * n);
        visit(walker.digits(), metric);
    }
    Ok(())
}

fn exhaustive(
    ch: &RealChannel,
    gram: &RealMatrix,
    y: &[f64],
    c: &Constellation,
    prior: Option<&PriorInfo>,
    exact: bool,
    clip: f64,
) -> Result<Vec<f64>> {
    let n = ch.n_t();
    let m = c.order();
    if let Some(p) = prior {
        if p.n_t() != n {
            return Err(Error::LengthMismatch { expected: n, got: p.n_t() });
        }
    }
    let log_prior = prior.filter(|p| !p.is_uniform()).map(|p| p.log_pmf());
    let inv_n0 = 1.0 / ch.n0();
    let mut acc = vec![vec![f64::NEG_INFINITY; m]; n];
    let mut lp: Option<LogPriorSum> = log_prior.as_ref().map(|t| LogPriorSum::new(t.iter().map(|r| r.as_slice()).collect(), &vec![0; n]));
    let mut prev: Vec<usize> = vec![0; n];

    for_each_hypothesis(ch.h(), gram, y, c, |digits, metric| {
        let mut e = -metric * inv_n0;
        opcount::arith(1);
        if let Some(lp) = lp.as_mut() {
            if let Some(k) = (0..n).find(|&k| prev[k] != digits[k]) {
                lp.update(k, prev[k], digits[k]);
                prev[k] = digits[k];
            }
            e += lp.value();
            opcount::arith(1);
        }
        for (row, &d) in acc.iter_mut().zip(digits) {
            row[d] = if exact { jacobian_log_sum(row[d], e) } else { row[d].max(e) };
        }
    })?;

    let mut out = Vec::with_capacity(n * c.bits_per_symbol());
    for row in &acc {
        if exact {
            out.extend(symbol_bit_llrs(row, c, clip));
        } else {
            out.extend(max_bit_llrs(row, c, clip));
        }
    }
    Ok(out)
}

fn max_bit_llrs(log_w: &[f64], c: &Constellation, clip: f64) -> Vec<f64> {
    (0..c.bits_per_symbol())
        .map(|j| {
            let mut best = [f64::NEG_INFINITY; 2];
            for (idx, &w) in log_w.iter().enumerate() {
                let v = c.bit(idx, j);
                best[v] = best[v].max(w);
            }
            opcount::arith(1);
            clip_llr(best[1] - best[0], clip)
        })
        .collect()
}

/// Exact per-bit LLRs by full marginalization over all transmit vectors.
pub fn exact_llr(ch: &RealChannel, y: &[f64], c: &Constellation, prior: Option<&PriorInfo>, clip: f64) -> Result<Vec<f64>> {
    exact_llr_with_gram(ch, &ch.h().gram(), y, c, prior, clip)
}

pub(crate) fn exact_llr_with_gram(
    ch: &RealChannel,
    gram: &RealMatrix,
    y: &[f64],
    c: &Constellation,
    prior: Option<&PriorInfo>,
    clip: f64,
) -> Result<Vec<f64>> {
    exhaustive(ch, gram, y, c, prior, true, clip)
}

/// Max-log LLRs under uniform priors.
pub fn max_log(ch: &RealChannel, y: &[f64], c: &Constellation, clip: f64) -> Result<Vec<f64>> {
    max_log_with_gram(ch, &ch.h().gram(), y, c, clip)
}

pub(crate) fn max_log_with_gram(ch: &RealChannel, gram: &RealMatrix, y: &[f64], c: &Constellation, clip: f64) -> Result<Vec<f64>> {
    exhaustive(ch, gram, y, c, None, false, clip)
}

/// Sorted QR factorization of a tall matrix for zero-forcing decision feedback.
#[derive(Debug, Clone)]
pub struct ZfDf {
    q: RealMatrix,
    r: RealMatrix,
    /// Input column sitting at each layer.
    order: Vec<usize>,
}

impl ZfDf {
    pub fn new(h: &RealMatrix) -> Result<Self> {
        let (rows, n) = (h.rows(), h.cols());
        if rows < n {
            return Err(Error::DimensionMismatch(format!("ZF-DF needs a tall matrix, got {rows}x{n}")));
        }
        let threshold = 1e-10 * h.frobenius_norm();
        let mut cols: Vec<Vec<f64>> = (0..n).map(|j| h.column(j)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        let mut r = RealMatrix::zeros(n, n);
        let mut ops = 0;
        for i in 0..n {
            // weakest remaining column goes first, so the last layers are the strongest
            let pick = (i..n)
                .min_by(|&a, &b| dot(&cols[a], &cols[a]).total_cmp(&dot(&cols[b], &cols[b])))
                .unwrap_or(i);
            cols.swap(i, pick);
            order.swap(i, pick);
            for row in 0..i {
                let tmp = r[(row, i)];
                r[(row, i)] = r[(row, pick)];
                r[(row, pick)] = tmp;
            }
            let norm = dot(&cols[i], &cols[i]).sqrt();
            opcount::transcendental(1);
            if !(norm >= threshold) || norm == 0.0 {
                return Err(Error::RankDeficient { value: norm, threshold });
            }
            r[(i, i)] = norm;
            for v in &mut cols[i] {
                *v /= norm;
            }
            let (done, rest) = cols.split_at_mut(i + 1);
            let qi = &done[i];
            for (off, col) in rest.iter_mut().enumerate() {
                let rij = dot(qi, col);
                r[(i, i + 1 + off)] = rij;
                for (v, &q) in col.iter_mut().zip(qi) {
                    *v -= rij * q;
                }
            }
            ops += 2 * rows * (n - i) * 2 + 2 * rows;
        }
        opcount::arith(ops);
        let q = RealMatrix::from_fn(rows, n, |i, j| cols[j][i]);
        Ok(ZfDf { q, r, order })
    }

    pub fn q(&self) -> &RealMatrix {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    /// Layered detection from the projected observation `Qᵀ r`. Returns the
    /// symbol indices in input column order and `‖Qᵀr − R ŝ‖²`.
    pub fn solve_projected(&self, proj: &[f64], c: &Constellation) -> (Vec<usize>, f64) {
        let n = self.dim();
        let mut layer_sym = vec![0.0; n];
        let mut idx = vec![0; n];
        let mut err = 0.0;
        for i in (0..n).rev() {
            let mut acc = proj[i];
            for j in (i + 1)..n {
                acc -= self.r[(i, j)] * layer_sym[j];
            }
            let pick = c.nearest(acc / self.r[(i, i)]);
            layer_sym[i] = c.point(pick);
            idx[self.order[i]] = pick;
            let e = acc - self.r[(i, i)] * layer_sym[i];
            err += e * e;
        }
        opcount::arith(n * (n - 1) + 5 * n);
        (idx, err)
    }
}

/// Zero-forcing decision-feedback solution of `residual ≈ H̃ s̃`.
pub fn zf_df(h_tilde: &RealMatrix, residual: &[f64], c: &Constellation) -> Result<Vec<f64>> {
    if residual.len() != h_tilde.rows() {
        return Err(Error::LengthMismatch { expected: h_tilde.rows(), got: residual.len() });
    }
    let f = ZfDf::new(h_tilde)?;
    let proj = f.q.tr_matvec(residual);
    let (idx, _) = f.solve_projected(&proj, c);
    Ok(idx.into_iter().map(|i| c.point(i)).collect())
}

/// Greedy partition for partial marginalization: starting from the anchor,
/// repeatedly move into the marginalized set the column whose removal leaves
/// the best-conditioned remainder.
pub fn pm_partition(gram: &RealMatrix, anchor: usize, ns: usize) -> Partition {
    let n = gram.rows();
    let mut bar = vec![anchor];
    let mut tilde: Vec<usize> = (0..n).filter(|&j| j != anchor).collect();
    while bar.len() < ns.min(n) {
        let mut best = (f64::INFINITY, 0);
        for (pos, _) in tilde.iter().enumerate() {
            let rest: Vec<usize> = tilde.iter().enumerate().filter(|&(p, _)| p != pos).map(|(_, &j)| j).collect();
            let cond = if rest.is_empty() { 1.0 } else { condition_number_from_gram(&gram.submatrix(&rest, &rest)) };
            if cond < best.0 {
                best = (cond, pos);
            }
        }
        bar.push(tilde.remove(best.1));
    }
    Partition { anchor, bar, tilde }
}

/// Channel-dependent state of the PM detector for one anchor symbol.
#[derive(Debug, Clone)]
pub(crate) struct PmAnchor {
    partition: Partition,
    bar_gram: RealMatrix,
    h_bar: RealMatrix,
    zf: Option<ZfDf>,
    /// `Qᵀ H̄`
    q_h_bar: Option<RealMatrix>,
}

#[derive(Debug, Clone)]
pub(crate) struct PmPrepared {
    anchors: Vec<PmAnchor>,
}

impl PmPrepared {
    pub(crate) fn new(ch: &RealChannel, gram: &RealMatrix, ns: usize, c: &Constellation) -> Result<Self> {
        let n = ch.n_t();
        if ns == 0 || ns > n {
            return Err(Error::InvalidConfig(format!("subspace dimension {ns} outside 1..={n}")));
        }
        check_enumerable(ns, c.order())?;
        let anchors = (0..n)
            .map(|k| {
                let partition = pm_partition(gram, k, ns);
                let h_bar = ch.h().select_columns(&partition.bar);
                let bar_gram = gram.submatrix(&partition.bar, &partition.bar);
                let (zf, q_h_bar) = if partition.tilde.is_empty() {
                    (None, None)
                } else {
                    let zf = ZfDf::new(&ch.h().select_columns(&partition.tilde))?;
                    let qh = zf.q.transpose().matmul(&h_bar);
                    (Some(zf), Some(qh))
                };
                Ok(PmAnchor { partition, bar_gram, h_bar, zf, q_h_bar })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PmPrepared { anchors })
    }

    pub(crate) fn detect(&self, ch: &RealChannel, y: &[f64], c: &Constellation, clip: f64) -> Result<Vec<f64>> {
        if y.len() != ch.n_r() {
            return Err(Error::LengthMismatch { expected: ch.n_r(), got: y.len() });
        }
        let inv_n0 = 1.0 / ch.n0();
        let yy = dot(y, y);
        opcount::arith(2 * y.len());
        let mut out = Vec::with_capacity(ch.n_t() * c.bits_per_symbol());
        for a in &self.anchors {
            let ns = a.partition.bar.len();
            let zb = a.h_bar.tr_matvec(y);
            let mut sb = vec![c.point(0); ns];
            let mut gs = a.bar_gram.matvec(&sb);
            let mut rr = yy - 2.0 * dot(&zb, &sb) + dot(&sb, &gs);
            let mut proj = match (&a.zf, &a.q_h_bar) {
                (Some(zf), Some(qh)) => {
                    let qy = zf.q.tr_matvec(y);
                    let qs = qh.matvec(&sb);
                    qy.iter().zip(&qs).map(|(u, v)| u - v).collect()
                }
                _ => Vec::new(),
            };
            opcount::arith(4 * ns + 2 + proj.len());

            let mut acc = vec![f64::NEG_INFINITY; c.order()];
            let mut walker = GrayWalker::new(ns, c.order());
            loop {
                let metric = match &a.zf {
                    Some(zf) => {
                        let (_, err) = zf.solve_projected(&proj, c);
                        let pp = dot(&proj, &proj);
                        opcount::arith(2 * proj.len() + 2);
                        rr - pp + err
                    }
                    None => rr,
                };
                let d0 = walker.digits()[0];
                acc[d0] = jacobian_log_sum(acc[d0], -metric * inv_n0);
                opcount::arith(1);
                let Some(step) = walker.advance() else { break };
                let j = step.coord;
                let delta = c.point(step.to) - c.point(step.from);
                rr += delta * (2.0 * (gs[j] - zb[j]) + delta * a.bar_gram[(j, j)]);
                sb[j] += delta;
                for (col, g) in gs.iter_mut().enumerate() {
                    *g += delta * a.bar_gram[(col, j)];
                }
                if let Some(qh) = &a.q_h_bar {
                    for (i, p) in proj.iter_mut().enumerate() {
                        *p -= delta * qh[(i, j)];
                    }
                }
                opcount::arith(8 + 2 * ns + 2 * proj.len());
            }
            out.extend(symbol_bit_llrs(&acc, c, clip));
        }
        Ok(out)
    }
}

/// Partial marginalization over `ns` symbols per anchor with ZF-DF for the rest.
pub fn pm_detect(ch: &RealChannel, y: &[f64], ns: usize, c: &Constellation, clip: f64) -> Result<Vec<f64>> {
    let gram = ch.h().gram();
    PmPrepared::new(ch, &gram, ns, c)?.detect(ch, y, c, clip)
}
