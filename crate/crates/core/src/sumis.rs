//! Subspace marginalization with interference suppression.
//!
//! For every anchor symbol `k` the columns of `H` are split into a small set
//! `H̄` (the anchor and its most strongly coupled neighbours) and the rest
//! `H̃`, which is treated as Gaussian interference. Stage I marginalizes over
//! `s̄` under that approximation to get soft symbol estimates; stage II
//! subtracts the estimated interference, shrinks its covariance to the
//! posterior variances and marginalizes once more for the final bit LLRs.
//!
//! Two computation paths exist. The naive one forms and inverts each
//! `N_R x N_R` interference covariance. The optimized one works with a single
//! `N_T x N_T` LDL factorization per stage and `n_s x n_s` inverses per
//! partition; both produce the same exponents up to terms that do not depend
//! on `s̄`.

use crate::detect::DEFAULT_LLR_CLIP;
use crate::error::{Error, Result};
use crate::gray::{check_enumerable, GrayWalker};
use crate::linalg::{dot, jacobian_log_sum, quadratic_norm, small_inverse, spd_inverse, RealMatrix};
use crate::model::{ChannelEstimate, Constellation, RealChannel};
use crate::opcount;
use crate::prior::{symbol_bit_llrs, LogPriorSum, PriorInfo, KNOWN_SYMBOL_VARIANCE};

/// Largest `|E[s]|` kept for BPSK soft estimates.
const MEAN_SATURATION: f64 = 1.0 - 1e-12;
/// Smallest posterior variance handed to stage II.
const VARIANCE_FLOOR: f64 = 2e-12;

/// Column split for one anchor symbol. `bar[0]` is always the anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub anchor: usize,
    pub bar: Vec<usize>,
    pub tilde: Vec<usize>,
}

/// Anchor plus the `ns - 1` columns with the largest `|G[anchor, l]|`,
/// ties going to the lower index.
pub fn select_partition(gram: &RealMatrix, anchor: usize, ns: usize) -> Partition {
    let n = gram.rows();
    let mut others: Vec<usize> = (0..n).filter(|&l| l != anchor).collect();
    others.sort_by(|&a, &b| gram[(anchor, b)].abs().total_cmp(&gram[(anchor, a)].abs()).then(a.cmp(&b)));
    let take = ns.clamp(1, n) - 1;
    let mut bar = vec![anchor];
    bar.extend_from_slice(&others[..take]);
    let mut tilde = others[take..].to_vec();
    tilde.sort_unstable();
    Partition { anchor, bar, tilde }
}

/// How channel-estimation errors are folded into the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IcsiMode {
    #[default]
    None,
    ConstantModulus,
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumisConfig {
    pub ns: usize,
    pub stage2: bool,
    pub optimized: bool,
    pub icsi: IcsiMode,
    pub llr_clip: f64,
}

impl SumisConfig {
    pub fn new(ns: usize) -> Self {
        SumisConfig { ns, stage2: true, optimized: true, icsi: IcsiMode::None, llr_clip: DEFAULT_LLR_CLIP }
    }

    pub fn stage1_only(mut self) -> Self {
        self.stage2 = false;
        self
    }

    pub fn naive(mut self) -> Self {
        self.optimized = false;
        self
    }

    pub fn validate(&self, n_t: usize) -> Result<()> {
        if self.ns == 0 || self.ns > n_t {
            return Err(Error::InvalidConfig(format!("subspace dimension {} outside 1..={n_t}", self.ns)));
        }
        if !(self.llr_clip > 0.0) {
            return Err(Error::InvalidConfig(format!("LLR clip must be positive, got {}", self.llr_clip)));
        }
        Ok(())
    }
}

/// Stage-I soft symbol estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSymbolStats {
    /// Normalized log posterior per constellation point.
    pub log_pmf: Vec<Vec<f64>>,
    pub pmf: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl SoftSymbolStats {
    fn with_capacity(n: usize) -> Self {
        SoftSymbolStats {
            log_pmf: Vec::with_capacity(n),
            pmf: Vec::with_capacity(n),
            mean: Vec::with_capacity(n),
            variance: Vec::with_capacity(n),
        }
    }

    fn push_from_log_weights(&mut self, log_w: &[f64], c: &Constellation) {
        let mut norm = f64::NEG_INFINITY;
        for &w in log_w {
            norm = jacobian_log_sum(norm, w);
        }
        let log_pmf: Vec<f64> = log_w.iter().map(|w| w - norm).collect();
        let pmf: Vec<f64> = log_pmf.iter().map(|v| v.exp()).collect();
        opcount::arith(log_w.len());
        opcount::transcendental(log_w.len());
        let (mean, variance) = if c.order() == 2 {
            let m = (0.5 * (log_w[1] - log_w[0])).tanh().clamp(-MEAN_SATURATION, MEAN_SATURATION);
            opcount::arith(5);
            opcount::transcendental(1);
            (m, (1.0 - m) * (1.0 + m))
        } else {
            let m: f64 = pmf.iter().zip(c.points()).map(|(p, x)| p * x).sum();
            let v: f64 = pmf.iter().zip(c.points()).map(|(p, x)| p * (x - m).powi(2)).sum();
            opcount::arith(6 * pmf.len());
            (m, v.max(VARIANCE_FLOOR))
        };
        self.log_pmf.push(log_pmf);
        self.pmf.push(pmf);
        self.mean.push(mean);
        self.variance.push(variance);
    }

    fn push_known(&mut self, prior_pmf: &[f64], mean: f64, variance: f64) {
        self.log_pmf.push(prior_pmf.iter().map(|p| p.ln()).collect());
        self.pmf.push(prior_pmf.to_vec());
        self.mean.push(mean);
        self.variance.push(variance);
    }
}

/// Per-symbol noise level seen by a detector that knows only `Ĥ`.
pub fn icsi_effective_noise(
    est: &ChannelEstimate,
    n0: f64,
    cfg: &SumisConfig,
    c: &Constellation,
    prior: Option<&PriorInfo>,
) -> Result<f64> {
    let n_t = est.h_hat.cols();
    match cfg.icsi {
        IcsiMode::None => Ok(n0),
        IcsiMode::ConstantModulus => Ok(n_t as f64 * est.delta2 + n0),
        IcsiMode::General => {
            cfg.validate(n_t)?;
            let uniform;
            let prior = match prior {
                Some(p) => p,
                None => {
                    uniform = PriorInfo::uniform(n_t, c);
                    &uniform
                }
            };
            let means = prior.means(c);
            let vars = prior.variances(c);
            let energy: Vec<f64> = means.iter().zip(&vars).map(|(m, v)| v + m * m).collect();
            let gram = est.h_hat.gram();
            let eta = (0..n_t)
                .map(|k| select_partition(&gram, k, cfg.ns).tilde.iter().map(|&j| energy[j]).sum::<f64>())
                .sum::<f64>()
                / n_t as f64;
            Ok((eta + cfg.ns as f64) * est.delta2 + n0)
        }
    }
}

/// Symbols whose prior leaves no uncertainty are removed from the model.
#[derive(Debug, Clone)]
struct KnownSplit {
    n_t: usize,
    active: Vec<usize>,
    /// `H_K E[s_K]`, subtracted from every observation.
    offset: Option<Vec<f64>>,
    /// Prior-implied LLRs for every bit; active entries get overwritten.
    prior_llrs: Vec<f64>,
    prior_pmf: Vec<Vec<f64>>,
    prior_mean: Vec<f64>,
    prior_var: Vec<f64>,
}

impl KnownSplit {
    fn y_active(&self, y: &[f64]) -> Vec<f64> {
        match &self.offset {
            Some(off) => {
                opcount::arith(y.len());
                y.iter().zip(off).map(|(a, b)| a - b).collect()
            }
            None => y.to_vec(),
        }
    }

    fn assemble_llrs(&self, active_llrs: &[f64], b: usize) -> Vec<f64> {
        let mut out = self.prior_llrs.clone();
        for (pos, &k) in self.active.iter().enumerate() {
            out[k * b..(k + 1) * b].copy_from_slice(&active_llrs[pos * b..(pos + 1) * b]);
        }
        out
    }

    fn assemble_stats(&self, active: &SoftSymbolStats) -> SoftSymbolStats {
        let mut out = SoftSymbolStats::with_capacity(self.n_t);
        let mut next = 0;
        for k in 0..self.n_t {
            if self.active.get(next) == Some(&k) {
                out.log_pmf.push(active.log_pmf[next].clone());
                out.pmf.push(active.pmf[next].clone());
                out.mean.push(active.mean[next]);
                out.variance.push(active.variance[next]);
                next += 1;
            } else {
                out.push_known(&self.prior_pmf[k], self.prior_mean[k], self.prior_var[k]);
            }
        }
        out
    }
}

/// The (possibly reduced) detection problem over the uncertain symbols.
#[derive(Debug, Clone)]
struct Engine {
    ch: RealChannel,
    gram: RealMatrix,
    parts: Vec<Partition>,
    prior_mean: Vec<f64>,
    prior_var: Vec<f64>,
    log_prior: Vec<Vec<f64>>,
    c: Constellation,
    clip: f64,
}

fn split_problem(
    ch: &RealChannel,
    cfg: &SumisConfig,
    c: &Constellation,
    prior: Option<&PriorInfo>,
) -> Result<(KnownSplit, Option<Engine>)> {
    let n_t = ch.n_t();
    cfg.validate(n_t)?;
    let uniform;
    let prior = match prior {
        Some(p) => {
            if p.n_t() != n_t {
                return Err(Error::LengthMismatch { expected: n_t, got: p.n_t() });
            }
            p
        }
        None => {
            uniform = PriorInfo::uniform(n_t, c);
            &uniform
        }
    };
    let mean = prior.means(c);
    let var = prior.variances(c);
    let active: Vec<usize> = (0..n_t).filter(|&k| var[k] > KNOWN_SYMBOL_VARIANCE).collect();
    let known: Vec<usize> = (0..n_t).filter(|&k| var[k] <= KNOWN_SYMBOL_VARIANCE).collect();
    let offset = if known.is_empty() {
        None
    } else {
        let hk = ch.h().select_columns(&known);
        let mk: Vec<f64> = known.iter().map(|&k| mean[k]).collect();
        Some(hk.matvec(&mk))
    };
    let split = KnownSplit {
        n_t,
        active: active.clone(),
        offset,
        prior_llrs: prior.bit_llrs(c, cfg.llr_clip),
        prior_pmf: (0..n_t).map(|k| prior.pmf(k).to_vec()).collect(),
        prior_mean: mean.clone(),
        prior_var: var.clone(),
    };
    if active.is_empty() {
        return Ok((split, None));
    }
    let (ch_a, gram) = if known.is_empty() {
        (ch.clone(), ch.h().gram())
    } else {
        let h = ch.h().select_columns(&active);
        let g = h.gram();
        (RealChannel::new(h, ch.n0())?, g)
    };
    let ns = cfg.ns.min(active.len());
    check_enumerable(ns, c.order())?;
    let parts = (0..active.len()).map(|k| select_partition(&gram, k, ns)).collect();
    let sub = prior.select(&active);
    let engine = Engine {
        ch: ch_a,
        gram,
        parts,
        prior_mean: active.iter().map(|&k| mean[k]).collect(),
        prior_var: active.iter().map(|&k| var[k]).collect(),
        log_prior: sub.log_pmf(),
        c: c.clone(),
        clip: cfg.llr_clip,
    };
    Ok((split, Some(engine)))
}

fn invert_block(m: &RealMatrix) -> Result<RealMatrix> {
    if m.rows() <= 4 {
        small_inverse(m)
    } else {
        let sym = RealMatrix::from_fn(m.rows(), m.cols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
        spd_inverse(&sym)
    }
}

/// Walks `s̄` over its Gray order, reporting the anchor digit and
/// `-½ s̄ᵀ A s̄ + s̄ᵀ g + log P(s̄)` for every hypothesis.
fn walk_subspace(
    c: &Constellation,
    a: &RealMatrix,
    g: Option<&[f64]>,
    log_prior: Vec<&[f64]>,
    mut visit: impl FnMut(usize, f64),
) {
    let ns = a.rows();
    let mut walker = GrayWalker::new(ns, c.order());
    let mut s = vec![c.point(0); ns];
    let mut as_ = a.matvec(&s);
    let mut q = dot(&s, &as_);
    let mut lin = g.map_or(0.0, |g| dot(&s, g));
    let mut lp = LogPriorSum::new(log_prior, walker.digits());
    opcount::arith(4 * ns);
    loop {
        let e = -0.5 * q + lin + lp.value();
        opcount::arith(3);
        visit(walker.digits()[0], e);
        let Some(step) = walker.advance() else { break };
        let j = step.coord;
        let delta = c.point(step.to) - c.point(step.from);
        q += delta * (2.0 * as_[j] + delta * a[(j, j)]);
        for (i, v) in as_.iter_mut().enumerate() {
            *v += delta * a[(i, j)];
        }
        s[j] += delta;
        if let Some(g) = g {
            lin += delta * g[j];
            opcount::arith(2);
        }
        lp.update(j, step.from, step.to);
        opcount::arith(7 + 2 * ns);
    }
}

impl Engine {
    fn n_t(&self) -> usize {
        self.ch.n_t()
    }

    fn bar_log_prior(&self, p: &Partition) -> Vec<&[f64]> {
        p.bar.iter().map(|&j| self.log_prior[j].as_slice()).collect()
    }

    /// Log weights per anchor point with the exponent evaluated literally:
    /// `-½ ‖y − H̃m̃ − H̄s̄‖²_Q + log P(s̄)` with `Q = H̃ diag(v) H̃ᵀ + (N0/2) I`.
    fn naive_pass(&self, y: &[f64], means: &[f64], vars: &[f64]) -> Result<Vec<Vec<f64>>> {
        let h = self.ch.h();
        let n_r = self.ch.n_r();
        let m = self.c.order();
        let mut out = Vec::with_capacity(self.n_t());
        for p in &self.parts {
            let ht = h.select_columns(&p.tilde);
            let hb = h.select_columns(&p.bar);
            let mut q = RealMatrix::zeros(n_r, n_r);
            for (t, &j) in p.tilde.iter().enumerate() {
                for r1 in 0..n_r {
                    for r2 in 0..n_r {
                        q[(r1, r2)] += ht[(r1, t)] * vars[j] * ht[(r2, t)];
                    }
                }
            }
            opcount::arith(3 * n_r * n_r * p.tilde.len());
            q.add_diag(self.ch.n0() / 2.0);
            let q_inv = spd_inverse(&q)?;
            let mt: Vec<f64> = p.tilde.iter().map(|&j| means[j]).collect();
            let yp: Vec<f64> = if p.tilde.is_empty() {
                y.to_vec()
            } else {
                let off = ht.matvec(&mt);
                y.iter().zip(&off).map(|(a, b)| a - b).collect()
            };
            let mut acc = vec![f64::NEG_INFINITY; m];
            let mut walker = GrayWalker::new(p.bar.len(), m);
            loop {
                let digits = walker.digits();
                let sb: Vec<f64> = digits.iter().map(|&d| self.c.point(d)).collect();
                let hs = hb.matvec(&sb);
                let r: Vec<f64> = yp.iter().zip(&hs).map(|(a, b)| a - b).collect();
                let lp: f64 = p.bar.iter().zip(digits).map(|(&j, &d)| self.log_prior[j][d]).sum();
                let e = -0.5 * quadratic_norm(&r, &q_inv) + lp;
                acc[digits[0]] = jacobian_log_sum(acc[digits[0]], e);
                if walker.advance().is_none() {
                    break;
                }
            }
            out.push(acc);
        }
        Ok(out)
    }

    fn stats(&self, log_w: &[Vec<f64>]) -> SoftSymbolStats {
        let mut st = SoftSymbolStats::with_capacity(log_w.len());
        for w in log_w {
            st.push_from_log_weights(w, &self.c);
        }
        st
    }

    fn llrs(&self, log_w: &[Vec<f64>]) -> Vec<f64> {
        log_w.iter().flat_map(|w| symbol_bit_llrs(w, &self.c, self.clip)).collect()
    }
}

/// `N_T x N_T` filtering state for one variance vector `v`:
/// `K = (N0/2) I + V^½ G V^½`, `T = K⁻¹ V^½`, and the partition blocks
/// `C = H̄ᵀ R⁻¹ H̄` with `R = (N0/2) I + H V Hᵀ`, using `Hᵀ R⁻¹ = V^-½ T Hᵀ`.
#[derive(Debug, Clone)]
struct Filter {
    inv_half: Vec<f64>,
    t: RealMatrix,
}

/// Per-partition blocks; `A = H̄ᵀ Q⁻¹ H̄ = (C⁻¹ − V̄)⁻¹` and `F = A C⁻¹`.
///
/// Both come from the push-through form with `U = V̄^½`:
/// `A = C + C U (I − U C U)⁻¹ U C`, `F = I + C U (I − U C U)⁻¹ U`.
/// Going through `C⁻¹` and back loses digits when `H̄` is badly conditioned.
struct Block {
    c: RealMatrix,
    a: RealMatrix,
    f: RealMatrix,
}

impl Filter {
    fn new(gram: &RealMatrix, n0: f64, var: &[f64]) -> Result<Self> {
        let n = var.len();
        let half: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        let inv_half: Vec<f64> = half.iter().map(|h| 1.0 / h).collect();
        opcount::transcendental(n);
        opcount::arith(n);
        let mut k = RealMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = half[i] * gram[(i, j)] * half[j];
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        opcount::arith(n * (n + 1));
        k.add_diag(n0 / 2.0);
        let k_inv = spd_inverse(&k)?;
        let t = RealMatrix::from_fn(n, n, |a, c| k_inv[(a, c)] * half[c]);
        opcount::arith(n * n);
        Ok(Filter { inv_half, t })
    }

    /// `Hᵀ R⁻¹ y` given `r = Hᵀ y`-type input.
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let tr = self.t.matvec(r);
        opcount::arith(tr.len());
        tr.iter().zip(&self.inv_half).map(|(a, b)| a * b).collect()
    }

    fn blocks(&self, gram: &RealMatrix, parts: &[Partition], var: &[f64]) -> Result<Vec<Block>> {
        let n = gram.rows();
        let mut memo = vec![f64::NAN; n * n];
        let mut entry = |a: usize, b: usize| -> f64 {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            let slot = &mut memo[a * n + b];
            if slot.is_nan() {
                let mut s = 0.0;
                for c in 0..n {
                    s += self.t[(a, c)] * gram[(c, b)];
                }
                *slot = self.inv_half[a] * s;
                opcount::arith(2 * n + 1);
            }
            *slot
        };
        parts
            .iter()
            .map(|p| {
                let ns = p.bar.len();
                let mut cb = RealMatrix::zeros(ns, ns);
                for i in 0..ns {
                    for j in 0..ns {
                        cb[(i, j)] = entry(p.bar[i], p.bar[j]);
                    }
                }
                let u: Vec<f64> = p.bar.iter().map(|&j| var[j].sqrt()).collect();
                opcount::transcendental(ns);
                let b = RealMatrix::from_fn(ns, ns, |i, j| cb[(i, j)] * u[j]);
                let mut e = RealMatrix::from_fn(ns, ns, |i, j| -u[i] * b[(i, j)]);
                e.add_diag(1.0);
                opcount::arith(2 * ns * ns + ns);
                let bn = b.matmul(&invert_block(&e)?);
                let mut a = bn.matmul(&b.transpose());
                for i in 0..ns {
                    for j in i..ns {
                        let v = cb[(i, j)] + 0.5 * (a[(i, j)] + a[(j, i)]);
                        a[(i, j)] = v;
                        a[(j, i)] = v;
                    }
                }
                let mut f = RealMatrix::from_fn(ns, ns, |i, j| bn[(i, j)] * u[j]);
                f.add_diag(1.0);
                opcount::arith(2 * ns * ns + ns);
                Ok(Block { c: cb, a, f })
            })
            .collect()
    }
}

/// Stage-I data per partition that does not depend on `y`.
#[derive(Debug, Clone)]
struct Stage1Part {
    a: RealMatrix,
    /// `A C⁻¹`
    f: RealMatrix,
    /// `A m̄`
    a_mean: Vec<f64>,
    /// `-½ s̄ᵀ A s̄ + log P(s̄)` in Gray order.
    base: Vec<f64>,
    /// `C = H̄ᵀ R⁻¹ H̄`, kept for inspection.
    c: RealMatrix,
}

#[derive(Debug, Clone)]
struct Stage1Cache {
    filter: Filter,
    zero_mean: bool,
    parts: Vec<Stage1Part>,
}

impl Engine {
    fn stage1_cache(&self) -> Result<Stage1Cache> {
        let filter = Filter::new(&self.gram, self.ch.n0(), &self.prior_var)?;
        let blocks = filter.blocks(&self.gram, &self.parts, &self.prior_var)?;
        let parts = self
            .parts
            .iter()
            .zip(blocks)
            .map(|(p, blk)| {
                let mb: Vec<f64> = p.bar.iter().map(|&j| self.prior_mean[j]).collect();
                let a_mean = blk.a.matvec(&mb);
                let mut base = Vec::with_capacity(self.c.order().pow(p.bar.len() as u32));
                walk_subspace(&self.c, &blk.a, None, self.bar_log_prior(p), |_, e| base.push(e));
                Ok(Stage1Part { a: blk.a, f: blk.f, a_mean, base, c: blk.c })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Stage1Cache {
            filter,
            zero_mean: self.prior_mean.iter().all(|&m| m == 0.0),
            parts,
        })
    }

    fn stage1_fast(&self, cache: &Stage1Cache, z: &[f64]) -> Vec<Vec<f64>> {
        let r = if cache.zero_mean {
            z.to_vec()
        } else {
            let gm = self.gram.matvec(&self.prior_mean);
            opcount::arith(z.len());
            z.iter().zip(&gm).map(|(a, b)| a - b).collect()
        };
        let v = cache.filter.apply(&r);
        let m = self.c.order();
        self.parts
            .iter()
            .zip(&cache.parts)
            .map(|(p, pc)| {
                let zb: Vec<f64> = p.bar.iter().map(|&j| v[j]).collect();
                let fz = pc.f.matvec(&zb);
                let g: Vec<f64> = fz.iter().zip(&pc.a_mean).map(|(a, b)| a + b).collect();
                opcount::arith(g.len());
                let mut acc = vec![f64::NEG_INFINITY; m];
                let mut walker = GrayWalker::new(p.bar.len(), m);
                let mut s = vec![self.c.point(0); p.bar.len()];
                let mut lin = dot(&s, &g);
                opcount::arith(2 * g.len());
                let mut idx = 0;
                loop {
                    let e = pc.base[idx] + lin;
                    let d0 = walker.digits()[0];
                    acc[d0] = jacobian_log_sum(acc[d0], e);
                    opcount::arith(1);
                    let Some(step) = walker.advance() else { break };
                    let delta = self.c.point(step.to) - self.c.point(step.from);
                    s[step.coord] += delta;
                    lin += delta * g[step.coord];
                    opcount::arith(3);
                    idx += 1;
                }
                acc
            })
            .collect()
    }

    fn stage2_fast(&self, z: &[f64], stats: &SoftSymbolStats) -> Result<Vec<f64>> {
        let var: Vec<f64> = stats.variance.iter().map(|v| v.max(VARIANCE_FLOOR)).collect();
        let mean = &stats.mean;
        let filter = Filter::new(&self.gram, self.ch.n0(), &var)?;
        let blocks = filter.blocks(&self.gram, &self.parts, &var)?;
        let gm = self.gram.matvec(mean);
        let r: Vec<f64> = z.iter().zip(&gm).map(|(a, b)| a - b).collect();
        opcount::arith(r.len());
        let v = filter.apply(&r);
        let m = self.c.order();
        let mut out = Vec::with_capacity(self.n_t() * self.c.bits_per_symbol());
        for (p, blk) in self.parts.iter().zip(&blocks) {
            let zb: Vec<f64> = p.bar.iter().map(|&j| v[j]).collect();
            let mb: Vec<f64> = p.bar.iter().map(|&j| mean[j]).collect();
            let am = blk.a.matvec(&mb);
            let g: Vec<f64> = blk.f.matvec(&zb).iter().zip(&am).map(|(x, y)| x + y).collect();
            opcount::arith(g.len());
            let mut acc = vec![f64::NEG_INFINITY; m];
            walk_subspace(&self.c, &blk.a, Some(&g), self.bar_log_prior(p), |d0, e| {
                acc[d0] = jacobian_log_sum(acc[d0], e);
            });
            out.extend(symbol_bit_llrs(&acc, &self.c, self.clip));
        }
        Ok(out)
    }

    fn stage2_naive(&self, y: &[f64], stats: &SoftSymbolStats) -> Result<Vec<f64>> {
        let var: Vec<f64> = stats.variance.iter().map(|v| v.max(VARIANCE_FLOOR)).collect();
        let log_w = self.naive_pass(y, &stats.mean, &var)?;
        Ok(self.llrs(&log_w))
    }
}

/// Result of a full detection pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SumisOutput {
    pub stats: SoftSymbolStats,
    pub llrs: Vec<f64>,
}

/// Channel- and prior-dependent state of the optimized path.
#[derive(Debug, Clone)]
pub struct SumisPrecomp {
    cfg: SumisConfig,
    b: usize,
    split: KnownSplit,
    inner: Option<(Engine, Stage1Cache)>,
}

impl SumisPrecomp {
    /// Partitions over the uncertain symbols (indices relative to them).
    pub fn partitions(&self) -> &[Partition] {
        self.inner.as_ref().map_or(&[], |(e, _)| e.parts.as_slice())
    }

    /// `H̄ᵀ Q⁻¹ H̄` for partition `k`.
    pub fn subspace_precision(&self, k: usize) -> Option<&RealMatrix> {
        self.inner.as_ref().map(|(_, c)| &c.parts[k].a)
    }

    /// `H̄ᵀ R⁻¹ H̄` for partition `k`, `R` the full signal-plus-noise covariance.
    pub fn subspace_gain(&self, k: usize) -> Option<&RealMatrix> {
        self.inner.as_ref().map(|(_, c)| &c.parts[k].c)
    }
}

pub fn precompute_y_independent(
    ch: &RealChannel,
    cfg: &SumisConfig,
    c: &Constellation,
    prior: Option<&PriorInfo>,
) -> Result<SumisPrecomp> {
    let (split, engine) = split_problem(ch, cfg, c, prior)?;
    let inner = match engine {
        Some(e) => {
            let cache = e.stage1_cache()?;
            Some((e, cache))
        }
        None => None,
    };
    Ok(SumisPrecomp { cfg: cfg.clone(), b: c.bits_per_symbol(), split, inner })
}

pub fn apply_y_dependent(pre: &SumisPrecomp, y: &[f64]) -> Result<SumisOutput> {
    let Some((engine, cache)) = &pre.inner else {
        let stats = pre.split.assemble_stats(&SoftSymbolStats::with_capacity(0));
        return Ok(SumisOutput { stats, llrs: pre.split.prior_llrs.clone() });
    };
    if y.len() != engine.ch.n_r() {
        return Err(Error::LengthMismatch { expected: engine.ch.n_r(), got: y.len() });
    }
    let ya = pre.split.y_active(y);
    let z = engine.ch.h().tr_matvec(&ya);
    let log_w = engine.stage1_fast(cache, &z);
    let stats = engine.stats(&log_w);
    let llrs = if pre.cfg.stage2 { engine.stage2_fast(&z, &stats)? } else { engine.llrs(&log_w) };
    Ok(SumisOutput { stats: pre.split.assemble_stats(&stats), llrs: pre.split.assemble_llrs(&llrs, pre.b) })
}

/// Stage I alone: soft estimates of every symbol.
pub fn stage1(
    ch: &RealChannel,
    y: &[f64],
    cfg: &SumisConfig,
    c: &Constellation,
    prior: Option<&PriorInfo>,
) -> Result<SoftSymbolStats> {
    if cfg.optimized {
        let mut cfg = cfg.clone();
        cfg.stage2 = false;
        let pre = precompute_y_independent(ch, &cfg, c, prior)?;
        return Ok(apply_y_dependent(&pre, y)?.stats);
    }
    let (split, engine) = split_problem(ch, cfg, c, prior)?;
    let Some(engine) = engine else {
        return Ok(split.assemble_stats(&SoftSymbolStats::with_capacity(0)));
    };
    check_len(ch, y)?;
    let ya = split.y_active(y);
    let log_w = engine.naive_pass(&ya, &engine.prior_mean, &engine.prior_var)?;
    Ok(split.assemble_stats(&engine.stats(&log_w)))
}

/// Stage II given stage-I estimates for all `N_T` symbols.
pub fn stage2(
    ch: &RealChannel,
    y: &[f64],
    stats: &SoftSymbolStats,
    cfg: &SumisConfig,
    c: &Constellation,
    prior: Option<&PriorInfo>,
) -> Result<Vec<f64>> {
    check_len(ch, y)?;
    if stats.mean.len() != ch.n_t() || stats.variance.len() != ch.n_t() {
        return Err(Error::LengthMismatch { expected: ch.n_t(), got: stats.mean.len() });
    }
    let (split, engine) = split_problem(ch, cfg, c, prior)?;
    let Some(engine) = engine else {
        return Ok(split.prior_llrs);
    };
    let mut sub = SoftSymbolStats::with_capacity(split.active.len());
    for &k in &split.active {
        sub.log_pmf.push(stats.log_pmf.get(k).cloned().unwrap_or_default());
        sub.pmf.push(stats.pmf.get(k).cloned().unwrap_or_default());
        sub.mean.push(stats.mean[k]);
        sub.variance.push(stats.variance[k]);
    }
    let ya = split.y_active(y);
    let llrs = if cfg.optimized {
        let z = engine.ch.h().tr_matvec(&ya);
        engine.stage2_fast(&z, &sub)?
    } else {
        engine.stage2_naive(&ya, &sub)?
    };
    Ok(split.assemble_llrs(&llrs, c.bits_per_symbol()))
}

fn check_len(ch: &RealChannel, y: &[f64]) -> Result<()> {
    if y.len() != ch.n_r() {
        return Err(Error::LengthMismatch { expected: ch.n_r(), got: y.len() });
    }
    Ok(())
}

/// Full detector output (stage I, then stage II when enabled).
pub fn sumis_run(
    ch: &RealChannel,
    y: &[f64],
    cfg: &SumisConfig,
    c: &Constellation,
    prior: Option<&PriorInfo>,
) -> Result<SumisOutput> {
    check_len(ch, y)?;
    if cfg.optimized {
        let pre = precompute_y_independent(ch, cfg, c, prior)?;
        return apply_y_dependent(&pre, y);
    }
    let (split, engine) = split_problem(ch, cfg, c, prior)?;
    let Some(engine) = engine else {
        let stats = split.assemble_stats(&SoftSymbolStats::with_capacity(0));
        return Ok(SumisOutput { stats, llrs: split.prior_llrs });
    };
    let ya = split.y_active(y);
    let log_w = engine.naive_pass(&ya, &engine.prior_mean, &engine.prior_var)?;
    let stats = engine.stats(&log_w);
    let llrs = if cfg.stage2 { engine.stage2_naive(&ya, &stats)? } else { engine.llrs(&log_w) };
    Ok(SumisOutput {
        stats: split.assemble_stats(&stats),
        llrs: split.assemble_llrs(&llrs, c.bits_per_symbol()),
    })
}

pub fn sumis_detect(
    ch: &RealChannel,
    y: &[f64],
    cfg: &SumisConfig,
    c: &Constellation,
    prior: Option<&PriorInfo>,
) -> Result<Vec<f64>> {
    Ok(sumis_run(ch, y, cfg, c, prior)?.llrs)
}

/// Linear MMSE soft output: stage I with a one-dimensional subspace.
pub fn soft_mmse(
    ch: &RealChannel,
    y: &[f64],
    c: &Constellation,
    prior: Option<&PriorInfo>,
    clip: f64,
) -> Result<Vec<f64>> {
    let mut cfg = SumisConfig::new(1).stage1_only();
    cfg.llr_clip = clip;
    sumis_detect(ch, y, &cfg, c, prior)
}
