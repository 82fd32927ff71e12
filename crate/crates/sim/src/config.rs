//! Simulation configuration, read from TOML. Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sumis_core::detect::DEFAULT_LLR_CLIP;
use sumis_core::gray::ENUMERATION_LIMIT_BITS;
use sumis_core::{make_constellation, Constellation, DetectorKind, IcsiMode, SumisConfig};

use crate::error::{SimError, SimResult};

pub const DEFAULT_PRIOR_CLIP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactLlr,
    MaxLog,
    SoftMmse,
    Pm,
    Sumis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub method: Method,
    /// Subspace size for `pm` and `sumis`.
    #[serde(default = "one")]
    pub ns: usize,
    #[serde(default = "yes")]
    pub stage2: bool,
    #[serde(default = "yes")]
    pub optimized: bool,
    #[serde(default = "default_clip")]
    pub llr_clip: f64,
    /// Clip on decoder extrinsics fed back as detector priors. Kept below the
    /// level where a symbol counts as known, so every bit still gets channel
    /// evidence on the next pass.
    #[serde(default = "default_prior_clip")]
    pub prior_clip: f64,
}

impl DetectorConfig {
    pub fn new(method: Method) -> Self {
        DetectorConfig { method, ns: 1, stage2: true, optimized: true, llr_clip: DEFAULT_LLR_CLIP, prior_clip: DEFAULT_PRIOR_CLIP }
    }

    pub fn sumis(ns: usize) -> Self {
        DetectorConfig { ns, ..Self::new(Method::Sumis) }
    }

    pub fn label(&self) -> String {
        match self.method {
            Method::ExactLlr => "exact_llr".into(),
            Method::MaxLog => "max_log".into(),
            Method::SoftMmse => "soft_mmse".into(),
            Method::Pm => format!("pm(ns={})", self.ns),
            Method::Sumis if self.stage2 => format!("sumis(ns={})", self.ns),
            Method::Sumis => format!("sumis-stage1(ns={})", self.ns),
        }
    }

    pub(crate) fn kind(&self, icsi: IcsiMode) -> DetectorKind {
        match self.method {
            Method::ExactLlr => DetectorKind::ExactLlr,
            Method::MaxLog => DetectorKind::MaxLog,
            Method::SoftMmse => DetectorKind::SoftMmse,
            Method::Pm => DetectorKind::Pm { ns: self.ns },
            Method::Sumis => DetectorKind::Sumis(SumisConfig {
                ns: self.ns,
                stage2: self.stage2,
                optimized: self.optimized,
                icsi,
                llr_clip: self.llr_clip,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Complex transmit dimensions; the real model has twice as many.
    pub tx: usize,
    /// Complex receive dimensions.
    pub rx: usize,
    /// PAM order per real dimension (2: BPSK/QPSK, 4: 16-QAM).
    #[serde(default = "two")]
    pub pam: usize,
}

impl SystemConfig {
    pub fn n_t(&self) -> usize {
        2 * self.tx
    }

    pub fn n_r(&self) -> usize {
        2 * self.rx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularCode {
    pub n: usize,
    pub dv: usize,
    pub dc: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    /// Parity-check matrix file; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alist: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regular: Option<RegularCode>,
    #[serde(default = "default_decoder_iters")]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// One channel draw per codeword.
    #[default]
    Slow,
    /// The codeword spans `blocks` independent channel draws.
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IcsiHandling {
    /// Detect with the estimate as if it were exact.
    #[default]
    Mismatched,
    /// Fold the estimation error into the noise level.
    Matched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub fading: Fading,
    #[serde(default = "one")]
    pub blocks: usize,
    /// Channel-estimation error variance relative to the noise: `δ² = α N0`.
    #[serde(default)]
    pub icsi_alpha: f64,
    #[serde(default)]
    pub icsi: IcsiHandling,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig { fading: Fading::Slow, blocks: 1, icsi_alpha: 0.0, icsi: IcsiHandling::Mismatched }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub ebn0_db: Vec<f64>,
    #[serde(default = "default_target")]
    pub target_frame_errors: u64,
    #[serde(default = "default_max_frames")]
    pub max_frames: u64,
    /// Extra detector passes fed by decoder extrinsics; `N` means `N + 1` decoder runs.
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub interleaver_seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub detector: DetectorConfig,
    pub system: SystemConfig,
    pub code: CodeConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    pub sweep: SweepConfig,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn yes() -> bool {
    true
}
fn default_clip() -> f64 {
    DEFAULT_LLR_CLIP
}
fn default_prior_clip() -> f64 {
    DEFAULT_PRIOR_CLIP
}
fn default_decoder_iters() -> usize {
    sumis_coding::DEFAULT_MAX_ITERS
}
fn default_target() -> u64 {
    100
}
fn default_max_frames() -> u64 {
    100_000
}

impl SimConfig {
    pub fn from_toml(text: &str) -> SimResult<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `code.alist` is taken relative to it.
    pub fn load(path: &Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(alist), Some(dir)) = (&cfg.code.alist, path.parent()) {
            if alist.is_relative() {
                cfg.code.alist = Some(dir.join(alist));
            }
        }
        Ok(cfg)
    }

    pub fn constellation(&self) -> SimResult<Constellation> {
        make_constellation(self.system.pam).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn validate(&self) -> SimResult<()> {
        let bad = |msg: String| Err(SimError::Config(msg));
        let s = &self.system;
        if s.tx == 0 || s.rx < s.tx {
            return bad(format!("need 1 <= tx <= rx, got tx={} rx={}", s.tx, s.rx));
        }
        let c = self.constellation()?;
        let d = &self.detector;
        let n_t = s.n_t();
        if matches!(d.method, Method::Pm | Method::Sumis) && (d.ns == 0 || d.ns > n_t) {
            return bad(format!("ns must lie in 1..={n_t}, got {}", d.ns));
        }
        if !(d.llr_clip > 0.0) {
            return bad(format!("llr_clip must be positive, got {}", d.llr_clip));
        }
        if !(d.prior_clip > 0.0 && d.prior_clip.is_finite()) {
            return bad(format!("prior_clip must be positive and finite, got {}", d.prior_clip));
        }
        let bits = c.bits_per_symbol();
        let enumerated = match d.method {
            Method::ExactLlr | Method::MaxLog => n_t * bits,
            Method::Pm => d.ns * bits,
            Method::Sumis => d.ns * bits,
            Method::SoftMmse => bits,
        };
        if enumerated > ENUMERATION_LIMIT_BITS {
            return bad(format!("{} would enumerate 2^{enumerated} hypotheses", d.label()));
        }
        if self.sweep.iterations > 0 && !matches!(d.method, Method::ExactLlr | Method::SoftMmse | Method::Sumis) {
            return bad(format!("{} cannot take priors, so iterations must be 0", d.label()));
        }
        match (&self.code.alist, &self.code.regular) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return bad("give exactly one of code.alist and code.regular".into()),
        }
        if self.code.max_iters == 0 {
            return bad("code.max_iters must be positive".into());
        }
        let ch = &self.channel;
        if ch.blocks == 0 {
            return bad("channel.blocks must be at least 1".into());
        }
        if ch.fading == Fading::Slow && ch.blocks != 1 {
            return bad("channel.blocks only applies to fast fading".into());
        }
        if !(ch.icsi_alpha >= 0.0 && ch.icsi_alpha.is_finite()) {
            return bad(format!("icsi_alpha must be a non-negative number, got {}", ch.icsi_alpha));
        }
        let sw = &self.sweep;
        if sw.ebn0_db.is_empty() {
            return bad("sweep.ebn0_db is empty".into());
        }
        if sw.ebn0_db.iter().any(|v| !v.is_finite()) {
            return bad("sweep.ebn0_db must be finite".into());
        }
        if sw.target_frame_errors == 0 || sw.max_frames == 0 {
            return bad("target_frame_errors and max_frames must be at least 1".into());
        }
        Ok(())
    }
}
