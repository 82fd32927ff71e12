//! Uniform front end over all detectors, split into a channel-dependent
//! `prepare` step and a per-observation `detect` step.

use crate::detect::{exact_llr_with_gram, max_log_with_gram, PmPrepared, DEFAULT_LLR_CLIP};
use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::model::{Constellation, RealChannel};
use crate::prior::PriorInfo;
use crate::sumis::{apply_y_dependent, precompute_y_independent, sumis_detect, SumisConfig, SumisPrecomp};

#[derive(Debug, Clone, PartialEq)]
pub enum DetectorKind {
    ExactLlr,
    MaxLog,
    SoftMmse,
    Pm { ns: usize },
    Sumis(SumisConfig),
}

impl DetectorKind {
    pub fn supports_priors(&self) -> bool {
        matches!(self, DetectorKind::ExactLlr | DetectorKind::SoftMmse | DetectorKind::Sumis(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    kind: DetectorKind,
    c: Constellation,
    clip: f64,
}

impl Detector {
    pub fn new(kind: DetectorKind, c: Constellation) -> Self {
        let clip = match &kind {
            DetectorKind::Sumis(cfg) => cfg.llr_clip,
            _ => DEFAULT_LLR_CLIP,
        };
        Detector { kind, c, clip }
    }

    pub fn with_clip(mut self, clip: f64) -> Self {
        self.clip = clip;
        if let DetectorKind::Sumis(cfg) = &mut self.kind {
            cfg.llr_clip = clip;
        }
        self
    }

    pub fn kind(&self) -> &DetectorKind {
        &self.kind
    }

    pub fn constellation(&self) -> &Constellation {
        &self.c
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    fn soft_mmse_config(&self) -> SumisConfig {
        let mut cfg = SumisConfig::new(1).stage1_only();
        cfg.llr_clip = self.clip;
        cfg
    }

    /// Does all work that depends on the channel but not on `y`.
    pub fn prepare(&self, ch: &RealChannel) -> Result<PreparedDetector<'_>> {
        let state = match &self.kind {
            DetectorKind::ExactLlr | DetectorKind::MaxLog => State::Exhaustive { gram: ch.h().gram() },
            DetectorKind::Pm { ns } => {
                let gram = ch.h().gram();
                State::Pm(PmPrepared::new(ch, &gram, *ns, &self.c)?)
            }
            DetectorKind::SoftMmse => {
                State::Sumis(Some(precompute_y_independent(ch, &self.soft_mmse_config(), &self.c, None)?))
            }
            DetectorKind::Sumis(cfg) => {
                cfg.validate(ch.n_t())?;
                if cfg.optimized {
                    State::Sumis(Some(precompute_y_independent(ch, cfg, &self.c, None)?))
                } else {
                    State::Sumis(None)
                }
            }
        };
        Ok(PreparedDetector { det: self, ch: ch.clone(), state })
    }

    pub fn detect(&self, ch: &RealChannel, y: &[f64], prior: Option<&PriorInfo>) -> Result<Vec<f64>> {
        self.prepare(ch)?.detect(y, prior)
    }
}

#[derive(Debug, Clone)]
enum State {
    Exhaustive { gram: RealMatrix },
    Pm(PmPrepared),
    /// Cached uniform-prior precompute for the optimized path.
    Sumis(Option<SumisPrecomp>),
}

/// A detector bound to one channel realization.
#[derive(Debug, Clone)]
pub struct PreparedDetector<'a> {
    det: &'a Detector,
    ch: RealChannel,
    state: State,
}

impl PreparedDetector<'_> {
    pub fn channel(&self) -> &RealChannel {
        &self.ch
    }

    /// Bit LLRs for one observation; `prior = None` means uniform.
    pub fn detect(&self, y: &[f64], prior: Option<&PriorInfo>) -> Result<Vec<f64>> {
        let prior = prior.filter(|p| !p.is_uniform());
        let d = self.det;
        if prior.is_some() && !d.kind.supports_priors() {
            return Err(Error::InvalidPrior(format!("{:?} detection assumes uniform priors", d.kind)));
        }
        if y.len() != self.ch.n_r() {
            return Err(Error::LengthMismatch { expected: self.ch.n_r(), got: y.len() });
        }
        match (&self.state, &d.kind) {
            (State::Exhaustive { gram }, DetectorKind::ExactLlr) => exact_llr_with_gram(&self.ch, gram, y, &d.c, prior, d.clip),
            (State::Exhaustive { gram }, _) => max_log_with_gram(&self.ch, gram, y, &d.c, d.clip),
            (State::Pm(pm), _) => pm.detect(&self.ch, y, &d.c, d.clip),
            (State::Sumis(cached), kind) => {
                let cfg = match kind {
                    DetectorKind::Sumis(cfg) => cfg.clone(),
                    _ => d.soft_mmse_config(),
                };
                match (cached, prior) {
                    (Some(pre), None) => Ok(apply_y_dependent(pre, y)?.llrs),
                    _ => sumis_detect(&self.ch, y, &cfg, &d.c, prior),
                }
            }
        }
    }
}
