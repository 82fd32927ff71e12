//! One coded frame through the link: encode, interleave, map onto channel
//! uses, fade, add noise, then detect and decode (optionally iterating).

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sumis_coding::{generate_regular_ldpc, load_alist, spa_decode, CodeSpec, DecodeOutput};
use sumis_core::model::{corrupt_channel, ebn0_to_n0, modulate, sample_rayleigh};
use sumis_core::sumis::icsi_effective_noise;
use sumis_core::{Constellation, Detector, IcsiMode, PriorInfo, RealChannel, RealMatrix, SumisConfig};

use crate::config::{CodeConfig, DetectorConfig, Fading, IcsiHandling, Method, SimConfig};
use crate::error::{SimError, SimResult};

/// Detector-side LLR limit, wide enough that no realistic posterior saturates.
const POSTERIOR_CLIP: f64 = 1e3;

/// Everything a run shares across frames.
#[derive(Debug, Clone)]
pub struct Link {
    cfg: SimConfig,
    code: CodeSpec,
    /// Transmit position `i` carries coded bit `interleaver[i]`.
    interleaver: Vec<usize>,
    c: Constellation,
}

/// One channel realization as seen by transmitter and receiver.
#[derive(Debug, Clone)]
pub struct ChannelBlock {
    pub truth: RealChannel,
    /// Channel handed to the detector: the estimate and the noise level it assumes.
    pub seen: RealChannel,
    /// Channel uses `uses.start..uses.end` of the frame go through this block.
    pub uses: std::ops::Range<usize>,
}

#[derive(Debug, Clone)]
pub struct FrameData {
    pub info: Vec<u8>,
    /// Interleaved coded bits followed by random filler up to a whole channel use.
    pub tx_bits: Vec<u8>,
    pub symbols: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub blocks: Vec<ChannelBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameOutcome {
    pub bit_errors: u64,
    pub frame_error: bool,
    pub decoder_runs: usize,
}

pub fn load_code(cfg: &CodeConfig) -> SimResult<CodeSpec> {
    match (&cfg.alist, &cfg.regular) {
        (Some(path), None) => read_alist(path),
        (None, Some(r)) => generate_regular_ldpc(r.n, r.dv, r.dc, &mut ChaCha8Rng::seed_from_u64(r.seed))
            .map_err(|e| SimError::Config(e.to_string())),
        _ => Err(SimError::Config("give exactly one of code.alist and code.regular".into())),
    }
}

fn read_alist(path: &Path) -> SimResult<CodeSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
    load_alist(&text).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))
}

pub fn interleaver(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

impl Link {
    pub fn new(cfg: &SimConfig) -> SimResult<Self> {
        cfg.validate()?;
        let code = load_code(&cfg.code)?;
        let link = Link {
            cfg: cfg.clone(),
            interleaver: interleaver(code.n(), cfg.sweep.interleaver_seed),
            code,
            c: cfg.constellation()?,
        };
        if cfg.channel.fading == Fading::Fast && cfg.channel.blocks > link.channel_uses() {
            return Err(SimError::Config(format!(
                "{} fading blocks but only {} channel uses per codeword",
                cfg.channel.blocks,
                link.channel_uses()
            )));
        }
        Ok(link)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn code(&self) -> &CodeSpec {
        &self.code
    }

    pub fn interleaver(&self) -> &[usize] {
        &self.interleaver
    }

    pub fn constellation(&self) -> &Constellation {
        &self.c
    }

    pub fn bits_per_use(&self) -> usize {
        self.cfg.system.n_t() * self.c.bits_per_symbol()
    }

    pub fn channel_uses(&self) -> usize {
        self.code.n().div_ceil(self.bits_per_use())
    }

    pub fn n0(&self, ebn0_db: f64) -> f64 {
        ebn0_to_n0(ebn0_db, self.code.rate(), &self.c)
    }

    /// Contiguous, even split of the channel uses; the last block takes the remainder.
    pub fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let uses = self.channel_uses();
        let blocks = match self.cfg.channel.fading {
            Fading::Slow => 1,
            Fading::Fast => self.cfg.channel.blocks,
        };
        let per = uses / blocks;
        (0..blocks).map(|b| b * per..if b + 1 == blocks { uses } else { (b + 1) * per }).collect()
    }

    /// Draws data, channels and noise for one frame. Detection never touches
    /// the random stream, so every detector sees the same frames.
    pub fn transmit(&self, ebn0_db: f64, rng: &mut ChaCha8Rng) -> SimResult<FrameData> {
        let n0 = self.n0(ebn0_db);
        let (n_t, bpu) = (self.cfg.system.n_t(), self.bits_per_use());
        let info: Vec<u8> = (0..self.code.k()).map(|_| rng.random_range(0..2)).collect();
        let coded = self.code.encode(&info)?;
        let mut tx_bits: Vec<u8> = self.interleaver.iter().map(|&j| coded[j]).collect();
        tx_bits.extend((coded.len()..self.channel_uses() * bpu).map(|_| rng.random_range(0..2u8)));
        let symbols = tx_bits
            .chunks(bpu)
            .map(|bits| modulate(bits, &self.c, n_t))
            .collect::<Result<Vec<_>, _>>()?;

        let mut blocks = Vec::new();
        let mut y = Vec::with_capacity(symbols.len());
        for uses in self.block_ranges() {
            let h = sample_rayleigh(self.cfg.system.tx, self.cfg.system.rx, rng).to_real();
            let truth = RealChannel::new(h, n0)?;
            let seen = self.receiver_view(&truth, n0, rng)?;
            for s in &symbols[uses.clone()] {
                y.push(truth.transmit(s, rng));
            }
            blocks.push(ChannelBlock { truth, seen, uses });
        }
        Ok(FrameData { info, tx_bits, symbols, y, blocks })
    }

    fn receiver_view(&self, truth: &RealChannel, n0: f64, rng: &mut ChaCha8Rng) -> SimResult<RealChannel> {
        let alpha = self.cfg.channel.icsi_alpha;
        if alpha == 0.0 {
            return Ok(truth.clone());
        }
        let est = corrupt_channel(truth.h(), alpha * n0, rng)?;
        let n0_seen = match self.cfg.channel.icsi {
            IcsiHandling::Mismatched => n0,
            IcsiHandling::Matched => {
                let d = &self.cfg.detector;
                let ns = if matches!(d.method, Method::Sumis | Method::Pm) { d.ns } else { truth.n_t() };
                let mode = if self.c.is_constant_modulus() { IcsiMode::ConstantModulus } else { IcsiMode::General };
                let cfg = SumisConfig { icsi: mode, ..SumisConfig::new(ns) };
                icsi_effective_noise(&est, n0, &cfg, &self.c, None)?
            }
        };
        Ok(RealChannel::new(est.h_hat, n0_seen)?)
    }

    /// Detection and decoding of one frame with `iterations` extra detector
    /// passes driven by decoder extrinsics.
    pub fn receive(&self, det: &DetectorConfig, frame: &FrameData) -> SimResult<(DecodeOutput, usize)> {
        // Clipping happens on the extrinsic below; a saturated posterior would
        // bias `posterior - prior` against the prior.
        let detector = Detector::new(det.kind(IcsiMode::None), self.c.clone()).with_clip(POSTERIOR_CLIP);
        let clip = det.llr_clip;
        let prepared = frame
            .blocks
            .iter()
            .map(|b| detector.prepare(&b.seen))
            .collect::<Result<Vec<_>, _>>()?;
        let mut block_of = vec![0; frame.y.len()];
        for (b, blk) in frame.blocks.iter().enumerate() {
            block_of[blk.uses.clone()].iter_mut().for_each(|x| *x = b);
        }
        let detect = |priors: Option<&[f64]>| -> SimResult<Vec<f64>> {
            let bpu = self.bits_per_use();
            let mut out = Vec::with_capacity(frame.y.len() * bpu);
            for (u, y) in frame.y.iter().enumerate() {
                let bits = priors.map(|p| &p[u * bpu..(u + 1) * bpu]);
                let prior = bits.map(|b| PriorInfo::from_bit_llrs(b, &self.c)).transpose()?;
                let llrs = prepared[block_of[u]].detect(y, prior.as_ref())?;
                match bits {
                    // Hand the decoder only what the observation added.
                    Some(b) => out.extend(llrs.iter().zip(b).map(|(l, p)| (l - p).clamp(-clip, clip))),
                    None => out.extend(llrs.iter().map(|l| l.clamp(-clip, clip))),
                }
            }
            Ok(out)
        };
        iterate_detect_decode(&self.code, &self.interleaver, self.cfg.sweep.iterations, self.cfg.code.max_iters, det.prior_clip, detect)
    }

    pub fn run_frame(&self, det: &DetectorConfig, ebn0_db: f64, rng: &mut ChaCha8Rng) -> SimResult<FrameOutcome> {
        let frame = self.transmit(ebn0_db, rng)?;
        let (out, decoder_runs) = self.receive(det, &frame)?;
        let decoded = self.code.extract_info(&out.hard);
        let bit_errors = decoded.iter().zip(&frame.info).filter(|(a, b)| a != b).count() as u64;
        Ok(FrameOutcome { bit_errors, frame_error: bit_errors > 0, decoder_runs })
    }
}

/// Detect → decode, `iterations` more times with decoder extrinsics (clipped to
/// `clip`) as detector priors. `detect` maps interleaved-order prior LLRs to
/// interleaved-order detector LLRs, including any filler positions.
/// Returns the last decoder output and the number of decoder runs.
pub fn iterate_detect_decode(
    code: &CodeSpec,
    interleaver: &[usize],
    iterations: usize,
    max_iters: usize,
    clip: f64,
    mut detect: impl FnMut(Option<&[f64]>) -> SimResult<Vec<f64>>,
) -> SimResult<(DecodeOutput, usize)> {
    let mut priors: Option<Vec<f64>> = None;
    let mut runs = 0;
    loop {
        let llrs = detect(priors.as_deref())?;
        let mut dec_in = vec![0.0; code.n()];
        for (i, &j) in interleaver.iter().enumerate() {
            dec_in[j] = llrs[i];
        }
        let out = spa_decode(code, &dec_in, max_iters)?;
        runs += 1;
        if runs > iterations {
            return Ok((out, runs));
        }
        let mut p = vec![0.0; llrs.len()];
        for (i, &j) in interleaver.iter().enumerate() {
            p[i] = out.extrinsic[j].clamp(-clip, clip);
        }
        priors = Some(p);
    }
}

/// Average received signal and noise energy per real receive dimension,
/// for checking the SNR calibration.
pub fn energy_per_dimension(frame: &FrameData) -> (f64, f64) {
    let (mut sig, mut noise, mut count) = (0.0, 0.0, 0usize);
    for blk in &frame.blocks {
        let h: &RealMatrix = blk.truth.h();
        for u in blk.uses.clone() {
            let hs = h.matvec(&frame.symbols[u]);
            for (a, b) in hs.iter().zip(&frame.y[u]) {
                sig += a * a;
                noise += (b - a) * (b - a);
                count += 1;
            }
        }
    }
    (sig / count as f64, noise / count as f64)
}
