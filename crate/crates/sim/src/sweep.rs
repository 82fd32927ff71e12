use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sumis_core::opcount::{table_formula, Method as OpMethod};

use crate::config::{DetectorConfig, Method, SimConfig};
use crate::error::{SimError, SimResult};
use crate::link::Link;

/// Frames evaluated per parallel batch. Results are scanned in frame order
/// and anything past the stop point is dropped, so the batch size never
/// changes the outcome.
const BATCH: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub ebn0_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub fer: f64,
    pub ber: f64,
    pub ops_y_indep: u64,
    pub ops_y_dep: u64,
    pub seconds: f64,
    pub decoder_runs: u64,
    /// Per-frame error flags in frame order, for paired comparisons.
    #[serde(skip)]
    pub error_flags: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub detector: String,
    pub points: Vec<PointResult>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random stream for one frame. Depends only on the seed, the operating point
/// and the frame index, so it is the same for every detector and worker count.
pub fn frame_rng(seed: u64, ebn0_db: f64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(ebn0_db.to_bits())));
    rng.set_stream(frame);
    rng
}

/// Closed-form counts for the configured detector and system size.
pub fn formula_ops(cfg: &SimConfig) -> (u64, u64) {
    let (n_r, n_t, m) = (cfg.system.n_r(), cfg.system.n_t(), cfg.system.pam);
    let d = &cfg.detector;
    let (method, ns) = match d.method {
        Method::ExactLlr => (OpMethod::ExactLlr, n_t),
        Method::MaxLog => (OpMethod::MaxLog, n_t),
        Method::SoftMmse => (OpMethod::SoftMmse, 1),
        Method::Pm => (OpMethod::Pm, d.ns),
        Method::Sumis => (OpMethod::Sumis, d.ns),
    };
    table_formula(method, n_r, n_t, ns, m).map(|c| (c.y_independent, c.y_dependent)).unwrap_or((0, 0))
}

fn pool(workers: usize) -> SimResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::Runtime(format!("thread pool: {e}")))
}

/// Simulates one operating point until the frame-error target or the frame cap.
pub fn run_point(link: &Link, det: &DetectorConfig, ebn0_db: f64) -> SimResult<PointResult> {
    let pool = pool(link.config().sweep.workers)?;
    run_point_in(link, det, ebn0_db, &pool)
}

fn run_point_in(link: &Link, det: &DetectorConfig, ebn0_db: f64, pool: &rayon::ThreadPool) -> SimResult<PointResult> {
    let sw = &link.config().sweep;
    let start = Instant::now();
    let (mut frames, mut frame_errors, mut bit_errors, mut decoder_runs) = (0u64, 0u64, 0u64, 0u64);
    let mut error_flags = Vec::new();
    'outer: while frames < sw.max_frames && frame_errors < sw.target_frame_errors {
        let end = (frames + BATCH).min(sw.max_frames);
        let batch: Vec<_> = pool.install(|| {
            (frames..end)
                .into_par_iter()
                .map(|f| link.run_frame(det, ebn0_db, &mut frame_rng(sw.seed, ebn0_db, f)))
                .collect()
        });
        for outcome in batch {
            let o = outcome?;
            frames += 1;
            bit_errors += o.bit_errors;
            decoder_runs += o.decoder_runs as u64;
            frame_errors += u64::from(o.frame_error);
            error_flags.push(o.frame_error);
            if frame_errors >= sw.target_frame_errors {
                break 'outer;
            }
        }
    }
    let (ops_y_indep, ops_y_dep) = formula_ops(link.config());
    Ok(PointResult {
        ebn0_db,
        frames,
        frame_errors,
        bit_errors,
        fer: frame_errors as f64 / frames as f64,
        ber: bit_errors as f64 / (frames * link.code().k() as u64) as f64,
        ops_y_indep,
        ops_y_dep,
        seconds: start.elapsed().as_secs_f64(),
        decoder_runs,
        error_flags,
    })
}

pub fn run_sweep(cfg: &SimConfig) -> SimResult<SweepResult> {
    let link = Link::new(cfg)?;
    let pool = pool(cfg.sweep.workers)?;
    let points = cfg
        .sweep
        .ebn0_db
        .iter()
        .map(|&e| run_point_in(&link, &cfg.detector, e, &pool))
        .collect::<SimResult<Vec<_>>>()?;
    Ok(SweepResult { detector: cfg.detector.label(), points })
}

pub const CSV_HEADER: [&str; 11] = [
    "ebn0_db",
    "frames",
    "frame_errors",
    "bit_errors",
    "fer",
    "ber",
    "ops_y_indep",
    "ops_y_dep",
    "seconds",
    "seed",
    "interleaver_seed",
];

pub fn write_csv<W: Write>(out: W, cfg: &SimConfig, result: &SweepResult) -> SimResult<()> {
    let io = |e: csv::Error| SimError::Runtime(format!("writing CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for p in &result.points {
        w.write_record([
            p.ebn0_db.to_string(),
            p.frames.to_string(),
            p.frame_errors.to_string(),
            p.bit_errors.to_string(),
            p.fer.to_string(),
            p.ber.to_string(),
            p.ops_y_indep.to_string(),
            p.ops_y_dep.to_string(),
            format!("{:.3}", p.seconds),
            cfg.sweep.seed.to_string(),
            cfg.sweep.interleaver_seed.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| SimError::Runtime(format!("writing CSV: {e}")))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a SimConfig,
    detector: &'a str,
    code: CodeInfo,
    frame_error_definition: &'static str,
    channel_uses_per_frame: usize,
    points: &'a [PointResult],
}

#[derive(Serialize)]
struct CodeInfo {
    n: usize,
    k: usize,
    m: usize,
    rate: f64,
    interleaver: Vec<usize>,
}

/// Resolved config, seeds, code and interleaver alongside the CSV.
pub fn sidecar_json(link: &Link, result: &SweepResult) -> SimResult<String> {
    let code = link.code();
    let meta = Sidecar {
        config: link.config(),
        detector: &result.detector,
        code: CodeInfo { n: code.n(), k: code.k(), m: code.m(), rate: code.rate(), interleaver: link.interleaver().to_vec() },
        frame_error_definition: "any information-bit error after the final decode",
        channel_uses_per_frame: link.channel_uses(),
        points: &result.points,
    };
    serde_json::to_string_pretty(&meta).map_err(|e| SimError::Runtime(e.to_string()))
}
