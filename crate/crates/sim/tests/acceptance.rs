//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::time::Instant;

use sumis_sim::config::{ChannelConfig, CodeConfig, IcsiHandling, RegularCode, SweepConfig, SystemConfig};
use sumis_sim::stats::{crossing, discordant, mcnemar_greater, Rate};
use sumis_sim::validate::{
    large_mimo_trend, op_count_table, oracle_equivalence, path_equivalence, property_suite, soft_mmse_identity, Check,
};
use sumis_sim::{run_point, DetectorConfig, Link, Method, PointResult, SimConfig};

const SEED: u64 = 20_240_611;
/// Each Monte Carlo point runs to this many frame errors.
const TARGET_ERRORS: u64 = 100;
const MAX_FRAMES: u64 = 20_000;
/// One-sided significance for the paired comparisons.
const ALPHA: f64 = 0.05;

fn base(dc: usize) -> SimConfig {
    SimConfig {
        detector: DetectorConfig::sumis(3),
        system: SystemConfig { tx: 3, rx: 3, pam: 2 },
        code: CodeConfig { alist: None, regular: Some(RegularCode { n: 960, dv: 3, dc, seed: 7 }), max_iters: 50 },
        channel: ChannelConfig::default(),
        sweep: SweepConfig {
            ebn0_db: vec![0.0],
            target_frame_errors: TARGET_ERRORS,
            max_frames: MAX_FRAMES,
            iterations: 0,
            seed: SEED,
            interleaver_seed: 3,
            workers: 0,
        },
    }
}

fn stage1(ns: usize) -> DetectorConfig {
    DetectorConfig { stage2: false, ..DetectorConfig::sumis(ns) }
}

fn point(cfg: &SimConfig, det: &DetectorConfig, ebn0: f64) -> PointResult {
    let mut cfg = cfg.clone();
    cfg.detector = det.clone();
    let link = Link::new(&cfg).expect("valid config");
    run_point(&link, det, ebn0).expect("simulation point")
}

/// Runs `det` on exactly the frames `reference` saw (no early stop), for paired tests.
fn paired(cfg: &SimConfig, det: &DetectorConfig, reference: &PointResult) -> PointResult {
    let mut cfg = cfg.clone();
    cfg.sweep.target_frame_errors = u64::MAX;
    cfg.sweep.max_frames = reference.frames;
    point(&cfg, det, reference.ebn0_db)
}

fn rate(p: &PointResult) -> Rate {
    Rate::new(p.frame_errors, p.frames)
}

fn fer(p: &PointResult) -> String {
    format!("{:.4} ({}/{})", p.fer, p.frame_errors, p.frames)
}

/// p-value for "a fails more often than b" over paired frames.
fn worse_p(a: &PointResult, b: &PointResult) -> f64 {
    let (a_only, b_only) = discordant(&a.error_flags, &b.error_flags);
    mcnemar_greater(a_only, b_only)
}

/// Walks the grid until `det` drops below `stop` FER; returns every point run.
fn scan(cfg: &SimConfig, det: &DetectorConfig, grid: &[f64], stop: f64) -> Vec<PointResult> {
    let mut out = Vec::new();
    for &e in grid {
        let p = point(cfg, det, e);
        let done = p.fer < stop;
        out.push(p);
        if done {
            break;
        }
    }
    out
}

fn curve(points: &[PointResult]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p.ebn0_db, p.fer)).collect()
}

/// Grid point whose FER is closest to 10% in log terms, among `points`.
fn nearest_tenth(points: &[PointResult]) -> &PointResult {
    points
        .iter()
        .filter(|p| p.fer > 0.0)
        .min_by(|a, b| (a.fer.ln() - 0.1f64.ln()).abs().total_cmp(&(b.fer.ln() - 0.1f64.ln()).abs()))
        .expect("at least one point with errors")
}

fn timed(limit_s: f64, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let mut c = f();
    let secs = start.elapsed().as_secs_f64();
    c.detail = format!("{}; {secs:.1} s (limit {limit_s} s)", c.detail);
    c.passed &= secs < limit_s;
    c
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_string(), passed, detail }
}

fn performance_ordering() -> Check {
    let cfg = base(6);
    let grid: Vec<f64> = (0..=16).map(|i| -1.0 + 0.5 * i as f64).collect();
    let exact = scan(&cfg, &DetectorConfig::new(Method::ExactLlr), &grid, 0.05);
    let Some(at) = exact.iter().filter(|p| (0.05..=0.2).contains(&p.fer)).min_by(|a, b| {
        (a.fer - 0.1).abs().total_cmp(&(b.fer - 0.1).abs())
    }) else {
        return check("performance ordering", false, format!("no grid point with exact FER in [0.05, 0.2]: {:?}", curve(&exact)));
    };
    let e = at.ebn0_db;
    let s3 = point(&cfg, &DetectorConfig::sumis(3), e);
    let s1 = point(&cfg, &DetectorConfig::sumis(1), e);
    let st1 = point(&cfg, &stage1(1), e);
    let order = rate(at).not_above(&rate(&s3)) && rate(&s3).not_above(&rate(&s1)) && rate(&s1).not_above(&rate(&st1));

    let s3_grid: Vec<f64> = grid.iter().copied().filter(|&g| g >= exact[0].ebn0_db).collect();
    let s3_curve = scan(&cfg, &DetectorConfig::sumis(3), &s3_grid, 0.1);
    let gap = match (crossing(&curve(&exact), 0.1), crossing(&curve(&s3_curve), 0.1)) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    let gap_ok = gap.is_some_and(|g| g <= 0.75);
    check(
        "performance ordering",
        order && gap_ok,
        format!(
            "at {e} dB: exact {} <= sumis(3) {} <= sumis(1) {} <= stage-I(1) {} [{}]; gap at FER 0.1: {}",
            fer(at),
            fer(&s3),
            fer(&s1),
            fer(&st1),
            if order { "holds" } else { "violated" },
            gap.map_or("no crossing".into(), |g| format!("{g:.3} dB (limit 0.75)"))
        ),
    )
}

fn purification_gain() -> Check {
    let cfg = base(18);
    let grid: Vec<f64> = (0..=20).map(|i| 2.0 + 0.5 * i as f64).collect();
    let full = scan(&cfg, &DetectorConfig::sumis(3), &grid, 0.1);
    let at = nearest_tenth(&full);
    let first = paired(&cfg, &stage1(3), at);
    let p = worse_p(&first, at);
    check(
        "purification gain",
        at.fer < first.fer && p < ALPHA,
        format!("rate 5/6 at {} dB: sumis(3) {} vs stage-I(3) {}; paired p = {p:.2e}", at.ebn0_db, fer(at), fer(&first)),
    )
}

fn icsi_matched() -> Check {
    let mut mismatched = base(6);
    mismatched.channel = ChannelConfig { icsi_alpha: 0.1, icsi: IcsiHandling::Mismatched, ..ChannelConfig::default() };
    let mut matched = mismatched.clone();
    matched.channel.icsi = IcsiHandling::Matched;
    let det = DetectorConfig::sumis(3);
    let mut ok = true;
    let mut notes = Vec::new();
    for e in [1.0, 2.0, 3.0] {
        let mis = point(&mismatched, &det, e);
        let mat = paired(&matched, &det, &mis);
        let p = worse_p(&mat, &mis);
        ok &= p >= ALPHA;
        notes.push(format!("{e} dB matched {} mismatched {} (p matched worse {p:.2})", fer(&mat), fer(&mis)));
    }
    check("ICSI matched vs mismatched", ok, notes.join("; "))
}

fn iterative_gain() -> Check {
    let cfg = base(6);
    let det = DetectorConfig::sumis(1);
    let grid: Vec<f64> = (0..=16).map(|i| 0.0 + 0.5 * i as f64).collect();
    let plain = scan(&cfg, &det, &grid, 0.1);
    let at = nearest_tenth(&plain);
    let mut iter_cfg = cfg.clone();
    iter_cfg.sweep.iterations = 3;
    let iterated = paired(&iter_cfg, &det, at);
    let p = worse_p(&iterated, at);
    let runs_ok = iterated.decoder_runs == 4 * iterated.frames && at.decoder_runs == at.frames;
    check(
        "iterative gain",
        p >= ALPHA && iterated.fer <= at.fer && runs_ok,
        format!(
            "at {} dB: 3 iterations {} vs none {} (p iterated worse {p:.2}); decoder runs per frame {}",
            at.ebn0_db,
            fer(&iterated),
            fer(at),
            iterated.decoder_runs as f64 / iterated.frames as f64
        ),
    )
}

fn main() {
    let start = Instant::now();
    let criteria: Vec<(usize, Box<dyn FnOnce() -> Check>)> = vec![
        (1, Box::new(|| timed(60.0, || oracle_equivalence(200, SEED)))),
        (2, Box::new(|| soft_mmse_identity(200, SEED + 1))),
        (3, Box::new(|| timed(120.0, || path_equivalence(11, SEED + 2)))),
        (4, Box::new(op_count_table)),
        (5, Box::new(|| timed(7200.0, performance_ordering))),
        (6, Box::new(purification_gain)),
        (7, Box::new(icsi_matched)),
        (8, Box::new(iterative_gain)),
        (9, Box::new(|| large_mimo_trend(200, SEED + 3))),
        (10, Box::new(|| property_suite(SEED + 4))),
    ];
    let mut failed = 0;
    for (n, run) in criteria {
        let c = run();
        failed += usize::from(!c.passed);
        println!("criterion {n:>2} {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("acceptance: {} of 10 passed in {:.0} s", 10 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
