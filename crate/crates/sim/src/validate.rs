//! Oracle and property checks that need no coded link: the fast part of the
//! acceptance list, also reachable from `sumis-sim validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use sumis_coding::{generate_regular_ldpc, spa_decode};
use sumis_core::detect::for_each_hypothesis;
use sumis_core::linalg::ldl_decompose;
use sumis_core::model::{ebn0_to_n0, modulate, sample_rayleigh};
use sumis_core::opcount::{measured_count, table_formula, Method as OpMethod};
use sumis_core::{
    exact_llr, make_constellation, max_log, soft_mmse, sumis_detect, Constellation, Detector, DetectorKind, PriorInfo,
    RealChannel, RealMatrix, SumisConfig, DEFAULT_LLR_CLIP,
};

use crate::config::{DetectorConfig, SimConfig};
use crate::sweep::{run_sweep, write_csv};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, detail }
    }
}

struct Instance {
    ch: RealChannel,
    y: Vec<f64>,
    bits: Vec<u8>,
}

/// Square Rayleigh channel with `n_t` real dimensions at a per-bit SNR.
fn instance(rng: &mut ChaCha8Rng, n_t: usize, c: &Constellation, ebn0_db: f64) -> Instance {
    let h = sample_rayleigh(n_t / 2, n_t / 2, rng).to_real();
    let ch = RealChannel::new(h, ebn0_to_n0(ebn0_db, 1.0, c)).unwrap();
    let bits: Vec<u8> = (0..n_t * c.bits_per_symbol()).map(|_| rng.random_range(0..2)).collect();
    let s = modulate(&bits, c, n_t).unwrap();
    let y = ch.transmit(&s, rng);
    Instance { ch, y, bits }
}

/// Decoder-like priors: mostly right, random strength.
fn random_prior(rng: &mut ChaCha8Rng, bits: &[u8], c: &Constellation) -> PriorInfo {
    let strength = rng.random_range(0.5..4.0);
    let noise = Normal::new(0.0, strength).unwrap();
    let llrs: Vec<f64> = bits
        .iter()
        .map(|&b| (if b == 1 { 1.0 } else { -1.0 }) * strength * strength / 2.0 + noise.sample(rng))
        .collect();
    PriorInfo::from_bit_llrs(&llrs, c).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Full-subspace SUMIS against exact marginalization.
pub fn oracle_equivalence(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let n_t = [4, 8][i % 2];
        let c = make_constellation([2, 4][i / 2 % 2]).unwrap();
        let ebn0 = rng.random_range(-2.0..12.0);
        let inst = instance(&mut rng, n_t, &c, ebn0);
        let prior = (i / 4 % 2 == 1).then(|| random_prior(&mut rng, &inst.bits, &c));
        let exact = exact_llr(&inst.ch, &inst.y, &c, prior.as_ref(), DEFAULT_LLR_CLIP).unwrap();
        let sumis = sumis_detect(&inst.ch, &inst.y, &SumisConfig::new(n_t), &c, prior.as_ref()).unwrap();
        worst = worst.max(max_diff(&exact, &sumis));
    }
    Check::new("oracle equivalence", worst <= 1e-8, format!("{instances} instances, max |sumis(ns=N_T) - exact| = {worst:.3e}"))
}

/// Stage-I SUMIS with a single-symbol subspace against soft MMSE.
pub fn soft_mmse_identity(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for i in 0..instances {
        let n_t = [4, 8, 12][i % 3];
        let c = make_constellation([2, 4][i / 3 % 2]).unwrap();
        let ebn0 = rng.random_range(-2.0..12.0);
        let inst = instance(&mut rng, n_t, &c, ebn0);
        let prior = (i / 6 % 2 == 1).then(|| random_prior(&mut rng, &inst.bits, &c));
        let a = sumis_detect(&inst.ch, &inst.y, &SumisConfig::new(1).stage1_only(), &c, prior.as_ref()).unwrap();
        let b = soft_mmse(&inst.ch, &inst.y, &c, prior.as_ref(), DEFAULT_LLR_CLIP).unwrap();
        mismatches += usize::from(a != b);
    }
    Check::new("soft MMSE identity", mismatches == 0, format!("{instances} instances, {mismatches} not bit-identical"))
}

/// Optimized against naive SUMIS over subspace sizes, dimensions, priors and stages.
pub fn path_equivalence(per_combo: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut count = 0;
    for ns in 1..=4 {
        for n_t in [4, 8, 12] {
            for with_prior in [false, true] {
                for stage2 in [false, true] {
                    for r in 0..per_combo {
                        let c = make_constellation([2, 4][r % 2]).unwrap();
                        let ebn0 = rng.random_range(-2.0..14.0);
                        let inst = instance(&mut rng, n_t, &c, ebn0);
                        let prior = with_prior.then(|| random_prior(&mut rng, &inst.bits, &c));
                        let mut cfg = SumisConfig::new(ns);
                        cfg.stage2 = stage2;
                        let fast = sumis_detect(&inst.ch, &inst.y, &cfg, &c, prior.as_ref()).unwrap();
                        let naive = sumis_detect(&inst.ch, &inst.y, &cfg.clone().naive(), &c, prior.as_ref()).unwrap();
                        worst = worst.max(max_diff(&fast, &naive));
                        count += 1;
                    }
                }
            }
        }
    }
    Check::new("optimized vs naive paths", worst <= 1e-8, format!("{count} instances, max difference {worst:.3e}"))
}

fn measured_sumis(n_t: usize, ns: usize, optimized: bool, seed: u64) -> (u64, u64) {
    let c = make_constellation(2).unwrap();
    let inst = instance(&mut ChaCha8Rng::seed_from_u64(seed), n_t, &c, 4.0);
    let mut cfg = SumisConfig::new(ns);
    cfg.optimized = optimized;
    let det = Detector::new(DetectorKind::Sumis(cfg), c);
    let (oc, _) = measured_count(&det, &inst.ch, &inst.y).unwrap();
    (oc.y_independent, oc.y_dependent)
}

/// Closed-form magnitudes and the instrumented counts against them.
pub fn op_count_table() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    let quoted = [
        (table_formula(OpMethod::Sumis, 12, 12, 3, 2).unwrap().y_dependent, 5472u64),
        (table_formula(OpMethod::Pm, 12, 12, 3, 4).unwrap().y_dependent, 258_048),
        (table_formula(OpMethod::ExactLlr, 12, 12, 12, 4).unwrap().y_dependent, 12 * 4u64.pow(12)),
    ];
    for (got, want) in quoted {
        ok &= got == want;
        notes.push(format!("{got}"));
    }
    for n_t in [12, 24] {
        let f = table_formula(OpMethod::Sumis, n_t, n_t, 3, 2).unwrap();
        let (indep, dep) = measured_sumis(n_t, 3, true, 17);
        let ri = indep as f64 / f.y_independent as f64;
        let rd = dep as f64 / f.y_dependent as f64;
        ok &= (0.5..=2.0).contains(&ri) && (0.5..=2.0).contains(&rd);
        notes.push(format!("N_T={n_t}: measured/formula {ri:.2} (y-indep), {rd:.2} (y-dep)"));
    }
    Check::new("op-count table", ok, notes.join("; "))
}

/// Mean normalized soft-MMSE deviation from the exact LLR, uncoded BPSK.
pub fn soft_mmse_deviation(n_t: usize, instances: usize, ebn0_db: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = make_constellation(2).unwrap();
    let (mut sum, mut count) = (0.0, 0usize);
    for _ in 0..instances {
        let inst = instance(&mut rng, n_t, &c, ebn0_db);
        let exact = exact_llr(&inst.ch, &inst.y, &c, None, DEFAULT_LLR_CLIP).unwrap();
        let soft = soft_mmse(&inst.ch, &inst.y, &c, None, DEFAULT_LLR_CLIP).unwrap();
        for (s, e) in soft.iter().zip(&exact) {
            sum += (s - e).abs() / (1.0 + e.abs());
            count += 1;
        }
    }
    sum / count as f64
}

pub fn large_mimo_trend(instances: usize, seed: u64) -> Check {
    let small = soft_mmse_deviation(4, instances, 6.0, seed);
    let large = soft_mmse_deviation(12, instances, 6.0, seed + 1);
    Check::new(
        "large-MIMO trend",
        large < small,
        format!("{instances} instances each: N_T=4 {small:.4}, N_T=12 {large:.4}"),
    )
}

/// One named property from the battery behind [`property_suite`].
fn property(name: &str, ok: bool, detail: String, failures: &mut Vec<String>, passed: &mut usize) {
    if ok {
        *passed += 1;
    } else {
        failures.push(format!("{name}: {detail}"));
    }
}

/// Module invariants, re-run in process: factorization, Gray sweeps,
/// antisymmetry, coding identities, worker-count determinism, op-count trends.
pub fn property_suite(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut passed = 0;

    // LDL reconstruction on random SPD matrices.
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=12);
        let b = RealMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let mut a = b.gram();
        a.add_diag(0.1);
        let f = ldl_decompose(&a).unwrap();
        worst = worst.max(f.reconstruct().max_abs_diff(&a) / a.max_abs());
    }
    property("LDL reconstruction", worst <= 1e-12, format!("relative error {worst:.2e}"), &mut failures, &mut passed);

    // Gray sweep with a shadow recomputation of every metric.
    let mut worst = 0.0f64;
    let mut visited_ok = true;
    for i in 0..40 {
        let c = make_constellation([2, 4][i % 2]).unwrap();
        let n_t = [2, 4, 6][i % 3];
        let inst = instance(&mut rng, n_t, &c, 5.0);
        let h = inst.ch.h();
        let mut seen = std::collections::HashSet::new();
        let mut prev: Option<Vec<usize>> = None;
        for_each_hypothesis(h, &h.gram(), &inst.y, &c, |idx, metric| {
            let s: Vec<f64> = idx.iter().map(|&k| c.point(k)).collect();
            let r: f64 = h.matvec(&s).iter().zip(&inst.y).map(|(a, b)| (b - a) * (b - a)).sum();
            worst = worst.max((r - metric).abs() / (1.0 + r));
            if let Some(p) = &prev {
                visited_ok &= p.iter().zip(idx).filter(|(a, b)| a != b).count() == 1;
            }
            prev = Some(idx.to_vec());
            seen.insert(idx.to_vec());
        })
        .unwrap();
        visited_ok &= seen.len() == c.order().pow(n_t as u32);
    }
    property(
        "Gray sweep",
        worst <= 1e-9 && visited_ok,
        format!("shadow error {worst:.2e}, single-change walk {visited_ok}"),
        &mut failures,
        &mut passed,
    );

    // Antisymmetry l(-y) = -l(y), BPSK, uniform priors.
    let c = make_constellation(2).unwrap();
    let mut worst = 0.0f64;
    for i in 0..60 {
        let ebn0 = rng.random_range(-2.0..10.0);
        let inst = instance(&mut rng, [4, 6, 8][i % 3], &c, ebn0);
        let neg: Vec<f64> = inst.y.iter().map(|v| -v).collect();
        let runs: [&dyn Fn(&[f64]) -> Vec<f64>; 4] = [
            &|y| exact_llr(&inst.ch, y, &c, None, DEFAULT_LLR_CLIP).unwrap(),
            &|y| max_log(&inst.ch, y, &c, DEFAULT_LLR_CLIP).unwrap(),
            &|y| sumis_detect(&inst.ch, y, &SumisConfig::new(2), &c, None).unwrap(),
            &|y| soft_mmse(&inst.ch, y, &c, None, DEFAULT_LLR_CLIP).unwrap(),
        ];
        for run in runs {
            let a = run(&inst.y);
            let b = run(&neg);
            worst = worst.max(a.iter().zip(&b).fold(0.0, |m, (x, y)| m.max((x + y).abs())));
        }
    }
    property("LLR antisymmetry", worst <= 1e-9, format!("max |l(y) + l(-y)| = {worst:.2e}"), &mut failures, &mut passed);

    // Encoding satisfies every check; decoding commutes with codeword flips.
    let code = generate_regular_ldpc(960, 3, 6, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let mut parity_ok = true;
    let mut symmetric = true;
    for t in 0..1000 {
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        let x = code.encode(&info).unwrap();
        parity_ok &= code.is_codeword(&x);
        if t < 20 {
            let base: Vec<f64> = (0..code.n()).map(|_| -1.6 + 1.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            let flipped: Vec<f64> = base.iter().zip(&x).map(|(&l, &b)| if b == 1 { -l } else { l }).collect();
            let a = spa_decode(&code, &base, 20).unwrap();
            let b = spa_decode(&code, &flipped, 20).unwrap();
            symmetric &= a.iterations == b.iterations
                && a.posterior.iter().zip(&b.posterior).zip(&x).all(|((p, q), &bit)| if bit == 1 { *p == -q } else { p == q });
        }
    }
    property("encode satisfies parity", parity_ok, "1000 words".into(), &mut failures, &mut passed);
    property("decoder sign symmetry", symmetric, "20 words".into(), &mut failures, &mut passed);

    // Same seeds, different worker counts: identical CSV apart from wall time.
    let csv_for = |workers: usize| -> String {
        let mut cfg = small_sweep();
        cfg.sweep.workers = workers;
        let res = run_sweep(&cfg).unwrap();
        let mut out = Vec::new();
        write_csv(&mut out, &cfg, &res).unwrap();
        strip_seconds(&String::from_utf8(out).unwrap())
    };
    let (one, four) = (csv_for(1), csv_for(4));
    property("worker-count determinism", one == four, "1 vs 4 workers".into(), &mut failures, &mut passed);

    // Op-count trends.
    let (_, d12) = measured_sumis(12, 3, true, 5);
    let (_, d24) = measured_sumis(24, 3, true, 5);
    let ratio = d24 as f64 / d12 as f64;
    property(
        "op count cubic growth",
        (6.0..=10.0).contains(&ratio),
        format!("y-dependent count ratio N_T 24/12 = {ratio:.2}, expected within [6, 10]"),
        &mut failures,
        &mut passed,
    );
    let naive_wins = [8, 12, 16].iter().all(|&n_t| measured_sumis(n_t, 3, false, 9).1 > measured_sumis(n_t, 3, true, 9).1);
    property("naive costs more from N_T=8", naive_wins, String::new(), &mut failures, &mut passed);
    let repeat = measured_sumis(8, 2, true, 3) == measured_sumis(8, 2, true, 3);
    property("op counts repeat", repeat, String::new(), &mut failures, &mut passed);

    let total = passed + failures.len();
    let detail = if failures.is_empty() {
        format!("{passed}/{total} properties hold")
    } else {
        format!("{passed}/{total} properties hold; failing: {}", failures.join("; "))
    };
    Check::new("property suites", failures.is_empty(), detail)
}

/// Tiny coded sweep used for the determinism property.
pub fn small_sweep() -> SimConfig {
    let text = r#"
[detector]
method = "sumis"
ns = 2

[system]
tx = 2
rx = 2

[code]
regular = { n = 96, dv = 3, dc = 6, seed = 3 }

[sweep]
ebn0_db = [0.0, 3.0]
target_frame_errors = 20
max_frames = 150
seed = 11
interleaver_seed = 5
"#;
    SimConfig::from_toml(text).unwrap()
}

/// Drops the wall-time column so runs can be compared byte for byte.
pub fn strip_seconds(csv: &str) -> String {
    let col = crate::sweep::CSV_HEADER.iter().position(|&h| h == "seconds").unwrap();
    csv.lines()
        .map(|l| l.split(',').enumerate().filter(|&(i, _)| i != col).map(|(_, f)| f).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Everything that runs in seconds, as `sumis-sim validate` reports it.
pub fn quick_checks(seed: u64) -> Vec<Check> {
    vec![
        oracle_equivalence(200, seed),
        soft_mmse_identity(200, seed + 1),
        path_equivalence(11, seed + 2),
        op_count_table(),
        large_mimo_trend(200, seed + 3),
        property_suite(seed + 4),
    ]
}

/// SUMIS settings with or without the purification stage.
pub fn sumis_detector(ns: usize, stage2: bool) -> DetectorConfig {
    DetectorConfig { stage2, ..DetectorConfig::sumis(ns) }
}
