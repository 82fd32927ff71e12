mod common;

use common::{instance, rng};
use sumis_core::opcount::{measured_count, table_formula, Method, OpCount};
use sumis_core::{make_constellation, Detector, DetectorKind, SumisConfig};

fn measure(kind: DetectorKind, n_t: usize, seed: u64) -> OpCount {
    let c = make_constellation(2).unwrap();
    let mut r = rng(seed);
    let (ch, y, _) = instance(&mut r, n_t, &c, 4.0);
    let det = Detector::new(kind, c);
    measured_count(&det, &ch, &y).unwrap().0
}

fn sumis(ns: usize, optimized: bool) -> DetectorKind {
    let mut cfg = SumisConfig::new(ns);
    cfg.optimized = optimized;
    DetectorKind::Sumis(cfg)
}

fn within_twice(measured: u64, formula: u64) -> bool {
    let (m, f) = (measured as f64, formula as f64);
    m <= 2.0 * f && m >= f / 2.0
}

#[test]
fn optimized_sumis_tracks_formula() {
    for n_t in [12, 24] {
        let f = table_formula(Method::Sumis, n_t, n_t, 3, 2).unwrap();
        let m = measure(sumis(3, true), n_t, 7);
        assert!(within_twice(m.y_dependent, f.y_dependent), "n_t {n_t}: {} vs {}", m.y_dependent, f.y_dependent);
        assert!(within_twice(m.y_independent, f.y_independent), "n_t {n_t}: {} vs {}", m.y_independent, f.y_independent);
    }
}

#[test]
fn soft_mmse_tracks_formula() {
    for n_t in [12, 24] {
        let f = table_formula(Method::SoftMmse, n_t, n_t, 1, 2).unwrap();
        let m = measure(DetectorKind::SoftMmse, n_t, 3);
        assert!(within_twice(m.y_dependent, f.y_dependent), "n_t {n_t}: {} vs {}", m.y_dependent, f.y_dependent);
    }
}

#[test]
fn optimized_sumis_grows_cubically() {
    let small = measure(sumis(3, true), 12, 5).y_dependent as f64;
    let large = measure(sumis(3, true), 24, 5).y_dependent as f64;
    let ratio = large / small;
    assert!((6.0..=10.0).contains(&ratio), "count ratio 24/12 = {ratio:.3}");
}

#[test]
fn naive_costs_more_from_eight_antennas() {
    for n_t in [8, 12, 16] {
        for ns in [1, 2, 3] {
            let naive = measure(sumis(ns, false), n_t, 11);
            let fast = measure(sumis(ns, true), n_t, 11);
            assert!(naive.y_dependent > fast.y_dependent, "n_t {n_t} ns {ns}");
        }
    }
}

#[test]
fn counts_repeat_exactly() {
    for kind in [sumis(2, true), sumis(2, false), DetectorKind::SoftMmse, DetectorKind::Pm { ns: 2 }, DetectorKind::MaxLog] {
        let a = measure(kind.clone(), 8, 21);
        let b = measure(kind, 8, 21);
        assert_eq!(a, b);
    }
}

#[test]
fn exhaustive_counts_scale_with_hypotheses() {
    let f = table_formula(Method::ExactLlr, 8, 8, 8, 2).unwrap();
    let m = measure(DetectorKind::ExactLlr, 8, 2);
    assert!(within_twice(m.y_dependent + m.y_independent, f.y_dependent + f.y_independent), "{m:?} vs {f:?}");
}
