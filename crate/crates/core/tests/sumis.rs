mod common;

use common::{instance, max_abs_diff, random_prior, rng};
use proptest::prelude::*;
use rand::Rng;
use sumis_core::linalg::{jacobian_log_sum, quadratic_norm, spd_inverse};
use sumis_core::model::{make_constellation, ChannelEstimate};
use sumis_core::sumis::{
    icsi_effective_noise, precompute_y_independent, select_partition, stage1, stage2, sumis_run,
};
use sumis_core::{
    exact_llr, soft_mmse, sumis_detect, Constellation, IcsiMode, PriorInfo, RealChannel, RealMatrix,
    SumisConfig,
};

/// Stage-I anchor log weights straight from the definition, with an explicit
/// `N_R x N_R` covariance inverse per anchor.
fn brute_stage(
    ch: &RealChannel,
    y: &[f64],
    c: &Constellation,
    ns: usize,
    means: &[f64],
    vars: &[f64],
) -> Vec<Vec<f64>> {
    let h = ch.h();
    let n_t = ch.n_t();
    let n_r = ch.n_r();
    let g = h.gram();
    (0..n_t)
        .map(|k| {
            let p = select_partition(&g, k, ns);
            let q = RealMatrix::from_fn(n_r, n_r, |a, b| {
                let mut v: f64 = p.tilde.iter().map(|&j| h[(a, j)] * vars[j] * h[(b, j)]).sum();
                if a == b {
                    v += ch.n0() / 2.0;
                }
                v
            });
            let q_inv = spd_inverse(&q).unwrap();
            let mut w = vec![f64::NEG_INFINITY; c.order()];
            for code in 0..c.order().pow(ns as u32) {
                let digits: Vec<usize> = (0..ns).map(|i| (code / c.order().pow(i as u32)) % c.order()).collect();
                let mut r = y.to_vec();
                for (i, &j) in p.bar.iter().enumerate() {
                    for (row, v) in r.iter_mut().enumerate() {
                        *v -= h[(row, j)] * c.point(digits[i]);
                    }
                }
                for &j in &p.tilde {
                    for (row, v) in r.iter_mut().enumerate() {
                        *v -= h[(row, j)] * means[j];
                    }
                }
                w[digits[0]] = jacobian_log_sum(w[digits[0]], -0.5 * quadratic_norm(&r, &q_inv));
            }
            w
        })
        .collect()
}

#[test]
fn partition_rule_by_hand() {
    let g = RealMatrix::from_rows(&[&[1.0, 0.9, -0.1], &[0.9, 1.0, 0.3], &[-0.1, 0.3, 1.0]]);
    let p = select_partition(&g, 0, 2);
    assert_eq!(p.bar, vec![0, 1]);
    assert_eq!(p.tilde, vec![2]);
    assert_eq!(select_partition(&g, 2, 1).bar, vec![2]);
    let all = select_partition(&g, 1, 3);
    assert_eq!(all.bar[0], 1);
    assert!(all.tilde.is_empty());
    // equal couplings: lower index wins
    let tie = RealMatrix::from_rows(&[&[1.0, 0.5, -0.5], &[0.5, 1.0, 0.0], &[-0.5, 0.0, 1.0]]);
    assert_eq!(select_partition(&tie, 0, 2).bar, vec![0, 1]);
}

#[test]
fn partition_scale_invariant() {
    let mut r = rng(1);
    for _ in 0..50 {
        let c = make_constellation(2).unwrap();
        let (ch, _, _) = instance(&mut r, 8, &c, 5.0);
        let g = ch.h().gram();
        let scaled = ch.h().scale(r.random_range(0.1..10.0)).gram();
        for k in 0..8 {
            for ns in 1..=4 {
                assert_eq!(select_partition(&g, k, ns), select_partition(&scaled, k, ns));
            }
        }
    }
}

#[test]
fn full_subspace_is_exact() {
    let mut r = rng(2);
    for trial in 0..60 {
        let m = if trial % 2 == 0 { 2 } else { 4 };
        let c = make_constellation(m).unwrap();
        let n_t = if m == 2 { [4, 8][trial % 4 / 2] } else { 4 };
        let ebn0 = r.random_range(-2.0..10.0);
        let (ch, y, bits) = instance(&mut r, n_t, &c, ebn0);
        let prior = (trial % 3 == 0).then(|| random_prior(&mut r, &bits, &c, 2.0));
        let want = exact_llr(&ch, &y, &c, prior.as_ref(), 50.0).unwrap();
        for cfg in [SumisConfig::new(n_t), SumisConfig::new(n_t).naive()] {
            let got = sumis_detect(&ch, &y, &cfg, &c, prior.as_ref()).unwrap();
            let d = max_abs_diff(&got, &want);
            assert!(d <= 1e-8, "trial {trial} optimized={} diff {d}", cfg.optimized);
        }
    }
}

#[test]
fn soft_mmse_is_stage_one_with_single_symbol() {
    let mut r = rng(3);
    for trial in 0..40 {
        let c = make_constellation(if trial % 2 == 0 { 2 } else { 4 }).unwrap();
        let (ch, y, _) = instance(&mut r, 12, &c, 4.0);
        let a = sumis_detect(&ch, &y, &SumisConfig::new(1).stage1_only(), &c, None).unwrap();
        let b = soft_mmse(&ch, &y, &c, None, 50.0).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn single_antenna_soft_mmse_is_exact() {
    let c = make_constellation(2).unwrap();
    let ch = RealChannel::new(RealMatrix::from_rows(&[&[0.8], &[-0.3]]), 0.7).unwrap();
    let y = [0.4, 0.2];
    let a = soft_mmse(&ch, &y, &c, None, 50.0).unwrap();
    let b = exact_llr(&ch, &y, &c, None, 50.0).unwrap();
    assert!((a[0] - b[0]).abs() < 1e-12);
}

#[test]
fn stages_match_brute_force() {
    let mut r = rng(4);
    let c = make_constellation(2).unwrap();
    for _ in 0..20 {
        let (ch, y, _) = instance(&mut r, 8, &c, 4.0);
        let ns = 2;
        let uniform_means = vec![0.0; 8];
        let unit_vars = vec![1.0; 8];
        let w1 = brute_stage(&ch, &y, &c, ns, &uniform_means, &unit_vars);
        for optimized in [true, false] {
            let mut cfg = SumisConfig::new(ns);
            cfg.optimized = optimized;
            let st = stage1(&ch, &y, &cfg, &c, None).unwrap();
            for k in 0..8 {
                let lambda = w1[k][1] - w1[k][0];
                assert!((st.mean[k] - (lambda / 2.0).tanh()).abs() < 1e-9);
                assert!((st.variance[k] - (1.0 - st.mean[k] * st.mean[k])).abs() < 1e-9);
            }
            let llr2 = stage2(&ch, &y, &st, &cfg, &c, None).unwrap();
            let w2 = brute_stage(&ch, &y, &c, ns, &st.mean, &st.variance);
            for k in 0..8 {
                assert!((llr2[k] - (w2[k][1] - w2[k][0]).clamp(-50.0, 50.0)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn zero_observation_is_neutral() {
    let mut r = rng(5);
    for m in [2, 4] {
        let c = make_constellation(m).unwrap();
        let (ch, _, _) = instance(&mut r, 8, &c, 3.0);
        for ns in 1..=3 {
            let l = sumis_detect(&ch, &[0.0; 8], &SumisConfig::new(ns), &c, None).unwrap();
            // the first 4-PAM bit is odd in y, the second even
            let b = c.bits_per_symbol();
            for (i, v) in l.iter().enumerate() {
                if i % b == 0 {
                    assert!(v.abs() < 1e-10, "m={m} ns={ns} bit {i}: {v}");
                }
            }
        }
    }
}

#[test]
fn zero_means_make_stage_two_repeat_stage_one() {
    let mut r = rng(6);
    let c = make_constellation(2).unwrap();
    for _ in 0..20 {
        let (ch, y, _) = instance(&mut r, 8, &c, 2.0);
        for optimized in [true, false] {
            let mut cfg = SumisConfig::new(2);
            cfg.optimized = optimized;
            let mut st = stage1(&ch, &y, &cfg, &c, None).unwrap();
            let lambda: Vec<f64> = st.log_pmf.iter().map(|w| w[1] - w[0]).collect();
            st.mean.iter_mut().for_each(|m| *m = 0.0);
            st.variance.iter_mut().for_each(|v| *v = 1.0);
            let l2 = stage2(&ch, &y, &st, &cfg, &c, None).unwrap();
            assert!(max_abs_diff(&l2, &lambda) < 1e-9);
        }
    }
}

#[test]
fn perfect_interference_knowledge_leaves_awgn_subspace() {
    let mut r = rng(7);
    let c = make_constellation(2).unwrap();
    let (ch, y, bits) = instance(&mut r, 8, &c, 3.0);
    let s = sumis_core::model::modulate(&bits, &c, 8).unwrap();
    let mut st = stage1(&ch, &y, &SumisConfig::new(2), &c, None).unwrap();
    st.mean = s.clone();
    st.variance = vec![0.0; 8];
    let l = stage2(&ch, &y, &st, &SumisConfig::new(2).naive(), &c, None).unwrap();
    let g = ch.h().gram();
    for k in 0..8 {
        let p = select_partition(&g, k, 2);
        let mut y_k = y.clone();
        for &j in &p.tilde {
            for (row, v) in y_k.iter_mut().enumerate() {
                *v -= ch.h()[(row, j)] * s[j];
            }
        }
        let sub = RealChannel::new(ch.h().select_columns(&p.bar), ch.n0()).unwrap();
        let want = exact_llr(&sub, &y_k, &c, None, 50.0).unwrap();
        assert!((l[k] - want[0]).abs() < 1e-6, "{} vs {}", l[k], want[0]);
    }
}

#[test]
fn saturated_means_stay_finite() {
    let mut r = rng(8);
    let c = make_constellation(2).unwrap();
    let (ch, y, bits) = instance(&mut r, 8, &c, 6.0);
    let s = sumis_core::model::modulate(&bits, &c, 8).unwrap();
    let st = sumis_core::SoftSymbolStats {
        log_pmf: vec![vec![0.0, 0.0]; 8],
        pmf: vec![vec![0.5, 0.5]; 8],
        mean: s,
        variance: vec![0.0; 8],
    };
    for cfg in [SumisConfig::new(3), SumisConfig::new(3).naive()] {
        let l = stage2(&ch, &y, &st, &cfg, &c, None).unwrap();
        assert!(l.iter().all(|v| v.is_finite() && v.abs() <= 50.0));
    }
    let a = stage2(&ch, &y, &st, &SumisConfig::new(3), &c, None).unwrap();
    let b = stage2(&ch, &y, &st, &SumisConfig::new(3).naive(), &c, None).unwrap();
    assert!(max_abs_diff(&a, &b) < 1e-8, "{}", max_abs_diff(&a, &b));
}

#[test]
fn precompute_matches_direct_inverse() {
    let mut r = rng(9);
    let c = make_constellation(2).unwrap();
    let (ch, _, _) = instance(&mut r, 2, &c, 3.0);
    let pre = precompute_y_independent(&ch, &SumisConfig::new(2), &c, None).unwrap();
    let q_inv = RealMatrix::identity(2).scale(2.0 / ch.n0());
    let p = &pre.partitions()[0];
    let hb = ch.h().select_columns(&p.bar);
    let want = hb.transpose().matmul(&q_inv).matmul(&hb);
    assert!(pre.subspace_precision(0).unwrap().max_abs_diff(&want) < 1e-9);
}

#[test]
fn precompute_blocks_match_explicit_covariances() {
    let mut r = rng(10);
    for m in [2, 4] {
        let c = make_constellation(m).unwrap();
        let (ch, _, bits) = instance(&mut r, 8, &c, 5.0);
        let prior = random_prior(&mut r, &bits, &c, 1.5);
        let pre = precompute_y_independent(&ch, &SumisConfig::new(3), &c, Some(&prior)).unwrap();
        let vars = prior.variances(&c);
        let h = ch.h();
        let n_r = ch.n_r();
        let r_full = RealMatrix::from_fn(n_r, n_r, |a, b| {
            let mut v: f64 = (0..8).map(|j| h[(a, j)] * vars[j] * h[(b, j)]).sum();
            if a == b {
                v += ch.n0() / 2.0;
            }
            v
        });
        let r_inv = spd_inverse(&r_full).unwrap();
        for (k, p) in pre.partitions().iter().enumerate() {
            let hb = h.select_columns(&p.bar);
            let c_want = hb.transpose().matmul(&r_inv).matmul(&hb);
            let c_got = pre.subspace_gain(k).unwrap();
            assert!(c_got.max_abs_diff(&c_want) < 1e-9 * c_want.max_abs().max(1.0));
            let q = RealMatrix::from_fn(n_r, n_r, |a, b| {
                let mut v: f64 = p.tilde.iter().map(|&j| h[(a, j)] * vars[j] * h[(b, j)]).sum();
                if a == b {
                    v += ch.n0() / 2.0;
                }
                v
            });
            let a_want = hb.transpose().matmul(&spd_inverse(&q).unwrap()).matmul(&hb);
            let a_got = pre.subspace_precision(k).unwrap();
            assert!(a_got.max_abs_diff(&a_want) < 1e-9 * a_want.max_abs().max(1.0));
        }
    }
}

#[test]
fn orthogonal_channel_gives_diagonal_precision() {
    let c = make_constellation(2).unwrap();
    let h = RealMatrix::from_diag(&[1.0, 2.0, 0.5, 1.5]);
    let ch = RealChannel::new(h, 0.4).unwrap();
    let pre = precompute_y_independent(&ch, &SumisConfig::new(3), &c, None).unwrap();
    for k in 0..4 {
        let a = pre.subspace_precision(k).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(a[(i, j)].abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn known_symbols_are_removed() {
    let mut r = rng(11);
    let c = make_constellation(2).unwrap();
    let (ch, y, _) = instance(&mut r, 6, &c, 4.0);
    let mut pmf = vec![vec![0.5, 0.5]; 6];
    pmf[2] = vec![0.0, 1.0];
    pmf[4] = vec![0.3, 0.7];
    let prior = PriorInfo::from_pmfs(pmf, &c).unwrap();
    let want = exact_llr(&ch, &y, &c, Some(&prior), 50.0).unwrap();
    for cfg in [SumisConfig::new(6), SumisConfig::new(6).naive()] {
        let got = sumis_detect(&ch, &y, &cfg, &c, Some(&prior)).unwrap();
        assert_eq!(got[2], 50.0);
        assert!(max_abs_diff(&got, &want) < 1e-8);
    }
    let out = sumis_run(&ch, &y, &SumisConfig::new(2), &c, Some(&prior)).unwrap();
    assert_eq!(out.stats.mean[2], 1.0);
    assert_eq!(out.stats.variance[2], 0.0);
}

#[test]
fn invalid_configurations() {
    let c = make_constellation(2).unwrap();
    let ch = RealChannel::new(RealMatrix::identity(4), 1.0).unwrap();
    assert!(sumis_detect(&ch, &[0.0; 4], &SumisConfig::new(0), &c, None).is_err());
    assert!(sumis_detect(&ch, &[0.0; 4], &SumisConfig::new(5), &c, None).is_err());
    assert!(sumis_detect(&ch, &[0.0; 3], &SumisConfig::new(2), &c, None).is_err());
}

#[test]
fn icsi_noise_levels() {
    let c2 = make_constellation(2).unwrap();
    let c4 = make_constellation(4).unwrap();
    let mut r = rng(12);
    let (ch, _, _) = instance(&mut r, 12, &c2, 0.0);
    let est = ChannelEstimate { h_hat: ch.h().clone(), delta2: 0.1 };
    let mut cfg = SumisConfig::new(3);
    cfg.icsi = IcsiMode::ConstantModulus;
    assert!((icsi_effective_noise(&est, 1.0, &cfg, &c2, None).unwrap() - 2.2).abs() < 1e-12);
    cfg.icsi = IcsiMode::General;
    let general = icsi_effective_noise(&est, 1.0, &cfg, &c4, None).unwrap();
    assert!((general - 2.2).abs() < 1e-12, "{general}");
    cfg.icsi = IcsiMode::None;
    assert_eq!(icsi_effective_noise(&est, 1.0, &cfg, &c4, None).unwrap(), 1.0);
    let perfect = ChannelEstimate { h_hat: ch.h().clone(), delta2: 0.0 };
    cfg.icsi = IcsiMode::ConstantModulus;
    assert_eq!(icsi_effective_noise(&perfect, 0.7, &cfg, &c2, None).unwrap(), 0.7);
}

#[test]
fn soft_mmse_tracks_exact_llr() {
    let mut r = rng(13);
    let c = make_constellation(2).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for _ in 0..300 {
        let (ch, y, _) = instance(&mut r, 4, &c, 6.0);
        a.extend(soft_mmse(&ch, &y, &c, None, 50.0).unwrap());
        b.extend(exact_llr(&ch, &y, &c, None, 50.0).unwrap());
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let corr = cov / (va * vb).sqrt();
    assert!(corr > 0.9, "correlation {corr}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn paths_agree(seed in any::<u64>(), n_t in prop::sample::select(vec![4usize, 8, 12]), ns in 1usize..=4,
                   pam4 in any::<bool>(), with_prior in any::<bool>(), stage2_on in any::<bool>(), ebn0 in -2.0f64..12.0, prior_strength in 0.5f64..6.0) {
        let mut r = rng(seed);
        let c = make_constellation(if pam4 { 4 } else { 2 }).unwrap();
        let (ch, y, bits) = instance(&mut r, n_t, &c, ebn0);
        let prior = with_prior.then(|| random_prior(&mut r, &bits, &c, prior_strength));
        let mut cfg = SumisConfig::new(ns);
        cfg.stage2 = stage2_on;
        let fast = sumis_detect(&ch, &y, &cfg, &c, prior.as_ref()).unwrap();
        let slow = sumis_detect(&ch, &y, &cfg.clone().naive(), &c, prior.as_ref()).unwrap();
        let d = max_abs_diff(&fast, &slow);
        prop_assert!(d <= 1e-8, "diff {}", d);
    }

    #[test]
    fn antisymmetric_for_bpsk(seed in any::<u64>(), ns in 1usize..=4, stage2_on in any::<bool>()) {
        let mut r = rng(seed);
        let c = make_constellation(2).unwrap();
        let (ch, y, _) = instance(&mut r, 8, &c, 3.0);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let mut cfg = SumisConfig::new(ns);
        cfg.stage2 = stage2_on;
        let a = sumis_detect(&ch, &y, &cfg, &c, None).unwrap();
        let b = sumis_detect(&ch, &neg, &cfg, &c, None).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x + y).abs() < 1e-9);
            prop_assert!(x.abs() <= 50.0);
        }
    }
}
