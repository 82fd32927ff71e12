#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sumis_core::model::{ebn0_to_n0, modulate, sample_rayleigh};
use sumis_core::{Constellation, PriorInfo, RealChannel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rayleigh channel with `n_t` real transmit dimensions (square), a transmitted
/// vector and its noisy observation at the given per-bit SNR.
pub fn instance(rng: &mut ChaCha8Rng, n_t: usize, c: &Constellation, ebn0_db: f64) -> (RealChannel, Vec<f64>, Vec<u8>) {
    let h = sample_rayleigh(n_t / 2, n_t / 2, rng).to_real();
    let n0 = ebn0_to_n0(ebn0_db, 1.0, c);
    let ch = RealChannel::new(h, n0).unwrap();
    let bits: Vec<u8> = (0..n_t * c.bits_per_symbol()).map(|_| rng.random_range(0..2)).collect();
    let s = modulate(&bits, c, n_t).unwrap();
    let y = ch.transmit(&s, rng);
    (ch, y, bits)
}

/// Priors as a decoder would produce them: bit LLRs of random strength that
/// mostly point at the transmitted bits.
pub fn random_prior(rng: &mut ChaCha8Rng, bits: &[u8], c: &Constellation, strength: f64) -> PriorInfo {
    let noise = Normal::new(0.0, strength).unwrap();
    let llrs: Vec<f64> = bits
        .iter()
        .map(|&b| {
            let sign = if b == 1 { 1.0 } else { -1.0 };
            sign * strength * strength / 2.0 + noise.sample(rng)
        })
        .collect();
    PriorInfo::from_bit_llrs(&llrs, c).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
