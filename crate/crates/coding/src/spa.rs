use crate::code::CodeSpec;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 50;

/// Keeps `atanh` finite when a check sees only saturated inputs.
const TANH_LIMIT: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// Hard decisions on the posterior LLRs.
    pub hard: Vec<u8>,
    /// `input + extrinsic`, computed as exactly that sum.
    pub posterior: Vec<f64>,
    /// Sum of incoming check messages per variable.
    pub extrinsic: Vec<f64>,
    pub converged: bool,
    /// Flooding iterations performed (0 if the input already was a codeword).
    pub iterations: usize,
}

/// A zero LLR is an erasure, so a word with undecided bits never counts as
/// converged even if its tie-broken hard decisions satisfy every check.
fn decide(post: &[f64], hard: &mut [u8]) -> bool {
    let mut decided = true;
    for (h, &l) in hard.iter_mut().zip(post) {
        *h = u8::from(l > 0.0);
        decided &= l != 0.0;
    }
    decided
}

/// Flooding sum-product decoding with tanh-rule check updates.
///
/// LLRs are positive for bit 1. Stops early once the hard decisions satisfy
/// every check.
pub fn spa_decode(code: &CodeSpec, llrs: &[f64], max_iters: usize) -> Result<DecodeOutput> {
    let n = code.n();
    if llrs.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: llrs.len() });
    }
    let mut extrinsic = vec![0.0; n];
    let mut posterior = llrs.to_vec();
    let mut hard = vec![0u8; n];
    if decide(&posterior, &mut hard) && code.is_codeword(&hard) {
        return Ok(DecodeOutput { hard, posterior, extrinsic, converged: true, iterations: 0 });
    }

    let edges = code.edges();
    let mut v2c = vec![0.0; edges];
    let mut c2v = vec![0.0; edges];
    for v in 0..n {
        for &e in code.var_edges(v) {
            v2c[e] = llrs[v];
        }
    }
    let mut t = Vec::new();
    let mut suffix = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        for c in 0..code.m() {
            let range = code.check_edges(c);
            // Magnitudes and signs go separately so flipping a codeword's
            // inputs flips the outputs exactly. Even parity with "positive
            // means 1" gives each incoming LLR a sign flip.
            let vals = &v2c[range.clone()];
            t.clear();
            t.extend(vals.iter().map(|&l| (l.abs() / 2.0).tanh()));
            let ones = vals.iter().filter(|&&l| l > 0.0).count();
            suffix.clear();
            suffix.resize(t.len() + 1, 1.0);
            for i in (0..t.len()).rev() {
                suffix[i] = suffix[i + 1] * t[i];
            }
            let mut prefix = 1.0;
            for (i, e) in range.enumerate() {
                let mag = 2.0 * (prefix * suffix[i + 1]).min(TANH_LIMIT).atanh();
                let flips = ones - usize::from(vals[i] > 0.0);
                // Message sign: odd number of other "1"-leaning inputs means 1.
                c2v[e] = if flips % 2 == 1 { mag } else { -mag };
                prefix *= t[i];
            }
        }
        for v in 0..n {
            let es = code.var_edges(v);
            let sum: f64 = es.iter().map(|&e| c2v[e]).sum();
            extrinsic[v] = sum;
            posterior[v] = llrs[v] + sum;
            for &e in es {
                v2c[e] = posterior[v] - c2v[e];
            }
        }
        if decide(&posterior, &mut hard) && code.is_codeword(&hard) {
            converged = true;
            break;
        }
    }
    Ok(DecodeOutput { hard, posterior, extrinsic, converged, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> CodeSpec {
        CodeSpec::from_checks(6, vec![vec![0, 1, 3], vec![1, 2, 4], vec![0, 2, 5]]).unwrap()
    }

    fn llrs_for(word: &[u8], mag: f64) -> Vec<f64> {
        word.iter().map(|&b| if b == 1 { mag } else { -mag }).collect()
    }

    #[test]
    fn valid_word_needs_no_iterations() {
        let code = toy();
        let x = code.encode(&[1, 0, 1]).unwrap();
        let input = llrs_for(&x, 50.0);
        let out = spa_decode(&code, &input, 10).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.hard, x);
        assert_eq!(out.posterior, input);
        assert!(out.extrinsic.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn corrects_one_weak_flip() {
        let code = toy();
        let x = code.encode(&[1, 0, 0]).unwrap();
        let mut input = llrs_for(&x, 4.0);
        // Bit 3 arrives weakly wrong; its two neighbours' checks pull it back.
        input[3] = -0.5;
        let out = spa_decode(&code, &input, 20).unwrap();
        assert!(out.converged);
        assert_eq!(out.hard, x);
        // The only check on bit 3 is bit0 + bit1 + bit3 = 0, with bit 0 a
        // confident 1 and bit 1 a confident 0.
        let expected = -2.0 * ((-(2.0f64).tanh()) * (2.0f64).tanh()).atanh();
        assert!((out.extrinsic[3] - expected).abs() < 1e-12, "{} vs {expected}", out.extrinsic[3]);
    }

    #[test]
    fn zero_input_stays_at_the_fixed_point() {
        let code = toy();
        let out = spa_decode(&code, &[0.0; 6], 7).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 7);
        assert!(out.extrinsic.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn saturated_inputs_stay_finite() {
        let code = toy();
        let mut input = llrs_for(&[1, 0, 0, 1, 0, 1], 1e6);
        input[0] = -1e6;
        let out = spa_decode(&code, &input, 5).unwrap();
        assert!(out.posterior.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn length_is_checked() {
        assert_eq!(spa_decode(&toy(), &[0.0; 5], 1), Err(Error::LengthMismatch { expected: 6, got: 5 }));
    }
}
