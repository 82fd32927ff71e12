//! Reflected M-ary Gray enumeration of symbol-index vectors.
//!
//! Consecutive vectors differ in exactly one coordinate, which is what lets the
//! exhaustive detectors update their metrics differentially.

use crate::error::{Error, Result};

/// Maximum number of enumerated bits (`n * log2 m`).
pub const ENUMERATION_LIMIT_BITS: usize = 24;

pub(crate) fn check_enumerable(n: usize, m: usize) -> Result<()> {
    let bits = n * m.trailing_zeros() as usize;
    if bits > ENUMERATION_LIMIT_BITS {
        return Err(Error::TooLarge { bits, limit: ENUMERATION_LIMIT_BITS });
    }
    Ok(())
}

/// One step of the walk: coordinate `coord` moved from `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrayStep {
    pub coord: usize,
    pub from: usize,
    pub to: usize,
}

/// Iterator-like walker over `{0..m}^n` starting at the all-zero vector.
#[derive(Debug, Clone)]
pub struct GrayWalker {
    digits: Vec<usize>,
    up: Vec<bool>,
    m: usize,
}

impl GrayWalker {
    pub fn new(n: usize, m: usize) -> Self {
        GrayWalker { digits: vec![0; n], up: vec![true; n], m }
    }

    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    /// Moves to the next vector, or returns `None` once all `m^n` were visited.
    pub fn advance(&mut self) -> Option<GrayStep> {
        for i in 0..self.digits.len() {
            let d = self.digits[i];
            let next = if self.up[i] { d.checked_add(1).filter(|&v| v < self.m) } else { d.checked_sub(1) };
            if let Some(to) = next {
                for flip in &mut self.up[..i] {
                    *flip = !*flip;
                }
                self.digits[i] = to;
                return Some(GrayStep { coord: i, from: d, to });
            }
        }
        None
    }
}

/// Full Gray-ordered list of `m^n` index vectors.
pub fn enumerate_gray_order(n: usize, m: usize) -> Result<Vec<Vec<usize>>> {
    check_enumerable(n, m)?;
    let mut walker = GrayWalker::new(n, m);
    let mut out = Vec::with_capacity(m.pow(n as u32));
    out.push(walker.digits().to_vec());
    while walker.advance().is_some() {
        out.push(walker.digits().to_vec());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn binary_pair() {
        let seq = enumerate_gray_order(2, 2).unwrap();
        assert_eq!(seq, vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1]]);
    }

    #[test]
    fn single_quaternary_digit() {
        let seq = enumerate_gray_order(1, 4).unwrap();
        assert_eq!(seq, vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn complete_and_single_change() {
        for (n, m) in [(1, 2), (3, 2), (2, 4), (3, 4), (2, 8), (5, 2)] {
            let seq = enumerate_gray_order(n, m).unwrap();
            assert_eq!(seq.len(), m.pow(n as u32));
            let distinct: HashSet<_> = seq.iter().cloned().collect();
            assert_eq!(distinct.len(), seq.len());
            for w in seq.windows(2) {
                let changed = w[0].iter().zip(&w[1]).filter(|(a, b)| a != b).count();
                assert_eq!(changed, 1);
            }
        }
    }

    #[test]
    fn guard() {
        assert!(check_enumerable(12, 4).is_ok());
        assert!(matches!(enumerate_gray_order(13, 4), Err(Error::TooLarge { bits: 26, .. })));
        assert!(matches!(check_enumerable(25, 2), Err(Error::TooLarge { .. })));
    }
}
