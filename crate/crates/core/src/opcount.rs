//! Elementary-operation accounting.
//!
//! Two sources of truth live here: the closed-form complexity table for each
//! detector family, and a per-thread tally that the linear-algebra and detector
//! kernels bump as they run. Additions, subtractions, multiplications and
//! divisions each count as one operation (a multiply-accumulate counts two);
//! transcendental calls (`exp`, `ln`, `ln_1p`, `tanh`, `sqrt`) are tallied
//! separately. Comparisons and index bookkeeping are never counted.
//!
//! The tally is thread-local, so concurrent workers never share a counter.
//! Counting is off unless a [`measure`] scope is active on the current thread.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use crate::detector::{Detector, DetectorKind};
use crate::error::{Error, Result};
use crate::model::RealChannel;

/// Operation totals accumulated inside a [`measure`] scope.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub arith: u64,
    pub transcendental: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;
    fn add(self, rhs: Tally) -> Tally {
        Tally {
            arith: self.arith + rhs.arith,
            transcendental: self.transcendental + rhs.transcendental,
        }
    }
}

thread_local! {
    static ACTIVE: Cell<bool> = const { Cell::new(false) };
    static TALLY: Cell<Tally> = const { Cell::new(Tally { arith: 0, transcendental: 0 }) };
}

#[inline]
pub(crate) fn arith(n: usize) {
    ACTIVE.with(|a| {
        if a.get() {
            TALLY.with(|t| {
                let mut v = t.get();
                v.arith += n as u64;
                t.set(v);
            });
        }
    });
}

#[inline]
pub(crate) fn transcendental(n: usize) {
    ACTIVE.with(|a| {
        if a.get() {
            TALLY.with(|t| {
                let mut v = t.get();
                v.transcendental += n as u64;
                t.set(v);
            });
        }
    });
}

/// Runs `f` with counting enabled on this thread and returns the operations it
/// performed. Scopes nest: an outer scope sees the inner scope's work too.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, Tally) {
    let was_active = ACTIVE.with(|a| a.replace(true));
    let before = TALLY.with(|t| t.replace(Tally::default()));
    let out = f();
    let inner = TALLY.with(|t| t.get());
    TALLY.with(|t| t.set(if was_active { before + inner } else { before }));
    ACTIVE.with(|a| a.set(was_active));
    (out, inner)
}

/// Detector families covered by the complexity table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sumis,
    Pm,
    SoftMmse,
    MaxLog,
    ExactLlr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sumis => "sumis",
            Method::Pm => "pm",
            Method::SoftMmse => "softMmse",
            Method::MaxLog => "maxLog",
            Method::ExactLlr => "exactLlr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '_' && *c != '-').collect();
        match key.to_ascii_lowercase().as_str() {
            "sumis" => Ok(Method::Sumis),
            "pm" => Ok(Method::Pm),
            "softmmse" => Ok(Method::SoftMmse),
            "maxlog" => Ok(Method::MaxLog),
            "exactllr" | "exact" => Ok(Method::ExactLlr),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

/// Channel-dependent (`y_independent`) and per-received-vector
/// (`y_dependent`) operation counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCount {
    pub y_independent: u64,
    pub y_dependent: u64,
    pub method: Method,
    pub n_r: usize,
    pub n_t: usize,
    pub ns: usize,
    pub m: usize,
}

/// Closed-form leading-order operation counts per detector.
pub fn table_formula(method: Method, n_r: usize, n_t: usize, ns: usize, m: usize) -> Result<OpCount> {
    if n_r == 0 || n_t == 0 || m < 2 {
        return Err(Error::InvalidConfig("table parameters must be positive".into()));
    }
    let (nr, nt, s, mm) = (n_r as u128, n_t as u128, ns as u128, m as u128);
    let (indep, dep) = match method {
        Method::Sumis => (
            nr * nt * nt + nt.pow(3) + 2 * s * s * nt * nt,
            nt.pow(3) + 2 * nr * nt + (2 * s * s + 6) * nt * nt,
        ),
        Method::Pm => (nr * nt * nt + nt.pow(3), (2 * nt.pow(3) + 4 * nt * nt) * mm.pow(ns as u32)),
        Method::SoftMmse => (nr * nt * nt + nt.pow(3), 2 * nt * (nr + nt)),
        Method::MaxLog | Method::ExactLlr => {
            let hyps = mm.checked_pow(n_t as u32).ok_or(Error::TooLarge { bits: n_t, limit: 64 })?;
            (3 * nt * hyps, nt * hyps)
        }
    };
    let clamp = |v: u128| u64::try_from(v).unwrap_or(u64::MAX);
    Ok(OpCount {
        y_independent: clamp(indep),
        y_dependent: clamp(dep),
        method,
        n_r,
        n_t,
        ns,
        m,
    })
}

/// Measured counts for one channel preparation plus one detection.
///
/// Only arithmetic operations go into the returned counts; the transcendental
/// tallies come back alongside as `(y_independent, y_dependent)`.
pub fn measured_count(detector: &Detector, ch: &RealChannel, y: &[f64]) -> Result<(OpCount, (u64, u64))> {
    let (prepared, indep) = measure(|| detector.prepare(ch));
    let prepared = prepared?;
    let (llrs, dep) = measure(|| prepared.detect(y, None));
    llrs?;
    let (method, ns) = match detector.kind() {
        DetectorKind::ExactLlr => (Method::ExactLlr, ch.n_t()),
        DetectorKind::MaxLog => (Method::MaxLog, ch.n_t()),
        DetectorKind::SoftMmse => (Method::SoftMmse, 1),
        DetectorKind::Pm { ns } => (Method::Pm, *ns),
        DetectorKind::Sumis(cfg) => (Method::Sumis, cfg.ns),
    };
    Ok((
        OpCount {
            y_independent: indep.arith,
            y_dependent: dep.arith,
            method,
            n_r: ch.n_r(),
            n_t: ch.n_t(),
            ns,
            m: detector.constellation().order(),
        },
        (indep.transcendental, dep.transcendental),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoted_magnitudes() {
        let s = table_formula(Method::Sumis, 12, 12, 3, 2).unwrap();
        assert_eq!(s.y_dependent, 5472);
        let p = table_formula(Method::Pm, 12, 12, 3, 4).unwrap();
        assert_eq!(p.y_dependent, 258_048);
        let e = table_formula(Method::ExactLlr, 12, 12, 3, 4).unwrap();
        assert_eq!(e.y_dependent, 12 * 4u64.pow(12));
        assert_eq!(e.y_dependent, 201_326_592);
    }

    #[test]
    fn method_names_parse() {
        for m in [Method::Sumis, Method::Pm, Method::SoftMmse, Method::MaxLog, Method::ExactLlr] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("soft_mmse".parse::<Method>().unwrap(), Method::SoftMmse);
        assert!(matches!("sd".parse::<Method>(), Err(Error::UnknownMethod(_))));
    }

    #[test]
    fn scopes_nest_and_reset() {
        let ((), outer) = measure(|| {
            arith(3);
            let ((), inner) = measure(|| arith(5));
            assert_eq!(inner.arith, 5);
            transcendental(1);
        });
        assert_eq!(outer.arith, 8);
        assert_eq!(outer.transcendental, 1);
        // Outside any scope nothing is recorded.
        arith(100);
        let ((), fresh) = measure(|| ());
        assert_eq!(fresh, Tally::default());
    }
}
