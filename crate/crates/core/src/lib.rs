//! Soft-output MIMO detection.
//!
//! The crate models the real-valued channel `y = H s + e` and computes per-bit
//! log-likelihood ratios (positive favours bit 1) with several detectors:
//! exact marginalization, max-log, soft MMSE, partial marginalization and
//! SUMIS. Every hot kernel reports its arithmetic to [`opcount`] so the
//! complexity of a detector can be measured on real inputs.

pub mod detect;
pub mod detector;
pub mod error;
pub mod gray;
pub mod linalg;
pub mod model;
pub mod opcount;
pub mod prior;
pub mod sumis;

pub use detect::{exact_llr, max_log, pm_detect, zf_df, DEFAULT_LLR_CLIP};
pub use detector::{Detector, DetectorKind, PreparedDetector};
pub use error::{Error, Result};
pub use linalg::RealMatrix;
pub use model::{make_constellation, ChannelEstimate, Constellation, RealChannel};
pub use prior::PriorInfo;
pub use sumis::{soft_mmse, sumis_detect, IcsiMode, SoftSymbolStats, SumisConfig};
