//! Monte Carlo coded-link simulation around the soft MIMO detectors:
//! configuration, the frame pipeline, Eb/N0 sweeps with CSV output, and the
//! statistics used to compare detectors.

pub mod config;
pub mod error;
pub mod link;
pub mod stats;
pub mod sweep;
pub mod validate;

pub use config::{DetectorConfig, Method, SimConfig};
pub use error::{SimError, SimResult};
pub use link::{iterate_detect_decode, Link};
pub use sweep::{run_point, run_sweep, PointResult, SweepResult};
