//! Binary LDPC codes for the coded link: alist I/O, a regular Gallager-style
//! generator, systematic GF(2) encoding and flooding sum-product decoding.
//!
//! LLRs follow the detector convention: positive favours bit 1.

pub mod alist;
mod code;
mod construct;
pub mod error;
mod spa;

pub use alist::{load_alist, to_alist};
pub use code::CodeSpec;
pub use construct::{four_cycles, generate_regular_ldpc};
pub use error::{Error, Result};
pub use spa::{spa_decode, DecodeOutput, DEFAULT_MAX_ITERS};
