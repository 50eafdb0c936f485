//! Vectored multicarrier DSL (G.fast) precoding and spectrum optimization.
//!
//! The crate models a downlink binder of `L` copper lines driven from a single
//! distribution point over `N` DMT tones. It provides:
//!
//! - synthetic binder channel generation (direct path + far-end crosstalk)
//!   and a binary on-disk tensor format ([`channel`]),
//! - per-tone zero-forcing and ZF Tomlinson-Harashima precoder construction
//!   with rate evaluation and constraint transforms ([`precoding`]),
//! - weighted sum-rate power allocation under PSD-mask, per-line sum-power and
//!   bit-loading constraints, plus the subcarrier disabling heuristic and the
//!   sum-rate optimal point ([`spectrum`]),
//! - minimum-rate constrained sum-rate maximization via dual subgradient
//!   iteration and a one-step subcarrier-allocation heuristic ([`demand`]),
//! - rate-region sweeps, round-robin prioritization studies and record
//!   aggregation ([`region`]),
//! - scenario files, experiment orchestration and CSV/manifest emission
//!   ([`scenario`], [`runner`]); the `gfast` binary is the user-facing CLI.
//!
//! Powers are carried in watts and rates in bits per tone internally; dB and
//! bit/s conversions happen only at the configuration/report boundary.

pub mod channel;
pub mod demand;
mod error;
mod grid;
mod linalg;
pub mod precoding;
pub mod region;
pub mod runner;
pub mod scenario;
pub mod spectrum;

pub use error::{Error, Result};
pub use grid::ToneGrid;
