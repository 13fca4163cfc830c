//! Downlink cell-free massive MIMO simulator.
//!
//! The crate evaluates exact closed-form spectral efficiencies for four
//! conjugate-beamforming variants:
//!
//! * `CB`: conjugate beamforming, `w = conj(g_hat)`;
//! * `NCB`: normalized CB, `w = conj(g_hat) / |g_hat|`;
//! * `ECB`: enhanced normalized CB, `w = conj(g_hat) / |g_hat|^2`;
//! * `CBDT`: CB with beamformed downlink pilots.
//!
//! Around the closed forms sit a snapshot generator ([`scenario`]), the
//! uplink MMSE estimation model ([`estimation`]), max-min fairness power
//! control by bisection over second-order-cone feasibility problems
//! ([`mmf`]), an independent Monte Carlo oracle ([`oracle`]) and the
//! experiment runner behind the `cellfree` binary ([`cli`]).

// negated comparisons reject NaN on purpose; index loops mirror the sums
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod closedform;
pub mod config;
pub mod error;
pub mod estimation;
pub mod mmf;
pub mod oracle;
pub mod rng;
pub mod scenario;
pub mod special;

pub use closedform::{PowerAllocation, Scheme, SinrReport};
pub use config::SystemConfig;
pub use error::{Error, Result};
pub use scenario::{build_snapshot, Snapshot};
