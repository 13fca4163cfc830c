//! Monte Carlo estimates of the hardening-bound quantities from raw channel
//! draws, for validating the closed forms.

mod cbdt;
mod hardening;
mod identities;
mod stats;

use std::fmt;

pub use cbdt::{estimate_cbdt, CbdtEstimates};
pub use hardening::{effective_gains, estimate_ds_bu_ui, estimate_power, precode, HardeningEstimates};
pub use identities::{verify_identities, verify_identities_at, IdentityCheck, IdentityReport};
pub use stats::{BatchStats, ComplexMoments, Welford};

use crate::error::{Error, Result};

pub const MIN_TRIALS: usize = 1000;
pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `|DS_k|^2`
    CoherentGain { user: usize },
    /// `E|BU_k|^2`
    SelfInterference { user: usize },
    /// `E|UI_kj|^2`
    Interference { user: usize, from: usize },
    /// `E|x_m|^2`
    ApPower { ap: usize },
    /// `var(a_hat_kk)`
    Kappa { user: usize },
    /// `E|a_tilde_kk|^2`
    EstimationError { user: usize },
    /// `E|a_kj|^2` without the `rho_d` factor
    GainPower { user: usize, from: usize },
    /// `cov(a_hat_kk, a_tilde_kk)`, real and imaginary part
    HatTildeCovariance { user: usize, imaginary: bool },
    /// Named scalar identity.
    Identity(&'static str),
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Quantity::CoherentGain { user } => write!(f, "DS[{user}]"),
            Quantity::SelfInterference { user } => write!(f, "BU[{user}]"),
            Quantity::Interference { user, from } => write!(f, "UI[{user},{from}]"),
            Quantity::ApPower { ap } => write!(f, "P[{ap}]"),
            Quantity::Kappa { user } => write!(f, "kappa[{user}]"),
            Quantity::EstimationError { user } => write!(f, "err[{user}]"),
            Quantity::GainPower { user, from } => write!(f, "|a|^2[{user},{from}]"),
            Quantity::HatTildeCovariance { user, imaginary } => {
                write!(f, "cov[{user}].{}", if imaginary { "im" } else { "re" })
            }
            Quantity::Identity(name) => f.write_str(name),
        }
    }
}

/// A Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub quantity: Quantity,
    pub estimate: f64,
    pub std_error: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub quantity: Quantity,
    pub closed: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub pass: bool,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: closed {:.6e} mc {:.6e} +- {:.2e} (z = {:.2})",
            self.quantity, self.closed, self.estimate, self.std_error, self.z
        )
    }
}

/// `z = |closed - estimate| / se`; passes iff `z <= z_threshold`. A zero
/// standard error passes only on an exact match (up to rounding).
pub fn compare(closed: f64, mc: &McEstimate, z_threshold: f64) -> Comparison {
    let diff = (closed - mc.estimate).abs();
    let z = if mc.std_error > 0.0 {
        diff / mc.std_error
    } else if diff <= 1e-12 * closed.abs().max(mc.estimate.abs()) {
        0.0
    } else {
        f64::INFINITY
    };
    Comparison {
        quantity: mc.quantity,
        closed,
        estimate: mc.estimate,
        std_error: mc.std_error,
        z,
        pass: z <= z_threshold,
    }
}

pub(crate) fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::TooFewTrials {
            min: MIN_TRIALS,
            got: trials,
        });
    }
    Ok(())
}

/// Splits `trials` into batches for batch-means standard errors.
pub(crate) fn batch_sizes(trials: usize) -> Vec<usize> {
    let batches = (trials / 1000).clamp(10, 100);
    let base = trials / batches;
    let extra = trials % batches;
    (0..batches).map(|b| base + usize::from(b < extra)).collect()
}
