use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration at `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("{which} shadowing covariance is not positive semidefinite (pivot {pivot:e} at index {index})")]
    CovarianceNotPsd {
        which: &'static str,
        index: usize,
        pivot: f64,
    },

    #[error("orthogonal uplink pilots need tau_up >= K (tau_up = {tau_up}, K = {users})")]
    TooFewOrthogonalPilots { tau_up: usize, users: usize },

    #[error("downlink pilot assignment infeasible: uplink pilot group {pilot} has {size} users but tau_dp = {tau_dp}")]
    DownlinkPilotsInfeasible { pilot: usize, size: usize, tau_dp: usize },

    #[error("{scheme} per-AP power constraint violated at AP {ap}: load {load} > 1")]
    PowerConstraint { scheme: String, ap: usize, load: f64 },

    #[error("power coefficient eta[{ap}][{user}] = {value} is invalid: {reason}")]
    InvalidEta {
        ap: usize,
        user: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("ECB needs at least 2 antennas per AP (E{{1/|x|^2}} diverges for N = 1)")]
    EcbNeedsTwoAntennas,

    #[error("scheme {scheme} is not supported for {what}")]
    UnsupportedScheme { scheme: String, what: &'static str },

    #[error("downlink pilots are not assigned (tau_dp = 0); CBDT cannot be evaluated")]
    NoDownlinkPilots,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite coefficient in second-order cone data: {0}")]
    NonFinite(String),

    #[error("coherent gain of user {user} is zero; hardening metrics are undefined")]
    ZeroCoherentGain { user: usize },

    #[error("perfect CSI needs orthogonal uplink pilots (users {first} and {second} share a pilot)")]
    PerfectCsiWithSharedPilots { first: usize, second: usize },

    #[error("max-min fairness found no feasible point at nu = {0}")]
    MmfNoFeasiblePoint(f64),

    #[error("at least {min} Monte Carlo trials are required, got {got}")]
    TooFewTrials { min: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig { .. }
                | Error::EcbNeedsTwoAntennas
                | Error::UnsupportedScheme { .. }
                | Error::TooFewOrthogonalPilots { .. }
                | Error::DownlinkPilotsInfeasible { .. }
                | Error::Parse { .. }
        )
    }
}
