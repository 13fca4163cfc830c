//! Scenario and radio parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uplink pilot assignment policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UplinkPilotMode {
    /// Each user draws a pilot index uniformly; indices are reused.
    #[default]
    Random,
    /// All users get distinct pilots (requires `tau_up >= K`).
    Orthogonal,
}

/// Downlink pilot assignment policy (CB-DT only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DownlinkPilotMode {
    /// Distinct indices inside every uplink co-pilot group, random reuse across groups.
    #[default]
    RandomReuse,
    /// All users get distinct downlink pilots (requires `tau_dp >= K`).
    Distinct,
}

/// All scalar parameters of one scenario. SNRs are linear and normalized by
/// the noise power; distances are meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_aps: usize,
    pub antennas: usize,
    pub num_users: usize,
    pub area_side: f64,
    pub tau_c: usize,
    pub tau_up: usize,
    /// Downlink pilot length; zero disables CB-DT.
    pub tau_dp: usize,
    pub xi: f64,
    pub rho_d: f64,
    pub rho_dp: f64,
    pub rho_u: f64,
    /// Shadowing standard deviation in dB.
    pub sigma_sh: f64,
    pub epsilon: f64,
    pub ap_height: f64,
    pub user_height: f64,
    pub decorr_dist: f64,
    pub cluster_threshold: f64,
    pub cluster_min: usize,
    pub noise_dbm: f64,
    pub seed: u64,
    pub ul_pilot_mode: UplinkPilotMode,
    pub dl_pilot_mode: DownlinkPilotMode,
}

pub const DEFAULT_AP_POWER_MW: f64 = 200.0;
pub const DEFAULT_USER_POWER_MW: f64 = 100.0;
pub const DEFAULT_NOISE_DBM: f64 = -92.0;

/// Transmit power in mW normalized by the noise power, as a linear ratio.
pub fn normalized_snr(power_mw: f64, noise_dbm: f64) -> f64 {
    10f64.powf((10.0 * power_mw.log10() - noise_dbm) / 10.0)
}

impl Default for SystemConfig {
    fn default() -> Self {
        let rho_d = normalized_snr(DEFAULT_AP_POWER_MW, DEFAULT_NOISE_DBM);
        SystemConfig {
            num_aps: 200,
            antennas: 8,
            num_users: 40,
            area_side: 500.0,
            tau_c: 200,
            tau_up: 20,
            tau_dp: 20,
            xi: 0.5,
            rho_d,
            rho_dp: rho_d,
            rho_u: normalized_snr(DEFAULT_USER_POWER_MW, DEFAULT_NOISE_DBM),
            sigma_sh: 4.0,
            epsilon: 0.5,
            ap_height: 10.0,
            user_height: 1.5,
            decorr_dist: 9.0,
            cluster_threshold: 0.95,
            cluster_min: 10,
            noise_dbm: DEFAULT_NOISE_DBM,
            seed: 0,
            ul_pilot_mode: UplinkPilotMode::Random,
            dl_pilot_mode: DownlinkPilotMode::RandomReuse,
        }
    }
}

impl SystemConfig {
    /// Checks every scalar invariant. ECB's `N >= 2` requirement is checked
    /// by the callers that evaluate ECB.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, got {v}")))
            }
        };
        let open_unit = |key: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must lie in (0, 1), got {v}")))
            }
        };
        if self.num_aps == 0 {
            return Err(Error::config("M", "must be at least 1"));
        }
        if self.antennas == 0 {
            return Err(Error::config("N", "must be at least 1"));
        }
        if self.num_users == 0 {
            return Err(Error::config("K", "must be at least 1"));
        }
        if self.num_aps * self.antennas < self.num_users {
            return Err(Error::config(
                "M",
                format!(
                    "M*N = {} must be at least K = {}",
                    self.num_aps * self.antennas,
                    self.num_users
                ),
            ));
        }
        if self.tau_up == 0 {
            return Err(Error::config("tau_up", "must be at least 1"));
        }
        if self.tau_up > self.tau_c {
            return Err(Error::config("tau_up", "must not exceed tau_c"));
        }
        if self.tau_up + self.tau_dp >= self.tau_c {
            return Err(Error::config("tau_dp", "tau_up + tau_dp must be below tau_c"));
        }
        open_unit("xi", self.xi)?;
        open_unit("epsilon", self.epsilon)?;
        positive("rho_d", self.rho_d)?;
        if !(self.rho_dp.is_finite() && self.rho_dp >= 0.0) {
            return Err(Error::config(
                "rho_dp",
                format!("must be non-negative and finite, got {}", self.rho_dp),
            ));
        }
        positive("rho_u", self.rho_u)?;
        positive("D", self.area_side)?;
        positive("decorr_dist", self.decorr_dist)?;
        if !(self.sigma_sh.is_finite() && self.sigma_sh >= 0.0) {
            return Err(Error::config("sigma_sh", "must be non-negative"));
        }
        if !(self.ap_height.is_finite() && self.user_height.is_finite()) {
            return Err(Error::config("ap_height", "heights must be finite"));
        }
        if !(self.cluster_threshold > 0.0 && self.cluster_threshold <= 1.0) {
            return Err(Error::config("cluster_threshold", "must lie in (0, 1]"));
        }
        if self.cluster_min == 0 || self.cluster_min > self.num_aps {
            return Err(Error::config(
                "cluster_min",
                format!("must lie in 1..=M (M = {})", self.num_aps),
            ));
        }
        if self.ul_pilot_mode == UplinkPilotMode::Orthogonal && self.tau_up < self.num_users {
            return Err(Error::config("ul_pilot_mode", "orthogonal pilots need tau_up >= K"));
        }
        if self.tau_dp > 0 && self.dl_pilot_mode == DownlinkPilotMode::Distinct && self.tau_dp < self.num_users {
            return Err(Error::config(
                "dl_pilot_mode",
                "distinct downlink pilots need tau_dp >= K",
            ));
        }
        Ok(())
    }

    /// Pre-log factor `xi * (1 - pilots / tau_c)`.
    pub fn prelog(&self, downlink_training: bool) -> f64 {
        let pilots = if downlink_training {
            self.tau_up + self.tau_dp
        } else {
            self.tau_up
        };
        self.xi * (1.0 - pilots as f64 / self.tau_c as f64)
    }
}
