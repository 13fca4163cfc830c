//! Experiment specification files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::presets::Preset;
use crate::closedform::{MrNormalization, Scheme};
use crate::config::{
    normalized_snr, DownlinkPilotMode, SystemConfig, UplinkPilotMode, DEFAULT_AP_POWER_MW, DEFAULT_USER_POWER_MW,
};
use crate::error::{Error, Result};
use crate::mmf::DEFAULT_BISECT_TOL;
use crate::oracle::{DEFAULT_Z_THRESHOLD, MIN_TRIALS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerPolicy {
    MaximalRatio,
    Mmf,
}

impl FromStr for PowerPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "maximal_ratio" | "mr" => Ok(PowerPolicy::MaximalRatio),
            "mmf" => Ok(PowerPolicy::Mmf),
            _ => Err(Error::config("power_policy", format!("unknown policy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Per-user net SE.
    Se,
    /// Per-user SE without the pilot-overhead factor.
    GrossSe,
    /// Per-snapshot minimum SE.
    MinSe,
    /// Per-user `E|BU|^2 / |DS|^2` in dB.
    BuDsDb,
    /// Per-user `sum_j E|UI_kj|^2 / |DS|^2` in dB.
    UiDsDb,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Se => "se",
            Metric::GrossSe => "gross_se",
            Metric::MinSe => "min_se",
            Metric::BuDsDb => "bu_ds_db",
            Metric::UiDsDb => "ui_ds_db",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "N")]
    Antennas,
    #[serde(rename = "M")]
    NumAps,
}

impl SweepParam {
    pub fn key(self) -> &'static str {
        match self {
            SweepParam::Antennas => "N",
            SweepParam::NumAps => "M",
        }
    }

    pub fn apply(self, config: &SystemConfig, value: usize) -> SystemConfig {
        let mut c = config.clone();
        match self {
            SweepParam::Antennas => c.antennas = value,
            SweepParam::NumAps => c.num_aps = value,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub trials: usize,
    #[serde(default = "default_z")]
    pub z_threshold: f64,
    /// Leading snapshots of every sweep point that get a Monte Carlo check.
    #[serde(default = "one")]
    pub snapshots: usize,
}

fn default_z() -> f64 {
    DEFAULT_Z_THRESHOLD
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

/// A complete, validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub system: SystemConfig,
    pub schemes: Vec<Scheme>,
    pub power_policy: PowerPolicy,
    pub snapshots: usize,
    pub sweep: Option<Sweep>,
    pub metrics: Vec<Metric>,
    pub mr_normalization: MrNormalization,
    pub bisect_tol: f64,
    pub oracle: Option<OracleSpec>,
    #[serde(skip)]
    pub outputs: Outputs,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "custom".into(),
            system: SystemConfig::default(),
            schemes: Scheme::ALL.to_vec(),
            power_policy: PowerPolicy::MaximalRatio,
            snapshots: 200,
            sweep: None,
            metrics: vec![Metric::Se, Metric::MinSe],
            mr_normalization: MrNormalization::Cluster,
            bisect_tol: DEFAULT_BISECT_TOL,
            oracle: None,
            outputs: Outputs::default(),
        }
    }
}

impl ExperimentSpec {
    /// System configurations of the sweep points, in order.
    pub fn points(&self) -> Vec<(Option<usize>, SystemConfig)> {
        match &self.sweep {
            None => vec![(None, self.system.clone())],
            Some(s) => s
                .values
                .iter()
                .map(|&v| (Some(v), s.param.apply(&self.system, v)))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "at least one scheme is required"));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::config(format!("schemes[{i}]"), format!("{s} listed twice")));
            }
        }
        if self.metrics.is_empty() {
            return Err(Error::config("metrics", "at least one metric is required"));
        }
        if self.snapshots == 0 {
            return Err(Error::config("snapshots", "must be at least 1"));
        }
        if !(self.bisect_tol > 0.0 && self.bisect_tol < 1.0) {
            return Err(Error::config("bisect_tol", "must lie in (0, 1)"));
        }
        if self.power_policy == PowerPolicy::Mmf && self.schemes.contains(&Scheme::Cbdt) {
            return Err(Error::config("power_policy", "mmf is not supported for CBDT"));
        }
        if let Some(o) = &self.oracle {
            if o.trials < MIN_TRIALS {
                return Err(Error::config("oracle.trials", format!("must be at least {MIN_TRIALS}")));
            }
            if !(o.z_threshold > 0.0) {
                return Err(Error::config("oracle.z_threshold", "must be positive"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::config("sweep.values", "must not be empty"));
            }
        }
        for (value, cfg) in self.points() {
            let at = |e: Error| match (e, &self.sweep, value) {
                (Error::InvalidConfig { key, reason }, Some(s), Some(v)) => {
                    Error::config(key, format!("{reason} (at sweep {} = {v})", s.param.key()))
                }
                (e, ..) => e,
            };
            cfg.validate().map_err(at)?;
            if self.schemes.contains(&Scheme::Ecb) && cfg.antennas < 2 {
                return Err(at(Error::config("N", "ECB needs N >= 2")));
            }
            if self.schemes.contains(&Scheme::Cbdt) && cfg.tau_dp == 0 {
                return Err(at(Error::config("tau_dp", "CBDT needs tau_dp >= 1")));
            }
        }
        Ok(())
    }
}

/// An SNR given either as a linear ratio or as a transmit power that is
/// normalized by the configured noise power.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
enum Snr {
    Linear(f64),
    Dbm(DbmSnr),
    Mw(MwSnr),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbmSnr {
    dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct MwSnr {
    mw: f64,
}

impl Snr {
    fn linear(self, noise_dbm: f64) -> f64 {
        match self {
            Snr::Linear(v) => v,
            Snr::Dbm(DbmSnr { dbm }) => 10f64.powf((dbm - noise_dbm) / 10.0),
            Snr::Mw(MwSnr { mw }) => normalized_snr(mw, noise_dbm),
        }
    }
}

/// The file format: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    preset: Option<String>,
    name: Option<String>,
    #[serde(rename = "M")]
    num_aps: Option<usize>,
    #[serde(rename = "N")]
    antennas: Option<usize>,
    #[serde(rename = "K")]
    num_users: Option<usize>,
    #[serde(rename = "D")]
    area_side: Option<f64>,
    tau_c: Option<usize>,
    tau_up: Option<usize>,
    tau_dp: Option<usize>,
    xi: Option<f64>,
    rho_d: Option<Snr>,
    rho_dp: Option<Snr>,
    rho_u: Option<Snr>,
    noise_dbm: Option<f64>,
    sigma_sh: Option<f64>,
    epsilon: Option<f64>,
    ap_height: Option<f64>,
    user_height: Option<f64>,
    decorr_dist: Option<f64>,
    cluster_threshold: Option<f64>,
    cluster_min: Option<usize>,
    seed: Option<u64>,
    ul_pilot_mode: Option<UplinkPilotMode>,
    dl_pilot_mode: Option<DownlinkPilotMode>,
    schemes: Option<Vec<Scheme>>,
    power_policy: Option<PowerPolicy>,
    snapshots: Option<usize>,
    sweep: Option<Sweep>,
    metrics: Option<Vec<Metric>>,
    mr_normalization: Option<MrNormalization>,
    bisect_tol: Option<f64>,
    oracle: Option<OracleSpec>,
    outputs: Option<Outputs>,
}

impl RawSpec {
    fn resolve(self) -> Result<ExperimentSpec> {
        let mut spec = match &self.preset {
            Some(p) => p.parse::<Preset>()?.spec(),
            None => ExperimentSpec::default(),
        };
        let c = &mut spec.system;
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        set!(
            num_aps,
            antennas,
            num_users,
            area_side,
            tau_c,
            tau_up,
            tau_dp,
            xi,
            sigma_sh,
            epsilon,
            ap_height,
            user_height,
            decorr_dist,
            cluster_threshold,
            cluster_min,
            seed,
            ul_pilot_mode,
            dl_pilot_mode
        );
        if let Some(noise) = self.noise_dbm {
            // defaults follow the noise floor unless given explicitly
            c.noise_dbm = noise;
            c.rho_d = normalized_snr(DEFAULT_AP_POWER_MW, noise);
            c.rho_dp = c.rho_d;
            c.rho_u = normalized_snr(DEFAULT_USER_POWER_MW, noise);
        }
        let noise = c.noise_dbm;
        if let Some(v) = self.rho_d {
            c.rho_d = v.linear(noise);
            if self.rho_dp.is_none() {
                c.rho_dp = c.rho_d;
            }
        }
        if let Some(v) = self.rho_dp {
            c.rho_dp = v.linear(noise);
        }
        if let Some(v) = self.rho_u {
            c.rho_u = v.linear(noise);
        }
        if let Some(v) = self.name {
            spec.name = v;
        }
        if let Some(v) = self.schemes {
            spec.schemes = v;
        }
        if let Some(v) = self.power_policy {
            spec.power_policy = v;
        }
        if let Some(v) = self.snapshots {
            spec.snapshots = v;
        }
        if let Some(v) = self.sweep {
            spec.sweep = Some(v);
        }
        if let Some(v) = self.metrics {
            spec.metrics = v;
        }
        if let Some(v) = self.mr_normalization {
            spec.mr_normalization = v;
        }
        if let Some(v) = self.bisect_tol {
            spec.bisect_tol = v;
        }
        if let Some(v) = self.oracle {
            spec.oracle = Some(v);
        }
        if let Some(v) = self.outputs {
            spec.outputs = v;
        }
        Ok(spec)
    }
}

/// Parses a specification from JSON text. Empty text gives the defaults.
pub fn parse_spec(text: &str, context: &str) -> Result<ExperimentSpec> {
    let raw: RawSpec = if text.trim().is_empty() {
        RawSpec::default()
    } else {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.to_string();
            if inner.is_syntax() || inner.is_eof() || path == "." {
                Error::Parse {
                    context: context.to_string(),
                    message,
                }
            } else {
                Error::config(path, message)
            }
        })?
    };
    let spec = raw.resolve()?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text, &path.display().to_string())
}
