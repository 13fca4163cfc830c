//! Figure presets.

use std::fmt;
use std::str::FromStr;

use super::spec::{ExperimentSpec, Metric, PowerPolicy, Sweep, SweepParam};
use crate::closedform::Scheme;
use crate::config::{DownlinkPilotMode, SystemConfig};
use crate::error::{Error, Result};

/// Snapshot count used by every preset unless overridden.
pub const PRESET_SNAPSHOTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig5b,
    Fig6,
    Fig7,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Fig1,
        Preset::Fig2,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Fig5b,
        Preset::Fig6,
        Preset::Fig7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig5b => "fig5b",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
        }
    }

    pub fn spec(self) -> ExperimentSpec {
        let base = SystemConfig::default();
        let n8 = SystemConfig {
            antennas: 8,
            ..base.clone()
        };
        let small = SystemConfig {
            num_aps: 100,
            antennas: 8,
            num_users: 20,
            area_side: 250.0,
            tau_c: 200,
            tau_up: 10,
            tau_dp: 10,
            ..base.clone()
        };
        let antenna_sweep = |values: Vec<usize>| Sweep {
            param: SweepParam::Antennas,
            values,
        };
        let spec = |system: SystemConfig, metrics: Vec<Metric>, sweep: Option<Sweep>| ExperimentSpec {
            name: self.name().into(),
            system,
            schemes: Scheme::ALL.to_vec(),
            power_policy: PowerPolicy::MaximalRatio,
            snapshots: PRESET_SNAPSHOTS,
            sweep,
            metrics,
            ..ExperimentSpec::default()
        };
        match self {
            Preset::Fig1 => spec(base, vec![Metric::BuDsDb], Some(antenna_sweep(vec![2, 4, 8, 16]))),
            Preset::Fig2 => {
                // no downlink pilot reuse: tau_dp = K
                let system = SystemConfig {
                    tau_dp: n8.num_users,
                    dl_pilot_mode: DownlinkPilotMode::Distinct,
                    ..n8
                };
                spec(system, vec![Metric::BuDsDb], None)
            }
            Preset::Fig3 => spec(base, vec![Metric::UiDsDb], Some(antenna_sweep(vec![2, 4, 8, 16]))),
            Preset::Fig4 => spec(n8, vec![Metric::GrossSe, Metric::Se], None),
            Preset::Fig5 | Preset::Fig5b => {
                let system = SystemConfig {
                    tau_c: if self == Preset::Fig5 { 200 } else { 100 },
                    ..small
                };
                ExperimentSpec {
                    schemes: vec![Scheme::Cb, Scheme::Ncb, Scheme::Ecb],
                    power_policy: PowerPolicy::Mmf,
                    ..spec(system, vec![Metric::MinSe], None)
                }
            }
            Preset::Fig6 => spec(
                n8,
                vec![Metric::Se],
                Some(antenna_sweep((1..=8).map(|i| 2 * i).collect())),
            ),
            Preset::Fig7 => spec(
                n8,
                vec![Metric::Se],
                Some(Sweep {
                    param: SweepParam::NumAps,
                    values: (1..=6).map(|i| 50 * i).collect(),
                }),
            ),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let key = if lower == "fig5a" { "fig5" } else { lower.as_str() };
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::config("preset", format!("unknown preset `{s}` (fig1..fig7, fig5b)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // (preset, M, N, K, D, tau_c, tau_up, tau_dp, mmf, sweep)
    type Row = (
        &'static str,
        usize,
        usize,
        usize,
        f64,
        usize,
        usize,
        usize,
        bool,
        Option<(&'static str, &'static [usize])>,
    );

    const TABLE: [Row; 8] = [
        (
            "fig1",
            200,
            8,
            40,
            500.0,
            200,
            20,
            20,
            false,
            Some(("N", &[2, 4, 8, 16])),
        ),
        ("fig2", 200, 8, 40, 500.0, 200, 20, 40, false, None),
        (
            "fig3",
            200,
            8,
            40,
            500.0,
            200,
            20,
            20,
            false,
            Some(("N", &[2, 4, 8, 16])),
        ),
        ("fig4", 200, 8, 40, 500.0, 200, 20, 20, false, None),
        ("fig5", 100, 8, 20, 250.0, 200, 10, 10, true, None),
        ("fig5b", 100, 8, 20, 250.0, 100, 10, 10, true, None),
        (
            "fig6",
            200,
            8,
            40,
            500.0,
            200,
            20,
            20,
            false,
            Some(("N", &[2, 4, 6, 8, 10, 12, 14, 16])),
        ),
        (
            "fig7",
            200,
            8,
            40,
            500.0,
            200,
            20,
            20,
            false,
            Some(("M", &[50, 100, 150, 200, 250, 300])),
        ),
    ];

    #[test]
    fn presets_match_literal_table() {
        for (name, m, n, k, d, tau_c, tau_up, tau_dp, mmf, sweep) in TABLE {
            let spec: ExperimentSpec = name.parse::<Preset>().unwrap().spec();
            let c = &spec.system;
            assert_eq!(
                (
                    c.num_aps,
                    c.antennas,
                    c.num_users,
                    c.area_side,
                    c.tau_c,
                    c.tau_up,
                    c.tau_dp
                ),
                (m, n, k, d, tau_c, tau_up, tau_dp),
                "{name}"
            );
            assert_eq!(
                (c.sigma_sh, c.epsilon, c.ap_height, c.user_height, c.xi),
                (4.0, 0.5, 10.0, 1.5, 0.5)
            );
            assert_eq!((c.decorr_dist, c.cluster_threshold), (9.0, 0.95));
            assert!((c.rho_d / 3.169_786_384e11 - 1.0).abs() < 1e-9);
            assert!((c.rho_u / 1.584_893_192e11 - 1.0).abs() < 1e-9);
            assert_eq!(spec.power_policy == PowerPolicy::Mmf, mmf, "{name}");
            assert_eq!(spec.snapshots, PRESET_SNAPSHOTS);
            let got = spec.sweep.as_ref().map(|s| (s.param.key(), s.values.as_slice()));
            assert_eq!(got, sweep, "{name}");
            spec.validate().unwrap();
        }
    }

    #[test]
    fn preset_names() {
        assert_eq!("fig5a".parse::<Preset>().unwrap(), Preset::Fig5);
        assert_eq!("FIG7".parse::<Preset>().unwrap(), Preset::Fig7);
        assert!("fig8".parse::<Preset>().is_err());
    }
}
