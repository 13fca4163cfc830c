//! Snapshot-parallel experiment execution.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::output::{CdfTable, GroupSummary, OracleSummary, Summary, TableMeta};
use super::spec::{ExperimentSpec, Metric, OracleSpec, PowerPolicy};
use crate::closedform::{self, hardening_metrics, maximal_ratio_power, PowerAllocation, Scheme, SinrReport};
use crate::config::SystemConfig;
use crate::error::Result;
use crate::mmf::{self, MmfOptions};
use crate::oracle::{self, Comparison};
use crate::rng;
use crate::scenario::{build_snapshot, Snapshot};

/// How many of the worst oracle comparisons the summary lists.
const WORST_LISTED: usize = 5;

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub table: CdfTable,
    pub summary: Summary,
}

impl ExperimentResult {
    pub fn oracle_passed(&self) -> bool {
        self.summary.oracle.as_ref().is_none_or(OracleSummary::passed)
    }
}

pub fn version_string() -> String {
    format!("cellfree v{}", env!("CARGO_PKG_VERSION"))
}

/// SHA-256 of the canonical JSON form of the spec (output paths excluded).
pub fn config_hash(spec: &ExperimentSpec) -> String {
    let json = serde_json::to_string(spec).unwrap_or_default();
    Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Seed of snapshot `index`; shared by all sweep points and schemes.
pub fn snapshot_seed(spec: &ExperimentSpec, index: usize) -> u64 {
    rng::child_seed(spec.system.seed, index as u64)
}

/// Power allocation of `scheme` under the spec's policy, with the count of
/// undecided feasibility checks.
pub fn allocate(
    spec: &ExperimentSpec,
    snap: &Snapshot,
    scheme: Scheme,
    config: &SystemConfig,
) -> Result<(PowerAllocation, usize)> {
    match spec.power_policy {
        PowerPolicy::MaximalRatio => Ok((
            maximal_ratio_power(snap, scheme, config.antennas, spec.mr_normalization),
            0,
        )),
        PowerPolicy::Mmf => {
            let opts = MmfOptions {
                bisect_tol: spec.bisect_tol,
                ..MmfOptions::default()
            };
            let sol = mmf::solve_mmf_with(snap, scheme, config, &opts)?;
            Ok((sol.allocation(), sol.undecided))
        }
    }
}

/// Values of `metric` for one report: one per user, except `min_se`.
pub fn metric_values(metric: Metric, report: &SinrReport, config: &SystemConfig) -> Result<Vec<f64>> {
    Ok(match metric {
        Metric::Se => report.se.clone(),
        Metric::GrossSe => report.sinr.iter().map(|s| config.xi * (1.0 + s).log2()).collect(),
        Metric::MinSe => vec![report.min_se()],
        Metric::BuDsDb => hardening_metrics(report)?.into_iter().map(|m| m.0).collect(),
        Metric::UiDsDb => hardening_metrics(report)?.into_iter().map(|m| m.1).collect(),
    })
}

/// Monte Carlo checks of one closed-form report.
pub fn oracle_checks(
    snap: &Snapshot,
    alloc: &PowerAllocation,
    report: &SinrReport,
    config: &SystemConfig,
    oracle: &OracleSpec,
    seed: u64,
) -> Result<Vec<Comparison>> {
    let k = snap.num_users();
    let z = oracle.z_threshold;
    let mut out = Vec::new();
    if alloc.scheme == Scheme::Cbdt {
        let est = oracle::estimate_cbdt(snap, &alloc.eta, config, oracle.trials, seed)?;
        let kappa = report.kappa.clone().unwrap_or_default();
        let rho = config.rho_d;
        for user in 0..k {
            out.push(oracle::compare(kappa[user], &est.kappa[user], z));
            out.push(oracle::compare(
                report.self_interference[user] / rho,
                &est.error[user],
                z,
            ));
            for j in (0..k).filter(|&j| j != user) {
                out.push(oracle::compare(
                    report.ui_pairs[(user, j)] / rho,
                    &est.gain_power[user][j],
                    z,
                ));
            }
        }
    } else {
        let est = oracle::estimate_ds_bu_ui(snap, alloc, config, oracle.trials, seed)?;
        for user in 0..k {
            out.push(oracle::compare(report.coherent_gain[user], &est.coherent_gain[user], z));
            out.push(oracle::compare(
                report.self_interference[user],
                &est.self_interference[user],
                z,
            ));
            for j in (0..k).filter(|&j| j != user) {
                out.push(oracle::compare(
                    report.ui_pairs[(user, j)],
                    &est.interference[user][j],
                    z,
                ));
            }
        }
    }
    Ok(out)
}

/// Everything one snapshot contributes at one sweep point.
struct SnapshotOutcome {
    /// Per scheme: metric values in spec order, or `None` on failure.
    schemes: Vec<Option<Vec<Vec<f64>>>>,
    undecided: usize,
    comparisons: Vec<Comparison>,
}

fn run_snapshot(spec: &ExperimentSpec, config: &SystemConfig, index: usize) -> SnapshotOutcome {
    let seed = snapshot_seed(spec, index);
    let mut outcome = SnapshotOutcome {
        schemes: vec![None; spec.schemes.len()],
        undecided: 0,
        comparisons: Vec::new(),
    };
    let snap = match build_snapshot(config, seed) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("snapshot {index}: {e}");
            return outcome;
        }
    };
    for (slot, &scheme) in spec.schemes.iter().enumerate() {
        let result = (|| -> Result<Vec<Vec<f64>>> {
            let (alloc, undecided) = allocate(spec, &snap, scheme, config)?;
            outcome.undecided += undecided;
            let report = closedform::evaluate(&snap, &alloc, config)?;
            if let Some(o) = spec.oracle.as_ref().filter(|o| index < o.snapshots) {
                let oseed = rng::child_seed(seed, 1 + slot as u64);
                outcome
                    .comparisons
                    .extend(oracle_checks(&snap, &alloc, &report, config, o, oseed)?);
            }
            spec.metrics
                .iter()
                .map(|&m| metric_values(m, &report, config))
                .collect()
        })();
        match result {
            Ok(v) => outcome.schemes[slot] = Some(v),
            Err(e) => log::warn!("snapshot {index}, {scheme}: {e}"),
        }
    }
    outcome
}

/// Runs every sweep point over all snapshots and builds the CDF table and summary.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let meta = TableMeta {
        config_hash: config_hash(spec),
        seed: spec.system.seed,
        version: version_string(),
    };
    let mut table = CdfTable::new(meta.clone());
    let mut groups = Vec::new();
    let mut failures = 0;
    let mut undecided = 0;
    let mut comparisons = Vec::new();

    for (value, config) in spec.points() {
        log::info!(
            "{}: {} snapshots{}",
            spec.name,
            spec.snapshots,
            value
                .map(|v| format!(" at {} = {v}", spec.sweep.as_ref().map_or("", |s| s.param.key())))
                .unwrap_or_default()
        );
        let outcomes: Vec<SnapshotOutcome> = (0..spec.snapshots)
            .into_par_iter()
            .map(|i| run_snapshot(spec, &config, i))
            .collect();
        for (slot, scheme) in spec.schemes.iter().enumerate() {
            for (mi, metric) in spec.metrics.iter().enumerate() {
                let label = match (value, &spec.sweep) {
                    (Some(v), Some(s)) => format!("{metric}@{}={v}", s.param.key()),
                    _ => metric.to_string(),
                };
                let values: Vec<f64> = outcomes
                    .iter()
                    .filter_map(|o| o.schemes[slot].as_ref())
                    .flat_map(|m| m[mi].iter().copied())
                    .collect();
                table.push_group(scheme.name(), &label, &values);
                groups.push(GroupSummary::from_values(scheme.name(), &label, &values));
            }
        }
        for o in outcomes {
            failures += o.schemes.iter().filter(|s| s.is_none()).count();
            undecided += o.undecided;
            comparisons.extend(o.comparisons);
        }
    }

    let oracle = spec.oracle.as_ref().map(|o| {
        let mut sorted = comparisons.clone();
        sorted.sort_by(|a, b| b.z.total_cmp(&a.z));
        OracleSummary {
            trials: o.trials,
            z_threshold: o.z_threshold,
            comparisons: comparisons.len(),
            failures: comparisons.iter().filter(|c| !c.pass).count(),
            max_z: sorted.first().map_or(0.0, |c| c.z),
            worst: sorted.iter().take(WORST_LISTED).map(|c| c.to_string()).collect(),
        }
    });
    let summary = Summary {
        name: spec.name.clone(),
        meta,
        snapshots: spec.snapshots,
        failures,
        mmf_undecided: undecided,
        groups,
        oracle,
    };
    Ok(ExperimentResult { table, summary })
}
