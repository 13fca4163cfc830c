//! Experiment configuration, orchestration and output for the `cellfree` binary.

pub mod output;
pub mod presets;
pub mod runner;
pub mod spec;

use std::path::PathBuf;

use clap::Parser;

pub use output::{parse_csv, CdfRow, CdfTable, Summary};
pub use presets::Preset;
pub use runner::{run_experiment, ExperimentResult};
pub use spec::{load_config, parse_spec, ExperimentSpec, Metric, OracleSpec, PowerPolicy};

use crate::closedform::Scheme;
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_ORACLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "cellfree",
    version,
    about = "Downlink cell-free massive MIMO spectral-efficiency experiments"
)]
pub struct Args {
    /// JSON experiment file; its keys override the preset, flags override both.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Figure preset: fig1, fig2, fig3, fig4, fig5 (fig5a), fig5b, fig6, fig7.
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Snapshots per sweep point (presets use 200).
    #[arg(long)]
    pub snapshots: Option<usize>,
    /// Master seed; every snapshot and oracle stream derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Schemes to evaluate, comma separated (CB, NCB, ECB, CBDT).
    #[arg(long, value_delimiter = ',')]
    pub scheme: Vec<Scheme>,
    /// Power control: maximal_ratio or mmf.
    #[arg(long)]
    pub policy: Option<PowerPolicy>,
    /// Run the Monte Carlo oracle with this many trials per check.
    #[arg(long)]
    pub oracle_trials: Option<usize>,
    /// Snapshots per sweep point checked by the oracle.
    #[arg(long)]
    pub oracle_snapshots: Option<usize>,
    /// Largest accepted |z| of an oracle comparison (default 4).
    #[arg(long)]
    pub z_threshold: Option<f64>,
    /// Output directory for `<name>.csv` and `<name>.summary.json`.
    /// Without it the CSV goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Builds the spec from config file, preset and flags.
pub fn resolve_spec(args: &Args) -> Result<ExperimentSpec> {
    let mut spec = match (&args.config, args.preset) {
        (Some(path), preset) => {
            let spec = load_config(path)?;
            match preset {
                Some(p) if spec.name != p.name() => {
                    return Err(Error::config(
                        "preset",
                        "use either --preset or a `preset` key in the config",
                    ));
                }
                _ => spec,
            }
        }
        (None, Some(p)) => p.spec(),
        (None, None) => ExperimentSpec::default(),
    };
    if let Some(n) = args.snapshots {
        spec.snapshots = n;
    }
    if let Some(s) = args.seed {
        spec.system.seed = s;
    }
    if !args.scheme.is_empty() {
        spec.schemes = args.scheme.clone();
    }
    if let Some(p) = args.policy {
        spec.power_policy = p;
    }
    if args.oracle_trials.is_some() || args.oracle_snapshots.is_some() || args.z_threshold.is_some() {
        let base = spec.oracle.unwrap_or(OracleSpec {
            trials: 100_000,
            z_threshold: crate::oracle::DEFAULT_Z_THRESHOLD,
            snapshots: 1,
        });
        spec.oracle = Some(OracleSpec {
            trials: args.oracle_trials.unwrap_or(base.trials),
            z_threshold: args.z_threshold.unwrap_or(base.z_threshold),
            snapshots: args.oracle_snapshots.unwrap_or(base.snapshots),
        });
    }
    if let Some(dir) = &args.out {
        spec.outputs.csv = Some(dir.join(format!("{}.csv", spec.name)));
        spec.outputs.summary = Some(dir.join(format!("{}.summary.json", spec.name)));
    }
    spec.validate()?;
    Ok(spec)
}

/// Runs the command line and returns the process exit code.
pub fn run(args: &Args) -> i32 {
    let outcome = resolve_spec(args).and_then(|spec| {
        let result = run_experiment(&spec)?;
        let csv = result.table.to_csv();
        match &spec.outputs.csv {
            Some(path) => output::write_file(path, &csv)?,
            None => print!("{csv}"),
        }
        if let Some(path) = &spec.outputs.summary {
            output::write_file(path, &result.summary.to_json())?;
        }
        eprint!("{}", result.summary.to_text());
        Ok(result)
    });
    match outcome {
        Ok(r) if r.oracle_passed() => EXIT_OK,
        Ok(r) => {
            for line in r.summary.oracle.iter().flat_map(|o| &o.worst) {
                eprintln!("oracle: {line}");
            }
            EXIT_ORACLE
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_FAILURE
            }
        }
    }
}
