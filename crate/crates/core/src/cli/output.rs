//! CDF tables, summaries and their serialization.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "scheme,metric,value,cdf";

/// Nine significant digits, the precision of every emitted number.
pub fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}

/// Rounds `v` to what [`format_value`] writes.
pub fn quantize(v: f64) -> f64 {
    format_value(v).parse().unwrap_or(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfRow {
    pub scheme: String,
    pub metric: String,
    pub value: f64,
    pub cdf: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableMeta {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    pub rows: Vec<CdfRow>,
    pub meta: TableMeta,
}

impl CdfTable {
    pub fn new(meta: TableMeta) -> Self {
        CdfTable { rows: Vec::new(), meta }
    }

    /// Appends the empirical CDF of `values` as one (scheme, metric) group.
    pub fn push_group(&mut self, scheme: &str, metric: &str, values: &[f64]) {
        let mut v: Vec<f64> = values.iter().map(|&x| quantize(x)).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        for (i, value) in v.into_iter().enumerate() {
            self.rows.push(CdfRow {
                scheme: scheme.to_string(),
                metric: metric.to_string(),
                value,
                cdf: quantize((i + 1) as f64 / n),
            });
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(48 * (self.rows.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.scheme,
                r.metric,
                format_value(r.value),
                format_value(r.cdf)
            );
        }
        s
    }
}

/// Parses a CSV written by [`CdfTable::to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CdfRow>> {
    let bad = |line: usize, message: String| Error::Parse {
        context: format!("csv line {line}"),
        message,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(CSV_HEADER) => {}
        other => return Err(bad(1, format!("expected header `{CSV_HEADER}`, got {other:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(i + 2, format!("expected 4 fields, got {}", fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(i + 2, format!("`{s}`: {e}")));
        rows.push(CdfRow {
            scheme: fields[0].to_string(),
            metric: fields[1].to_string(),
            value: num(fields[2])?,
            cdf: num(fields[3])?,
        });
    }
    Ok(rows)
}

/// Mean and percentiles of one (scheme, metric) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub scheme: String,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

impl GroupSummary {
    pub fn from_values(scheme: &str, metric: &str, values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mean = if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        };
        GroupSummary {
            scheme: scheme.to_string(),
            metric: metric.to_string(),
            count: v.len(),
            mean: quantize(mean),
            p5: quantize(percentile(&v, 0.05)),
            p50: quantize(percentile(&v, 0.5)),
            p95: quantize(percentile(&v, 0.95)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub trials: usize,
    pub z_threshold: f64,
    pub comparisons: usize,
    pub failures: usize,
    pub max_z: f64,
    /// The worst few comparisons, formatted.
    pub worst: Vec<String>,
}

impl OracleSummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    #[serde(flatten)]
    pub meta: TableMeta,
    pub snapshots: usize,
    pub failures: usize,
    pub mmf_undecided: usize,
    pub groups: Vec<GroupSummary>,
    pub oracle: Option<OracleSummary>,
}

impl Summary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).unwrap_or_default();
        s.push('\n');
        s
    }

    /// Fixed-width text table for the terminal.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<6} {:<22} {:>7} {:>14} {:>14} {:>14} {:>14}",
            "scheme", "metric", "count", "mean", "p5", "p50", "p95"
        );
        for g in &self.groups {
            let _ = writeln!(
                s,
                "{:<6} {:<22} {:>7} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
                g.scheme, g.metric, g.count, g.mean, g.p5, g.p50, g.p95
            );
        }
        if self.failures > 0 {
            let _ = writeln!(s, "{} snapshot evaluations failed and were skipped", self.failures);
        }
        if let Some(o) = &self.oracle {
            let _ = writeln!(
                s,
                "oracle: {} comparisons at {} trials, {} above z = {} (max z {:.2})",
                o.comparisons, o.trials, o.failures, o.z_threshold, o.max_z
            );
        }
        s
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
