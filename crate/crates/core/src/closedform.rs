//! Closed-form downlink SINR and spectral efficiency under the hardening
//! bound for CB, NCB, ECB and CB with downlink training.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::scenario::Snapshot;
use crate::special::alpha;

/// Tolerance on the per-AP power constraints.
pub const POWER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "CB")]
    Cb,
    #[serde(rename = "NCB")]
    Ncb,
    #[serde(rename = "ECB")]
    Ecb,
    #[serde(rename = "CBDT", alias = "CB-DT")]
    Cbdt,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Cb, Scheme::Ncb, Scheme::Ecb, Scheme::Cbdt];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Cb => "CB",
            Scheme::Ncb => "NCB",
            Scheme::Ecb => "ECB",
            Scheme::Cbdt => "CBDT",
        }
    }

    pub fn uses_downlink_training(self) -> bool {
        self == Scheme::Cbdt
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CB" => Ok(Scheme::Cb),
            "NCB" => Ok(Scheme::Ncb),
            "ECB" => Ok(Scheme::Ecb),
            "CBDT" | "CB-DT" | "CB_DT" => Ok(Scheme::Cbdt),
            _ => Err(Error::config("scheme", format!("unknown scheme `{s}`"))),
        }
    }
}

/// Power control coefficients `eta[m][k]` for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub eta: DMatrix<f64>,
    pub scheme: Scheme,
}

/// What to do when an allocation violates its per-AP constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintPolicy {
    #[default]
    Enforce,
    Warn,
}

/// Whether maximal-ratio denominators sum over served users only or all users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MrNormalization {
    #[default]
    Cluster,
    FullSum,
}

/// Per-AP load `sum_k (...)`; the constraint is `load <= 1`.
pub fn constraint_loads(snap: &Snapshot, eta: &DMatrix<f64>, scheme: Scheme, antennas: usize) -> Vec<f64> {
    let n = antennas as f64;
    (0..snap.num_aps())
        .map(|m| {
            (0..snap.num_users())
                .map(|k| {
                    let e = eta[(m, k)];
                    match scheme {
                        Scheme::Cb | Scheme::Cbdt => n * e * snap.gamma[(m, k)],
                        Scheme::Ncb => e,
                        Scheme::Ecb => e / (snap.gamma[(m, k)] * (n - 1.0)),
                    }
                })
                .sum()
        })
        .collect()
}

/// Checks shape, sign, cluster support and the per-AP constraint.
pub fn check_allocation(
    snap: &Snapshot,
    alloc: &PowerAllocation,
    antennas: usize,
    policy: ConstraintPolicy,
) -> Result<()> {
    let (m, k) = (snap.num_aps(), snap.num_users());
    if alloc.eta.shape() != (m, k) {
        return Err(Error::Shape(format!(
            "eta is {:?}, snapshot is {m}x{k}",
            alloc.eta.shape()
        )));
    }
    if alloc.scheme == Scheme::Ecb && antennas < 2 {
        return Err(Error::EcbNeedsTwoAntennas);
    }
    for ap in 0..m {
        for user in 0..k {
            let value = alloc.eta[(ap, user)];
            let reason = if !value.is_finite() {
                Some("not finite")
            } else if value < 0.0 {
                Some("negative")
            } else if value > 0.0 && !snap.serves(ap, user) {
                Some("AP is outside the user's cluster")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(Error::InvalidEta {
                    ap,
                    user,
                    value,
                    reason,
                });
            }
        }
    }
    for (ap, load) in constraint_loads(snap, &alloc.eta, alloc.scheme, antennas)
        .into_iter()
        .enumerate()
    {
        if load > 1.0 + POWER_TOL {
            let err = Error::PowerConstraint {
                scheme: alloc.scheme.to_string(),
                ap,
                load,
            };
            match policy {
                ConstraintPolicy::Enforce => return Err(err),
                ConstraintPolicy::Warn => log::warn!("{err}"),
            }
        }
    }
    Ok(())
}

/// Maximal-ratio power control: every AP spends its full budget,
/// proportionally to the estimate quality of the users it serves.
pub fn maximal_ratio_power(
    snap: &Snapshot,
    scheme: Scheme,
    antennas: usize,
    normalization: MrNormalization,
) -> PowerAllocation {
    let (m, k) = (snap.num_aps(), snap.num_users());
    let n = antennas as f64;
    let mut eta = DMatrix::zeros(m, k);
    for ap in 0..m {
        let total: f64 = (0..k)
            .filter(|&j| normalization == MrNormalization::FullSum || snap.serves(ap, j))
            .map(|j| snap.gamma[(ap, j)])
            .sum();
        if total <= 0.0 {
            continue;
        }
        for user in (0..k).filter(|&j| snap.serves(ap, j)) {
            let g = snap.gamma[(ap, user)];
            let cb = 1.0 / (n * total);
            eta[(ap, user)] = match scheme {
                Scheme::Cb | Scheme::Cbdt => cb,
                Scheme::Ncb => n * g * cb,
                Scheme::Ecb => (n - 1.0) * g * n * g * cb,
            };
        }
    }
    PowerAllocation { eta, scheme }
}

/// `varsigma[k][j] = sum_m eta_mj beta_mk gamma_mj`.
pub fn varsigma(snap: &Snapshot, eta: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, k) = (snap.num_aps(), snap.num_users());
    DMatrix::from_fn(k, k, |user, j| {
        (0..m)
            .map(|ap| eta[(ap, j)] * snap.beta[(ap, user)] * snap.gamma[(ap, j)])
            .sum()
    })
}

/// Double-sum form of the NCB contamination term for the pair `(k, j)`.
pub fn upsilon(snap: &Snapshot, eta: &DMatrix<f64>, antennas: usize, k: usize, j: usize) -> f64 {
    let (b, g) = (&snap.beta, &snap.gamma);
    let a2 = alpha(antennas).powi(2);
    let m = snap.num_aps();
    let ratio = |ap: usize| b[(ap, k)] / b[(ap, j)];
    let diag: f64 = (0..m).map(|ap| eta[(ap, j)] * g[(ap, j)] * ratio(ap).powi(2)).sum();
    let mut off = 0.0;
    for p in 0..m {
        for q in (0..m).filter(|&q| q != p) {
            off += (eta[(p, j)] * eta[(q, j)] * g[(p, j)] * g[(q, j)]).sqrt() * ratio(p) * ratio(q);
        }
    }
    (antennas as f64 - 1.0) * diag + a2 * off
}

/// `(sum t)^2 - sum t^2` for non-negative `t`, carried in double-double
/// arithmetic because the difference cancels when one term dominates.
fn cross_terms(terms: impl Iterator<Item = f64>) -> (f64, f64) {
    let two_sum = |a: f64, b: f64| {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    };
    let (mut sum, mut sum_lo) = (0.0, 0.0);
    let (mut sq, mut sq_lo) = (0.0, 0.0);
    for t in terms {
        let (s, e) = two_sum(sum, t);
        sum = s;
        sum_lo += e;
        let p = t * t;
        let (s, e) = two_sum(sq, p);
        sq = s;
        sq_lo += e + t.mul_add(t, -p);
    }
    let hi = sum * sum;
    let lo = sum.mul_add(sum, -hi) + 2.0 * sum * sum_lo;
    let (d, e) = two_sum(hi, -sq);
    let cross = (d + (e + lo - sq_lo)).max(0.0);
    (cross, sq + sq_lo)
}

/// Single-sum rewrite of [`upsilon`].
pub fn upsilon_rewrite(snap: &Snapshot, eta: &DMatrix<f64>, antennas: usize, k: usize, j: usize) -> f64 {
    let (b, g) = (&snap.beta, &snap.gamma);
    let a = alpha(antennas);
    let n = antennas as f64;
    let (cross, diag) =
        cross_terms((0..snap.num_aps()).map(|ap| (eta[(ap, j)] * g[(ap, j)]).sqrt() * b[(ap, k)] / b[(ap, j)]));
    // (N - 1 - a^2) diag + a^2 coh^2, with coh^2 = diag + cross
    (n - 1.0) * diag + a * a * cross
}

/// Double-sum form of the ECB contamination term for the pair `(k, j)`.
pub fn theta(snap: &Snapshot, eta: &DMatrix<f64>, antennas: usize, k: usize, j: usize) -> f64 {
    let b = &snap.beta;
    let n = antennas as f64;
    let m = snap.num_aps();
    let ratio = |ap: usize| b[(ap, k)] / b[(ap, j)];
    let diag: f64 = (0..m).map(|ap| eta[(ap, j)] * ratio(ap).powi(2)).sum();
    let mut off = 0.0;
    for p in 0..m {
        for q in (0..m).filter(|&q| q != p) {
            off += (eta[(p, j)] * eta[(q, j)]).sqrt() * ratio(p) * ratio(q);
        }
    }
    (n - 2.0) / (n - 1.0) * diag + off
}

/// Single-sum rewrite of [`theta`].
pub fn theta_rewrite(snap: &Snapshot, eta: &DMatrix<f64>, antennas: usize, k: usize, j: usize) -> f64 {
    let b = &snap.beta;
    let (cross, diag) = cross_terms((0..snap.num_aps()).map(|ap| eta[(ap, j)].sqrt() * b[(ap, k)] / b[(ap, j)]));
    // coh^2 - diag / (N - 1)
    cross + diag * (antennas as f64 - 2.0) / (antennas as f64 - 1.0)
}

/// NCB non-coherent interference weight of AP `m` from user `j`'s signal at user `k`.
pub fn vartheta(snap: &Snapshot, antennas: usize, m: usize, k: usize, j: usize) -> f64 {
    let n = antennas as f64;
    let a2 = alpha(antennas).powi(2);
    let cp = if snap.copilot(k, j) { 1.0 } else { 0.0 };
    snap.beta[(m, k)] + (n - 1.0 - a2) * snap.gamma[(m, k)] * cp
}

/// ECB non-coherent interference weight, the analogue of [`vartheta`].
pub fn varrho(snap: &Snapshot, antennas: usize, m: usize, k: usize, j: usize) -> f64 {
    let n = antennas as f64;
    let (b, g) = (&snap.beta, &snap.gamma);
    let cp = if snap.copilot(k, j) { 1.0 } else { 0.0 };
    (b[(m, k)] / g[(m, j)] - (b[(m, k)] / b[(m, j)]).powi(2) * cp) / (n - 1.0)
}

/// Effective-channel estimation quality `kappa_k` with beamformed downlink pilots.
pub fn kappa(snap: &Snapshot, eta: &DMatrix<f64>, config: &SystemConfig) -> Result<Vec<f64>> {
    if snap.dl_pilot.is_none() {
        return Err(Error::NoDownlinkPilots);
    }
    let s = varsigma(snap, eta);
    Ok(kappa_from_varsigma(snap, &s, config))
}

fn kappa_from_varsigma(snap: &Snapshot, s: &DMatrix<f64>, config: &SystemConfig) -> Vec<f64> {
    let n = config.antennas as f64;
    let tr = config.tau_dp as f64 * config.rho_dp;
    let k = snap.num_users();
    (0..k)
        .map(|user| {
            let own = s[(user, user)];
            let load: f64 = (0..k).filter(|&j| snap.dl_copilot(user, j)).map(|j| s[(user, j)]).sum();
            tr * n * n * own * own / (1.0 + tr * n * load)
        })
        .collect()
}

/// `xi (1 - overhead / tau_c) log2(1 + sinr)`.
pub fn spectral_efficiency(sinr: f64, config: &SystemConfig, scheme: Scheme) -> f64 {
    config.prelog(scheme.uses_downlink_training()) * (1.0 + sinr).log2()
}

/// Per-user decomposition of the hardening-bound SINR.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport {
    pub scheme: Scheme,
    /// `|DS_k|^2`.
    pub coherent_gain: Vec<f64>,
    /// `E|BU_k|^2`.
    pub self_interference: Vec<f64>,
    /// `sum_{j != k} E|UI_kj|^2`.
    pub inter_user_interference: Vec<f64>,
    /// `E|UI_kj|^2` with a zero diagonal.
    pub ui_pairs: DMatrix<f64>,
    pub sinr: Vec<f64>,
    pub se: Vec<f64>,
    pub kappa: Option<Vec<f64>>,
    /// Pre-log factor applied to `log2(1 + sinr)`.
    pub overhead: f64,
}

impl SinrReport {
    pub fn num_users(&self) -> usize {
        self.sinr.len()
    }

    pub fn min_sinr(&self) -> f64 {
        self.sinr.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_se(&self) -> f64 {
        self.se.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates the closed-form SINR of `alloc.scheme`, rejecting allocations
/// that break the scheme's per-AP constraint.
pub fn evaluate(snap: &Snapshot, alloc: &PowerAllocation, config: &SystemConfig) -> Result<SinrReport> {
    evaluate_with(snap, alloc, config, ConstraintPolicy::Enforce)
}

pub fn evaluate_with(
    snap: &Snapshot,
    alloc: &PowerAllocation,
    config: &SystemConfig,
    policy: ConstraintPolicy,
) -> Result<SinrReport> {
    let antennas = config.antennas;
    check_allocation(snap, alloc, antennas, policy)?;
    let eta = &alloc.eta;
    let (m, k) = (snap.num_aps(), snap.num_users());
    let (b, g) = (&snap.beta, &snap.gamma);
    let n = antennas as f64;
    let rho = config.rho_d;

    let mut ds = vec![0.0; k];
    let mut bu = vec![0.0; k];
    let mut ui = DMatrix::zeros(k, k);
    let mut kap = None;

    match alloc.scheme {
        Scheme::Cb | Scheme::Cbdt => {
            let s = varsigma(snap, eta);
            for user in 0..k {
                let coh: f64 = (0..m).map(|ap| eta[(ap, user)].sqrt() * g[(ap, user)]).sum();
                ds[user] = rho * n * n * coh * coh;
                bu[user] = rho * n * s[(user, user)];
                for j in (0..k).filter(|&j| j != user) {
                    let mut v = rho * n * s[(user, j)];
                    if snap.copilot(user, j) {
                        let c: f64 = (0..m)
                            .map(|ap| eta[(ap, j)].sqrt() * g[(ap, j)] * b[(ap, user)] / b[(ap, j)])
                            .sum();
                        v += rho * n * n * c * c;
                    }
                    ui[(user, j)] = v;
                }
            }
            if alloc.scheme == Scheme::Cbdt {
                if snap.dl_pilot.is_none() {
                    return Err(Error::NoDownlinkPilots);
                }
                let kv = kappa_from_varsigma(snap, &s, config);
                for user in 0..k {
                    ds[user] += rho * kv[user];
                    // clamp rounding below zero; kappa <= N varsigma_kk analytically
                    bu[user] = (rho * (n * s[(user, user)] - kv[user])).max(0.0);
                }
                kap = Some(kv);
            }
        }
        Scheme::Ncb => {
            let a = alpha(antennas);
            let spread = n - 1.0 - a * a;
            for user in 0..k {
                let coh: f64 = (0..m).map(|ap| (eta[(ap, user)] * g[(ap, user)]).sqrt()).sum();
                ds[user] = rho * a * a * coh * coh;
                bu[user] = rho
                    * (0..m)
                        .map(|ap| eta[(ap, user)] * (b[(ap, user)] + spread * g[(ap, user)]))
                        .sum::<f64>();
                for j in (0..k).filter(|&j| j != user) {
                    let mut v = rho * (0..m).map(|ap| eta[(ap, j)] * b[(ap, user)]).sum::<f64>();
                    if snap.copilot(user, j) {
                        v += rho * upsilon_rewrite(snap, eta, antennas, user, j);
                    }
                    ui[(user, j)] = v;
                }
            }
        }
        Scheme::Ecb => {
            let inv = 1.0 / (n - 1.0);
            for user in 0..k {
                let coh: f64 = (0..m).map(|ap| eta[(ap, user)].sqrt()).sum();
                ds[user] = rho * coh * coh;
                bu[user] = rho
                    * inv
                    * (0..m)
                        .map(|ap| eta[(ap, user)] * (b[(ap, user)] / g[(ap, user)] - 1.0))
                        .sum::<f64>();
                for j in (0..k).filter(|&j| j != user) {
                    let mut v = rho * inv * (0..m).map(|ap| eta[(ap, j)] * b[(ap, user)] / g[(ap, j)]).sum::<f64>();
                    if snap.copilot(user, j) {
                        v += rho * theta_rewrite(snap, eta, antennas, user, j);
                    }
                    ui[(user, j)] = v;
                }
            }
        }
    }

    // perfect-CSI ECB has beta / gamma - 1 = 0 up to rounding
    for v in bu.iter_mut() {
        *v = v.max(0.0);
    }
    let ui_sum: Vec<f64> = (0..k).map(|user| ui.row(user).sum()).collect();
    let sinr: Vec<f64> = (0..k).map(|user| ds[user] / (bu[user] + ui_sum[user] + 1.0)).collect();
    let overhead = config.prelog(alloc.scheme.uses_downlink_training());
    let se = sinr.iter().map(|s| overhead * (1.0 + s).log2()).collect();
    Ok(SinrReport {
        scheme: alloc.scheme,
        coherent_gain: ds,
        self_interference: bu,
        inter_user_interference: ui_sum,
        ui_pairs: ui,
        sinr,
        se,
        kappa: kap,
        overhead,
    })
}

fn with_scheme(snap: &Snapshot, eta: &DMatrix<f64>, config: &SystemConfig, scheme: Scheme) -> Result<SinrReport> {
    let alloc = PowerAllocation {
        eta: eta.clone(),
        scheme,
    };
    evaluate(snap, &alloc, config)
}

pub fn sinr_cb(snap: &Snapshot, eta: &DMatrix<f64>, config: &SystemConfig) -> Result<SinrReport> {
    with_scheme(snap, eta, config, Scheme::Cb)
}

pub fn sinr_ncb(snap: &Snapshot, eta: &DMatrix<f64>, config: &SystemConfig) -> Result<SinrReport> {
    with_scheme(snap, eta, config, Scheme::Ncb)
}

pub fn sinr_ecb(snap: &Snapshot, eta: &DMatrix<f64>, config: &SystemConfig) -> Result<SinrReport> {
    with_scheme(snap, eta, config, Scheme::Ecb)
}

pub fn sinr_cbdt(snap: &Snapshot, eta: &DMatrix<f64>, config: &SystemConfig) -> Result<SinrReport> {
    with_scheme(snap, eta, config, Scheme::Cbdt)
}

/// Per-user `(BU/DS, UI/DS)` in dB. A zero numerator maps to `-inf`.
pub fn hardening_metrics(report: &SinrReport) -> Result<Vec<(f64, f64)>> {
    (0..report.num_users())
        .map(|user| {
            let ds = report.coherent_gain[user];
            if !(ds > 0.0) {
                return Err(Error::ZeroCoherentGain { user });
            }
            let db = |x: f64| 10.0 * (x / ds).log10();
            Ok((
                db(report.self_interference[user]),
                db(report.inter_user_interference[user]),
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_config(antennas: usize) -> SystemConfig {
        SystemConfig {
            num_aps: 1,
            antennas,
            num_users: 1,
            rho_d: 1.0,
            rho_dp: 1.0,
            ..SystemConfig::default()
        }
    }

    fn perfect(beta: DMatrix<f64>) -> Snapshot {
        let (m, k) = beta.shape();
        Snapshot::perfect_csi(
            beta,
            (0..k).collect(),
            Some((0..k).collect()),
            vec![(0..m).collect(); k],
        )
        .unwrap()
    }

    fn random_snapshot(seed: u64, m: usize, k: usize, tau: usize) -> Snapshot {
        use rand::Rng;
        let mut r = crate::rng::stream(seed, 99);
        let beta = DMatrix::from_fn(m, k, |_, _| 10f64.powf(r.random_range(-2.0..1.0)));
        let pilots = (0..k).map(|_| r.random_range(0..tau)).collect::<Vec<_>>();
        let dl =
            crate::scenario::assign_downlink_pilots(&pilots, k, crate::config::DownlinkPilotMode::RandomReuse, &mut r)
                .unwrap();
        let clusters = vec![(0..m).collect(); k];
        Snapshot::from_beta(beta, pilots, Some(dl), clusters, tau, r.random_range(0.5..5.0)).unwrap()
    }

    #[test]
    fn cb_unit_example() {
        let snap = perfect(DMatrix::from_element(1, 1, 1.0));
        let eta = DMatrix::from_element(1, 1, 0.5);
        let r = sinr_cb(&snap, &eta, &unit_config(2)).unwrap();
        assert!((r.coherent_gain[0] - 2.0).abs() < 1e-15);
        assert!((r.sinr[0] - 1.0).abs() < 1e-15);
        let (bu, _) = hardening_metrics(&r).unwrap()[0];
        assert!((bu - 10.0 * 0.5f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn ncb_unit_example() {
        let snap = perfect(DMatrix::from_element(1, 1, 1.0));
        let eta = DMatrix::from_element(1, 1, 1.0);
        let r = sinr_ncb(&snap, &eta, &unit_config(2)).unwrap();
        let a2 = alpha(2).powi(2);
        assert!((a2 - 1.767_145_867_644_259).abs() < 1e-12);
        let expect = a2 / ((2.0 - a2) + 1.0);
        assert!((r.sinr[0] - expect).abs() < 1e-14);
        assert!((r.sinr[0] - 1.433_378).abs() < 1e-6);
    }

    #[test]
    fn ecb_perfect_csi_has_no_self_interference() {
        let snap = perfect(DMatrix::from_element(2, 1, 0.7));
        let cfg = SystemConfig {
            num_aps: 2,
            ..unit_config(3)
        };
        // (1/(N-1)) eta / gamma <= 1 at eta = 1.4
        let eta = DMatrix::from_element(2, 1, 1.0);
        let r = sinr_ecb(&snap, &eta, &cfg).unwrap();
        assert_eq!(r.self_interference[0], 0.0);
        assert!((r.sinr[0] - 4.0).abs() < 1e-14);
        let (bu, _) = hardening_metrics(&r).unwrap()[0];
        assert_eq!(bu, f64::NEG_INFINITY);
    }

    #[test]
    fn ecb_rejects_single_antenna() {
        let snap = perfect(DMatrix::from_element(1, 1, 1.0));
        let eta = DMatrix::from_element(1, 1, 0.0);
        assert!(matches!(
            sinr_ecb(&snap, &eta, &unit_config(1)),
            Err(Error::EcbNeedsTwoAntennas)
        ));
    }

    #[test]
    fn constraint_violation_is_rejected_unless_warned() {
        let snap = perfect(DMatrix::from_element(1, 1, 1.0));
        let eta = DMatrix::from_element(1, 1, 0.6);
        let cfg = unit_config(2);
        assert!(matches!(sinr_cb(&snap, &eta, &cfg), Err(Error::PowerConstraint { .. })));
        let alloc = PowerAllocation {
            eta,
            scheme: Scheme::Cb,
        };
        assert!(evaluate_with(&snap, &alloc, &cfg, ConstraintPolicy::Warn).is_ok());
    }

    #[test]
    fn varsigma_matches_triple_loop() {
        let snap = random_snapshot(4, 3, 2, 2);
        let eta = DMatrix::from_row_slice(3, 2, &[0.1, 0.4, 0.2, 0.0, 0.9, 0.3]);
        let s = varsigma(&snap, &eta);
        for k in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for m in 0..3 {
                    acc += eta[(m, j)] * snap.beta[(m, k)] * snap.gamma[(m, j)];
                }
                assert!((s[(k, j)] - acc).abs() <= 1e-15 * acc.abs().max(1e-300));
            }
        }
        assert_eq!(varsigma(&snap, &DMatrix::zeros(3, 2)), DMatrix::zeros(2, 2));
    }

    #[test]
    fn maximal_ratio_is_tight() {
        for seed in 0..20 {
            let snap = random_snapshot(seed, 5, 4, 2);
            for scheme in Scheme::ALL {
                let alloc = maximal_ratio_power(&snap, scheme, 4, MrNormalization::Cluster);
                for load in constraint_loads(&snap, &alloc.eta, scheme, 4) {
                    assert!((load - 1.0).abs() < 1e-12, "{scheme} {load}");
                }
            }
        }
        let snap = random_snapshot(1, 3, 1, 1);
        let ncb = maximal_ratio_power(&snap, Scheme::Ncb, 4, MrNormalization::Cluster);
        assert!(ncb.eta.iter().all(|&e| e == 1.0));
    }

    #[test]
    fn rewrites_agree() {
        for seed in 0..50 {
            let snap = random_snapshot(seed, 4, 3, 1);
            let eta = maximal_ratio_power(&snap, Scheme::Ncb, 4, MrNormalization::Cluster).eta;
            for k in 0..3 {
                for j in 0..3 {
                    let (u, ur) = (upsilon(&snap, &eta, 4, k, j), upsilon_rewrite(&snap, &eta, 4, k, j));
                    assert!((u - ur).abs() <= 1e-12 * u.abs());
                    let (t, tr) = (theta(&snap, &eta, 4, k, j), theta_rewrite(&snap, &eta, 4, k, j));
                    assert!((t - tr).abs() <= 1e-12 * t.abs());
                }
            }
        }
    }

    #[test]
    fn interference_weights_are_positive() {
        for seed in 0..30 {
            let snap = random_snapshot(seed, 4, 3, 2);
            for n in [2, 3, 8] {
                for m in 0..4 {
                    for k in 0..3 {
                        for j in 0..3 {
                            assert!(vartheta(&snap, n, m, k, j) > 0.0);
                            assert!(varrho(&snap, n, m, k, j) > 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn spectral_efficiency_prelog() {
        let cfg = SystemConfig::default();
        assert_eq!(spectral_efficiency(0.0, &cfg, Scheme::Cb), 0.0);
        assert!((spectral_efficiency(3.0, &cfg, Scheme::Ncb) - 0.9).abs() < 1e-15);
        assert!((spectral_efficiency(3.0, &cfg, Scheme::Cbdt) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn kappa_limits() {
        let snap = random_snapshot(2, 3, 3, 1);
        let eta = maximal_ratio_power(&snap, Scheme::Cb, 4, MrNormalization::Cluster).eta;
        let mut cfg = SystemConfig {
            antennas: 4,
            tau_dp: 3,
            rho_dp: 0.0,
            ..SystemConfig::default()
        };
        assert!(kappa(&snap, &eta, &cfg).unwrap().iter().all(|&x| x == 0.0));
        cfg.rho_dp = 1e12;
        let s = varsigma(&snap, &eta);
        let kv = kappa(&snap, &eta, &cfg).unwrap();
        for k in 0..3 {
            assert!(kv[k] <= 4.0 * s[(k, k)]);
            // all downlink pilots are distinct with one uplink pilot
            assert!((kv[k] / (4.0 * s[(k, k)]) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cbdt_without_training_power_is_cb() {
        let snap = random_snapshot(7, 3, 3, 2);
        let eta = maximal_ratio_power(&snap, Scheme::Cb, 4, MrNormalization::Cluster).eta;
        let cfg = SystemConfig {
            antennas: 4,
            rho_dp: 0.0,
            ..SystemConfig::default()
        };
        let cb = sinr_cb(&snap, &eta, &cfg).unwrap();
        let dt = sinr_cbdt(&snap, &eta, &cfg).unwrap();
        assert_eq!(cb.sinr, dt.sinr);
    }

    proptest! {
        #[test]
        fn scaling_is_linear(seed in 0u64..1000, t in 0.05f64..1.0, n in 2usize..9) {
            let snap = random_snapshot(seed, 3, 3, 2);
            let cfg = SystemConfig { antennas: n, rho_d: 2.0, ..SystemConfig::default() };
            for scheme in [Scheme::Cb, Scheme::Ncb, Scheme::Ecb] {
                let full = maximal_ratio_power(&snap, scheme, n, MrNormalization::Cluster);
                let scaled = PowerAllocation { eta: &full.eta * t, scheme };
                let a = evaluate(&snap, &full, &cfg).unwrap();
                let b = evaluate(&snap, &scaled, &cfg).unwrap();
                for k in 0..3 {
                    prop_assert!((b.coherent_gain[k] - t * a.coherent_gain[k]).abs() <= 1e-12 * a.coherent_gain[k]);
                    prop_assert!((b.self_interference[k] - t * a.self_interference[k]).abs() <= 1e-12 * a.self_interference[k].max(1e-300));
                    prop_assert!((b.inter_user_interference[k] - t * a.inter_user_interference[k]).abs() <= 1e-12 * a.inter_user_interference[k].max(1e-300));
                    if t < 1.0 {
                        prop_assert!(b.sinr[k] < a.sinr[k]);
                    }
                }
            }
        }

        #[test]
        fn cbdt_dominates_cb(seed in 0u64..1000, rho_dp in 0.0f64..10.0) {
            let snap = random_snapshot(seed, 4, 3, 2);
            let cfg = SystemConfig { antennas: 4, tau_dp: 3, rho_d: 3.0, rho_dp, ..SystemConfig::default() };
            let eta = maximal_ratio_power(&snap, Scheme::Cb, 4, MrNormalization::Cluster).eta;
            let cb = sinr_cb(&snap, &eta, &cfg).unwrap();
            let dt = sinr_cbdt(&snap, &eta, &cfg).unwrap();
            for k in 0..3 {
                prop_assert!(dt.sinr[k] >= cb.sinr[k] * (1.0 - 1e-14));
            }
        }

        #[test]
        fn report_decomposition_is_exact(seed in 0u64..1000) {
            let snap = random_snapshot(seed, 3, 3, 2);
            let cfg = SystemConfig { antennas: 4, tau_dp: 3, ..SystemConfig::default() };
            for scheme in Scheme::ALL {
                let alloc = maximal_ratio_power(&snap, scheme, 4, MrNormalization::Cluster);
                let r = evaluate(&snap, &alloc, &cfg).unwrap();
                for k in 0..3 {
                    let expect = r.coherent_gain[k] / (r.self_interference[k] + r.inter_user_interference[k] + 1.0);
                    prop_assert_eq!(r.sinr[k], expect);
                    prop_assert!(r.self_interference[k] >= 0.0 && r.inter_user_interference[k] >= 0.0);
                }
            }
        }
    }
}
