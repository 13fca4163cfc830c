//! Single-AP moments of normalized and inverted channel estimates, checked
//! against their closed forms.

use num_complex::Complex64;
use rayon::prelude::*;

use super::stats::Welford;
use super::{batch_sizes, check_trials, compare, Comparison, Quantity, DEFAULT_Z_THRESHOLD};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng;
use crate::scenario::{CsiModel, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub ap: usize,
    pub user: usize,
    /// The second user of the cross-term identities.
    pub other: usize,
    pub antennas: usize,
    pub comparison: Comparison,
}

const NAMES: [&str; 6] = [
    "E[g^T conj(g_hat)/|g_hat|^2]",
    "E[|g^T conj(g_hat)|^2/|g_hat|^4]",
    "E[|g_k^T conj(g_hat_j)|^2/|g_hat_j|^4]",
    "Re E[g_k^T conj(g_hat_j)/|g_hat_j|^2]",
    "Im E[g_k^T conj(g_hat_j)/|g_hat_j|^2]",
    "(N-1) gamma E[1/|g_hat|^2]",
];

/// Closed-form values of the six checked moments.
fn expected(snap: &Snapshot, n: f64, ap: usize, user: usize, other: usize) -> [f64; 6] {
    let (bk, gk) = (snap.beta[(ap, user)], snap.gamma[(ap, user)]);
    let (bj, gj) = (snap.beta[(ap, other)], snap.gamma[(ap, other)]);
    let shared = snap.copilot(user, other);
    let ratio = bk / bj;
    let cross = if shared {
        ratio * ratio * (n - 2.0) / (n - 1.0) + bk / ((n - 1.0) * gj)
    } else {
        bk / ((n - 1.0) * gj)
    };
    [
        1.0,
        1.0 + (bk / gk - 1.0) / (n - 1.0),
        cross,
        if shared { ratio } else { 0.0 },
        0.0,
        1.0,
    ]
}

/// Draws the channels of `user` and `other` at `ap` (plus whoever shares
/// their pilots) together with the estimates of the two.
struct ApSampler {
    n: usize,
    users: Vec<usize>,
    pilots: Vec<usize>,
    amp: f64,
    perfect: bool,
}

impl ApSampler {
    fn new(snap: &Snapshot, n: usize, user: usize, other: usize) -> Self {
        let pilots = {
            let mut p = vec![snap.ul_pilot[user], snap.ul_pilot[other]];
            p.dedup();
            p
        };
        let users = (0..snap.num_users())
            .filter(|&i| pilots.contains(&snap.ul_pilot[i]))
            .collect();
        ApSampler {
            n,
            users,
            pilots,
            amp: snap.pilot_gain,
            perfect: snap.csi == CsiModel::Perfect,
        }
    }

    /// Fills `g` and `g_hat` for the two monitored users.
    fn sample<R: rand::Rng>(
        &self,
        snap: &Snapshot,
        ap: usize,
        pair: [usize; 2],
        rng: &mut R,
        g: &mut [Vec<Complex64>; 2],
        g_hat: &mut [Vec<Complex64>; 2],
    ) {
        let n = self.n;
        let mut y = vec![Complex64::new(0.0, 0.0); self.pilots.len() * n];
        if !self.perfect {
            for v in y.iter_mut() {
                *v = rng::complex_normal(rng, 1.0);
            }
        }
        for &i in &self.users {
            let p = self.pilots.iter().position(|&p| p == snap.ul_pilot[i]).unwrap_or(0);
            let slot = pair.iter().position(|&u| u == i);
            for a in 0..n {
                let x = rng::complex_normal(rng, snap.beta[(ap, i)]);
                y[p * n + a] += self.amp * x;
                if let Some(s) = slot {
                    g[s][a] = x;
                }
            }
        }
        for s in 0..2 {
            let i = pair[s];
            if self.perfect {
                g_hat[s].copy_from_slice(&g[s]);
            } else {
                let p = self.pilots.iter().position(|&p| p == snap.ul_pilot[i]).unwrap_or(0);
                let c = snap.c[(ap, i)];
                for a in 0..n {
                    g_hat[s][a] = c * y[p * n + a];
                }
            }
        }
    }
}

/// Checks the normalized-precoder moments at one AP for `user`, with
/// `other` (which must differ from `user`) supplying the cross terms.
#[allow(clippy::too_many_arguments)]
pub fn verify_identities_at(
    snap: &Snapshot,
    antennas: usize,
    ap: usize,
    user: usize,
    other: usize,
    trials: usize,
    seed: u64,
    z_threshold: f64,
) -> Result<Vec<IdentityCheck>> {
    check_trials(trials)?;
    if antennas < 2 {
        return Err(Error::EcbNeedsTwoAntennas);
    }
    let (m, k) = snap.beta.shape();
    if ap >= m || user >= k || other >= k || user == other {
        return Err(Error::Shape(format!(
            "identity check at ap {ap}, users ({user}, {other}) on a {m} x {k} snapshot"
        )));
    }
    let n = antennas;
    let sampler = ApSampler::new(snap, n, user, other);
    let gamma_k = snap.gamma[(ap, user)];

    let batches: Vec<[Welford; 6]> = batch_sizes(trials)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            let mut r = rng::stream(seed, rng::ORACLE_BASE + b as u64);
            let mut acc = [Welford::default(); 6];
            let zero = vec![Complex64::new(0.0, 0.0); n];
            let mut g = [zero.clone(), zero.clone()];
            let mut g_hat = [zero.clone(), zero];
            for _ in 0..size {
                sampler.sample(snap, ap, [user, other], &mut r, &mut g, &mut g_hat);
                let nk: f64 = g_hat[0].iter().map(|z| z.norm_sqr()).sum();
                let nj: f64 = g_hat[1].iter().map(|z| z.norm_sqr()).sum();
                let own: Complex64 = g[0].iter().zip(&g_hat[0]).map(|(x, h)| x * h.conj()).sum();
                let cross: Complex64 = g[0].iter().zip(&g_hat[1]).map(|(x, h)| x * h.conj()).sum();
                acc[0].push(own.re / nk);
                acc[1].push(own.norm_sqr() / (nk * nk));
                acc[2].push(cross.norm_sqr() / (nj * nj));
                acc[3].push(cross.re / nj);
                acc[4].push(cross.im / nj);
                acc[5].push((n as f64 - 1.0) * gamma_k / nk);
            }
            acc
        })
        .collect();

    let mut acc = [Welford::default(); 6];
    for b in &batches {
        for (a, w) in acc.iter_mut().zip(b) {
            a.merge(w);
        }
    }
    let closed = expected(snap, n as f64, ap, user, other);
    Ok((0..6)
        .map(|i| IdentityCheck {
            ap,
            user,
            other,
            antennas,
            comparison: compare(
                closed[i],
                &acc[i].estimate(Quantity::Identity(NAMES[i]), 1.0),
                z_threshold,
            ),
        })
        .collect())
}

/// Identity checks on a snapshot: for every user, at its strongest AP,
/// against a co-pilot partner when one exists and the next user otherwise.
pub fn verify_identities(snap: &Snapshot, config: &SystemConfig, trials: usize, seed: u64) -> Result<IdentityReport> {
    let k = snap.num_users();
    if k < 2 {
        return Err(Error::Shape("identity checks need at least two users".into()));
    }
    let mut checks = Vec::new();
    for user in 0..k {
        let ap = (0..snap.num_aps())
            .max_by(|&a, &b| snap.beta[(a, user)].total_cmp(&snap.beta[(b, user)]))
            .unwrap_or(0);
        let other = (0..k)
            .find(|&j| j != user && snap.copilot(user, j))
            .unwrap_or((user + 1) % k);
        let sub = rng::child_seed(seed, user as u64);
        checks.extend(verify_identities_at(
            snap,
            config.antennas,
            ap,
            user,
            other,
            trials,
            sub,
            DEFAULT_Z_THRESHOLD,
        )?);
    }
    Ok(IdentityReport { checks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.comparison.pass)
    }

    pub fn max_z(&self) -> f64 {
        self.checks.iter().map(|c| c.comparison.z).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn pair(shared: bool) -> Snapshot {
        let beta = DMatrix::from_row_slice(1, 2, &[2e-6, 5e-7]);
        let ul = if shared { vec![0, 0] } else { vec![0, 1] };
        Snapshot::from_beta(beta, ul, None, vec![vec![0]; 2], 2, 1e6).unwrap()
    }

    #[test]
    fn identities_hold_for_both_pilot_layouts() {
        for shared in [false, true] {
            let snap = pair(shared);
            for n in [2, 4, 8] {
                for (k, j) in [(0, 1), (1, 0)] {
                    let checks = verify_identities_at(&snap, n, 0, k, j, 40_000, 3, 4.5).unwrap();
                    for c in &checks {
                        assert!(c.comparison.pass, "N={n} shared={shared} ({k},{j}) {}", c.comparison);
                    }
                }
            }
        }
    }

    #[test]
    fn perfect_csi_second_moment_is_one() {
        let beta = DMatrix::from_row_slice(1, 2, &[1e-6, 3e-6]);
        let snap = Snapshot::perfect_csi(beta, vec![0, 1], None, vec![vec![0]; 2]).unwrap();
        let checks = verify_identities_at(&snap, 4, 0, 0, 1, 2000, 1, 4.0).unwrap();
        assert_eq!(checks[0].comparison.closed, 1.0);
        assert!(checks[1].comparison.std_error < 1e-12);
        assert!((checks[1].comparison.estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snapshot_report_covers_every_user() {
        let cfg = SystemConfig {
            num_aps: 6,
            num_users: 4,
            antennas: 4,
            area_side: 200.0,
            tau_up: 2,
            tau_dp: 4,
            cluster_min: 2,
            ..SystemConfig::default()
        };
        let snap = crate::scenario::build_snapshot(&cfg, 5).unwrap();
        let report = verify_identities(&snap, &cfg, 5000, 8).unwrap();
        assert_eq!(report.checks.len(), 4 * 6);
        assert!(report.passed(), "max z {}", report.max_z());
    }

    #[test]
    fn rejects_degenerate_requests() {
        let snap = pair(true);
        assert!(verify_identities_at(&snap, 1, 0, 0, 1, 2000, 0, 4.0).is_err());
        assert!(verify_identities_at(&snap, 4, 0, 0, 0, 2000, 0, 4.0).is_err());
        assert!(verify_identities_at(&snap, 4, 0, 0, 1, 10, 0, 4.0).is_err());
    }
}
