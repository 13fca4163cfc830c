//! Network snapshots: geometry on a wrapped square, large-scale fading with
//! correlated log-normal shadowing, AP clusters and pilot assignments.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{DownlinkPilotMode, SystemConfig, UplinkPilotMode};
use crate::error::{Error, Result};
use crate::estimation;
use crate::rng;

/// Pivots below this are treated as zero when factoring shadowing covariances.
pub const COVARIANCE_JITTER: f64 = 1e-10;

/// Positions and wrapped distances of one deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub area_side: f64,
    pub ap_height: f64,
    pub user_height: f64,
    pub ap_pos: Vec<[f64; 2]>,
    pub user_pos: Vec<[f64; 2]>,
    /// M x K, 3-D AP-user distances.
    pub d_ap_user: DMatrix<f64>,
    /// M x M planar distances.
    pub d_ap_ap: DMatrix<f64>,
    /// K x K planar distances.
    pub d_user_user: DMatrix<f64>,
}

/// Planar distance on the torus `[0, side)^2`.
pub fn wrapped_distance(a: [f64; 2], b: [f64; 2], side: f64) -> f64 {
    let axis = |u: f64, v: f64| {
        let d = (u - v).abs().rem_euclid(side);
        d.min(side - d)
    };
    axis(a[0], b[0]).hypot(axis(a[1], b[1]))
}

impl Geometry {
    pub fn from_positions(
        area_side: f64,
        ap_height: f64,
        user_height: f64,
        ap_pos: Vec<[f64; 2]>,
        user_pos: Vec<[f64; 2]>,
    ) -> Self {
        let (m, k) = (ap_pos.len(), user_pos.len());
        let dh = ap_height - user_height;
        let d_ap_user = DMatrix::from_fn(m, k, |i, j| {
            wrapped_distance(ap_pos[i], user_pos[j], area_side).hypot(dh)
        });
        let d_ap_ap = DMatrix::from_fn(m, m, |i, j| wrapped_distance(ap_pos[i], ap_pos[j], area_side));
        let d_user_user = DMatrix::from_fn(k, k, |i, j| wrapped_distance(user_pos[i], user_pos[j], area_side));
        Geometry {
            area_side,
            ap_height,
            user_height,
            ap_pos,
            user_pos,
            d_ap_user,
            d_ap_ap,
            d_user_user,
        }
    }
}

/// APs and users uniformly over the `D x D` square.
pub fn generate_geometry(config: &SystemConfig, seed: u64) -> Geometry {
    let mut rng = rng::stream(seed, rng::GEOMETRY);
    let side = config.area_side;
    let mut draw = |count: usize| -> Vec<[f64; 2]> {
        (0..count)
            .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
            .collect()
    };
    let ap_pos = draw(config.num_aps);
    let user_pos = draw(config.num_users);
    Geometry::from_positions(side, config.ap_height, config.user_height, ap_pos, user_pos)
}

/// 3GPP urban-microcell pathloss in dB at 2 GHz.
pub fn pathloss_db(distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(-30.5 - 36.7 * distance.log10())
}

pub fn compute_pathloss(geom: &Geometry) -> Result<DMatrix<f64>> {
    let d = &geom.d_ap_user;
    let mut out = DMatrix::zeros(d.nrows(), d.ncols());
    for (o, &dist) in out.iter_mut().zip(d.iter()) {
        *o = pathloss_db(dist)?;
    }
    Ok(out)
}

/// Lower-triangular `L` with `L L^T = cov` for a positive semidefinite
/// `cov`. Pivots in `[-COVARIANCE_JITTER, COVARIANCE_JITTER]` are taken
/// as exact zeros, so perfectly correlated (co-located) nodes get identical
/// rows of `L`.
pub fn psd_cholesky(cov: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, (usize, f64)> {
    let n = cov.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = cov[(j, j)];
        for p in 0..j {
            pivot -= l[(j, p)] * l[(j, p)];
        }
        if pivot < -COVARIANCE_JITTER {
            return Err((j, pivot));
        }
        if pivot <= COVARIANCE_JITTER {
            continue;
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut s = cov[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / diag;
        }
    }
    Ok(l)
}

fn correlated_gaussian<R: Rng>(
    dist: &DMatrix<f64>,
    decorr: f64,
    which: &'static str,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let cov = dist.map(|d| 2f64.powf(-d / decorr));
    let l = psd_cholesky(&cov).map_err(|(index, pivot)| Error::CovarianceNotPsd { which, index, pivot })?;
    let z = DVector::from_fn(dist.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(l * z)
}

/// Shadowing field `q[m][k] = sqrt(eps) a_m + sqrt(1 - eps) b_k` with
/// `Cov(a_m, a_n) = 2^(-d_mn / decorr)` and likewise for `b`.
pub fn sample_shadowing(geom: &Geometry, config: &SystemConfig, seed: u64) -> Result<DMatrix<f64>> {
    let eps = config.epsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::config("epsilon", "must lie in (0, 1)"));
    }
    let a = correlated_gaussian(
        &geom.d_ap_ap,
        config.decorr_dist,
        "AP",
        &mut rng::stream(seed, rng::AP_SHADOWING),
    )?;
    let b = correlated_gaussian(
        &geom.d_user_user,
        config.decorr_dist,
        "user",
        &mut rng::stream(seed, rng::USER_SHADOWING),
    )?;
    let (se, sr) = (eps.sqrt(), (1.0 - eps).sqrt());
    Ok(DMatrix::from_fn(a.len(), b.len(), |m, k| se * a[m] + sr * b[k]))
}

/// Linear large-scale fading `10^(PL/10) * 10^(sigma * q / 10)`.
pub fn compute_beta(pl_db: &DMatrix<f64>, q: &DMatrix<f64>, sigma_sh: f64) -> Result<DMatrix<f64>> {
    if pl_db.shape() != q.shape() {
        return Err(Error::Shape(format!(
            "pathloss {:?} vs shadowing {:?}",
            pl_db.shape(),
            q.shape()
        )));
    }
    Ok(pl_db.zip_map(q, |pl, q| 10f64.powf((pl + sigma_sh * q) / 10.0)))
}

/// Largest-large-scale-fading AP selection: per user, the shortest prefix of
/// APs sorted by decreasing `beta` that captures `threshold` of the total,
/// padded to `min_size`. Returned sets are sorted by AP index.
pub fn select_ap_clusters(beta: &DMatrix<f64>, threshold: f64, min_size: usize) -> Vec<Vec<usize>> {
    let m = beta.nrows();
    (0..beta.ncols())
        .map(|k| {
            let col = beta.column(k);
            let total: f64 = col.iter().sum();
            let mut order: Vec<usize> = (0..m).collect();
            // stable sort keeps lower AP index first on ties
            order.sort_by(|&a, &b| col[b].total_cmp(&col[a]));
            let mut acc = 0.0;
            let mut size = m;
            for (i, &ap) in order.iter().enumerate() {
                acc += col[ap];
                if acc >= threshold * total * (1.0 - 1e-12) {
                    size = i + 1;
                    break;
                }
            }
            let size = size.max(min_size.min(m));
            let mut cluster = order[..size].to_vec();
            cluster.sort_unstable();
            cluster
        })
        .collect()
}

pub fn assign_uplink_pilots<R: Rng>(
    users: usize,
    tau_up: usize,
    mode: UplinkPilotMode,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if tau_up == 0 {
        return Err(Error::config("tau_up", "must be at least 1"));
    }
    match mode {
        UplinkPilotMode::Random => Ok((0..users).map(|_| rng.random_range(0..tau_up)).collect()),
        UplinkPilotMode::Orthogonal => {
            if tau_up < users {
                return Err(Error::TooFewOrthogonalPilots { tau_up, users });
            }
            let mut pool: Vec<usize> = (0..tau_up).collect();
            pool.shuffle(rng);
            pool.truncate(users);
            Ok(pool)
        }
    }
}

/// Downlink pilots such that users sharing an uplink pilot never share a
/// downlink pilot.
pub fn assign_downlink_pilots<R: Rng>(
    ul_pilot: &[usize],
    tau_dp: usize,
    mode: DownlinkPilotMode,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let k = ul_pilot.len();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (user, &p) in ul_pilot.iter().enumerate() {
        groups.entry(p).or_default().push(user);
    }
    for (&pilot, members) in &groups {
        if members.len() > tau_dp {
            return Err(Error::DownlinkPilotsInfeasible {
                pilot,
                size: members.len(),
                tau_dp,
            });
        }
    }
    let mut out = vec![0; k];
    match mode {
        DownlinkPilotMode::Distinct => {
            if tau_dp < k {
                return Err(Error::config(
                    "dl_pilot_mode",
                    "distinct downlink pilots need tau_dp >= K",
                ));
            }
            let mut pool: Vec<usize> = (0..tau_dp).collect();
            pool.shuffle(rng);
            out.copy_from_slice(&pool[..k]);
        }
        DownlinkPilotMode::RandomReuse => {
            let mut pool: Vec<usize> = (0..tau_dp).collect();
            for members in groups.values() {
                let (picked, _) = pool.partial_shuffle(rng, members.len());
                for (&user, &p) in members.iter().zip(picked.iter()) {
                    out[user] = p;
                }
            }
        }
    }
    Ok(out)
}

/// How the simulated APs learn their channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiModel {
    /// Uplink pilots plus MMSE estimation.
    Mmse,
    /// `g_hat = g`, `gamma = beta` (needs orthogonal pilots).
    Perfect,
}

/// One network realization: large-scale statistics, pilots and clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub beta: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub ul_pilot: Vec<usize>,
    pub dl_pilot: Option<Vec<usize>>,
    pub clusters: Vec<Vec<usize>>,
    pub csi: CsiModel,
    /// `sqrt(tau_up * rho_u)`, the uplink pilot amplitude.
    pub pilot_gain: f64,
    served: DMatrix<bool>,
}

fn membership(m: usize, clusters: &[Vec<usize>]) -> DMatrix<bool> {
    let mut served = DMatrix::from_element(m, clusters.len(), false);
    for (k, cluster) in clusters.iter().enumerate() {
        for &ap in cluster {
            served[(ap, k)] = true;
        }
    }
    served
}

impl Snapshot {
    /// Builds a snapshot from explicit large-scale fading, computing `c`
    /// and `gamma` with uplink MMSE estimation.
    pub fn from_beta(
        beta: DMatrix<f64>,
        ul_pilot: Vec<usize>,
        dl_pilot: Option<Vec<usize>>,
        clusters: Vec<Vec<usize>>,
        tau_up: usize,
        rho_u: f64,
    ) -> Result<Self> {
        let c = estimation::compute_c(&beta, &ul_pilot, tau_up, rho_u);
        let gamma = estimation::compute_gamma(&c, &beta, tau_up, rho_u);
        let snap = Snapshot {
            served: membership(beta.nrows(), &clusters),
            beta,
            c,
            gamma,
            ul_pilot,
            dl_pilot,
            clusters,
            csi: CsiModel::Mmse,
            pilot_gain: (tau_up as f64 * rho_u).sqrt(),
        };
        snap.check_invariants()?;
        Ok(snap)
    }

    /// Snapshot whose APs know the channels exactly (`gamma = beta`).
    pub fn perfect_csi(
        beta: DMatrix<f64>,
        ul_pilot: Vec<usize>,
        dl_pilot: Option<Vec<usize>>,
        clusters: Vec<Vec<usize>>,
    ) -> Result<Self> {
        for k in 0..ul_pilot.len() {
            for j in (k + 1)..ul_pilot.len() {
                if ul_pilot[k] == ul_pilot[j] {
                    return Err(Error::PerfectCsiWithSharedPilots { first: k, second: j });
                }
            }
        }
        let snap = Snapshot {
            served: membership(beta.nrows(), &clusters),
            c: DMatrix::zeros(beta.nrows(), beta.ncols()),
            gamma: beta.clone(),
            beta,
            ul_pilot,
            dl_pilot,
            clusters,
            csi: CsiModel::Perfect,
            pilot_gain: 0.0,
        };
        snap.check_invariants()?;
        Ok(snap)
    }

    /// Same statistics, every AP serving every user.
    pub fn with_full_clusters(mut self) -> Self {
        let m = self.num_aps();
        self.clusters = vec![(0..m).collect(); self.num_users()];
        self.served = membership(m, &self.clusters);
        self
    }

    pub fn num_aps(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.beta.ncols()
    }

    /// `|phi_k^H phi_j|^2` as a boolean.
    #[inline]
    pub fn copilot(&self, k: usize, j: usize) -> bool {
        self.ul_pilot[k] == self.ul_pilot[j]
    }

    /// `|psi_k^H psi_j|^2` as a boolean; false when CB-DT is disabled.
    #[inline]
    pub fn dl_copilot(&self, k: usize, j: usize) -> bool {
        self.dl_pilot.as_ref().is_some_and(|p| p[k] == p[j])
    }

    #[inline]
    pub fn serves(&self, ap: usize, user: usize) -> bool {
        self.served[(ap, user)]
    }

    pub fn check_invariants(&self) -> Result<()> {
        let (m, k) = self.beta.shape();
        let shape_err = |what: &str| Err(Error::Shape(what.to_string()));
        if self.gamma.shape() != (m, k) || self.c.shape() != (m, k) {
            return shape_err("gamma/c must match beta");
        }
        if self.ul_pilot.len() != k || self.clusters.len() != k {
            return shape_err("pilots and clusters need one entry per user");
        }
        if let Some(dl) = &self.dl_pilot {
            if dl.len() != k {
                return shape_err("downlink pilots need one entry per user");
            }
            for a in 0..k {
                for b in (a + 1)..k {
                    if self.copilot(a, b) && dl[a] == dl[b] {
                        return Err(Error::DownlinkPilotsInfeasible {
                            pilot: self.ul_pilot[a],
                            size: 2,
                            tau_dp: 1,
                        });
                    }
                }
            }
        }
        for (idx, (&b, &g)) in self.beta.iter().zip(self.gamma.iter()).enumerate() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Shape(format!("beta entry {idx} is not positive: {b}")));
            }
            if !(g > 0.0 && g <= b * (1.0 + 1e-12)) {
                return Err(Error::Shape(format!(
                    "gamma entry {idx} = {g} must lie in (0, beta = {b}]"
                )));
            }
        }
        for (user, cluster) in self.clusters.iter().enumerate() {
            if cluster.is_empty() || cluster.iter().any(|&ap| ap >= m) {
                return Err(Error::Shape(format!("cluster of user {user} is empty or out of range")));
            }
        }
        Ok(())
    }
}

/// Full snapshot pipeline for `(config, seed)`.
pub fn build_snapshot(config: &SystemConfig, seed: u64) -> Result<Snapshot> {
    config.validate()?;
    let geom = generate_geometry(config, seed);
    let pl = compute_pathloss(&geom)?;
    let q = sample_shadowing(&geom, config, seed)?;
    let beta = compute_beta(&pl, &q, config.sigma_sh)?;
    let clusters = select_ap_clusters(&beta, config.cluster_threshold, config.cluster_min);
    let ul_pilot = assign_uplink_pilots(
        config.num_users,
        config.tau_up,
        config.ul_pilot_mode,
        &mut rng::stream(seed, rng::UPLINK_PILOTS),
    )?;
    let dl_pilot = if config.tau_dp > 0 {
        Some(assign_downlink_pilots(
            &ul_pilot,
            config.tau_dp,
            config.dl_pilot_mode,
            &mut rng::stream(seed, rng::DOWNLINK_PILOTS),
        )?)
    } else {
        None
    };
    Snapshot::from_beta(beta, ul_pilot, dl_pilot, clusters, config.tau_up, config.rho_u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SystemConfig {
        SystemConfig {
            num_aps: 20,
            antennas: 4,
            num_users: 6,
            tau_up: 3,
            tau_dp: 6,
            cluster_min: 4,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn colocated_distance_is_height_difference() {
        let g = Geometry::from_positions(500.0, 10.0, 1.5, vec![[0.0, 0.0]], vec![[0.0, 0.0]]);
        assert!((g.d_ap_user[(0, 0)] - 8.5).abs() < 1e-12);
    }

    #[test]
    fn wraparound_takes_short_way() {
        let g = Geometry::from_positions(500.0, 0.0, 0.0, vec![[1.0, 0.0]], vec![[499.0, 0.0]]);
        assert!((g.d_ap_user[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_is_deterministic() {
        let cfg = small_config();
        assert_eq!(generate_geometry(&cfg, 11), generate_geometry(&cfg, 11));
        assert_ne!(generate_geometry(&cfg, 11), generate_geometry(&cfg, 12));
    }

    #[test]
    fn pathloss_values() {
        assert!((pathloss_db(1.0).unwrap() + 30.5).abs() < 1e-12);
        assert!((pathloss_db(10.0).unwrap() + 67.2).abs() < 1e-12);
        assert!((pathloss_db(100.0).unwrap() + 103.9).abs() < 1e-12);
        assert!(pathloss_db(0.0).is_err());
        assert!(pathloss_db(-3.0).is_err());
    }

    #[test]
    fn beta_combines_pathloss_and_shadowing() {
        let pl = DMatrix::from_element(1, 1, -30.5);
        let q = DMatrix::from_element(1, 1, 1.0);
        let b = compute_beta(&pl, &q, 4.0).unwrap();
        assert!((b[(0, 0)] - 10f64.powf(-2.65)).abs() < 1e-15);
        assert!((b[(0, 0)] - 2.239e-3).abs() < 1e-6);
        let b0 = compute_beta(&pl, &q, 0.0).unwrap();
        assert!((b0[(0, 0)] - 10f64.powf(-3.05)).abs() < 1e-18);
    }

    #[test]
    fn colocated_aps_share_shadowing() {
        let cfg = SystemConfig {
            num_aps: 2,
            num_users: 1,
            ..small_config()
        };
        let g = Geometry::from_positions(500.0, 10.0, 1.5, vec![[100.0, 100.0], [100.0, 100.0]], vec![[3.0, 4.0]]);
        for seed in 0..20 {
            let q = sample_shadowing(&g, &cfg, seed).unwrap();
            assert_eq!(q[(0, 0)], q[(1, 0)]);
        }
    }

    #[test]
    fn shadowing_statistics() {
        let geom = Geometry::from_positions(500.0, 10.0, 1.5, vec![[0.0, 0.0], [9.0, 0.0]], vec![[100.0, 100.0]]);
        let cfg = SystemConfig::default();
        let trials = 20_000;
        let (mut s0, mut s1, mut s00, mut s11, mut s01, mut lin) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for seed in 0..trials {
            let q = sample_shadowing(&geom, &cfg, seed).unwrap();
            let (a, b) = (q[(0, 0)], q[(1, 0)]);
            s0 += a;
            s1 += b;
            s00 += a * a;
            s11 += b * b;
            s01 += a * b;
            lin += 10f64.powf(cfg.sigma_sh * a / 10.0);
        }
        let n = trials as f64;
        let (m0, m1) = (s0 / n, s1 / n);
        let v0 = s00 / n - m0 * m0;
        let v1 = s11 / n - m1 * m1;
        let rho = (s01 / n - m0 * m1) / (v0 * v1).sqrt();
        assert!(m0.abs() < 0.03 && (v0 - 1.0).abs() < 0.04, "{m0} {v0}");
        // eps * 2^(-9/9) + (1 - eps) with the user term shared
        assert!((rho - 0.75).abs() < 0.02, "{rho}");
        let expect = ((cfg.sigma_sh * std::f64::consts::LN_10 / 10.0).powi(2) / 2.0).exp();
        assert!((expect - 1.529).abs() < 1e-3);
        assert!((lin / n / expect - 1.0).abs() < 0.03);
    }

    #[test]
    fn ap_component_correlation_halves_at_decorrelation_distance() {
        let dist = DMatrix::from_row_slice(2, 2, &[0.0, 9.0, 9.0, 0.0]);
        let mut r = rng::stream(1, 99);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for _ in 0..100_000 {
            let v = correlated_gaussian(&dist, 9.0, "AP", &mut r).unwrap();
            sxy += v[0] * v[1];
            sxx += v[0] * v[0];
            syy += v[1] * v[1];
        }
        let rho = sxy / (sxx * syy).sqrt();
        assert!((rho - 0.5).abs() < 0.01, "{rho}");
        assert!((sxx / 1e5 - 1.0).abs() < 0.02);
    }

    #[test]
    fn distances_invariant_under_torus_shift() {
        let aps = vec![[10.0, 20.0], [480.0, 5.0], [250.0, 499.0]];
        let users = vec![[3.0, 497.0], [260.0, 240.0]];
        let shift = |p: &Vec<[f64; 2]>| -> Vec<[f64; 2]> {
            p.iter()
                .map(|&[x, y]| [(x + 123.4) % 500.0, (y + 377.7) % 500.0])
                .collect()
        };
        let a = Geometry::from_positions(500.0, 10.0, 1.5, aps.clone(), users.clone());
        let b = Geometry::from_positions(500.0, 10.0, 1.5, shift(&aps), shift(&users));
        for (x, y) in [
            (&a.d_ap_user, &b.d_ap_user),
            (&a.d_ap_ap, &b.d_ap_ap),
            (&a.d_user_user, &b.d_user_user),
        ] {
            assert!((x - y).amax() < 1e-9);
        }
    }

    #[test]
    fn psd_cholesky_rejects_indefinite() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(psd_cholesky(&c).is_err());
        let ok = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 2.0]);
        let l = psd_cholesky(&ok).unwrap();
        assert!((&l * l.transpose() - ok).norm() < 1e-12);
    }

    #[test]
    fn dominant_ap_cluster() {
        let mut beta = DMatrix::from_element(5, 1, 1e-9);
        beta[(0, 0)] = 1.0;
        assert_eq!(select_ap_clusters(&beta, 0.95, 1), vec![vec![0]]);
        assert_eq!(select_ap_clusters(&beta, 0.95, 3)[0].len(), 3);
    }

    #[test]
    fn uniform_cluster_takes_nineteen_of_twenty() {
        let beta = DMatrix::from_element(20, 1, 1.0);
        // brute force: smallest prefix of equal shares reaching 95%
        let brute = (1..=20).find(|&n| n as f64 / 20.0 >= 0.95).unwrap();
        assert_eq!(brute, 19);
        let c = select_ap_clusters(&beta, 0.95, 1);
        assert_eq!(c[0].len(), brute);
        assert_eq!(c[0], (0..19).collect::<Vec<_>>());
    }

    #[test]
    fn uplink_pilot_modes() {
        let mut r = rng::stream(3, 0);
        let p = assign_uplink_pilots(8, 8, UplinkPilotMode::Orthogonal, &mut r).unwrap();
        let mut s = p.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 8);
        let p = assign_uplink_pilots(8, 1, UplinkPilotMode::Random, &mut r).unwrap();
        assert!(p.iter().all(|&x| x == 0));
        assert!(assign_uplink_pilots(8, 4, UplinkPilotMode::Orthogonal, &mut r).is_err());
    }

    #[test]
    fn copilot_pair_count_matches_birthday_oracle() {
        // E[#pairs sharing] = C(40, 2) / 20 = 39
        let (k, tau, runs) = (40usize, 20usize, 4000u64);
        let mut counts = Vec::new();
        for seed in 0..runs {
            let p = assign_uplink_pilots(k, tau, UplinkPilotMode::Random, &mut rng::stream(seed, 4)).unwrap();
            let mut c = 0usize;
            for a in 0..k {
                for b in (a + 1)..k {
                    c += usize::from(p[a] == p[b]);
                }
            }
            counts.push(c as f64);
        }
        let mean = counts.iter().sum::<f64>() / runs as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let se = (var / runs as f64).sqrt();
        assert!((mean - 39.0).abs() < 4.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn downlink_pilots_respect_groups() {
        let mut r = rng::stream(5, 0);
        let dl = assign_downlink_pilots(&[0, 0], 2, DownlinkPilotMode::RandomReuse, &mut r).unwrap();
        let mut s = dl.clone();
        s.sort();
        assert_eq!(s, vec![0, 1]);

        let dl = assign_downlink_pilots(&[0, 1, 2, 0, 1], 5, DownlinkPilotMode::Distinct, &mut r).unwrap();
        let mut s = dl.clone();
        s.sort();
        assert_eq!(s, vec![0, 1, 2, 3, 4]);

        let err = assign_downlink_pilots(&[0, 0, 0, 0], 3, DownlinkPilotMode::RandomReuse, &mut r);
        assert!(matches!(
            err,
            Err(Error::DownlinkPilotsInfeasible {
                pilot: 0,
                size: 4,
                tau_dp: 3
            })
        ));
    }

    #[test]
    fn snapshot_is_deterministic_and_consistent() {
        let cfg = small_config();
        let a = build_snapshot(&cfg, 42).unwrap();
        let b = build_snapshot(&cfg, 42).unwrap();
        assert_eq!(a, b);
        for seed in 0..100 {
            let s = build_snapshot(&cfg, seed).unwrap();
            for (g, b) in s.gamma.iter().zip(s.beta.iter()) {
                assert!(*g > 0.0 && g <= b);
            }
            for k in 0..s.num_users() {
                assert!(s.clusters[k].len() >= cfg.cluster_min);
                for j in 0..s.num_users() {
                    if j != k && s.copilot(k, j) {
                        assert_ne!(s.dl_pilot.as_ref().unwrap()[k], s.dl_pilot.as_ref().unwrap()[j]);
                        for m in 0..s.num_aps() {
                            let lhs = s.gamma[(m, k)] * s.beta[(m, j)].powi(2);
                            let rhs = s.gamma[(m, j)] * s.beta[(m, k)].powi(2);
                            assert!((lhs / rhs - 1.0).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn default_scenario_covariances_factor() {
        let cfg = SystemConfig::default();
        for seed in 0..5 {
            build_snapshot(&cfg, seed).unwrap();
        }
    }
}
