use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::stats::{BatchStats, ComplexMoments, Welford};
use super::{batch_sizes, check_trials, McEstimate, Quantity};
use crate::closedform::{PowerAllocation, Scheme};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::estimation::{copy_perfect, estimate_channels, sample_channels, ChannelDraw};
use crate::rng;
use crate::scenario::{CsiModel, Snapshot};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Writes the precoding vector of `scheme` for estimate `g_hat` into `out`.
/// Returns false when the estimate is zero and a normalized precoder is undefined.
pub fn precode(g_hat: &[Complex64], scheme: Scheme, out: &mut [Complex64]) -> bool {
    let n2: f64 = g_hat.iter().map(|z| z.norm_sqr()).sum();
    let scale = match scheme {
        Scheme::Cb | Scheme::Cbdt => 1.0,
        Scheme::Ncb => 1.0 / n2.sqrt(),
        Scheme::Ecb => 1.0 / n2,
    };
    if scheme != Scheme::Cb && scheme != Scheme::Cbdt && !(n2 > 0.0) {
        return false;
    }
    for (w, g) in out.iter_mut().zip(g_hat) {
        *w = g.conj() * scale;
    }
    true
}

/// One coherence block: channels, estimates and precoders.
pub(super) struct Trial {
    pub draw: ChannelDraw,
    pub w: Vec<Complex64>,
    pub resampled: usize,
}

impl Trial {
    pub fn new(snap: &Snapshot, antennas: usize) -> Self {
        let draw = ChannelDraw::new(snap.num_aps(), snap.num_users(), antennas);
        let w = vec![ZERO; draw.g.len()];
        Trial { draw, w, resampled: 0 }
    }

    /// Draws a fresh block; zero-norm estimates cause a redraw.
    pub fn sample<R: Rng>(&mut self, snap: &Snapshot, eta: &DMatrix<f64>, scheme: Scheme, rng: &mut R) {
        let n = self.draw.antennas;
        loop {
            sample_channels(&snap.beta, &mut self.draw, rng);
            match snap.csi {
                CsiModel::Mmse => estimate_channels(&snap.c, &snap.ul_pilot, snap.pilot_gain, &mut self.draw, rng),
                CsiModel::Perfect => copy_perfect(&mut self.draw),
            }
            let mut ok = true;
            for ap in 0..self.draw.aps {
                for user in 0..self.draw.users {
                    let start = (ap * self.draw.users + user) * n;
                    let w = &mut self.w[start..start + n];
                    if eta[(ap, user)] == 0.0 {
                        w.fill(ZERO);
                    } else if !precode(self.draw.g_hat(ap, user), scheme, w) {
                        ok = false;
                    }
                }
            }
            if ok {
                return;
            }
            self.resampled += 1;
        }
    }

    #[inline]
    pub fn w(&self, ap: usize, user: usize) -> &[Complex64] {
        let n = self.draw.antennas;
        let start = (ap * self.draw.users + user) * n;
        &self.w[start..start + n]
    }
}

/// `a[k][j] = sum_m sqrt(eta_mj) g_mk^T w_mj` for the current trial.
pub(super) fn gains_into(trial: &Trial, sqrt_eta: &DMatrix<f64>, a: &mut DMatrix<Complex64>) {
    let (m, k) = sqrt_eta.shape();
    a.fill(ZERO);
    for ap in 0..m {
        for j in 0..k {
            let s = sqrt_eta[(ap, j)];
            if s == 0.0 {
                continue;
            }
            let w = trial.w(ap, j);
            for user in 0..k {
                let g = trial.draw.g(ap, user);
                let dot: Complex64 = g.iter().zip(w).map(|(x, y)| x * y).sum();
                a[(user, j)] += s * dot;
            }
        }
    }
}

/// Effective channel gains for one channel realization.
pub fn effective_gains(draw: &ChannelDraw, eta: &DMatrix<f64>, scheme: Scheme) -> Option<DMatrix<Complex64>> {
    let (m, k) = eta.shape();
    let n = draw.antennas;
    let mut trial = Trial {
        draw: draw.clone(),
        w: vec![ZERO; draw.g.len()],
        resampled: 0,
    };
    for ap in 0..m {
        for user in 0..k {
            let start = (ap * k + user) * n;
            if eta[(ap, user)] > 0.0 && !precode(draw.g_hat(ap, user), scheme, &mut trial.w[start..start + n]) {
                return None;
            }
        }
    }
    let mut a = DMatrix::from_element(k, k, ZERO);
    gains_into(&trial, &eta.map(f64::sqrt), &mut a);
    Some(a)
}

#[derive(Debug, Clone)]
pub struct HardeningEstimates {
    pub scheme: Scheme,
    pub coherent_gain: Vec<McEstimate>,
    pub self_interference: Vec<McEstimate>,
    /// `E|UI_kj|^2`, diagonal entries unused.
    pub interference: Vec<Vec<McEstimate>>,
    pub resampled: usize,
}

struct BatchOut {
    trials: usize,
    ds: Vec<f64>,
    bu: Vec<f64>,
    ui: Vec<Welford>,
    resampled: usize,
}

fn validate(snap: &Snapshot, alloc: &PowerAllocation, config: &SystemConfig, trials: usize) -> Result<()> {
    check_trials(trials)?;
    if alloc.eta.shape() != snap.beta.shape() {
        return Err(Error::Shape("eta must match the snapshot".into()));
    }
    if alloc.scheme == Scheme::Ecb && config.antennas < 2 {
        return Err(Error::EcbNeedsTwoAntennas);
    }
    Ok(())
}

/// Monte Carlo `|DS_k|^2`, `E|BU_k|^2` and `E|UI_kj|^2` for `alloc`.
pub fn estimate_ds_bu_ui(
    snap: &Snapshot,
    alloc: &PowerAllocation,
    config: &SystemConfig,
    trials: usize,
    seed: u64,
) -> Result<HardeningEstimates> {
    validate(snap, alloc, config, trials)?;
    let k = snap.num_users();
    let sqrt_eta = alloc.eta.map(f64::sqrt);
    let scheme = alloc.scheme;
    let outs: Vec<BatchOut> = batch_sizes(trials)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            let mut r = rng::stream(seed, rng::ORACLE_BASE + b as u64);
            let mut trial = Trial::new(snap, config.antennas);
            let mut a = DMatrix::from_element(k, k, ZERO);
            let mut own = vec![ComplexMoments::default(); k];
            let mut ui = vec![Welford::default(); k * k];
            for _ in 0..size {
                trial.sample(snap, &alloc.eta, scheme, &mut r);
                gains_into(&trial, &sqrt_eta, &mut a);
                for user in 0..k {
                    own[user].push(a[(user, user)]);
                    for j in 0..k {
                        if j != user {
                            ui[user * k + j].push(a[(user, j)].norm_sqr());
                        }
                    }
                }
            }
            BatchOut {
                trials: size,
                ds: own.iter().map(|c| c.squared_mean()).collect(),
                bu: own.iter().map(|c| c.variance()).collect(),
                ui,
                resampled: trial.resampled,
            }
        })
        .collect();

    let rho = config.rho_d;
    let mut ds = vec![BatchStats::default(); k];
    let mut bu = vec![BatchStats::default(); k];
    let mut ui = vec![Welford::default(); k * k];
    let mut resampled = 0;
    for out in &outs {
        for user in 0..k {
            ds[user].push(out.ds[user], out.trials);
            bu[user].push(out.bu[user], out.trials);
        }
        for (acc, w) in ui.iter_mut().zip(&out.ui) {
            acc.merge(w);
        }
        resampled += out.resampled;
    }
    Ok(HardeningEstimates {
        scheme,
        coherent_gain: (0..k)
            .map(|user| ds[user].estimate(Quantity::CoherentGain { user }, rho))
            .collect(),
        self_interference: (0..k)
            .map(|user| bu[user].estimate(Quantity::SelfInterference { user }, rho))
            .collect(),
        interference: (0..k)
            .map(|user| {
                (0..k)
                    .map(|from| ui[user * k + from].estimate(Quantity::Interference { user, from }, rho))
                    .collect()
            })
            .collect(),
        resampled,
    })
}

/// Monte Carlo `E|x_m|^2` per AP with i.i.d. unit-power data symbols.
pub fn estimate_power(
    snap: &Snapshot,
    alloc: &PowerAllocation,
    config: &SystemConfig,
    trials: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    validate(snap, alloc, config, trials)?;
    let (m, k) = snap.beta.shape();
    let n = config.antennas;
    let sqrt_eta = alloc.eta.map(f64::sqrt);
    let parts: Vec<Vec<Welford>> = batch_sizes(trials)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            let mut r = rng::stream(seed, rng::ORACLE_BASE + b as u64);
            let mut trial = Trial::new(snap, n);
            let mut acc = vec![Welford::default(); m];
            let mut x = vec![ZERO; n];
            for _ in 0..size {
                trial.sample(snap, &alloc.eta, alloc.scheme, &mut r);
                let q: Vec<Complex64> = (0..k).map(|_| rng::complex_normal(&mut r, 1.0)).collect();
                for ap in 0..m {
                    x.fill(ZERO);
                    for user in 0..k {
                        let s = sqrt_eta[(ap, user)];
                        if s == 0.0 {
                            continue;
                        }
                        for (xi, wi) in x.iter_mut().zip(trial.w(ap, user)) {
                            *xi += s * wi * q[user];
                        }
                    }
                    acc[ap].push(x.iter().map(|z| z.norm_sqr()).sum());
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Welford::default(); m];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(total
        .iter()
        .enumerate()
        .map(|(ap, w)| w.estimate(Quantity::ApPower { ap }, config.rho_d))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{evaluate, maximal_ratio_power, MrNormalization};
    use crate::oracle::compare;

    fn tiny(seed: u64) -> (Snapshot, SystemConfig) {
        let cfg = SystemConfig {
            num_aps: 3,
            antennas: 2,
            num_users: 2,
            area_side: 100.0,
            tau_up: 1,
            tau_dp: 2,
            cluster_min: 3,
            rho_d: 1e9,
            ..SystemConfig::default()
        };
        (crate::scenario::build_snapshot(&cfg, seed).unwrap(), cfg)
    }

    #[test]
    fn precoder_identities() {
        let mut r = rng::stream(1, 1);
        let g: Vec<Complex64> = (0..4).map(|_| rng::complex_normal(&mut r, 2.0)).collect();
        let mut w = vec![ZERO; 4];
        let dot = |w: &[Complex64]| g.iter().zip(w).map(|(a, b)| a * b).sum::<Complex64>();
        let n2: f64 = g.iter().map(|z| z.norm_sqr()).sum();

        assert!(precode(&g, Scheme::Ecb, &mut w));
        assert!((dot(&w) - 1.0).norm() < 1e-14);
        assert!(precode(&g, Scheme::Ncb, &mut w));
        assert!((w.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(precode(&g, Scheme::Cb, &mut w));
        assert!((dot(&w) - n2).norm() < 1e-12 * n2);
        assert!(!precode(&[ZERO; 4], Scheme::Ncb, &mut w));
    }

    #[test]
    fn ecb_with_perfect_csi_is_deterministic() {
        let beta = DMatrix::from_row_slice(2, 1, &[0.5, 2.0]);
        let snap = Snapshot::perfect_csi(beta, vec![0], None, vec![vec![0, 1]]).unwrap();
        let eta = DMatrix::from_row_slice(2, 1, &[0.3, 0.7]);
        let mut draw = ChannelDraw::new(2, 1, 3);
        let mut r = rng::stream(2, 2);
        for _ in 0..50 {
            sample_channels(&snap.beta, &mut draw, &mut r);
            copy_perfect(&mut draw);
            let a = effective_gains(&draw, &eta, Scheme::Ecb).unwrap();
            let expect = 0.3f64.sqrt() + 0.7f64.sqrt();
            assert!((a[(0, 0)] - expect).norm() < 1e-13);
        }
        let cfg = SystemConfig {
            antennas: 3,
            rho_d: 1.0,
            ..SystemConfig::default()
        };
        let est = estimate_ds_bu_ui(
            &snap,
            &PowerAllocation {
                eta,
                scheme: Scheme::Ecb,
            },
            &cfg,
            2000,
            3,
        )
        .unwrap();
        assert!(est.self_interference[0].estimate.abs() < 1e-20);
    }

    #[test]
    fn cb_small_instance_matches_closed_form() {
        let (snap, cfg) = tiny(4);
        let alloc = maximal_ratio_power(&snap, Scheme::Cb, 2, MrNormalization::Cluster);
        let closed = evaluate(&snap, &alloc, &cfg).unwrap();
        let est = estimate_ds_bu_ui(&snap, &alloc, &cfg, 20_000, 5).unwrap();
        for k in 0..2 {
            assert!(compare(closed.coherent_gain[k], &est.coherent_gain[k], 4.0).pass);
            assert!(compare(closed.self_interference[k], &est.self_interference[k], 4.0).pass);
            let j = 1 - k;
            let c = compare(closed.ui_pairs[(k, j)], &est.interference[k][j], 4.0);
            assert!(c.pass, "{c}");
        }
    }

    #[test]
    fn power_matches_constraints() {
        let (snap, cfg) = tiny(6);
        for scheme in [Scheme::Cb, Scheme::Ncb, Scheme::Ecb] {
            let alloc = maximal_ratio_power(&snap, scheme, 2, MrNormalization::Cluster);
            for p in estimate_power(&snap, &alloc, &cfg, 20_000, 7).unwrap() {
                let c = compare(cfg.rho_d, &p, 4.0);
                assert!(c.pass, "{scheme} {c}");
            }
            let half = PowerAllocation {
                eta: &alloc.eta * 0.5,
                scheme,
            };
            for p in estimate_power(&snap, &half, &cfg, 20_000, 8).unwrap() {
                assert!(compare(cfg.rho_d * 0.5, &p, 4.0).pass);
            }
        }
        let zero = PowerAllocation {
            eta: DMatrix::zeros(3, 2),
            scheme: Scheme::Ncb,
        };
        for p in estimate_power(&snap, &zero, &cfg, 1000, 9).unwrap() {
            assert_eq!(p.estimate, 0.0);
        }
    }

    #[test]
    fn too_few_trials() {
        let (snap, cfg) = tiny(0);
        let alloc = maximal_ratio_power(&snap, Scheme::Cb, 2, MrNormalization::Cluster);
        assert!(matches!(
            estimate_ds_bu_ui(&snap, &alloc, &cfg, 10, 0),
            Err(Error::TooFewTrials { .. })
        ));
    }
}
