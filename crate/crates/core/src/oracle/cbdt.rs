use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::hardening::{gains_into, Trial};
use super::stats::{BatchStats, ComplexMoments, Welford};
use super::{batch_sizes, check_trials, McEstimate, Quantity};
use crate::closedform::Scheme;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng;
use crate::scenario::Snapshot;

#[derive(Debug, Clone)]
pub struct CbdtEstimates {
    /// `var(a_hat_kk)`.
    pub kappa: Vec<McEstimate>,
    /// `E|a_kk - a_hat_kk|^2`.
    pub error: Vec<McEstimate>,
    /// `E|a_kj|^2`, diagonal entries unused.
    pub gain_power: Vec<Vec<McEstimate>>,
    /// `cov(a_hat_kk, a_tilde_kk)` as (real, imaginary).
    pub covariance: Vec<(McEstimate, McEstimate)>,
}

/// Analytic first and second moments of the CB effective gains, used to
/// form the linear MMSE estimate from the de-spread downlink pilot.
struct Moments {
    mean: DMatrix<f64>,
    var: DMatrix<f64>,
}

fn moments(snap: &Snapshot, eta: &DMatrix<f64>, antennas: usize) -> Moments {
    let (m, k) = snap.beta.shape();
    let n = antennas as f64;
    let (b, g) = (&snap.beta, &snap.gamma);
    let mut mean = DMatrix::zeros(k, k);
    let mut var = DMatrix::zeros(k, k);
    for user in 0..k {
        for j in 0..k {
            let mut mu = 0.0;
            let mut v = 0.0;
            for ap in 0..m {
                v += eta[(ap, j)] * b[(ap, user)] * g[(ap, j)];
                if snap.copilot(user, j) {
                    mu += eta[(ap, j)].sqrt() * g[(ap, j)] * b[(ap, user)] / b[(ap, j)];
                }
            }
            mean[(user, j)] = n * mu;
            var[(user, j)] = n * v;
        }
    }
    Moments { mean, var }
}

struct BatchOut {
    trials: usize,
    kappa: Vec<f64>,
    error: Vec<Welford>,
    power: Vec<Welford>,
    cov: Vec<(Welford, Welford)>,
}

/// Simulates beamformed downlink pilots and the users' estimates of their
/// own effective gain.
pub fn estimate_cbdt(
    snap: &Snapshot,
    eta: &DMatrix<f64>,
    config: &SystemConfig,
    trials: usize,
    seed: u64,
) -> Result<CbdtEstimates> {
    check_trials(trials)?;
    let Some(dl) = snap.dl_pilot.as_ref() else {
        return Err(Error::NoDownlinkPilots);
    };
    let k = snap.num_users();
    let amp = (config.tau_dp as f64 * config.rho_dp).sqrt();
    let mom = moments(snap, eta, config.antennas);
    let sqrt_eta = eta.map(f64::sqrt);
    let group: Vec<Vec<usize>> = (0..k)
        .map(|user| (0..k).filter(|&j| dl[j] == dl[user]).collect())
        .collect();
    let y_mean: Vec<f64> = (0..k)
        .map(|user| amp * group[user].iter().map(|&j| mom.mean[(user, j)]).sum::<f64>())
        .collect();
    let y_var: Vec<f64> = (0..k)
        .map(|user| amp * amp * group[user].iter().map(|&j| mom.var[(user, j)]).sum::<f64>() + 1.0)
        .collect();
    let gain: Vec<f64> = (0..k).map(|user| amp * mom.var[(user, user)] / y_var[user]).collect();

    let outs: Vec<BatchOut> = batch_sizes(trials)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            let mut r = rng::stream(seed, rng::ORACLE_BASE + b as u64);
            let mut trial = Trial::new(snap, config.antennas);
            let mut a = DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
            let mut hat = vec![ComplexMoments::default(); k];
            let mut error = vec![Welford::default(); k];
            let mut power = vec![Welford::default(); k * k];
            let mut cov = vec![(Welford::default(), Welford::default()); k];
            for _ in 0..size {
                trial.sample(snap, eta, Scheme::Cb, &mut r);
                gains_into(&trial, &sqrt_eta, &mut a);
                for user in 0..k {
                    let mut y = rng::complex_normal(&mut r, 1.0);
                    for &j in &group[user] {
                        y += amp * a[(user, j)];
                    }
                    let a_hat = mom.mean[(user, user)] + gain[user] * (y - y_mean[user]);
                    let a_tilde = a[(user, user)] - a_hat;
                    hat[user].push(a_hat);
                    error[user].push(a_tilde.norm_sqr());
                    let c = (a_hat - mom.mean[(user, user)]) * a_tilde.conj();
                    cov[user].0.push(c.re);
                    cov[user].1.push(c.im);
                    for j in 0..k {
                        if j != user {
                            power[user * k + j].push(a[(user, j)].norm_sqr());
                        }
                    }
                }
            }
            BatchOut {
                trials: size,
                kappa: hat.iter().map(|h| h.variance()).collect(),
                error,
                power,
                cov,
            }
        })
        .collect();

    let mut kappa = vec![BatchStats::default(); k];
    let mut error = vec![Welford::default(); k];
    let mut power = vec![Welford::default(); k * k];
    let mut cov = vec![(Welford::default(), Welford::default()); k];
    for out in &outs {
        for user in 0..k {
            kappa[user].push(out.kappa[user], out.trials);
            error[user].merge(&out.error[user]);
            cov[user].0.merge(&out.cov[user].0);
            cov[user].1.merge(&out.cov[user].1);
        }
        for (acc, w) in power.iter_mut().zip(&out.power) {
            acc.merge(w);
        }
    }
    Ok(CbdtEstimates {
        kappa: (0..k)
            .map(|user| kappa[user].estimate(Quantity::Kappa { user }, 1.0))
            .collect(),
        error: (0..k)
            .map(|user| error[user].estimate(Quantity::EstimationError { user }, 1.0))
            .collect(),
        gain_power: (0..k)
            .map(|user| {
                (0..k)
                    .map(|from| power[user * k + from].estimate(Quantity::GainPower { user, from }, 1.0))
                    .collect()
            })
            .collect(),
        covariance: (0..k)
            .map(|user| {
                (
                    cov[user]
                        .0
                        .estimate(Quantity::HatTildeCovariance { user, imaginary: false }, 1.0),
                    cov[user]
                        .1
                        .estimate(Quantity::HatTildeCovariance { user, imaginary: true }, 1.0),
                )
            })
            .collect(),
    })
}
