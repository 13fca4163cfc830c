//! Uplink pilot training and per-AP MMSE channel estimation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::rng::complex_normal;

/// MMSE coefficients `c[m][k]`.
pub fn compute_c(beta: &DMatrix<f64>, ul_pilot: &[usize], tau_up: usize, rho_u: f64) -> DMatrix<f64> {
    let (m, k) = beta.shape();
    let tr = tau_up as f64 * rho_u;
    let amp = tr.sqrt();
    DMatrix::from_fn(m, k, |ap, user| {
        let load: f64 = (0..k)
            .filter(|&j| ul_pilot[j] == ul_pilot[user])
            .map(|j| beta[(ap, j)])
            .sum();
        amp * beta[(ap, user)] / (tr * load + 1.0)
    })
}

/// Per-entry variance of the channel estimate, `sqrt(tau rho_u) c beta`.
pub fn compute_gamma(c: &DMatrix<f64>, beta: &DMatrix<f64>, tau_up: usize, rho_u: f64) -> DMatrix<f64> {
    let amp = (tau_up as f64 * rho_u).sqrt();
    c.zip_map(beta, |c, b| amp * c * b)
}

/// Small-scale channels and their estimates for one coherence block, stored
/// as `N`-vectors indexed by `(ap, user)`.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    pub antennas: usize,
    pub aps: usize,
    pub users: usize,
    pub g: Vec<Complex64>,
    pub g_hat: Vec<Complex64>,
}

impl ChannelDraw {
    pub fn new(aps: usize, users: usize, antennas: usize) -> Self {
        let len = aps * users * antennas;
        ChannelDraw {
            antennas,
            aps,
            users,
            g: vec![Complex64::new(0.0, 0.0); len],
            g_hat: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    #[inline]
    fn range(&self, ap: usize, user: usize) -> std::ops::Range<usize> {
        let start = (ap * self.users + user) * self.antennas;
        start..start + self.antennas
    }

    #[inline]
    pub fn g(&self, ap: usize, user: usize) -> &[Complex64] {
        &self.g[self.range(ap, user)]
    }

    #[inline]
    pub fn g_hat(&self, ap: usize, user: usize) -> &[Complex64] {
        &self.g_hat[self.range(ap, user)]
    }
}

/// Fills `draw.g` with independent `CN(0, beta I_N)` vectors.
pub fn sample_channels<R: Rng + ?Sized>(beta: &DMatrix<f64>, draw: &mut ChannelDraw, rng: &mut R) {
    for ap in 0..draw.aps {
        for user in 0..draw.users {
            let b = beta[(ap, user)];
            let r = draw.range(ap, user);
            for x in &mut draw.g[r] {
                *x = complex_normal(rng, b);
            }
        }
    }
}

/// MMSE estimates from the projected pilot observations
/// `y_{m,i} = sqrt(tau rho_u) sum_{k: pilot k = i} g_mk + w_{m,i}`. Users
/// sharing a pilot see the same noise realization at an AP.
pub fn estimate_channels<R: Rng + ?Sized>(
    c: &DMatrix<f64>,
    ul_pilot: &[usize],
    pilot_gain: f64,
    draw: &mut ChannelDraw,
    rng: &mut R,
) {
    let n = draw.antennas;
    let tau = ul_pilot.iter().copied().max().map_or(0, |p| p + 1);
    let mut y = vec![Complex64::new(0.0, 0.0); tau * n];
    for ap in 0..draw.aps {
        for v in y.iter_mut() {
            *v = complex_normal(rng, 1.0);
        }
        for user in 0..draw.users {
            let p = ul_pilot[user];
            let g = draw.g(ap, user);
            for (yi, gi) in y[p * n..(p + 1) * n].iter_mut().zip(g) {
                *yi += pilot_gain * gi;
            }
        }
        for user in 0..draw.users {
            let p = ul_pilot[user];
            let cmk = c[(ap, user)];
            let r = draw.range(ap, user);
            for (h, yi) in draw.g_hat[r].iter_mut().zip(&y[p * n..(p + 1) * n]) {
                *h = cmk * yi;
            }
        }
    }
}

/// Perfect channel knowledge: `g_hat = g`.
pub fn copy_perfect(draw: &mut ChannelDraw) {
    draw.g_hat.copy_from_slice(&draw.g);
}
