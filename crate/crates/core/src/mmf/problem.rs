use nalgebra::DMatrix;

use crate::closedform::{varrho, vartheta, Scheme};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::scenario::Snapshot;
use crate::special::alpha;

/// Second-order cone data of the fixed-target SINR constraints in the
/// variables `u[m][k] = sqrt(rho_d eta[m][k])`.
///
/// For user `k` the SINR reads
/// `(signal_k . u_k)^2 / (sum_j sum_m noncoherent[k][m][j]^2 u_mj^2
///  + sum_{(j, v) in coherent[k]} (v . u_j)^2 + 1)`,
/// and AP `m` must satisfy `sum_k budget[m][k]^2 u_mk^2 <= bound^2`.
#[derive(Debug, Clone)]
pub struct SocProblem {
    pub scheme: Scheme,
    pub signal: DMatrix<f64>,
    pub noncoherent: Vec<DMatrix<f64>>,
    pub coherent: Vec<Vec<(usize, Vec<f64>)>>,
    pub budget: DMatrix<f64>,
    pub bound: f64,
    pub support: DMatrix<bool>,
    pub rho_d: f64,
    /// Estimate qualities, used for the maximal-ratio starting point.
    pub gamma: DMatrix<f64>,
    /// CB is handled by analogy with the NCB construction.
    pub extension: bool,
}

impl SocProblem {
    pub fn num_aps(&self) -> usize {
        self.signal.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.signal.ncols()
    }

    /// Closed-form SINR of every user at `u`.
    pub fn sinr(&self, u: &DMatrix<f64>) -> Vec<f64> {
        let (m, k) = (self.num_aps(), self.num_users());
        (0..k)
            .map(|user| {
                let s: f64 = (0..m).map(|ap| self.signal[(ap, user)] * u[(ap, user)]).sum();
                let nc = &self.noncoherent[user];
                let mut den = 1.0;
                for j in 0..k {
                    for ap in 0..m {
                        den += (nc[(ap, j)] * u[(ap, j)]).powi(2);
                    }
                }
                for (j, v) in &self.coherent[user] {
                    let c: f64 = (0..m).map(|ap| v[ap] * u[(ap, *j)]).sum();
                    den += c * c;
                }
                s * s / den
            })
            .collect()
    }

    pub fn eta_from_u(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        u.map(|x| x * x / self.rho_d)
    }

    pub fn u_from_eta(&self, eta: &DMatrix<f64>) -> DMatrix<f64> {
        eta.map(|e| (self.rho_d * e.max(0.0)).sqrt())
    }

    /// Maximal-ratio point in solver coordinates: `x_mk^2 = gamma_mk / sum_j gamma_mj`
    /// over served users, which is the same for all three schemes.
    pub fn maximal_ratio_u(&self) -> DMatrix<f64> {
        let (m, k) = (self.num_aps(), self.num_users());
        let mut u = DMatrix::zeros(m, k);
        for ap in 0..m {
            let total: f64 = (0..k)
                .filter(|&j| self.support[(ap, j)])
                .map(|j| self.gamma[(ap, j)])
                .sum();
            for user in (0..k).filter(|&j| self.support[(ap, j)]) {
                let x = (self.gamma[(ap, user)] / total).sqrt();
                u[(ap, user)] = x * self.bound / self.budget[(ap, user)];
            }
        }
        u
    }

    fn check_finite(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::NonFinite(what.to_string()));
        let ok = |x: &f64| x.is_finite() && *x >= 0.0;
        if !self.signal.iter().all(ok) {
            return bad("signal");
        }
        if !self.noncoherent.iter().all(|m| m.iter().all(ok)) {
            return bad("noncoherent");
        }
        if !self.coherent.iter().all(|c| c.iter().all(|(_, v)| v.iter().all(ok))) {
            return bad("coherent");
        }
        if !self.budget.iter().all(|x| x.is_finite() && *x > 0.0) || !(self.bound > 0.0 && self.bound.is_finite()) {
            return bad("budget");
        }
        Ok(())
    }
}

/// Builds the cone data for CB, NCB or ECB.
pub fn build_soc_problem(snap: &Snapshot, scheme: Scheme, config: &SystemConfig) -> Result<SocProblem> {
    let n_ant = config.antennas;
    let n = n_ant as f64;
    let rho = config.rho_d;
    let (m, k) = (snap.num_aps(), snap.num_users());
    let (b, g) = (&snap.beta, &snap.gamma);
    if scheme == Scheme::Cbdt {
        return Err(Error::UnsupportedScheme {
            scheme: scheme.to_string(),
            what: "max-min fairness",
        });
    }
    if scheme == Scheme::Ecb && n_ant < 2 {
        return Err(Error::EcbNeedsTwoAntennas);
    }
    let a = alpha(n_ant);

    let signal = DMatrix::from_fn(m, k, |ap, user| {
        let gm = g[(ap, user)];
        match scheme {
            Scheme::Cb => n * gm,
            Scheme::Ncb => a * gm.sqrt(),
            _ => 1.0,
        }
    });
    let noncoherent = (0..k)
        .map(|user| {
            DMatrix::from_fn(m, k, |ap, j| match scheme {
                Scheme::Cb => (n * b[(ap, user)] * g[(ap, j)]).sqrt(),
                Scheme::Ncb => vartheta(snap, n_ant, ap, user, j).sqrt(),
                _ => varrho(snap, n_ant, ap, user, j).max(0.0).sqrt(),
            })
        })
        .collect();
    let coherent = (0..k)
        .map(|user| {
            (0..k)
                .filter(|&j| j != user && snap.copilot(user, j))
                .map(|j| {
                    let v = (0..m)
                        .map(|ap| {
                            let r = b[(ap, user)] / b[(ap, j)];
                            match scheme {
                                Scheme::Cb => n * g[(ap, j)] * r,
                                Scheme::Ncb => a * g[(ap, j)].sqrt() * r,
                                _ => r,
                            }
                        })
                        .collect();
                    (j, v)
                })
                .collect()
        })
        .collect();
    let budget = DMatrix::from_fn(m, k, |ap, user| {
        let gm = g[(ap, user)];
        match scheme {
            Scheme::Cb => (n * gm).sqrt(),
            Scheme::Ncb => 1.0,
            _ => 1.0 / gm.sqrt(),
        }
    });
    let bound = match scheme {
        Scheme::Ecb => (rho * (n - 1.0)).sqrt(),
        _ => rho.sqrt(),
    };
    let support = DMatrix::from_fn(m, k, |ap, user| snap.serves(ap, user));
    let problem = SocProblem {
        scheme,
        signal,
        noncoherent,
        coherent,
        budget,
        bound,
        support,
        rho_d: rho,
        gamma: g.clone(),
        extension: scheme == Scheme::Cb,
    };
    problem.check_finite()?;
    Ok(problem)
}

/// The cone data in solver coordinates: one variable per served `(ap, user)`
/// pair, scaled so that every AP row lies in the unit ball.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub vars: Vec<(usize, usize)>,
    pub user_vars: Vec<Vec<usize>>,
    pub ap_vars: Vec<Vec<usize>>,
    /// Signal coefficients aligned with `user_vars[k]`.
    pub signal: Vec<Vec<f64>>,
    /// Per user, diagonal weights on every variable.
    pub noncoherent: Vec<Vec<f64>>,
    /// Per user, `(j, coefficients aligned with user_vars[j])`.
    pub coherent: Vec<Vec<(usize, Vec<f64>)>>,
    scale: Vec<f64>,
}

impl Normalized {
    pub fn new(p: &SocProblem) -> Self {
        let (m, k) = (p.num_aps(), p.num_users());
        let mut vars = Vec::new();
        let mut user_vars = vec![Vec::new(); k];
        let mut ap_vars = vec![Vec::new(); m];
        let mut index = DMatrix::from_element(m, k, usize::MAX);
        for user in 0..k {
            for ap in 0..m {
                if p.support[(ap, user)] {
                    index[(ap, user)] = vars.len();
                    user_vars[user].push(vars.len());
                    ap_vars[ap].push(vars.len());
                    vars.push((ap, user));
                }
            }
        }
        // u = scale * x
        let scale: Vec<f64> = vars.iter().map(|&(ap, user)| p.bound / p.budget[(ap, user)]).collect();
        let signal = (0..k)
            .map(|user| user_vars[user].iter().map(|&v| p.signal[vars[v]] * scale[v]).collect())
            .collect();
        let noncoherent = (0..k)
            .map(|user| {
                vars.iter()
                    .enumerate()
                    .map(|(v, &idx)| p.noncoherent[user][idx] * scale[v])
                    .collect()
            })
            .collect();
        let coherent = (0..k)
            .map(|user| {
                p.coherent[user]
                    .iter()
                    .map(|(j, coef)| {
                        let c = user_vars[*j].iter().map(|&v| coef[vars[v].0] * scale[v]).collect();
                        (*j, c)
                    })
                    .collect()
            })
            .collect();
        Normalized {
            vars,
            user_vars,
            ap_vars,
            signal,
            noncoherent,
            coherent,
            scale,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_vars.len()
    }

    pub fn signal_amplitude(&self, user: usize, x: &[f64]) -> f64 {
        self.user_vars[user]
            .iter()
            .zip(&self.signal[user])
            .map(|(&v, c)| c * x[v])
            .sum()
    }

    /// Stacked interference vector `r_k(x)`, ending with the noise entry 1.
    pub fn residual(&self, user: usize, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.noncoherent[user].iter().zip(x).map(|(w, xv)| w * xv));
        for (j, coef) in &self.coherent[user] {
            out.push(self.user_vars[*j].iter().zip(coef).map(|(&v, c)| c * x[v]).sum());
        }
        out.push(1.0);
    }

    /// `h_k(x) = signal / sqrt(nu) - |r_k(x)|`; nonnegative iff `SINR_k >= nu`.
    pub fn margins(&self, x: &[f64], nu: f64) -> Vec<f64> {
        let inv = 1.0 / nu.sqrt();
        let mut r = Vec::new();
        (0..self.num_users())
            .map(|user| {
                self.residual(user, x, &mut r);
                self.signal_amplitude(user, x) * inv - norm(&r)
            })
            .collect()
    }

    /// Whether `x` meets every cone up to `tol` relative to its
    /// interference norm, and the per-AP balls up to `tol`.
    pub fn is_witness(&self, x: &[f64], nu: f64, tol: f64) -> bool {
        let inv = 1.0 / nu.sqrt();
        let mut r = Vec::new();
        let cones = (0..self.num_users()).all(|user| {
            self.residual(user, x, &mut r);
            let nr = norm(&r);
            self.signal_amplitude(user, x) * inv >= nr * (1.0 - tol)
        });
        cones && x.iter().all(|&v| v >= 0.0) && self.ap_loads(x).iter().all(|&l| l <= 1.0 + tol)
    }

    pub fn ap_loads(&self, x: &[f64]) -> Vec<f64> {
        self.ap_vars
            .iter()
            .map(|vs| vs.iter().map(|&v| x[v] * x[v]).sum())
            .collect()
    }

    pub fn sinr(&self, x: &[f64]) -> Vec<f64> {
        let mut r = Vec::new();
        (0..self.num_users())
            .map(|user| {
                self.residual(user, x, &mut r);
                let s = self.signal_amplitude(user, x);
                s * s / r.iter().map(|v| v * v).sum::<f64>()
            })
            .collect()
    }

    pub fn to_u(&self, x: &[f64], aps: usize, users: usize) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(aps, users);
        for (v, &idx) in self.vars.iter().enumerate() {
            u[idx] = self.scale[v] * x[v].max(0.0);
        }
        u
    }

    pub fn from_u(&self, u: &DMatrix<f64>) -> Vec<f64> {
        self.vars
            .iter()
            .enumerate()
            .map(|(v, &idx)| u[idx] / self.scale[v])
            .collect()
    }

    /// Upper bound on the achievable minimum SINR: for each user,
    /// `(sum a)^2` from `x <= 1` and `sum a^2 / w^2` by Cauchy-Schwarz
    /// against its own non-coherent term.
    pub fn sinr_upper_bound(&self) -> f64 {
        (0..self.num_users())
            .map(|user| {
                let vars = &self.user_vars[user];
                let sig = &self.signal[user];
                let full = sig.iter().sum::<f64>().powi(2);
                let mut cs = 0.0;
                for (&v, a) in vars.iter().zip(sig) {
                    let w = self.noncoherent[user][v];
                    if w > 0.0 {
                        cs += (a / w).powi(2);
                    } else if *a > 0.0 {
                        cs = f64::INFINITY;
                    }
                }
                full.min(cs)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
