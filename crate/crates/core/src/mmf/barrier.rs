//! Log-barrier interior-point feasibility test: maximizes the smallest cone
//! margin `t` and stops as soon as the sign of the optimum is settled.

use nalgebra::{DMatrix, DVector};

use super::problem::{norm, Normalized};
use super::{Feasibility, FeasibilityBackend};

#[derive(Debug, Clone)]
pub struct Barrier {
    /// Growth factor of the barrier parameter between centering steps.
    pub mu_growth: f64,
    /// Newton-iteration cap; `None` uses `max(50 M K, 1000)`.
    pub max_iterations: Option<usize>,
}

impl Default for Barrier {
    fn default() -> Self {
        Barrier {
            mu_growth: 2.0,
            max_iterations: None,
        }
    }
}

/// Half the squared Newton decrement below which a centering step ends.
const CENTERING_TOL: f64 = 1e-6;

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

struct State<'a> {
    p: &'a Normalized,
    inv: f64,
    r: Vec<f64>,
}

impl State<'_> {
    /// Barrier objective; `None` outside the domain.
    fn value(&mut self, x: &[f64], t: f64, mu: f64) -> Option<f64> {
        let mut f = -mu * t;
        for &v in x {
            if !(v > 0.0) {
                return None;
            }
            f -= v.ln();
        }
        for load in self.p.ap_loads(x) {
            let q = 1.0 - load;
            if !(q > 0.0) {
                return None;
            }
            f -= q.ln();
        }
        for user in 0..self.p.num_users() {
            self.p.residual(user, x, &mut self.r);
            let u = self.p.signal_amplitude(user, x) * self.inv - t;
            let nr = norm(&self.r);
            if !(u > nr) {
                return None;
            }
            f -= (u - nr).ln() + (u + nr).ln();
        }
        Some(f)
    }

    fn eval(&mut self, x: &[f64], t: f64, mu: f64) -> Eval {
        let p = self.p;
        let nv = p.num_vars();
        let n = nv + 1;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut value = -mu * t;
        grad[nv] = -mu;

        for v in 0..nv {
            value -= x[v].ln();
            grad[v] -= 1.0 / x[v];
            hess[(v, v)] += 1.0 / (x[v] * x[v]);
        }
        for vars in &p.ap_vars {
            let q = 1.0 - vars.iter().map(|&v| x[v] * x[v]).sum::<f64>();
            value -= q.ln();
            for &a in vars {
                grad[a] += 2.0 * x[a] / q;
                hess[(a, a)] += 2.0 / q;
                for &b in vars {
                    hess[(a, b)] += 4.0 * x[a] * x[b] / (q * q);
                }
            }
        }

        // Lorentz-cone barrier -ln(u^2 - |r|^2) with u = signal / sqrt(nu) - t
        let mut du = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        for user in 0..p.num_users() {
            p.residual(user, x, &mut self.r);
            let nr = norm(&self.r);
            let u = p.signal_amplitude(user, x) * self.inv - t;
            let d = (u - nr) * (u + nr);
            value -= d.ln();

            du.fill(0.0);
            for (&var, a) in p.user_vars[user].iter().zip(&p.signal[user]) {
                du[var] = a * self.inv;
            }
            du[nv] = -1.0;
            // v = u du - A^T r
            v.copy_from(&du);
            v *= u;
            for var in 0..nv {
                v[var] -= p.noncoherent[user][var] * self.r[var];
            }
            for (c, (j, coef)) in p.coherent[user].iter().enumerate() {
                let rc = self.r[nv + c];
                for (&var, w) in p.user_vars[*j].iter().zip(coef) {
                    v[var] -= w * rc;
                }
            }

            grad.axpy(-2.0 / d, &v, 1.0);
            hess.ger(4.0 / (d * d), &v, &v, 1.0);
            hess.ger(-2.0 / d, &du, &du, 1.0);
            let w = 2.0 / d;
            for var in 0..nv {
                hess[(var, var)] += w * p.noncoherent[user][var].powi(2);
            }
            for (j, coef) in &p.coherent[user] {
                let vars = &p.user_vars[*j];
                for (a, ca) in vars.iter().zip(coef) {
                    for (b, cb) in vars.iter().zip(coef) {
                        hess[(*a, *b)] += w * ca * cb;
                    }
                }
            }
        }
        Eval { value, grad, hess }
    }
}

fn solve(hess: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = hess.diagonal().amax().max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut h = hess.clone();
        if reg > 0.0 {
            for i in 0..h.nrows() {
                h[(i, i)] += reg;
            }
        }
        if let Some(ch) = h.cholesky() {
            let d = ch.solve(rhs);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

/// Strictly interior starting point pulled towards `warm`.
fn interior_start(p: &Normalized, warm: Option<&[f64]>) -> Vec<f64> {
    let mut x = vec![0.0; p.num_vars()];
    for vars in &p.ap_vars {
        let base = 1.0 / (vars.len() as f64).sqrt();
        for &v in vars {
            x[v] = match warm {
                Some(w) => 0.9 * w[v].clamp(0.0, 1.0) + 0.05 * base,
                None => 0.9 * base,
            };
        }
    }
    // keep rows strictly inside the ball even if `warm` was not
    for vars in &p.ap_vars {
        let l: f64 = vars.iter().map(|&v| x[v] * x[v]).sum::<f64>().sqrt();
        if l >= 0.99 {
            for &v in vars {
                x[v] *= 0.95 / l;
            }
        }
    }
    x
}

impl FeasibilityBackend for Barrier {
    fn name(&self) -> &'static str {
        "barrier"
    }

    fn check(&self, p: &Normalized, nu: f64, feas_tol: f64, warm: Option<&[f64]>) -> Feasibility {
        let mut x = interior_start(p, warm);
        if nu <= 0.0 {
            return Feasibility::Feasible(x);
        }
        let nv = p.num_vars();
        let mut st = State {
            p,
            inv: 1.0 / nu.sqrt(),
            r: Vec::new(),
        };
        let margins = p.margins(&x, nu);
        let t_min = margins.iter().copied().fold(f64::INFINITY, f64::min);
        if t_min >= 0.0 {
            return Feasibility::Feasible(x);
        }
        let mut t = t_min - 1.0;
        // barrier parameter: one per sign and ball constraint, two per cone
        let terms = (nv + p.ap_vars.len() + 2 * p.num_users()) as f64;
        let cap = self
            .max_iterations
            .unwrap_or_else(|| (50 * p.ap_vars.len() * p.num_users()).max(1000));
        let mut mu = 1.0;
        let mut iterations = 0;
        let mut trial = vec![0.0; nv];

        loop {
            // centering
            loop {
                if iterations >= cap {
                    return Feasibility::Undecided;
                }
                iterations += 1;
                let e = st.eval(&x, t, mu);
                let rhs = -&e.grad;
                let Some(dz) = solve(e.hess, &rhs) else {
                    return Feasibility::Undecided;
                };
                let decrement = -e.grad.dot(&dz);
                if decrement < 0.0 || !decrement.is_finite() {
                    break;
                }
                let slope = e.grad.dot(&dz);
                let mut step = 1.0;
                let mut accepted = false;
                for _ in 0..60 {
                    for v in 0..nv {
                        trial[v] = x[v] + step * dz[v];
                    }
                    let tt = t + step * dz[nv];
                    if let Some(f) = st.value(&trial, tt, mu) {
                        if f <= e.value + 0.25 * step * slope {
                            x.copy_from_slice(&trial);
                            t = tt;
                            accepted = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                let m = p.margins(&x, nu);
                if m.iter().all(|&h| h >= 0.0) {
                    return Feasibility::Feasible(x);
                }
                if !accepted || decrement * 0.5 < CENTERING_TOL {
                    break;
                }
            }
            let gap = terms / mu;
            if t + 2.0 * gap < 0.0 {
                return Feasibility::Infeasible;
            }
            if gap < 0.25 * feas_tol {
                return if p.is_witness(&x, nu, feas_tol) {
                    Feasibility::Feasible(x)
                } else {
                    Feasibility::Infeasible
                };
            }
            mu *= self.mu_growth;
        }
    }
}
