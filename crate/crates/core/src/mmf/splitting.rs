//! First-order primal-dual splitting (Chambolle-Pock) over the cone
//! intersection. It can only prove feasibility; running out of iterations
//! is reported as undecided.

use super::problem::{norm, Normalized};
use super::{Feasibility, FeasibilityBackend};

#[derive(Debug, Clone)]
pub struct Splitting {
    /// Iteration cap; `None` uses `max(50 M K, 5000)`.
    pub max_iterations: Option<usize>,
    /// Witness test period.
    pub check_every: usize,
}

impl Default for Splitting {
    fn default() -> Self {
        Splitting {
            max_iterations: None,
            check_every: 10,
        }
    }
}

/// Projection onto `{(s, r) : s >= |r|}`.
fn project_soc(v: &mut [f64]) {
    let s = v[0];
    let nr = norm(&v[1..]);
    if nr <= s {
        return;
    }
    if nr <= -s {
        v.fill(0.0);
        return;
    }
    let a = 0.5 * (s + nr);
    v[0] = a;
    for x in &mut v[1..] {
        *x *= a / nr;
    }
}

/// Projection onto `{x >= 0, |x_m| <= 1 per AP}`.
fn project_box(p: &Normalized, x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.max(0.0);
    }
    for vars in &p.ap_vars {
        let l = vars.iter().map(|&v| x[v] * x[v]).sum::<f64>().sqrt();
        if l > 1.0 {
            for &v in vars {
                x[v] /= l;
            }
        }
    }
}

/// Linear part of the cone map for user `k`: `(inv * signal . x, L_k x)`.
fn apply(p: &Normalized, user: usize, inv: f64, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.push(inv * p.signal_amplitude(user, x));
    out.extend(p.noncoherent[user].iter().zip(x).map(|(w, v)| w * v));
    for (j, coef) in &p.coherent[user] {
        out.push(p.user_vars[*j].iter().zip(coef).map(|(&v, c)| c * x[v]).sum());
    }
}

/// Adds `scale * A_k^T y` to `out`.
fn apply_t(p: &Normalized, user: usize, inv: f64, y: &[f64], scale: f64, out: &mut [f64]) {
    let nv = p.num_vars();
    for (&v, a) in p.user_vars[user].iter().zip(&p.signal[user]) {
        out[v] += scale * inv * a * y[0];
    }
    for v in 0..nv {
        out[v] += scale * p.noncoherent[user][v] * y[1 + v];
    }
    for (c, (j, coef)) in p.coherent[user].iter().enumerate() {
        for (&v, w) in p.user_vars[*j].iter().zip(coef) {
            out[v] += scale * w * y[1 + nv + c];
        }
    }
}

fn operator_norm(p: &Normalized, inv: f64) -> f64 {
    let nv = p.num_vars();
    let mut x = vec![1.0 / (nv as f64).sqrt(); nv];
    let mut y = Vec::new();
    let mut est = 0.0;
    for _ in 0..50 {
        let mut z = vec![0.0; nv];
        for user in 0..p.num_users() {
            apply(p, user, inv, &x, &mut y);
            apply_t(p, user, inv, &y, 1.0, &mut z);
        }
        let nz = norm(&z);
        if nz == 0.0 {
            return 1.0;
        }
        est = nz;
        for (a, b) in x.iter_mut().zip(&z) {
            *a = b / nz;
        }
    }
    // est approximates the top eigenvalue of A^T A
    est.sqrt() * 1.01
}

impl FeasibilityBackend for Splitting {
    fn name(&self) -> &'static str {
        "splitting"
    }

    fn check(&self, p: &Normalized, nu: f64, feas_tol: f64, warm: Option<&[f64]>) -> Feasibility {
        let nv = p.num_vars();
        let mut x: Vec<f64> = match warm {
            Some(w) => w.to_vec(),
            None => vec![0.5; nv],
        };
        project_box(p, &mut x);
        if nu <= 0.0 {
            return Feasibility::Feasible(x);
        }
        if p.is_witness(&x, nu, feas_tol) {
            return Feasibility::Feasible(x);
        }
        let inv = 1.0 / nu.sqrt();
        let k = p.num_users();
        let step = 0.95 / operator_norm(p, inv);
        // aim slightly inside the cones so iterates cross into the feasible set
        let margin = 5.0 * feas_tol;
        let mut y: Vec<Vec<f64>> = (0..k).map(|user| vec![0.0; 2 + nv + p.coherent[user].len()]).collect();
        let cap = self
            .max_iterations
            .unwrap_or_else(|| (50 * p.ap_vars.len() * k).max(5000));
        let mut ax = Vec::new();
        let mut grad = vec![0.0; nv];
        let mut x_next = vec![0.0; nv];
        for it in 0..cap {
            grad.fill(0.0);
            for user in 0..k {
                // y_k pairs with (A_k x + c_k), whose last entry is the constant 1
                apply_t(p, user, inv, &y[user], 1.0, &mut grad);
            }
            for v in 0..nv {
                x_next[v] = x[v] - step * grad[v];
            }
            project_box(p, &mut x_next);
            for user in 0..k {
                let xbar: Vec<f64> = x_next.iter().zip(&x).map(|(a, b)| 2.0 * a - b).collect();
                apply(p, user, inv, &xbar, &mut ax);
                ax[0] -= margin;
                ax.push(1.0);
                let yk = &mut y[user];
                let mut w: Vec<f64> = yk.iter().zip(&ax).map(|(yi, a)| yi + step * a).collect();
                let mut proj: Vec<f64> = w.iter().map(|v| v / step).collect();
                project_soc(&mut proj);
                for (wi, pi) in w.iter_mut().zip(&proj) {
                    *wi -= step * pi;
                }
                // dual of an indicator of a self-dual cone: y lies in -Q
                yk.copy_from_slice(&w);
            }
            std::mem::swap(&mut x, &mut x_next);
            if (it + 1) % self.check_every == 0 && p.is_witness(&x, nu, feas_tol) {
                return Feasibility::Feasible(x);
            }
        }
        if p.is_witness(&x, nu, feas_tol) {
            Feasibility::Feasible(x)
        } else {
            Feasibility::Undecided
        }
    }
}
