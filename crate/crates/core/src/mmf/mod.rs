//! Max-min fairness power control by bisection on the common SINR target,
//! each step a second-order cone feasibility problem.

mod barrier;
mod problem;
mod splitting;

use nalgebra::DMatrix;

pub use barrier::Barrier;
pub use problem::{build_soc_problem, Normalized, SocProblem};
pub use splitting::Splitting;

use crate::closedform::{self, ConstraintPolicy, PowerAllocation, Scheme};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::scenario::Snapshot;

pub const DEFAULT_BISECT_TOL: f64 = 1e-3;
pub const DEFAULT_FEAS_TOL: f64 = 1e-6;
const MAX_BISECTIONS: usize = 200;

/// Outcome of one fixed-target test, in solver coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    Infeasible,
    /// Iteration cap reached without a decision.
    Undecided,
}

/// A convex method deciding whether all cones can hold at target `nu`.
///
/// Witnesses must satisfy every cone slackened by `feas_tol`; if a point with
/// slack `10 feas_tol` exists the answer must be feasible.
pub trait FeasibilityBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn check(&self, problem: &Normalized, nu: f64, feas_tol: f64, warm: Option<&[f64]>) -> Feasibility;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendKind {
    #[default]
    Barrier,
    Splitting,
}

impl BackendKind {
    pub fn backend(self) -> Box<dyn FeasibilityBackend> {
        match self {
            BackendKind::Barrier => Box::new(Barrier::default()),
            BackendKind::Splitting => Box::new(Splitting::default()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MmfOptions {
    pub bisect_tol: f64,
    pub feas_tol: f64,
    pub backend: BackendKind,
}

impl Default for MmfOptions {
    fn default() -> Self {
        MmfOptions {
            bisect_tol: DEFAULT_BISECT_TOL,
            feas_tol: DEFAULT_FEAS_TOL,
            backend: BackendKind::Barrier,
        }
    }
}

/// Result of a fixed-target test with the witness mapped back to `eta`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityOutcome {
    Feasible(DMatrix<f64>),
    Infeasible,
    Undecided,
}

/// Decides whether every user can reach SINR `nu` with the default backend.
pub fn feasibility_check(problem: &SocProblem, nu: f64, feas_tol: f64) -> FeasibilityOutcome {
    feasibility_check_with(problem, nu, feas_tol, &Barrier::default())
}

pub fn feasibility_check_with(
    problem: &SocProblem,
    nu: f64,
    feas_tol: f64,
    backend: &dyn FeasibilityBackend,
) -> FeasibilityOutcome {
    let mr = problem.maximal_ratio_u();
    if nu <= 0.0 {
        return FeasibilityOutcome::Feasible(problem.eta_from_u(&mr));
    }
    let norm = Normalized::new(problem);
    let warm = norm.from_u(&mr);
    match backend.check(&norm, nu, feas_tol, Some(&warm)) {
        Feasibility::Feasible(x) => {
            let u = norm.to_u(&x, problem.num_aps(), problem.num_users());
            FeasibilityOutcome::Feasible(problem.eta_from_u(&u))
        }
        Feasibility::Infeasible => FeasibilityOutcome::Infeasible,
        Feasibility::Undecided => FeasibilityOutcome::Undecided,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmfSolution {
    pub scheme: Scheme,
    pub eta: DMatrix<f64>,
    /// Achieved minimum SINR (linear).
    pub nu: f64,
    /// Upper end of the final bracket.
    pub nu_upper: f64,
    pub iterations: usize,
    pub undecided: usize,
    pub feas_tol: f64,
    pub bisect_tol: f64,
    pub backend: &'static str,
    pub extension: bool,
}

impl MmfSolution {
    pub fn allocation(&self) -> PowerAllocation {
        PowerAllocation {
            eta: self.eta.clone(),
            scheme: self.scheme,
        }
    }
}

/// Scales users above the common target down until all SINRs agree. Only
/// reduces power, so a feasible point stays feasible and the minimum never drops.
fn equalize(norm: &Normalized, x: &mut [f64]) {
    let k = norm.num_users();
    let mut r = Vec::new();
    for _ in 0..2000 {
        let sinr = norm.sinr(x);
        let lo = sinr.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sinr.iter().copied().fold(0.0, f64::max);
        if hi - lo <= 1e-9 * lo {
            return;
        }
        for user in 0..k {
            norm.residual(user, x, &mut r);
            let s = norm.signal_amplitude(user, x);
            // split the denominator into the part that scales with user k's power
            let own: f64 = norm.user_vars[user]
                .iter()
                .map(|&v| (norm.noncoherent[user][v] * x[v]).powi(2))
                .sum();
            let total: f64 = r.iter().map(|v| v * v).sum();
            let rest = total - own;
            if s * s <= lo * (own + rest) * (1.0 + 1e-12) {
                continue;
            }
            let scale2 = lo * rest / (s * s - lo * own);
            let scale = scale2.sqrt().min(1.0);
            for &v in &norm.user_vars[user] {
                x[v] *= scale;
            }
        }
    }
}

/// Max-min fairness with default options.
pub fn solve_mmf(snap: &Snapshot, scheme: Scheme, config: &SystemConfig, bisect_tol: f64) -> Result<MmfSolution> {
    solve_mmf_with(
        snap,
        scheme,
        config,
        &MmfOptions {
            bisect_tol,
            ..MmfOptions::default()
        },
    )
}

pub fn solve_mmf_with(
    snap: &Snapshot,
    scheme: Scheme,
    config: &SystemConfig,
    options: &MmfOptions,
) -> Result<MmfSolution> {
    let problem = build_soc_problem(snap, scheme, config)?;
    let backend = options.backend.backend();
    let norm = Normalized::new(&problem);
    let (m, k) = (problem.num_aps(), problem.num_users());

    let mut best = norm.from_u(&problem.maximal_ratio_u());
    let min_of = |x: &[f64]| norm.sinr(x).into_iter().fold(f64::INFINITY, f64::min);
    let mut lo = min_of(&best);
    if !(lo > 0.0) {
        return Err(Error::MmfNoFeasiblePoint(0.0));
    }
    let mut hi = norm.sinr_upper_bound().max(lo);
    let mut iterations = 0;
    let mut undecided = 0;
    while (hi - lo) > options.bisect_tol * hi && iterations < MAX_BISECTIONS {
        let mid = if hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        iterations += 1;
        match backend.check(&norm, mid, options.feas_tol, Some(&best)) {
            Feasibility::Feasible(x) => {
                let achieved = min_of(&x);
                if achieved >= lo {
                    best = x;
                }
                // a slackened witness still certifies the target up to feas_tol
                lo = lo.max(achieved).max(mid * (1.0 - options.feas_tol).powi(2));
            }
            Feasibility::Infeasible => hi = mid,
            Feasibility::Undecided => {
                undecided += 1;
                hi = mid;
            }
        }
        lo = lo.min(hi);
    }
    if undecided > 0 {
        log::debug!("{scheme} MMF: {undecided} undecided feasibility tests");
    }

    equalize(&norm, &mut best);
    let u = norm.to_u(&best, m, k);
    let eta = problem.eta_from_u(&u);
    let alloc = PowerAllocation { eta, scheme };
    let report = closedform::evaluate_with(snap, &alloc, config, ConstraintPolicy::Enforce)?;
    Ok(MmfSolution {
        scheme,
        nu: report.min_sinr(),
        nu_upper: hi,
        eta: alloc.eta,
        iterations,
        undecided,
        feas_tol: options.feas_tol,
        bisect_tol: options.bisect_tol,
        backend: backend.name(),
        extension: problem.extension,
    })
}

/// Audit of an MMF solution against the closed forms.
#[derive(Debug, Clone, PartialEq)]
pub struct MmfAudit {
    pub sinr: Vec<f64>,
    pub min_sinr: f64,
    pub max_sinr: f64,
    pub max_load: f64,
    pub equal_sinr: bool,
    pub constraints_ok: bool,
    pub reaches_target: bool,
}

impl MmfAudit {
    pub fn passed(&self) -> bool {
        self.equal_sinr && self.constraints_ok && self.reaches_target
    }
}

/// Recomputes all SINRs and checks the equal-SINR property, the target
/// and the per-AP constraints.
pub fn verify_mmf(snap: &Snapshot, config: &SystemConfig, solution: &MmfSolution) -> Result<MmfAudit> {
    let alloc = solution.allocation();
    let report = closedform::evaluate_with(snap, &alloc, config, ConstraintPolicy::Warn)?;
    let loads = closedform::constraint_loads(snap, &alloc.eta, alloc.scheme, config.antennas);
    let max_load = loads.iter().copied().fold(0.0, f64::max);
    let min_sinr = report.min_sinr();
    let max_sinr = report.sinr.iter().copied().fold(0.0, f64::max);
    Ok(MmfAudit {
        equal_sinr: max_sinr - min_sinr <= 10.0 * solution.bisect_tol * solution.nu,
        constraints_ok: max_load <= 1.0 + closedform::POWER_TOL,
        reaches_target: min_sinr >= solution.nu * (1.0 - solution.bisect_tol),
        sinr: report.sinr,
        min_sinr,
        max_sinr,
        max_load,
    })
}
