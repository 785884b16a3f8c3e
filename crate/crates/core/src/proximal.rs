//! Proximal-gradient and augmented-Lagrangian solvers: ISTA, FISTA,
//! SpaRSA, iterative half thresholding, PALM and DALM.

use std::f64::consts::PI;

use crate::error::{Result, SparseError};
use crate::linalg::{Matrix, Vector};
use crate::problem::{lasso_value, Constraint, SolverConfig, SparseProblem, SparseSolution};

/// `sign(s)·max(|s| − λ, 0)`
pub fn soft_threshold_scalar(s: f64, lambda: f64) -> f64 {
    let m = s.abs() - lambda;
    if m > 0.0 {
        m.copysign(s)
    } else {
        0.0
    }
}

pub fn soft_threshold(s: &Vector, lambda: f64) -> Vector {
    s.map(|v| soft_threshold_scalar(v, lambda))
}

/// Magnitude below which the half-thresholding operator returns 0, for
/// the combined weight `λτ`.
pub fn half_threshold_cut(lambda_tau: f64) -> f64 {
    54f64.cbrt() / 4.0 * lambda_tau.powf(2.0 / 3.0)
}

/// Minimizer of `(a − x)² + λτ·√|a|` for one coordinate.
pub fn half_threshold_scalar(x: f64, lambda_tau: f64) -> f64 {
    if x.abs() <= half_threshold_cut(lambda_tau) {
        return 0.0;
    }
    let arg = (lambda_tau / 8.0 * (x.abs() / 3.0).powf(-1.5)).clamp(-1.0, 1.0);
    let g = arg.acos();
    2.0 / 3.0 * x * (1.0 + (2.0 * PI / 3.0 - 2.0 / 3.0 * g).cos())
}

pub fn half_threshold(x: &Vector, lambda: f64, tau: f64) -> Vector {
    let lt = lambda * tau;
    x.map(|v| half_threshold_scalar(v, lt))
}

/// Iterate of the accelerated proximal-gradient scheme.
#[derive(Debug, Clone)]
pub struct ProximalState {
    pub alpha: Vector,
    /// Extrapolated point the next gradient is taken at.
    pub momentum_alpha: Vector,
    /// Momentum sequence, starts at 1.
    pub mu_seq: f64,
    pub step_tau: f64,
    pub lambda_current: f64,
}

impl ProximalState {
    pub fn new(alpha: Vector, step_tau: f64, lambda: f64) -> Self {
        ProximalState { momentum_alpha: alpha.clone(), alpha, mu_seq: 1.0, step_tau, lambda_current: lambda }
    }

    /// One FISTA step: shrink at the extrapolated point, advance the
    /// momentum sequence, extrapolate. Returns `‖Δα‖`.
    pub fn fista_step(&mut self, x: &Matrix, y: &Vector) -> f64 {
        let grad = x.tr_mul(&(x * &self.momentum_alpha - y));
        let theta = &self.momentum_alpha - grad * self.step_tau;
        let next = soft_threshold(&theta, self.lambda_current * self.step_tau);
        let mu_next = (1.0 + (1.0 + 4.0 * self.mu_seq * self.mu_seq).sqrt()) / 2.0;
        let diff = &next - &self.alpha;
        self.momentum_alpha = &next + &diff * ((self.mu_seq - 1.0) / mu_next);
        self.mu_seq = mu_next;
        self.alpha = next;
        diff.norm()
    }
}

fn rel_change(delta: f64, alpha: &Vector) -> f64 {
    let a = alpha.norm();
    if a == 0.0 {
        delta
    } else {
        delta / a
    }
}

/// Runs FISTA on `½‖y − Xα‖² + λ‖α‖₁` from `start`.
/// Returns the state, iteration count, convergence flag and, when
/// `record` is set, the objective after each iteration.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fista_core(
    x: &Matrix,
    y: &Vector,
    lambda: f64,
    start: Vector,
    step: f64,
    max_iter: usize,
    tol: f64,
    record: bool,
) -> (ProximalState, usize, bool, Vec<f64>) {
    let mut st = ProximalState::new(start, step, lambda);
    let mut trace = Vec::new();
    if record {
        trace.push(lasso_value(x, y, &st.alpha, lambda));
    }
    for it in 1..=max_iter {
        let delta = st.fista_step(x, y);
        if record {
            trace.push(lasso_value(x, y, &st.alpha, lambda));
        }
        if rel_change(delta, &st.alpha) <= tol {
            return (st, it, true, trace);
        }
    }
    (st, max_iter, false, trace)
}

fn lipschitz(problem: &SparseProblem<'_>) -> f64 {
    let s = problem.dict.spectral_norm();
    (s * s).max(f64::MIN_POSITIVE)
}

/// Iterative shrinkage-thresholding with fixed step `1/‖XᵀX‖₂`.
pub fn ista_solve(problem: &SparseProblem<'_>, config: &SolverConfig) -> Result<SparseSolution> {
    config.validate()?;
    let lambda = problem.require_lagrangian("ista")?;
    let x = problem.x();
    let y = &problem.probe;
    let tau = config.step("step", 1.0 / lipschitz(problem));
    let mut alpha = Vector::zeros(x.ncols());
    let mut trace = vec![lasso_value(x, y, &alpha, lambda)];
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=config.max_iterations {
        iters = it;
        let theta = &alpha - x.tr_mul(&(x * &alpha - y)) * tau;
        let next = soft_threshold(&theta, lambda * tau);
        let delta = (&next - &alpha).norm();
        alpha = next;
        trace.push(lasso_value(x, y, &alpha, lambda));
        if rel_change(delta, &alpha) <= config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(SparseSolution::from_alpha(problem, alpha, trace, iters, converged))
}

/// FISTA with Lipschitz estimate `L = 2λ_max(XᵀX)` (override with the
/// `"lipschitz_scale"` knob).
pub fn fista_solve(problem: &SparseProblem<'_>, config: &SolverConfig) -> Result<SparseSolution> {
    config.validate()?;
    let lambda = problem.require_lagrangian("fista")?;
    let l = config.step("lipschitz_scale", 2.0) * lipschitz(problem);
    let (st, iters, converged, trace) = fista_core(
        problem.x(),
        &problem.probe,
        lambda,
        Vector::zeros(problem.dict.num_atoms()),
        1.0 / l,
        config.max_iterations,
        config.tolerance,
        true,
    );
    Ok(SparseSolution::from_alpha(problem, st.alpha, trace, iters, converged))
}

/// SpaRSA: shrinkage with Barzilai-Borwein steps and continuation on λ.
///
/// Knobs: `"gamma"` (continuation factor, 0.2), `"eta_min"`/`"eta_max"`
/// (BB safeguard, 1e-30/1e30).
pub fn sparsa_solve(problem: &SparseProblem<'_>, config: &SolverConfig) -> Result<SparseSolution> {
    config.validate()?;
    let lambda = problem.require_lagrangian("sparsa")?;
    let gamma = config.step("gamma", 0.2);
    let eta_min = config.step("eta_min", 1e-30);
    let eta_max = config.step("eta_max", 1e30);
    let x = problem.x();
    let y = &problem.probe;
    let n = x.ncols();

    let mut alpha = Vector::zeros(n);
    let mut resid = y.clone();
    let mut grad = -x.tr_mul(y);
    let mut trace = vec![lasso_value(x, y, &alpha, lambda)];
    let mut iters = 0;
    let mut eta = lipschitz(problem);
    // Recent objective values for the nonmonotone acceptance test.
    const MEMORY: usize = 5;
    loop {
        let lam_t = (gamma * grad.amax()).max(lambda);
        let mut recent: Vec<f64> = vec![lasso_value(x, y, &alpha, lam_t)];
        let mut stage_done = false;
        while iters < config.max_iterations {
            iters += 1;
            // Backtrack on η until the nonmonotone sufficient decrease holds.
            let ref_obj = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (next, next_resid, next_obj) = loop {
                let cand = soft_threshold(&(&alpha - &grad / eta), lam_t / eta);
                let r = y - x * &cand;
                let obj = 0.5 * r.norm_squared() + lam_t * cand.lp_norm(1);
                let step = (&cand - &alpha).norm_squared();
                if obj <= ref_obj - 1e-5 * eta / 2.0 * step || eta >= eta_max {
                    break (cand, r, obj);
                }
                eta = (eta * 2.0).min(eta_max);
            };
            let next_grad = -x.tr_mul(&next_resid);
            let ds = &next - &alpha;
            let dg = &next_grad - &grad;
            let delta = ds.norm();
            alpha = next;
            resid = next_resid;
            grad = next_grad;
            trace.push(lasso_value(x, y, &alpha, lambda));
            recent.push(next_obj);
            if recent.len() > MEMORY {
                recent.remove(0);
            }
            let ss = ds.norm_squared();
            if ss > 0.0 {
                eta = (ds.dot(&dg) / ss).clamp(eta_min, eta_max);
            }
            if rel_change(delta, &alpha) <= config.tolerance {
                stage_done = true;
                break;
            }
        }
        if !stage_done {
            break;
        }
        if lam_t <= lambda {
            let _ = resid;
            return Ok(SparseSolution::from_alpha(problem, alpha, trace, iters, true));
        }
    }
    Ok(SparseSolution::from_alpha(problem, alpha, trace, iters, false))
}

/// Iterative half thresholding for `‖Xα − y‖² + λ‖α‖_½^½` with λ re-tuned
/// every iteration so that at most `k` coefficients survive.
///
/// The trace holds the objective with the λ in force at that iteration.
pub fn half_proximal_solve(problem: &SparseProblem<'_>, config: &SolverConfig, k: usize) -> Result<SparseSolution> {
    config.validate()?;
    if k == 0 {
        return Err(SparseError::InvalidParameter("target sparsity must be ≥ 1".into()));
    }
    let x = problem.x();
    let y = &problem.probe;
    let n = x.ncols();
    let eps = config.step("epsilon", 0.01);
    let tau = (1.0 - eps) / lipschitz(problem);
    let mut alpha = Vector::zeros(n);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=config.max_iterations {
        iters = it;
        let theta = &alpha + x.tr_mul(&(y - x * &alpha)) * tau;
        let mut mags: Vec<f64> = theta.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let kth = mags.get(k).copied().unwrap_or(0.0);
        let lam_t = (96f64.sqrt() / (9.0 * tau) * kth.powf(1.5)).max(1e-12);
        let next = half_threshold(&theta, lam_t, tau);
        let delta = (&next - &alpha).norm();
        alpha = next;
        let penalty: f64 = alpha.iter().map(|v| v.abs().sqrt()).sum();
        trace.push((x * &alpha - y).norm_squared() + lam_t * penalty);
        if rel_change(delta, &alpha) <= config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(SparseSolution::from_alpha(problem, alpha, trace, iters, converged))
}

fn require_interpolating(problem: &SparseProblem<'_>, solver: &'static str) -> Result<()> {
    match problem.constraint {
        Constraint::Interpolating => Ok(()),
        _ => Err(problem.unsupported(solver)),
    }
}

/// Primal augmented Lagrangian for `min ‖α‖₁ s.t. y = Xα`.
///
/// Each outer step solves `½‖y + z/β − Xα‖² + (1/β)‖α‖₁` by warm-started
/// FISTA, then updates the multiplier `z ← z + β(y − Xα)`. β defaults to
/// `2d/‖y‖₁` (knob `"beta"`); the inner solve stops at relative change
/// `"inner_tol"` (default 1% of the outer tolerance) or after
/// `"inner_iters"` (1000) iterations. Looser inner solves stall the outer
/// feasibility well above the tolerance.
pub fn palm_solve(problem: &SparseProblem<'_>, config: &SolverConfig) -> Result<SparseSolution> {
    config.validate()?;
    require_interpolating(problem, "palm")?;
    let x = problem.x();
    let y = &problem.probe;
    let n = x.ncols();
    let ynorm = y.norm();
    if ynorm == 0.0 {
        return Ok(SparseSolution::from_alpha(problem, Vector::zeros(n), vec![0.0], 0, true));
    }
    let beta = config.step("beta", 2.0 * y.len() as f64 / y.lp_norm(1));
    let inner_tol = config.step("inner_tol", (1e-2 * config.tolerance).max(1e-14));
    let inner_iters = config.step("inner_iters", 1000.0).max(1.0) as usize;
    let step = 1.0 / (config.step("lipschitz_scale", 2.0) * lipschitz(problem));

    let mut z = Vector::zeros(y.len());
    let mut alpha = Vector::zeros(n);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=config.max_iterations {
        iters = it;
        let target = y + &z / beta;
        let (st, _, _, _) = fista_core(x, &target, 1.0 / beta, alpha.clone(), step, inner_iters, inner_tol, false);
        alpha = st.alpha;
        let r = y - x * &alpha;
        z += &r * beta;
        trace.push(alpha.lp_norm(1));
        if r.norm() <= config.tolerance * ynorm {
            converged = true;
            break;
        }
    }
    Ok(SparseSolution::from_alpha(problem, alpha, trace, iters, converged))
}

/// Dual augmented Lagrangian for `min ‖α‖₁ s.t. y = Xα`.
///
/// Works on the dual `max yᵀλ s.t. ‖Xᵀλ‖∞ ≤ 1` with splitting `z = Xᵀλ`;
/// the primal coefficients are the multipliers of that split. Penalty
/// `τ = (1−ε)/‖X‖²` with ε = 0.01 (knobs `"tau"`, `"epsilon"`). Stops once
/// `‖z − Xᵀλ‖∞ ≤ tol` and the duality gap is below `tol·‖α‖₁`.
pub fn dalm_solve(problem: &SparseProblem<'_>, config: &SolverConfig) -> Result<SparseSolution> {
    dalm_with_trace(problem, config, |_| {})
}

/// [`dalm_solve`] reporting every z iterate to `observe`.
pub fn dalm_with_trace(
    problem: &SparseProblem<'_>,
    config: &SolverConfig,
    mut observe: impl FnMut(&Vector),
) -> Result<SparseSolution> {
    config.validate()?;
    require_interpolating(problem, "dalm")?;
    let x = problem.x();
    let y = &problem.probe;
    let n = x.ncols();
    let eps = config.step("epsilon", 0.01);
    let tau = config.step("tau", (1.0 - eps) / lipschitz(problem));
    let chol = (x * x.transpose() * tau)
        .cholesky()
        .ok_or_else(|| SparseError::Singular("XXᵀ is not invertible".into()))?;
    if y.norm() == 0.0 {
        return Ok(SparseSolution::from_alpha(problem, Vector::zeros(n), vec![0.0], 0, true));
    }
    let mut mu = Vector::zeros(n);
    let mut lam = Vector::zeros(y.len());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=config.max_iterations {
        iters = it;
        let xl = x.tr_mul(&lam);
        let z = (&xl + &mu / tau).map(|v| v.clamp(-1.0, 1.0));
        observe(&z);
        let rhs = x * &z * tau + y - x * &mu;
        lam = chol.solve(&rhs);
        let xl = x.tr_mul(&lam);
        let gap_vec = &z - &xl;
        mu -= &gap_vec * tau;
        let l1 = mu.lp_norm(1);
        trace.push(l1);
        let dual = y.dot(&lam);
        if gap_vec.amax() <= config.tolerance && (l1 - dual).abs() <= config.tolerance * l1.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(SparseSolution::from_alpha(problem, mu, trace, iters, converged))
}
