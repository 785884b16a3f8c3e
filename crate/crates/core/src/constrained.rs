//! Constrained-optimization solvers for `½‖y − Xα‖² + λ‖α‖₁`: gradient
//! projection (GPSR), truncated-Newton interior point, and inexact ADM.

use crate::error::Result;
use crate::linalg::Vector;
use crate::problem::{lasso_value, SolverConfig, SolverFlags, SparseProblem, SparseSolution};
use crate::proximal::soft_threshold;

/// Gradient projection on the split `α = u − v`, `u, v ≥ 0`.
///
/// Initial step is the exact minimizer along the projected gradient,
/// clamped to `[sigma_min, sigma_max]`, then backtracked by `gamma` until the
/// Armijo condition with `beta` holds. Stops when the projected-gradient
/// residual `‖min(z, ∇G)‖∞` falls below `tol · ‖Xᵀy‖∞`.
pub fn gpsr_solve(problem: &SparseProblem<'_>, config: &SolverConfig) -> Result<SparseSolution> {
    config.validate()?;
    let lambda = problem.require_lagrangian("gpsr")?;
    let beta = config.step("beta", 0.1);
    let gamma = config.step("gamma", 0.5);
    let sigma_min = config.step("sigma_min", 1e-30);
    let sigma_max = config.step("sigma_max", 1e30);
    let x = problem.x();
    let y = &problem.probe;
    let n = x.ncols();
    let xty = x.tr_mul(y);
    let scale = xty.amax().max(f64::MIN_POSITIVE);

    // z = [u; v]; G(z) = ½‖y − X(u−v)‖² + λ·Σz − ½‖y‖²
    let objective = |u: &Vector, v: &Vector| 0.5 * (y - x * (u - v)).norm_squared() + lambda * (u.sum() + v.sum());
    let mut u = Vector::zeros(n);
    let mut v = Vector::zeros(n);
    let mut trace = vec![objective(&u, &v)];
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=config.max_iterations {
        let a = &u - &v;
        let q = x.tr_mul(&(x * &a)) - &xty;
        // ∇G = [λ + q; λ − q]
        let gu = q.map(|t| lambda + t);
        let gv = q.map(|t| lambda - t);
        let kkt = u.zip_map(&gu, |z, g| z.min(g).abs()).amax().max(v.zip_map(&gv, |z, g| z.min(g).abs()).amax());
        if kkt <= config.tolerance * scale {
            converged = true;
            iters = it - 1;
            break;
        }
        iters = it;
        // Masked gradient: components free to move.
        let mu = Vector::from_fn(n, |i, _| if u[i] > 0.0 || gu[i] < 0.0 { gu[i] } else { 0.0 });
        let mv = Vector::from_fn(n, |i, _| if v[i] > 0.0 || gv[i] < 0.0 { gv[i] } else { 0.0 });
        let xm = x * (&mu - &mv);
        let denom = xm.norm_squared();
        let num = mu.norm_squared() + mv.norm_squared();
        let mut sigma = if denom > 0.0 { num / denom } else { sigma_max };
        sigma = sigma.clamp(sigma_min, sigma_max);
        loop {
            let nu = (&u - &gu * sigma).map(|t| t.max(0.0));
            let nv = (&v - &gv * sigma).map(|t| t.max(0.0));
            let decrease = gu.dot(&(&u - &nu)) + gv.dot(&(&v - &nv));
            // G is quadratic, so its change is exact without subtracting two
            // nearly equal objective values.
            let change = -decrease + 0.5 * (x * ((&nu - &u) - (&nv - &v))).norm_squared();
            if change <= -beta * decrease || sigma <= sigma_min {
                // Cancel the shared part of each (u_i, v_i) pair: α is unchanged
                // and the λ·Σz term only drops.
                let shared = nu.zip_map(&nv, f64::min);
                u = nu - &shared;
                v = nv - &shared;
                debug_assert!(u.iter().chain(v.iter()).all(|t| *t >= 0.0));
                trace.push(objective(&u, &v));
                break;
            }
            sigma = (sigma * gamma).max(sigma_min);
        }
    }
    Ok(SparseSolution::from_alpha(problem, &u - &v, trace, iters, converged))
}

/// Outcome of the preconditioned CG solve.
struct Pcg {
    x: Vector,
    broke_down: bool,
}

/// Diagonal-preconditioned CG on `M x = b`, where `apply` computes `M p`.
fn pcg(apply: impl Fn(&Vector) -> Vector, precond: &Vector, b: &Vector, x0: Vector, rel_tol: f64, max_iter: usize) -> Pcg {
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Pcg { x: Vector::zeros(b.len()), broke_down: false };
    }
    let mut x = x0;
    let mut r = b - apply(&x);
    let mut z = r.component_div(precond);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for _ in 0..max_iter {
        if r.norm() <= rel_tol * bnorm {
            break;
        }
        let mp = apply(&p);
        let pmp = p.dot(&mp);
        if !(pmp > 0.0) || !pmp.is_finite() {
            return Pcg { x, broke_down: true };
        }
        let step = rz / pmp;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &mp, 1.0);
        z = r.component_div(precond);
        let rz_new = r.dot(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
    }
    let broke_down = !x.iter().all(|t| t.is_finite());
    Pcg { x, broke_down }
}

/// Truncated-Newton interior-point method on the bound-constrained
/// reformulation `min ½‖y − Xα‖² + λ·Σσ, |α_i| ≤ σ_i`.
///
/// Log-barrier weight `v` starts at `1/λ` and doubles after every Newton
/// step (`"barrier_growth"` knob). Newton systems are reduced to the α
/// block and solved by diagonal-preconditioned CG (≤ 200 iterations,
/// relative tolerance `min(0.1, ½·gap/‖∇‖)`). The trace records the duality
/// gap; iteration stops when `gap / dual ≤ tol`.
pub fn tnipm_solve(problem: &SparseProblem<'_>, config: &SolverConfig) -> Result<SparseSolution> {
    config.validate()?;
    let lambda = problem.require_lagrangian("tnipm")?;
    let growth = config.step("barrier_growth", 2.0);
    let cg_beta = config.step("cg_beta", 0.5);
    let ls_rho = config.step("rho", 0.01);
    let x = problem.x();
    let y = &problem.probe;
    let n = x.ncols();
    let gram_diag = Vector::from_fn(n, |i, _| x.column(i).norm_squared());

    let mut alpha = Vector::zeros(n);
    let mut sigma = Vector::from_element(n, 1.0);
    let mut v = 1.0 / lambda;
    let mut dalpha = Vector::zeros(n);
    let mut trace = Vec::new();
    let mut flags = SolverFlags::default();
    let mut converged = false;
    let mut iters = 0;

    let barrier = |a: &Vector, s: &Vector, v: f64| -> f64 {
        let r = x * a - y;
        let mut phi = v * (0.5 * r.norm_squared() + lambda * s.sum());
        for i in 0..a.len() {
            phi -= (s[i] + a[i]).ln() + (s[i] - a[i]).ln();
        }
        phi
    };

    for it in 0..=config.max_iterations {
        let resid = y - x * &alpha;
        let corr = x.tr_mul(&resid);
        let mut scale: f64 = 1.0;
        for c in corr.iter() {
            if *c != 0.0 {
                scale = scale.min(lambda / c.abs());
            }
        }
        let nu = &resid * scale;
        let primal = 0.5 * resid.norm_squared() + lambda * alpha.lp_norm(1);
        let dual = -0.5 * nu.norm_squared() + nu.dot(y);
        let gap = (primal - dual).max(0.0);
        trace.push(gap);
        iters = it;
        if gap <= config.tolerance * dual.abs() || gap <= f64::MIN_POSITIVE {
            converged = true;
            break;
        }
        if it == config.max_iterations {
            break;
        }

        let q1 = sigma.zip_map(&alpha, |s, a| 1.0 / ((s + a) * (s + a)));
        let q2 = sigma.zip_map(&alpha, |s, a| 1.0 / ((s - a) * (s - a)));
        let d1 = &q1 + &q2;
        let d2 = &q1 - &q2;
        let denom = sigma.zip_map(&alpha, |s, a| s * s - a * a);
        let g_alpha = x.tr_mul(&(x * &alpha - y)) * v + alpha.zip_map(&denom, |a, d| 2.0 * a / d);
        let g_sigma = sigma.zip_map(&denom, |s, d| v * lambda - 2.0 * s / d);
        let gnorm = (g_alpha.norm_squared() + g_sigma.norm_squared()).sqrt();

        // Schur complement of the σ block.
        let schur = Vector::from_fn(n, |i, _| d1[i] - d2[i] * d2[i] / d1[i]);
        let rhs = Vector::from_fn(n, |i, _| -g_alpha[i] + d2[i] * g_sigma[i] / d1[i]);
        let precond = &gram_diag * v + &schur;
        let apply = |p: &Vector| x.tr_mul(&(x * p)) * v + schur.component_mul(p);
        let cg_tol = (cg_beta * gap / gnorm.max(f64::MIN_POSITIVE)).min(0.1);
        let sol = pcg(apply, &precond, &rhs, dalpha.clone(), cg_tol, 200);
        dalpha = if sol.broke_down {
            flags.cg_fallback = true;
            rhs.component_div(&precond)
        } else {
            sol.x
        };
        let dsigma = Vector::from_fn(n, |i, _| (-g_sigma[i] - d2[i] * dalpha[i]) / d1[i]);

        let phi0 = barrier(&alpha, &sigma, v);
        let slope = g_alpha.dot(&dalpha) + g_sigma.dot(&dsigma);
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..100 {
            let na = &alpha + &dalpha * step;
            let ns = &sigma + &dsigma * step;
            let feasible = (0..n).all(|i| ns[i] - na[i].abs() > 0.0);
            if feasible && barrier(&na, &ns, v) <= phi0 + ls_rho * step * slope {
                alpha = na;
                sigma = ns;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
        v *= growth;
    }
    Ok(SparseSolution::from_alpha(problem, alpha, trace, iters, converged).with_flags(flags))
}

/// Inexact alternating direction method on
/// `min (1/2λ)‖s‖² + ‖α‖₁ s.t. s = y − Xα`.
///
/// The α-subproblem is linearized with proximal parameter `1/‖X‖²`. The
/// penalty starts at `mu0/λ` (0.1/λ) and grows by `rho` (1.01) per iteration up to
/// `mu_max/λ` (1/λ). Converged when `‖s + Xα − y‖ ≤ tol‖y‖` and the relative α
/// change is at most `tol`.
pub fn adm_solve(problem: &SparseProblem<'_>, config: &SolverConfig) -> Result<SparseSolution> {
    config.validate()?;
    let lambda = problem.require_lagrangian("adm")?;
    let rho = config.step("rho", 1.01);
    let mut mu = config.step("mu0", 0.1) / lambda;
    let mu_max = config.step("mu_max", 1.0) / lambda;
    let x = problem.x();
    let y = &problem.probe;
    let n = x.ncols();
    let snorm = problem.dict.spectral_norm();
    let tau_p = config.step("prox", 1.0 / (snorm * snorm).max(f64::MIN_POSITIVE));
    let ynorm = y.norm();

    let mut alpha = Vector::zeros(n);
    let mut mult = Vector::zeros(y.len());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=config.max_iterations {
        iters = it;
        let xa = x * &alpha;
        let s = (&mult + (y - &xa) * mu) * (lambda / (1.0 + mu * lambda));
        let w = &s + &xa - y - &mult / mu;
        let next = soft_threshold(&(&alpha - x.tr_mul(&w) * tau_p), tau_p / mu);
        let delta = (&next - &alpha).norm();
        alpha = next;
        let feas = &s + x * &alpha - y;
        mult -= &feas * mu;
        mu = (mu * rho).min(mu_max);
        trace.push(lasso_value(x, y, &alpha, lambda));
        let anorm = alpha.norm();
        let rel = if anorm > 0.0 { delta / anorm } else { delta };
        if feas.norm() <= config.tolerance * ynorm && rel <= config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(SparseSolution::from_alpha(problem, alpha, trace, iters, converged))
}
