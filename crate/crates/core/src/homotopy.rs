//! Path-following solvers: LASSO homotopy, BPDN homotopy and iteratively
//! reweighted homotopy.

use std::io::Write;

use crate::error::{Result, SparseError};
use crate::linalg::{solve_gram_guarded, Matrix, Vector};
use crate::problem::{
    weighted_certificate, Constraint, SolverConfig, SolverFlags, SparseProblem, SparseSolution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEvent {
    AtomAdded(usize),
    AtomRemoved(usize),
    Terminal,
}

#[derive(Debug, Clone)]
pub struct HomotopyPathPoint {
    pub lambda: f64,
    pub alpha: Vector,
    pub support: Vec<usize>,
    pub signs: Vec<i8>,
    pub event: PathEvent,
}

/// Writes one `lambda,event,index,nnz` row per path point, with a header.
pub fn write_path_csv<W: Write>(path: &[HomotopyPathPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "lambda,event,index,nnz")?;
    for p in path {
        let (event, index) = match p.event {
            PathEvent::AtomAdded(i) => ("add", i.to_string()),
            PathEvent::AtomRemoved(i) => ("remove", i.to_string()),
            PathEvent::Terminal => ("terminal", String::new()),
        };
        writeln!(out, "{:e},{},{},{}", p.lambda, event, index, p.support.len())?;
    }
    Ok(())
}

/// Active set with signs, kept in insertion order.
#[derive(Debug, Clone, Default)]
struct ActiveSet {
    idx: Vec<usize>,
    sign: Vec<f64>,
}

impl ActiveSet {
    fn contains(&self, i: usize) -> bool {
        self.idx.contains(&i)
    }

    fn add(&mut self, i: usize, s: f64) {
        self.idx.push(i);
        self.sign.push(s);
    }

    fn remove(&mut self, i: usize) {
        if let Some(pos) = self.idx.iter().position(|&j| j == i) {
            self.idx.remove(pos);
            self.sign.remove(pos);
        }
    }

    fn sign_of(&self, i: usize) -> f64 {
        self.idx.iter().position(|&j| j == i).map_or(0.0, |pos| self.sign[pos])
    }

    fn sorted(&self) -> (Vec<usize>, Vec<i8>) {
        let mut pairs: Vec<(usize, i8)> = self.idx.iter().zip(&self.sign).map(|(&i, &s)| (i, s as i8)).collect();
        pairs.sort();
        pairs.into_iter().unzip()
    }

    /// Solves `X_Λᵀ X_Λ d = rhs_Λ`.
    fn solve(&self, gram: &Matrix, rhs: impl Fn(usize, usize) -> f64, ridge: &mut bool) -> Vector {
        let s = self.idx.len();
        let g = Matrix::from_fn(s, s, |a, b| gram[(self.idx[a], self.idx[b])]);
        let r = Vector::from_fn(s, |a, _| rhs(a, self.idx[a]));
        let (d, used) = solve_gram_guarded(&g, &r, 1e-10);
        *ridge |= used;
        d
    }
}

fn point(lambda: f64, alpha: &Vector, active: &ActiveSet, event: PathEvent) -> HomotopyPathPoint {
    let (support, signs) = active.sorted();
    HomotopyPathPoint { lambda, alpha: alpha.clone(), support, signs, event }
}

/// LASSO homotopy from `λ₀ = ‖Xᵀy‖∞` down to the target λ (or to 0 for an
/// interpolating problem), recording one path point per breakpoint.
///
/// Steps are the smallest positive distance to the next support change;
/// when an addition and a removal tie, the removal is taken. The number of
/// breakpoints is capped at `4n`.
pub fn lasso_homotopy(
    problem: &SparseProblem<'_>,
    config: &SolverConfig,
) -> Result<(SparseSolution, Vec<HomotopyPathPoint>)> {
    config.validate()?;
    let target = match problem.constraint {
        Constraint::Lagrangian(l) => l,
        Constraint::Interpolating => 0.0,
        _ => return Err(problem.unsupported("lasso-homotopy")),
    };
    let x = problem.x();
    let y = &problem.probe;
    let n = x.ncols();
    let gram = problem.dict.gram();
    let xty = x.tr_mul(y);
    let mut alpha = Vector::zeros(n);
    let mut path = Vec::new();
    let mut flags = SolverFlags::default();

    let lambda0 = xty.amax();
    if lambda0 == 0.0 || lambda0 <= target {
        let sol = SparseSolution::from_alpha(problem, alpha, vec![lambda0], 0, true);
        return Ok((sol, path));
    }
    let stop_at = target;
    let mut lambda = lambda0;
    let mut active = ActiveSet::default();
    let first = (0..n).find(|&i| xty[i].abs() == lambda0).expect("max exists");
    active.add(first, xty[first].signum());
    path.push(point(lambda, &alpha, &active, PathEvent::AtomAdded(first)));
    let mut last_change: Option<PathEvent> = Some(PathEvent::AtomAdded(first));
    // A just-removed atom sits on the boundary with its old sign; only that
    // boundary is skipped on the next step.
    let mut left_boundary: Option<(usize, f64)> = None;
    let mut trace = vec![lambda];
    let budget = 4 * n;
    let mut converged = false;

    for _ in 0..budget {
        let delta = active.solve(gram, |a, _| active.sign[a], &mut flags.ridge_used);
        // Correlation of every atom with the on-support direction.
        let mut dir = Vector::zeros(n);
        for (a, &i) in active.idx.iter().enumerate() {
            dir[i] = delta[a];
        }
        let a_vec = gram * &dir;
        let p = &xty - gram * &alpha;

        let mut best_add: Option<(f64, usize, f64)> = None;
        for i in 0..n {
            if active.contains(i) {
                continue;
            }
            for (num, den, s) in [(lambda - p[i], 1.0 - a_vec[i], 1.0), (lambda + p[i], 1.0 + a_vec[i], -1.0)] {
                if left_boundary == Some((i, s)) {
                    continue;
                }
                if den != 0.0 {
                    let g = num / den;
                    if g > 0.0 && best_add.is_none_or(|(b, _, _)| g < b) {
                        best_add = Some((g, i, s));
                    }
                }
            }
        }
        let mut best_rm: Option<(f64, usize)> = None;
        for (a, &i) in active.idx.iter().enumerate() {
            if last_change == Some(PathEvent::AtomAdded(i)) || delta[a] == 0.0 {
                continue;
            }
            let g = -alpha[i] / delta[a];
            if g > 0.0 && best_rm.is_none_or(|(b, _)| g < b) {
                best_rm = Some((g, i));
            }
        }
        let to_target = lambda - stop_at;
        let g_add = best_add.map_or(f64::INFINITY, |b| b.0);
        let g_rm = best_rm.map_or(f64::INFINITY, |b| b.0);
        let g_event = g_add.min(g_rm);
        if g_event >= to_target * (1.0 - 1e-12) {
            alpha += &dir * to_target;
            lambda = stop_at;
            trace.push(lambda);
            path.push(point(lambda, &alpha, &active, PathEvent::Terminal));
            converged = true;
            break;
        }
        alpha += &dir * g_event;
        lambda -= g_event;
        trace.push(lambda);
        left_boundary = None;
        let event = if g_rm <= g_add {
            let (_, i) = best_rm.unwrap();
            left_boundary = Some((i, active.sign_of(i)));
            alpha[i] = 0.0;
            active.remove(i);
            PathEvent::AtomRemoved(i)
        } else {
            let (_, i, s) = best_add.unwrap();
            active.add(i, s);
            PathEvent::AtomAdded(i)
        };
        last_change = Some(event);
        path.push(point(lambda, &alpha, &active, event));
        if lambda <= config.tolerance * lambda0 && target == 0.0 {
            converged = true;
            break;
        }
    }
    let sol = SparseSolution::from_alpha(problem, alpha, trace, path.len(), converged).with_flags(flags);
    Ok((sol, path))
}

/// Solves the weighted problem with fixed signs on the current support and
/// refreshes the support until it is consistent: sign flips are dropped,
/// the worst off-support violator is added. Returns false if the refresh
/// does not settle.
fn settle_support(
    x: &Matrix,
    gram: &Matrix,
    xty: &Vector,
    weights: &Vector,
    active: &mut ActiveSet,
    alpha: &mut Vector,
    ridge: &mut bool,
) -> bool {
    let n = x.ncols();
    for _ in 0..(4 * n + 4) {
        let coef = active.solve(gram, |a, i| xty[i] - weights[i] * active.sign[a], ridge);
        let flipped: Vec<usize> = active
            .idx
            .iter()
            .enumerate()
            .filter(|(a, _)| coef[*a] * active.sign[*a] <= 0.0)
            .map(|(_, &i)| i)
            .collect();
        alpha.fill(0.0);
        for (a, &i) in active.idx.iter().enumerate() {
            alpha[i] = coef[a];
        }
        if !flipped.is_empty() {
            for i in flipped {
                alpha[i] = 0.0;
                active.remove(i);
            }
            continue;
        }
        let corr = xty - gram * &*alpha;
        let mut worst: Option<(f64, usize)> = None;
        for i in 0..n {
            if active.contains(i) {
                continue;
            }
            let excess = corr[i].abs() - weights[i] * (1.0 + 1e-12);
            if excess > 0.0 && worst.is_none_or(|(w, _)| excess > w) {
                worst = Some((excess, i));
            }
        }
        match worst {
            Some((_, i)) => active.add(i, corr[i].signum()),
            None => return true,
        }
    }
    false
}

/// BPDN homotopy: λ decreases linearly from just above `‖Xᵀy‖∞` to the
/// target in `"steps"` (500) equal decrements; at each λ the closed-form
/// on-support solution is computed and the support refreshed.
pub fn bpdn_homotopy(problem: &SparseProblem<'_>, config: &SolverConfig) -> Result<SparseSolution> {
    config.validate()?;
    let target = problem.require_lagrangian("bpdn-homotopy")?;
    let x = problem.x();
    let y = &problem.probe;
    let n = x.ncols();
    let gram = problem.dict.gram();
    let xty = x.tr_mul(y);
    let lambda0 = xty.amax() * (1.0 + 1e-9);
    let mut alpha = Vector::zeros(n);
    if lambda0 <= target || lambda0 == 0.0 {
        return Ok(SparseSolution::from_alpha(problem, alpha, vec![target], 0, true));
    }
    let steps = config.step("steps", 500.0).max(1.0) as usize;
    let tau = (lambda0 - target) / steps as f64;
    let mut active = ActiveSet::default();
    let mut flags = SolverFlags::default();
    let mut trace = Vec::with_capacity(steps);
    let mut settled = true;
    let mut iters = 0;
    for k in 1..=steps.min(config.max_iterations) {
        iters = k;
        let lambda = if k == steps { target } else { lambda0 - tau * k as f64 };
        let w = Vector::from_element(n, lambda);
        settled = settle_support(x, gram, &xty, &w, &mut active, &mut alpha, &mut flags.ridge_used);
        trace.push(lambda);
    }
    let converged = settled && iters == steps;
    Ok(SparseSolution::from_alpha(problem, alpha, trace, iters, converged).with_flags(flags))
}

/// Traces the weighted-l1 solution as the weights move linearly from
/// `from` to `to`, starting at the optimal `alpha`/`active` for `from`.
fn trace_weights(
    gram: &Matrix,
    xty: &Vector,
    from: &Vector,
    to: &Vector,
    alpha: &mut Vector,
    active: &mut ActiveSet,
    ridge: &mut bool,
) -> bool {
    let n = gram.ncols();
    let s = to - from;
    let mut sig = 0.0;
    let mut last: Option<PathEvent> = None;
    for _ in 0..(4 * n + 4) {
        let r = from + &s * sig;
        // δ = G⁻¹ ((w − ŵ) ⊙ u) on the support.
        let delta = active.solve(gram, |a, i| -s[i] * active.sign[a], ridge);
        let mut dir = Vector::zeros(n);
        for (a, &i) in active.idx.iter().enumerate() {
            dir[i] = delta[a];
        }
        let q = gram * &dir;
        let p = gram * &*alpha - xty;
        let mut best_add: Option<(f64, usize, f64)> = None;
        for i in 0..n {
            if active.contains(i) || last == Some(PathEvent::AtomRemoved(i)) {
                continue;
            }
            for (num, den, sign) in [(r[i] - p[i], q[i] - s[i], -1.0), (-r[i] - p[i], q[i] + s[i], 1.0)] {
                if den != 0.0 {
                    let g = num / den;
                    if g > 0.0 && best_add.is_none_or(|(b, _, _)| g < b) {
                        best_add = Some((g, i, sign));
                    }
                }
            }
        }
        let mut best_rm: Option<(f64, usize)> = None;
        for (a, &i) in active.idx.iter().enumerate() {
            if last == Some(PathEvent::AtomAdded(i)) || delta[a] == 0.0 {
                continue;
            }
            let g = -alpha[i] / delta[a];
            if g > 0.0 && best_rm.is_none_or(|(b, _)| g < b) {
                best_rm = Some((g, i));
            }
        }
        let remaining = 1.0 - sig;
        let g_add = best_add.map_or(f64::INFINITY, |b| b.0);
        let g_rm = best_rm.map_or(f64::INFINITY, |b| b.0);
        let g = g_add.min(g_rm);
        if g >= remaining * (1.0 - 1e-12) {
            *alpha += &dir * remaining;
            return true;
        }
        *alpha += &dir * g;
        sig += g;
        if g_rm <= g_add {
            let (_, i) = best_rm.unwrap();
            alpha[i] = 0.0;
            active.remove(i);
            last = Some(PathEvent::AtomRemoved(i));
        } else {
            let (_, i, sign) = best_add.unwrap();
            active.add(i, sign);
            last = Some(PathEvent::AtomAdded(i));
        }
    }
    false
}

/// Iteratively reweighted l1 by homotopy.
///
/// First traces from uniform weights `1.01‖Xᵀy‖∞` (where α = 0 is optimal)
/// to `weights`, then performs `"rounds"` (4) reweighting passes with
/// `ŵ_i = λ / (|α_i| + "sigma_w")`, σ_w = 0.01, each traced by homotopy
/// from the previous weights. With zero rounds this is the plain weighted
/// solve. Returns the solution and the weights it is optimal for.
pub fn reweighted_homotopy_with_weights(
    problem: &SparseProblem<'_>,
    weights: &Vector,
    config: &SolverConfig,
) -> Result<(SparseSolution, Vector)> {
    config.validate()?;
    let lambda = problem.require_lagrangian("reweighted-homotopy")?;
    let n = problem.dict.num_atoms();
    if weights.len() != n {
        return Err(SparseError::DimensionMismatch(format!("{} weights for {} atoms", weights.len(), n)));
    }
    if !weights.iter().all(|w| *w > 0.0 && w.is_finite()) {
        return Err(SparseError::InvalidParameter("weights must be positive".into()));
    }
    let rounds = config.step("rounds", 4.0).max(0.0) as usize;
    let sigma_w = config.step("sigma_w", 0.01);
    let x = problem.x();
    let gram = problem.dict.gram();
    let xty = x.tr_mul(&problem.probe);
    let mut alpha = Vector::zeros(n);
    let mut active = ActiveSet::default();
    let mut flags = SolverFlags::default();
    let start = xty.amax() * 1.01;
    if start == 0.0 {
        return Ok((SparseSolution::from_alpha(problem, alpha, vec![], 0, true), weights.clone()));
    }
    let mut current = Vector::from_element(n, start);
    let mut ok = true;
    let mut trace = Vec::new();
    let mut next = weights.clone();
    for round in 0..=rounds {
        if round > 0 {
            next = alpha.map(|a| lambda / (a.abs() + sigma_w));
        }
        ok &= trace_weights(gram, &xty, &current, &next, &mut alpha, &mut active, &mut flags.ridge_used);
        // Clean up accumulated drift at the end of each trace.
        ok &= settle_support(x, gram, &xty, &next, &mut active, &mut alpha, &mut flags.ridge_used);
        current = next.clone();
        trace.push(0.5 * (&problem.probe - x * &alpha).norm_squared() + next.dot(&alpha.abs()));
    }
    debug_assert!(!ok || weighted_certificate(x, &problem.probe, &alpha, &current, 1e-6));
    let sol = SparseSolution::from_alpha(problem, alpha, trace, rounds + 1, ok).with_flags(flags);
    Ok((sol, current))
}

pub fn reweighted_homotopy(problem: &SparseProblem<'_>, weights: &Vector, config: &SolverConfig) -> Result<SparseSolution> {
    reweighted_homotopy_with_weights(problem, weights, config).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{check_optimality_l1, lasso_objective, Dictionary};
    use crate::proximal::{fista_solve, soft_threshold_scalar};
    use crate::rng::{gaussian_matrix, gaussian_vector, seeded};
    use proptest::prelude::*;

    fn random_instance(seed: u64, d: usize, n: usize) -> (Dictionary, Vector) {
        let mut rng = seeded(seed);
        let dict = Dictionary::normalized(gaussian_matrix(&mut rng, d, n)).unwrap();
        let y = gaussian_vector(&mut rng, d);
        (dict, y)
    }

    fn path_conditions_hold(dict: &Dictionary, y: &Vector, path: &[HomotopyPathPoint]) -> bool {
        let lambda0 = path.first().map_or(0.0, |pt| pt.lambda);
        path.iter().all(|pt| {
            let c = dict.atoms().tr_mul(&(y - dict.atoms() * &pt.alpha));
            let tol = 1e-6 * pt.lambda + 1e-9 * lambda0;
            let on = pt.support.iter().zip(&pt.signs).all(|(&i, &s)| (c[i] - pt.lambda * s as f64).abs() <= tol);
            let off = (0..c.len()).filter(|i| !pt.support.contains(i)).all(|i| c[i].abs() <= pt.lambda + tol);
            on && off
        })
    }

    #[test]
    fn zero_probe_has_empty_path() {
        let (d, _) = random_instance(1, 5, 8);
        let p = SparseProblem::new(&d, Vector::zeros(5), Constraint::Interpolating).unwrap();
        let (s, path) = lasso_homotopy(&p, &SolverConfig::default()).unwrap();
        assert!(path.is_empty());
        assert_eq!(s.alpha, Vector::zeros(8));
    }

    #[test]
    fn single_atom_path_is_soft_threshold() {
        let x = Vector::from_vec(vec![0.6, 0.8]);
        let d = Dictionary::new(Matrix::from_column_slice(2, 1, x.as_slice())).unwrap();
        let y = &x * -3.0;
        let p = SparseProblem::new(&d, y.clone(), Constraint::Interpolating).unwrap();
        let (s, path) = lasso_homotopy(&p, &SolverConfig::default()).unwrap();
        assert_eq!(path.len(), 2);
        assert!((path[0].lambda - 3.0).abs() < 1e-12);
        assert_eq!(path[0].event, PathEvent::AtomAdded(0));
        assert!((s.alpha[0] + 3.0).abs() < 1e-12);

        for lam in [0.5, 1.0, 2.5] {
            let p = SparseProblem::new(&d, y.clone(), Constraint::Lagrangian(lam)).unwrap();
            let (s, _) = lasso_homotopy(&p, &SolverConfig::default()).unwrap();
            assert!((s.alpha[0] - soft_threshold_scalar(-3.0, lam)).abs() < 1e-12);
            let b = bpdn_homotopy(&p, &SolverConfig::default()).unwrap();
            assert!((b.alpha[0] - soft_threshold_scalar(-3.0, lam)).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_fista_at_tenth_of_max() {
        for seed in 0..5 {
            let (d, y) = random_instance(10 + seed, 10, 20);
            let lam = 0.1 * d.atoms().tr_mul(&y).amax();
            let p = SparseProblem::new(&d, y.clone(), Constraint::Lagrangian(lam)).unwrap();
            let (s, path) = lasso_homotopy(&p, &SolverConfig::default()).unwrap();
            assert!(s.converged);
            let f = fista_solve(&p, &SolverConfig { max_iterations: 100_000, tolerance: 1e-13, ..Default::default() }).unwrap();
            let (oh, of) = (lasso_objective(&p, &s.alpha).unwrap(), lasso_objective(&p, &f.alpha).unwrap());
            assert!((oh - of).abs() <= 1e-5 * of, "{oh} {of}");
            assert!(check_optimality_l1(&p, &s.alpha, 1e-9));
            assert!(path_conditions_hold(&d, &y, &path));
            let b = bpdn_homotopy(&p, &SolverConfig::default()).unwrap();
            assert!(b.converged);
            assert!(check_optimality_l1(&p, &b.alpha, 1e-9));
        }
    }

    #[test]
    fn bpdn_large_lambda_is_zero() {
        let (d, y) = random_instance(3, 6, 9);
        let lam = 1.5 * d.atoms().tr_mul(&y).amax();
        let p = SparseProblem::new(&d, y, Constraint::Lagrangian(lam)).unwrap();
        assert_eq!(bpdn_homotopy(&p, &SolverConfig::default()).unwrap().alpha, Vector::zeros(9));
    }

    #[test]
    fn interpolating_terminal_is_feasible() {
        for seed in 0..5 {
            let (d, y) = random_instance(50 + seed, 8, 20);
            let p = SparseProblem::new(&d, y.clone(), Constraint::Interpolating).unwrap();
            let (s, _) = lasso_homotopy(&p, &SolverConfig::default()).unwrap();
            assert!(s.converged);
            assert!(s.residual_norm <= 1e-5 * y.norm());
        }
    }

    #[test]
    fn reweighted_uniform_weights_reduce_to_bpdn() {
        let (d, y) = random_instance(21, 10, 20);
        let lam = 0.1 * d.atoms().tr_mul(&y).amax();
        let p = SparseProblem::new(&d, y, Constraint::Lagrangian(lam)).unwrap();
        let cfg = SolverConfig::default().with_override("rounds", 0.0);
        let r = reweighted_homotopy(&p, &Vector::from_element(20, lam), &cfg).unwrap();
        let b = bpdn_homotopy(&p, &SolverConfig::default()).unwrap();
        let (or, ob) = (lasso_objective(&p, &r.alpha).unwrap(), lasso_objective(&p, &b.alpha).unwrap());
        assert!((or - ob).abs() <= 1e-4 * ob);
    }

    #[test]
    fn reweighted_zero_probe() {
        let (d, _) = random_instance(22, 5, 8);
        let p = SparseProblem::new(&d, Vector::zeros(5), Constraint::Lagrangian(0.1)).unwrap();
        let r = reweighted_homotopy(&p, &Vector::from_element(8, 0.1), &SolverConfig::default()).unwrap();
        assert_eq!(r.alpha, Vector::zeros(8));
    }

    #[test]
    fn reweighting_does_not_grow_planted_support() {
        let mut rng = seeded(23);
        let d = Dictionary::normalized(gaussian_matrix(&mut rng, 20, 40)).unwrap();
        let mut a0 = Vector::zeros(40);
        a0[2] = 1.0;
        a0[11] = -1.2;
        a0[29] = 0.8;
        let y = d.atoms() * &a0 + gaussian_vector(&mut rng, 20) * 0.01;
        let lam = 0.05 * d.atoms().tr_mul(&y).amax();
        let p = SparseProblem::new(&d, y, Constraint::Lagrangian(lam)).unwrap();
        let (l, _) = lasso_homotopy(&p, &SolverConfig::default()).unwrap();
        let (r, w) = reweighted_homotopy_with_weights(&p, &Vector::from_element(40, lam), &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.support.len() <= l.support.len());
        assert!(weighted_certificate(d.atoms(), &p.probe, &r.alpha, &w, 1e-4));
    }

    #[test]
    fn path_csv_format() {
        let (d, y) = random_instance(4, 4, 6);
        let p = SparseProblem::new(&d, y, Constraint::Interpolating).unwrap();
        let (_, path) = lasso_homotopy(&p, &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&path, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "lambda,event,index,nnz");
        assert_eq!(lines.len(), path.len() + 1);
        assert!(lines[1].contains(",add,"));
        assert!(lines.last().unwrap().contains(",terminal,,"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn path_is_monotone_and_optimal(seed in any::<u64>(), d in 3usize..9, extra in 1usize..10) {
            let (dict, y) = random_instance(seed, d, d + extra);
            let p = SparseProblem::new(&dict, y.clone(), Constraint::Interpolating).unwrap();
            let (_, path) = lasso_homotopy(&p, &SolverConfig::default()).unwrap();
            for w in path.windows(2) {
                prop_assert!(w[1].lambda < w[0].lambda);
                let diff = (w[0].support.len() as i64 - w[1].support.len() as i64).abs();
                prop_assert!(diff == 1 || w[1].event == PathEvent::Terminal);
            }
            prop_assert!(path_conditions_hold(&dict, &y, &path));
        }

        #[test]
        fn reweighted_certificate(seed in any::<u64>(), frac in 0.05f64..0.5) {
            let (dict, y) = random_instance(seed, 8, 16);
            let lam = frac * dict.atoms().tr_mul(&y).amax();
            let p = SparseProblem::new(&dict, y.clone(), Constraint::Lagrangian(lam)).unwrap();
            let (s, w) = reweighted_homotopy_with_weights(&p, &Vector::from_element(16, lam), &SolverConfig::default()).unwrap();
            prop_assert!(s.converged);
            prop_assert!(weighted_certificate(dict.atoms(), &y, &s.alpha, &w, 1e-4));
        }
    }
}
