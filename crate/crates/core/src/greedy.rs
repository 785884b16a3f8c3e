//! Matching pursuit and orthogonal matching pursuit.

use crate::error::{Result, SparseError};
use crate::linalg::{solve_gram_guarded, Matrix, Vector};
use crate::problem::{Constraint, Dictionary, SolverConfig, SolverFlags, SparseProblem, SparseSolution};

/// Stopping rule shared by both pursuits: at most `max_atoms` selections,
/// stop early once `‖r‖ ≤ tau`.
struct Budget {
    max_atoms: usize,
    tau: f64,
    needs_bound: bool,
}

fn budget(problem: &SparseProblem<'_>, config: &SolverConfig, solver: &'static str) -> Result<Budget> {
    config.validate()?;
    if !problem.dict.is_normalized() {
        return Err(SparseError::InvalidParameter(format!("{solver} needs a unit-column dictionary")));
    }
    let ynorm = problem.probe.norm();
    match problem.constraint {
        Constraint::Sparsity(k) => Ok(Budget { max_atoms: k, tau: config.tolerance * ynorm, needs_bound: false }),
        Constraint::ResidualBound(eps) => Ok(Budget {
            max_atoms: usize::MAX,
            tau: eps,
            needs_bound: true,
        }),
        _ => Err(problem.unsupported(solver)),
    }
}

/// Index of the largest `|c_i|` among `eligible`, lowest index on ties.
fn argmax_abs(c: &Vector, eligible: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..c.len() {
        if !eligible(i) {
            continue;
        }
        let v = c[i].abs();
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Plain matching pursuit. Atoms may be picked repeatedly; each pick adds
/// the full correlation to that coefficient. The trace holds `‖r‖` after
/// each pick, starting with `‖y‖`.
pub fn mp_solve(problem: &SparseProblem<'_>, config: &SolverConfig) -> Result<SparseSolution> {
    let b = budget(problem, config, "mp")?;
    let x = problem.x();
    let n = x.ncols();
    let mut alpha = Vector::zeros(n);
    let mut r = problem.probe.clone();
    let mut trace = vec![r.norm()];
    let mut picks = 0;
    let limit = b.max_atoms.min(config.max_iterations);
    while trace[picks] > b.tau && picks < limit {
        let c = x.tr_mul(&r);
        let Some((j, cmax)) = argmax_abs(&c, |_| true) else { break };
        if cmax == 0.0 {
            break;
        }
        alpha[j] += c[j];
        r.axpy(-c[j], &x.column(j), 1.0);
        picks += 1;
        trace.push(r.norm());
    }
    let reached = trace[picks] <= b.tau;
    let converged = reached || (!b.needs_bound && picks == b.max_atoms);
    Ok(SparseSolution::from_alpha(problem, alpha, trace, picks, converged))
}

/// Outcome of the OMP kernel.
pub(crate) struct OmpCode {
    pub alpha: Vector,
    pub selected: Vec<usize>,
    pub trace: Vec<f64>,
    pub reached_bound: bool,
    pub ridge_used: bool,
}

/// OMP on a unit-column dictionary using its cached Gram matrix. Stops after
/// `max_atoms` picks, once `‖r‖ ≤ tau`, or when no unselected atom correlates
/// with the residual.
pub(crate) fn omp_kernel(dict: &Dictionary, y: &Vector, max_atoms: usize, tau: f64) -> OmpCode {
    let x = dict.atoms();
    let gram = dict.gram();
    let n = x.ncols();
    let base = x.tr_mul(y);
    let ynorm = y.norm();
    let mut corr = base.clone();
    let mut chosen = vec![false; n];
    let mut selected: Vec<usize> = Vec::new();
    let mut coef = Vector::zeros(0);
    let mut rnorm = ynorm;
    let mut trace = vec![rnorm];
    let mut ridge_used = false;
    let cap = max_atoms.min(n).min(x.nrows());
    while rnorm > tau && selected.len() < cap {
        let Some((j, cmax)) = argmax_abs(&corr, |i| !chosen[i]) else { break };
        if cmax <= 1e-14 * ynorm.max(f64::MIN_POSITIVE) {
            break;
        }
        chosen[j] = true;
        selected.push(j);
        let s = selected.len();
        let sub = Matrix::from_fn(s, s, |a, b| gram[(selected[a], selected[b])]);
        let rhs = Vector::from_fn(s, |a, _| base[selected[a]]);
        let (c, ridged) = solve_gram_guarded(&sub, &rhs, 1e-12);
        ridge_used |= ridged;
        coef = c;
        let mut r = y.clone();
        for (a, &idx) in selected.iter().enumerate() {
            r.axpy(-coef[a], &x.column(idx), 1.0);
        }
        rnorm = r.norm();
        trace.push(rnorm);
        corr = &base - gram.select_columns(&selected) * &coef;
    }
    let mut alpha = Vector::zeros(n);
    for (a, &idx) in selected.iter().enumerate() {
        alpha[idx] = coef[a];
    }
    OmpCode { alpha, selected, trace, reached_bound: rnorm <= tau, ridge_used }
}

/// Orthogonal matching pursuit: greedy selection followed by a least-squares
/// refit over all selected atoms at every step. The trace holds `‖r‖`.
pub fn omp_solve(problem: &SparseProblem<'_>, config: &SolverConfig) -> Result<SparseSolution> {
    let b = budget(problem, config, "omp")?;
    let limit = b.max_atoms.min(config.max_iterations);
    let code = omp_kernel(problem.dict, &problem.probe, limit, b.tau);
    let picks = code.selected.len();
    let converged = code.reached_bound || (!b.needs_bound && picks == b.max_atoms);
    Ok(SparseSolution::from_alpha(problem, code.alpha, code.trace, picks, converged)
        .with_flags(SolverFlags { ridge_used: code.ridge_used, ..Default::default() }))
}
