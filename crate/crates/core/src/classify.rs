//! Sparse-representation classifiers: SRC over any solver, and the
//! two-phase l2 method (TPTSR).

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::constrained::{adm_solve, gpsr_solve, tnipm_solve};
use crate::error::{Result, SparseError};
use crate::greedy::{mp_solve, omp_solve};
use crate::homotopy::{bpdn_homotopy, lasso_homotopy, reweighted_homotopy};
use crate::linalg::{ensure_finite_mat, ensure_finite_vec, solve_gram_guarded, Matrix, Vector};
use crate::par::map_indices;
use crate::problem::{Constraint, Dictionary, SolverConfig, SparseProblem, SparseSolution};
use crate::proximal::{dalm_solve, fista_solve, half_proximal_solve, ista_solve, palm_solve, sparsa_solve};

/// Samples as columns with class labels in `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledDataset {
    /// Checks shapes, finiteness and label range. Classes may be empty;
    /// see [`LabeledDataset::require_all_classes`].
    pub fn new(samples: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        ensure_finite_mat(&samples, "dataset")?;
        if labels.len() != samples.ncols() {
            return Err(SparseError::DimensionMismatch(format!(
                "{} labels for {} samples",
                labels.len(),
                samples.ncols()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(SparseError::Format(format!("label {bad} outside {num_classes} classes")));
        }
        Ok(LabeledDataset { samples, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.nrows()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn require_all_classes(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(c) => Err(SparseError::Format(format!("class {c} has no samples"))),
            None => Ok(()),
        }
    }

    /// Columns `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: self.samples.select_columns(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// Coding back-ends available to SRC, named as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Mp,
    Omp,
    Gpsr,
    L1ls,
    Adm,
    Ista,
    Fista,
    Sparsa,
    Half,
    Palm,
    Dalm,
    LassoHomotopy,
    BpdnHomotopy,
    ReweightedHomotopy,
}

impl SolverKind {
    pub const ALL: [SolverKind; 14] = [
        SolverKind::Mp,
        SolverKind::Omp,
        SolverKind::Gpsr,
        SolverKind::L1ls,
        SolverKind::Adm,
        SolverKind::Ista,
        SolverKind::Fista,
        SolverKind::Sparsa,
        SolverKind::Half,
        SolverKind::Palm,
        SolverKind::Dalm,
        SolverKind::LassoHomotopy,
        SolverKind::BpdnHomotopy,
        SolverKind::ReweightedHomotopy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Mp => "mp",
            SolverKind::Omp => "omp",
            SolverKind::Gpsr => "gpsr",
            SolverKind::L1ls => "l1ls",
            SolverKind::Adm => "adm",
            SolverKind::Ista => "ista",
            SolverKind::Fista => "fista",
            SolverKind::Sparsa => "sparsa",
            SolverKind::Half => "half",
            SolverKind::Palm => "palm",
            SolverKind::Dalm => "dalm",
            SolverKind::LassoHomotopy => "lasso-homotopy",
            SolverKind::BpdnHomotopy => "bpdn-homotopy",
            SolverKind::ReweightedHomotopy => "reweighted-homotopy",
        }
    }

    /// Whether the parameter is ignored (equality-constrained solvers).
    pub fn is_interpolating(self) -> bool {
        matches!(self, SolverKind::Palm | SolverKind::Dalm)
    }

    /// The problem this solver receives for parameter `param`:
    /// MP/OMP stop at residual `param·‖y‖`; half thresholding keeps
    /// `⌈param·min(d, n)⌉` coefficients; PALM/DALM interpolate; all others
    /// solve the Lagrangian form with weight `param`.
    pub fn constraint(self, param: f64, y: &Vector, dict: &Dictionary) -> Constraint {
        match self {
            SolverKind::Mp | SolverKind::Omp => Constraint::ResidualBound(param * y.norm()),
            SolverKind::Half => Constraint::Sparsity(half_sparsity(param, dict)),
            SolverKind::Palm | SolverKind::Dalm => Constraint::Interpolating,
            _ => Constraint::Lagrangian(param),
        }
    }
}

fn half_sparsity(param: f64, dict: &Dictionary) -> usize {
    let cap = dict.dim().min(dict.num_atoms());
    ((param * cap as f64).ceil() as usize).clamp(1, cap)
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = SparseError;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SparseError::UnknownSolver(s.to_string()))
    }
}

/// Runs `kind` on `y` against `dict` (see [`SolverKind::constraint`]).
pub fn solve_with(
    kind: SolverKind,
    dict: &Dictionary,
    y: &Vector,
    param: f64,
    config: &SolverConfig,
) -> Result<SparseSolution> {
    if !(param > 0.0) || !param.is_finite() {
        return Err(SparseError::InvalidParameter(format!("solver parameter must be positive, got {param}")));
    }
    let scale = y.norm();
    if kind.is_interpolating() && scale > 0.0 {
        // Basis pursuit is homogeneous in y; coding the unit probe keeps the
        // solvers' stopping rules independent of the probe's scale.
        let unit = solve_raw(kind, dict, &(y / scale), param, config)?;
        let p = SparseProblem::new(dict, y.clone(), Constraint::Interpolating)?;
        let trace = unit.objective_trace.iter().map(|v| v * scale).collect();
        return Ok(SparseSolution::from_alpha(&p, unit.alpha * scale, trace, unit.iterations, unit.converged));
    }
    solve_raw(kind, dict, y, param, config)
}

fn solve_raw(kind: SolverKind, dict: &Dictionary, y: &Vector, param: f64, config: &SolverConfig) -> Result<SparseSolution> {
    let p = SparseProblem::new(dict, y.clone(), kind.constraint(param, y, dict))?;
    match kind {
        SolverKind::Mp => mp_solve(&p, config),
        SolverKind::Omp => omp_solve(&p, config),
        SolverKind::Gpsr => gpsr_solve(&p, config),
        SolverKind::L1ls => tnipm_solve(&p, config),
        SolverKind::Adm => adm_solve(&p, config),
        SolverKind::Ista => ista_solve(&p, config),
        SolverKind::Fista => fista_solve(&p, config),
        SolverKind::Sparsa => sparsa_solve(&p, config),
        SolverKind::Half => half_proximal_solve(&p, config, half_sparsity(param, dict)),
        SolverKind::Palm => palm_solve(&p, config),
        SolverKind::Dalm => dalm_solve(&p, config),
        SolverKind::LassoHomotopy => lasso_homotopy(&p, config).map(|(s, _)| s),
        SolverKind::BpdnHomotopy => bpdn_homotopy(&p, config),
        SolverKind::ReweightedHomotopy => {
            reweighted_homotopy(&p, &Vector::from_element(dict.num_atoms(), param), config)
        }
    }
}

/// A classifier with its parameter: SRC over a solver, or TPTSR with ridge
/// weight `mu` and phase-1 keep count (`None` for the default).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassifierSpec {
    Src { solver: SolverKind, param: f64 },
    Tptsr { mu: f64, m_keep: Option<usize> },
}

impl ClassifierSpec {
    /// Builds a spec from a command-line solver name; `tptsr` takes the
    /// parameter as its ridge weight.
    pub fn from_name(name: &str, param: f64) -> Result<Self> {
        if name == "tptsr" {
            return Ok(ClassifierSpec::Tptsr { mu: param, m_keep: None });
        }
        Ok(ClassifierSpec::Src { solver: name.parse()?, param })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Src { solver, .. } => solver.name(),
            ClassifierSpec::Tptsr { .. } => "tptsr",
        }
    }

    pub fn with_param(self, param: f64) -> Self {
        match self {
            ClassifierSpec::Src { solver, .. } => ClassifierSpec::Src { solver, param },
            ClassifierSpec::Tptsr { m_keep, .. } => ClassifierSpec::Tptsr { mu: param, m_keep },
        }
    }
}

/// Predicted label with the per-class squared residuals behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub label: usize,
    pub residuals: Vector,
    /// False when the coding solver reported non-convergence.
    pub converged: bool,
}

fn argmin_first(r: &Vector) -> usize {
    let mut best = 0;
    for i in 1..r.len() {
        if r[i] < r[best] {
            best = i;
        }
    }
    best
}

/// `‖y − Σ_{i ∈ class c} coef_i x_i‖²` for every class; `cols` maps entries
/// of `coef` to dictionary columns.
fn class_residuals(x: &Matrix, labels: &[usize], num_classes: usize, y: &Vector, cols: &[usize], coef: &Vector) -> Vector {
    let mut recon = vec![Vector::zeros(y.len()); num_classes];
    for (a, &i) in cols.iter().enumerate() {
        if coef[a] != 0.0 {
            recon[labels[i]].axpy(coef[a], &x.column(i), 1.0);
        }
    }
    Vector::from_iterator(num_classes, recon.iter().map(|r| (y - r).norm_squared()))
}

/// Training set prepared for classification: unit-norm columns with the
/// Gram matrix cached across probes.
#[derive(Debug, Clone)]
pub struct PreparedTrain {
    dict: Dictionary,
    labels: Vec<usize>,
    num_classes: usize,
}

impl PreparedTrain {
    pub fn new(train: &LabeledDataset) -> Result<Self> {
        if train.is_empty() {
            return Err(SparseError::DimensionMismatch("training set is empty".into()));
        }
        train.require_all_classes()?;
        Ok(PreparedTrain {
            dict: Dictionary::normalized(train.samples.clone())?,
            labels: train.labels.clone(),
            num_classes: train.num_classes,
        })
    }

    pub fn dict(&self) -> &Dictionary {
        &self.dict
    }

    fn check_probe(&self, y: &Vector) -> Result<()> {
        ensure_finite_vec(y, "probe")?;
        if y.len() != self.dict.dim() {
            return Err(SparseError::DimensionMismatch(format!(
                "probe has {} entries, training samples {}",
                y.len(),
                self.dict.dim()
            )));
        }
        Ok(())
    }

    /// SRC: code `y` over all training samples with `solver`, then pick
    /// the class whose coefficients alone reconstruct `y` best.
    pub fn src(&self, y: &Vector, solver: SolverKind, param: f64, config: &SolverConfig) -> Result<Decision> {
        self.check_probe(y)?;
        let sol = solve_with(solver, &self.dict, y, param, config)?;
        let cols: Vec<usize> = (0..self.dict.num_atoms()).collect();
        let residuals = class_residuals(self.dict.atoms(), &self.labels, self.num_classes, y, &cols, &sol.alpha);
        Ok(Decision { label: argmin_first(&residuals), residuals, converged: sol.converged })
    }

    /// Default phase-1 keep count `max(classes, ⌈0.1·N⌉)`.
    pub fn default_keep(&self) -> usize {
        let n = self.labels.len();
        self.num_classes.max(n.div_ceil(10)).min(n)
    }

    /// Two-phase l2 classification. Phase 1 ridge-codes `y` over all
    /// samples and keeps the `m_keep` samples with the smallest
    /// `‖y − α_i x_i‖²`; phase 2 ridge-codes over the kept samples only.
    /// Classes without a kept sample get residual `‖y‖²`.
    pub fn tptsr(&self, y: &Vector, mu: f64, m_keep: Option<usize>) -> Result<Decision> {
        self.check_probe(y)?;
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(SparseError::InvalidParameter(format!("ridge weight must be ≥ 0, got {mu}")));
        }
        let n = self.labels.len();
        let m = m_keep.unwrap_or_else(|| self.default_keep());
        if m == 0 || m > n {
            return Err(SparseError::InvalidParameter(format!("keep count {m} must be in 1..={n}")));
        }
        let x = self.dict.atoms();
        let gram = self.dict.gram();
        let xty = x.tr_mul(y);
        let ridge_solve = |idx: &[usize]| {
            let mut g = Matrix::from_fn(idx.len(), idx.len(), |a, b| gram[(idx[a], idx[b])]);
            for a in 0..idx.len() {
                g[(a, a)] += mu;
            }
            let rhs = Vector::from_fn(idx.len(), |a, _| xty[idx[a]]);
            solve_gram_guarded(&g, &rhs, 1e-10).0
        };

        let all: Vec<usize> = (0..n).collect();
        let alpha = ridge_solve(&all);
        let score: Vec<f64> = (0..n).map(|i| (y - x.column(i) * alpha[i]).norm_squared()).collect();
        let mut order = all;
        order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
        let mut kept = order[..m].to_vec();
        kept.sort_unstable();

        let beta = ridge_solve(&kept);
        let mut residuals = class_residuals(x, &self.labels, self.num_classes, y, &kept, &beta);
        let ynorm2 = y.norm_squared();
        for c in 0..self.num_classes {
            if !kept.iter().any(|&i| self.labels[i] == c) {
                residuals[c] = ynorm2;
            }
        }
        Ok(Decision { label: argmin_first(&residuals), residuals, converged: true })
    }

    pub fn classify(&self, y: &Vector, spec: &ClassifierSpec, config: &SolverConfig) -> Result<Decision> {
        match *spec {
            ClassifierSpec::Src { solver, param } => self.src(y, solver, param, config),
            ClassifierSpec::Tptsr { mu, m_keep } => self.tptsr(y, mu, m_keep),
        }
    }
}

/// SRC on a single probe. Prefer [`PreparedTrain`] for many probes.
pub fn src_classify(
    train: &LabeledDataset,
    y: &Vector,
    solver: SolverKind,
    lambda_or_eps: f64,
    config: &SolverConfig,
) -> Result<Decision> {
    PreparedTrain::new(train)?.src(y, solver, lambda_or_eps, config)
}

/// TPTSR on a single probe. Prefer [`PreparedTrain`] for many probes.
pub fn tptsr_classify(train: &LabeledDataset, y: &Vector, mu: f64, m_keep: Option<usize>) -> Result<Decision> {
    PreparedTrain::new(train)?.tptsr(y, mu, m_keep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitScore {
    pub accuracy: f64,
    /// Mean wall-clock classification time per test sample.
    pub per_sample_seconds: f64,
    pub predictions: Vec<usize>,
    /// Test samples whose coding solver did not converge.
    pub unconverged: usize,
}

/// Classifies every test sample against the training set. Timing covers
/// coding and residuals only.
pub fn evaluate_split(
    train: &LabeledDataset,
    test: &LabeledDataset,
    spec: &ClassifierSpec,
    config: &SolverConfig,
) -> Result<SplitScore> {
    evaluate_prepared(&PreparedTrain::new(train)?, test, spec, config)
}

pub fn evaluate_prepared(
    prepared: &PreparedTrain,
    test: &LabeledDataset,
    spec: &ClassifierSpec,
    config: &SolverConfig,
) -> Result<SplitScore> {
    if test.is_empty() {
        return Err(SparseError::DimensionMismatch("test set is empty".into()));
    }
    if test.dim() != prepared.dict.dim() {
        return Err(SparseError::DimensionMismatch(format!(
            "test samples have {} features, training samples {}",
            test.dim(),
            prepared.dict.dim()
        )));
    }
    if test.num_classes > prepared.num_classes {
        return Err(SparseError::DimensionMismatch("test set has classes unseen in training".into()));
    }
    let outcomes = map_indices(test.len(), |i| {
        let y = test.samples.column(i).into_owned();
        let start = Instant::now();
        let d = prepared.classify(&y, spec, config);
        (d, start.elapsed())
    });
    let mut predictions = Vec::with_capacity(test.len());
    let mut total = Duration::ZERO;
    let mut unconverged = 0;
    for (d, t) in outcomes {
        let d = d?;
        unconverged += usize::from(!d.converged);
        predictions.push(d.label);
        total += t;
    }
    let correct = predictions.iter().zip(&test.labels).filter(|(p, l)| p == l).count();
    Ok(SplitScore {
        accuracy: correct as f64 / test.len() as f64,
        per_sample_seconds: total.as_secs_f64() / test.len() as f64,
        predictions,
        unconverged,
    })
}
