//! Problem and solution records shared by every solver family.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{Result, SparseError};
use crate::linalg::{
    ensure_finite_mat, ensure_finite_vec, normalize_matrix_columns, norm_l0, spectral_norm, Matrix,
    Vector, ZeroTolerance,
};

/// Column matrix of atoms. The spectral norm and Gram matrix are computed
/// lazily and cached, since classifiers solve many probes against one
/// dictionary.
#[derive(Debug)]
pub struct Dictionary {
    atoms: Matrix,
    normalized: bool,
    spectral: OnceLock<f64>,
    gram: OnceLock<Matrix>,
}

impl Clone for Dictionary {
    fn clone(&self) -> Self {
        Dictionary {
            atoms: self.atoms.clone(),
            normalized: self.normalized,
            spectral: self.spectral.clone(),
            gram: self.gram.clone(),
        }
    }
}

impl Dictionary {
    /// Wraps a matrix as-is. The normalized flag is set when every column
    /// already has unit norm within 1e-10.
    pub fn new(atoms: Matrix) -> Result<Self> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(SparseError::DimensionMismatch("dictionary must be nonempty".into()));
        }
        ensure_finite_mat(&atoms, "dictionary")?;
        let normalized = atoms.column_iter().all(|c| (c.norm() - 1.0).abs() <= 1e-10);
        Ok(Self::from_parts(atoms, normalized))
    }

    fn from_parts(atoms: Matrix, normalized: bool) -> Self {
        Dictionary { atoms, normalized, spectral: OnceLock::new(), gram: OnceLock::new() }
    }

    /// Builds a dictionary with unit-norm columns.
    pub fn normalized(atoms: Matrix) -> Result<Self> {
        ensure_finite_mat(&atoms, "dictionary")?;
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(SparseError::DimensionMismatch("dictionary must be nonempty".into()));
        }
        Ok(Self::from_parts(normalize_matrix_columns(&atoms)?, true))
    }

    pub fn atoms(&self) -> &Matrix {
        &self.atoms
    }

    pub fn into_atoms(self) -> Matrix {
        self.atoms
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    /// `‖X‖₂`, the largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        *self.spectral.get_or_init(|| spectral_norm(&self.atoms))
    }

    /// `XᵀX`.
    pub fn gram(&self) -> &Matrix {
        self.gram.get_or_init(|| self.atoms.transpose() * &self.atoms)
    }
}

/// Returns a copy with every column scaled to unit l2 norm.
pub fn normalize_columns(dict: &Dictionary) -> Result<Dictionary> {
    Dictionary::normalized(dict.atoms.clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// `‖α‖₀ ≤ k`
    Sparsity(usize),
    /// `½‖y − Xα‖² + λ‖α‖₁`
    Lagrangian(f64),
    /// `‖y − Xα‖ ≤ ε`
    ResidualBound(f64),
    /// `y = Xα` exactly
    Interpolating,
}

impl Constraint {
    pub fn name(&self) -> &'static str {
        match self {
            Constraint::Sparsity(_) => "sparsity",
            Constraint::Lagrangian(_) => "lagrangian",
            Constraint::ResidualBound(_) => "residual-bound",
            Constraint::Interpolating => "interpolating",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            Constraint::Lagrangian(l) => Some(*l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseProblem<'a> {
    pub dict: &'a Dictionary,
    pub probe: Vector,
    pub constraint: Constraint,
}

impl<'a> SparseProblem<'a> {
    pub fn new(dict: &'a Dictionary, probe: Vector, constraint: Constraint) -> Result<Self> {
        if probe.len() != dict.dim() {
            return Err(SparseError::DimensionMismatch(format!(
                "probe has length {} but dictionary has {} rows",
                probe.len(),
                dict.dim()
            )));
        }
        ensure_finite_vec(&probe, "probe")?;
        match constraint {
            Constraint::Sparsity(k) if k > dict.num_atoms() => {
                return Err(SparseError::InvalidParameter(format!(
                    "sparsity {k} exceeds atom count {}",
                    dict.num_atoms()
                )))
            }
            Constraint::Lagrangian(l) if !(l > 0.0 && l.is_finite()) => {
                return Err(SparseError::InvalidParameter(format!("lambda must be positive, got {l}")))
            }
            Constraint::ResidualBound(e) if !(e > 0.0 && e.is_finite()) => {
                return Err(SparseError::InvalidParameter(format!("epsilon must be positive, got {e}")))
            }
            _ => {}
        }
        Ok(SparseProblem { dict, probe, constraint })
    }

    pub fn x(&self) -> &Matrix {
        self.dict.atoms()
    }

    pub fn residual(&self, alpha: &Vector) -> Vector {
        &self.probe - self.x() * alpha
    }

    /// `Xᵀy`
    pub fn correlation(&self) -> Vector {
        self.x().tr_mul(&self.probe)
    }

    /// Returns λ, or an [`SparseError::UnsupportedConstraint`] naming `solver`.
    pub fn require_lagrangian(&self, solver: &'static str) -> Result<f64> {
        self.constraint.lambda().ok_or(SparseError::UnsupportedConstraint {
            solver,
            constraint: self.constraint.name(),
        })
    }

    pub fn unsupported(&self, solver: &'static str) -> SparseError {
        SparseError::UnsupportedConstraint { solver, constraint: self.constraint.name() }
    }
}

/// Side conditions a solver hit on the way; none of them invalidates the
/// returned coefficients.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolverFlags {
    /// A near-singular system was regularized with a tiny ridge.
    pub ridge_used: bool,
    /// Conjugate gradients broke down and a gradient step was taken.
    pub cg_fallback: bool,
}

#[derive(Debug, Clone)]
pub struct SparseSolution {
    pub alpha: Vector,
    pub support: Vec<usize>,
    /// Signs of `alpha` on `support`, same order.
    pub signs: Vec<i8>,
    pub residual_norm: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub flags: SolverFlags,
}

impl SparseSolution {
    /// Derives support, signs and residual from `alpha`.
    pub fn from_alpha(
        problem: &SparseProblem<'_>,
        alpha: Vector,
        objective_trace: Vec<f64>,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let (support, signs) = support_and_signs(&alpha);
        let residual_norm = problem.residual(&alpha).norm();
        SparseSolution {
            alpha,
            support,
            signs,
            residual_norm,
            objective_trace,
            iterations,
            converged,
            flags: SolverFlags::default(),
        }
    }

    pub fn with_flags(mut self, flags: SolverFlags) -> Self {
        self.flags = flags;
        self
    }
}

/// Indices with `|α_i|` above the automatic zero tolerance, and their signs.
pub fn support_and_signs(alpha: &Vector) -> (Vec<usize>, Vec<i8>) {
    let tol = ZeroTolerance::Auto.resolve(alpha);
    let support: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i].abs() > tol).collect();
    let signs = support.iter().map(|&i| if alpha[i] > 0.0 { 1 } else { -1 }).collect();
    debug_assert_eq!(support.len(), norm_l0(alpha, ZeroTolerance::Auto));
    (support, signs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Named numeric knobs a solver may consult (e.g. `"beta"`, `"mu0"`).
    pub step_overrides: BTreeMap<String, f64>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 5000,
            tolerance: 1e-6,
            step_overrides: BTreeMap::new(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn new(max_iterations: usize, tolerance: f64) -> Result<Self> {
        let c = SolverConfig { max_iterations, tolerance, ..Default::default() };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(SparseError::InvalidParameter("max_iterations must be ≥ 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(SparseError::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn with_override(mut self, name: &str, value: f64) -> Self {
        self.step_overrides.insert(name.to_string(), value);
        self
    }

    pub fn step(&self, name: &str, default: f64) -> f64 {
        self.step_overrides.get(name).copied().unwrap_or(default)
    }
}

/// `½‖y − Xα‖² + λ‖α‖₁`
pub fn lasso_objective(problem: &SparseProblem<'_>, alpha: &Vector) -> Result<f64> {
    let lambda = problem.require_lagrangian("lasso_objective")?;
    Ok(lasso_value(problem.x(), &problem.probe, alpha, lambda))
}

pub(crate) fn lasso_value(x: &Matrix, y: &Vector, alpha: &Vector, lambda: f64) -> f64 {
    0.5 * (y - x * alpha).norm_squared() + lambda * alpha.lp_norm(1)
}

/// Subgradient optimality test for the l1-penalized least squares problem.
///
/// With `c = Xᵀ(y − Xα)`, entries with `|α_i| > tol·‖α‖∞` must satisfy
/// `|c_i − λ sign(α_i)| ≤ tol·λ`; all other entries need `|c_i| ≤ λ(1+tol)`.
/// Returns false for non-Lagrangian problems.
pub fn check_optimality_l1(problem: &SparseProblem<'_>, alpha: &Vector, tol: f64) -> bool {
    match problem.constraint {
        Constraint::Lagrangian(lambda) => {
            let w = Vector::from_element(alpha.len(), lambda);
            weighted_certificate(problem.x(), &problem.probe, alpha, &w, tol)
        }
        _ => false,
    }
}

/// Same test with a per-coordinate penalty weight.
pub fn weighted_certificate(x: &Matrix, y: &Vector, alpha: &Vector, weights: &Vector, tol: f64) -> bool {
    let c = x.tr_mul(&(y - x * alpha));
    let cut = tol * alpha.amax();
    (0..alpha.len()).all(|i| {
        let w = weights[i];
        if alpha[i].abs() > cut && alpha[i] != 0.0 {
            (c[i] - w * alpha[i].signum()).abs() <= tol * w
        } else {
            c[i].abs() <= w * (1.0 + tol)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proximal::soft_threshold_scalar;
    use crate::rng::{gaussian_matrix, gaussian_vector, seeded};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn eye2() -> Dictionary {
        Dictionary::new(Matrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn objective_examples() {
        let d = eye2();
        let p = SparseProblem::new(&d, Vector::from_vec(vec![1.0, 0.0]), Constraint::Lagrangian(1.0)).unwrap();
        assert_relative_eq!(lasso_objective(&p, &Vector::zeros(2)).unwrap(), 0.5);
        assert_relative_eq!(lasso_objective(&p, &Vector::from_vec(vec![1.0, 0.0])).unwrap(), 1.0);

        let p2 = SparseProblem::new(&d, Vector::zeros(2), Constraint::Interpolating).unwrap();
        assert!(matches!(
            lasso_objective(&p2, &Vector::zeros(2)),
            Err(SparseError::UnsupportedConstraint { .. })
        ));
    }

    #[test]
    fn objective_matches_termwise_oracle() {
        let mut rng = seeded(10);
        let d = Dictionary::new(gaussian_matrix(&mut rng, 5, 8)).unwrap();
        let y = gaussian_vector(&mut rng, 5);
        let a = gaussian_vector(&mut rng, 8);
        let p = SparseProblem::new(&d, y.clone(), Constraint::Lagrangian(0.3)).unwrap();
        let r = &y - d.atoms() * &a;
        let fid = crate::linalg::norm_lp(&r, 2.0).unwrap();
        let pen = crate::linalg::norm_lp(&a, 1.0).unwrap();
        assert_relative_eq!(lasso_objective(&p, &a).unwrap(), 0.5 * fid * fid + 0.3 * pen, max_relative = 1e-12);
    }

    #[test]
    fn certificate_at_zero() {
        let mut rng = seeded(11);
        let d = Dictionary::normalized(gaussian_matrix(&mut rng, 6, 10)).unwrap();
        let y = gaussian_vector(&mut rng, 6);
        let lmax = d.atoms().tr_mul(&y).amax();
        let p = SparseProblem::new(&d, y.clone(), Constraint::Lagrangian(lmax * 1.01)).unwrap();
        assert!(check_optimality_l1(&p, &Vector::zeros(10), 1e-6));
        let p = SparseProblem::new(&d, y, Constraint::Lagrangian(lmax * 0.9)).unwrap();
        assert!(!check_optimality_l1(&p, &Vector::zeros(10), 1e-6));
    }

    #[test]
    fn problem_validation() {
        let d = eye2();
        assert!(SparseProblem::new(&d, Vector::zeros(3), Constraint::Interpolating).is_err());
        assert!(SparseProblem::new(&d, Vector::zeros(2), Constraint::Sparsity(3)).is_err());
        assert!(SparseProblem::new(&d, Vector::zeros(2), Constraint::Lagrangian(0.0)).is_err());
        assert!(SparseProblem::new(&d, Vector::zeros(2), Constraint::ResidualBound(-1.0)).is_err());
        assert!(SolverConfig::new(0, 1e-6).is_err());
        assert!(SolverConfig::new(10, 0.0).is_err());
    }

    #[test]
    fn normalize_examples() {
        let d = Dictionary::new(Matrix::from_column_slice(2, 1, &[3.0, 4.0])).unwrap();
        assert!(!d.is_normalized());
        let n = normalize_columns(&d).unwrap();
        assert!(n.is_normalized());
        assert_relative_eq!(n.atoms()[(0, 0)], 0.6);
        assert_relative_eq!(n.atoms()[(1, 0)], 0.8);

        let e = eye2();
        let n = normalize_columns(&e).unwrap();
        assert!((n.atoms() - e.atoms()).amax() < 1e-12);

        let z = Dictionary::new(Matrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(normalize_columns(&z), Err(SparseError::ZeroColumn(1))));
    }

    #[test]
    fn solution_drops_zero_signs() {
        let d = Dictionary::new(Matrix::identity(3, 3)).unwrap();
        let p = SparseProblem::new(&d, Vector::from_vec(vec![1.0, 0.0, -2.0]), Constraint::Interpolating).unwrap();
        let s = SparseSolution::from_alpha(&p, Vector::from_vec(vec![1.0, 0.0, -2.0]), vec![], 1, true);
        assert_eq!(s.support, vec![0, 2]);
        assert_eq!(s.signs, vec![1, -1]);
        assert!(s.residual_norm < 1e-15);
    }

    proptest! {
        #[test]
        fn objective_nonnegative(seed in any::<u64>(), lam in 1e-3f64..10.0) {
            let mut rng = seeded(seed);
            let d = Dictionary::new(gaussian_matrix(&mut rng, 4, 6)).unwrap();
            let y = gaussian_vector(&mut rng, 4);
            let a = gaussian_vector(&mut rng, 6);
            let p = SparseProblem::new(&d, y, Constraint::Lagrangian(lam)).unwrap();
            prop_assert!(lasso_objective(&p, &a).unwrap() >= 0.0);
        }

        #[test]
        fn single_column_closed_form_certified(c in -10f64..10.0, lam in 1e-2f64..5.0, seed in any::<u64>()) {
            let mut rng = seeded(seed);
            let x = gaussian_vector(&mut rng, 4).normalize();
            let d = Dictionary::new(Matrix::from_column_slice(4, 1, x.as_slice())).unwrap();
            let y = &x * c + gaussian_vector(&mut rng, 4) * 0.1;
            let p = SparseProblem::new(&d, y.clone(), Constraint::Lagrangian(lam)).unwrap();
            let a = Vector::from_element(1, soft_threshold_scalar(x.dot(&y), lam));
            prop_assert!(check_optimality_l1(&p, &a, 1e-9));
        }

        #[test]
        fn normalized_columns_have_unit_norm(r in 1usize..8, n in 1usize..8, seed in any::<u64>()) {
            let m = gaussian_matrix(&mut seeded(seed), r, n);
            let d = Dictionary::normalized(m).unwrap();
            for c in d.atoms().column_iter() {
                prop_assert!((c.norm() - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn solution_recomputation(seed in any::<u64>()) {
            let mut rng = seeded(seed);
            let d = Dictionary::new(gaussian_matrix(&mut rng, 5, 7)).unwrap();
            let y = gaussian_vector(&mut rng, 5);
            let mut a = gaussian_vector(&mut rng, 7);
            a[2] = 0.0;
            let p = SparseProblem::new(&d, y.clone(), Constraint::Interpolating).unwrap();
            let s = SparseSolution::from_alpha(&p, a.clone(), vec![], 0, true);
            prop_assert!((s.residual_norm - (&y - d.atoms() * &a).norm()).abs() < 1e-10);
            prop_assert!(!s.support.contains(&2));
            for (i, sg) in s.support.iter().zip(&s.signs) {
                prop_assert_eq!(a[*i].signum() as i8, *sg);
            }
        }
    }
}
