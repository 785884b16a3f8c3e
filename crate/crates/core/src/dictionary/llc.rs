//! Locality-constrained linear coding and incremental codebook optimization.

use super::ksvd::initial_atoms;
use super::TrainingSet;
use crate::error::{Result, SparseError};
use crate::linalg::{ensure_finite_vec, Matrix, Vector};
use crate::problem::{Dictionary, SolverConfig};

fn distances(atoms: &Matrix, y: &Vector) -> Vector {
    Vector::from_iterator(atoms.ncols(), atoms.column_iter().map(|d| (d - y).norm()))
}

/// Solves `(C + μ·diag(b)²) x̂ = 1` with `C` the covariance of the atoms
/// shifted by `y`, then rescales so that `1ᵀx = 1`. `None` when the system
/// is singular or the sum vanishes.
fn affine_code(atoms: &Matrix, y: &Vector, b: &Vector, mu: f64) -> Option<Vector> {
    let m = atoms.ncols();
    let shifted = Matrix::from_fn(atoms.nrows(), m, |i, j| atoms[(i, j)] - y[i]);
    let mut a = shifted.transpose() * &shifted;
    for j in 0..m {
        a[(j, j)] += mu * b[j] * b[j];
    }
    let ones = Vector::from_element(m, 1.0);
    let xh = a.cholesky()?.solve(&ones);
    let s = xh.sum();
    if s == 0.0 || !s.is_finite() || !xh.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(xh / s)
}

/// Affine code with one retry at `10·μ` before giving up.
fn affine_code_retry(atoms: &Matrix, y: &Vector, b: &Vector, mu: f64) -> Result<Vector> {
    affine_code(atoms, y, b, mu)
        .or_else(|| affine_code(atoms, y, b, 10.0 * mu))
        .ok_or_else(|| SparseError::Singular("regularized LLC covariance".into()))
}

/// LLC code of `y`: locality adaptor `b_j = exp(‖y − d_j‖/σ)`, with σ
/// defaulting to the mean sample-atom distance.
pub fn llc_encode(y: &Vector, dict: &Dictionary, mu: f64, sigma: Option<f64>) -> Result<Vector> {
    ensure_finite_vec(y, "probe")?;
    if y.len() != dict.dim() {
        return Err(SparseError::DimensionMismatch(format!("probe has {} entries, atoms {}", y.len(), dict.dim())));
    }
    if !(mu > 0.0) {
        return Err(SparseError::InvalidParameter(format!("LLC weight must be positive, got {mu}")));
    }
    if let Some(s) = sigma {
        if !(s > 0.0) {
            return Err(SparseError::InvalidParameter(format!("locality width must be positive, got {s}")));
        }
    }
    let dist = distances(dict.atoms(), y);
    let sigma = sigma.unwrap_or_else(|| dist.mean()).max(f64::MIN_POSITIVE);
    let b = dist.map(|t| (t / sigma).exp());
    affine_code_retry(dict.atoms(), y, &b, mu)
}

/// Lloyd's k-means on the columns of `data`, seeded from `k` distinct
/// columns. Empty clusters keep their previous centroid; ties go to the
/// lowest centroid index.
pub fn kmeans_codebook(data: &Matrix, k: usize, seed: u64, max_iter: usize) -> Result<Matrix> {
    if k == 0 || k > data.ncols() {
        return Err(SparseError::InvalidParameter(format!("cluster count {k} must be in 1..={}", data.ncols())));
    }
    let mut centers = initial_atoms(data, k, seed)?;
    let mut assign = vec![usize::MAX; data.ncols()];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, y) in data.column_iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| (centers.column(a) - y).norm_squared().total_cmp(&(centers.column(b) - y).norm_squared()))
                .expect("k ≥ 1");
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for c in 0..k {
            let members: Vec<usize> = (0..data.ncols()).filter(|&i| assign[i] == c).collect();
            if !members.is_empty() {
                let sum = members.iter().fold(Vector::zeros(data.nrows()), |acc, &i| acc + data.column(i));
                centers.set_column(c, &(sum / members.len() as f64));
            }
        }
    }
    Ok(centers)
}

#[derive(Debug, Clone)]
pub struct LlcOutcome {
    pub dict: Dictionary,
    /// Samples skipped because their active set was empty or their system
    /// was singular, summed over passes.
    pub skipped: usize,
    /// Total reconstruction error `Σ‖y_i − D x_i‖²` before the first pass
    /// and after each pass.
    pub objective_trace: Vec<f64>,
}

struct Settings {
    mu: f64,
    sigma: f64,
    epsilon: f64,
}

/// Locality weights `exp(−dist/σ)` rescaled to `[0, 1]`. All-equal
/// distances give uniform weights.
fn normalized_locality(atoms: &Matrix, y: &Vector, sigma: f64) -> Vector {
    let b = distances(atoms, y).map(|t| (-t / sigma).exp());
    let (lo, hi) = (b.min(), b.max());
    if hi > lo {
        b.map(|t| (t - lo) / (hi - lo))
    } else {
        Vector::from_element(b.len(), 1.0)
    }
}

/// Code over the atoms whose LLC coefficient exceeds ε in magnitude, refit
/// as `min ‖y − D_S x‖² s.t. 1ᵀx = 1`. Returns the active indices and code.
fn active_refit(atoms: &Matrix, y: &Vector, s: &Settings) -> Option<(Vec<usize>, Vector)> {
    let b = normalized_locality(atoms, y, s.sigma);
    let x = affine_code_retry(atoms, y, &b, s.mu).ok()?;
    let idx: Vec<usize> = (0..x.len()).filter(|&j| x[j].abs() > s.epsilon).collect();
    if idx.is_empty() {
        return None;
    }
    let sub = atoms.select_columns(&idx);
    // ‖y − D_S x‖² = xᵀ C_S x on the affine set; a trace-relative ridge
    // keeps the solve defined when |S| exceeds the dimension.
    let shifted = Matrix::from_fn(sub.nrows(), sub.ncols(), |i, j| sub[(i, j)] - y[i]);
    let c = shifted.transpose() * &shifted;
    let ridge = 1e-10 * c.trace().max(f64::MIN_POSITIVE);
    let refit = affine_code(&sub, y, &Vector::from_element(idx.len(), 1.0), ridge)?;
    Some((idx, refit))
}

fn reconstruction_error(atoms: &Matrix, data: &Matrix, s: &Settings) -> f64 {
    data.column_iter()
        .map(|y| {
            let y = y.into_owned();
            match active_refit(atoms, &y, s) {
                Some((idx, x)) => (&y - atoms.select_columns(&idx) * x).norm_squared(),
                None => y.norm_squared(),
            }
        })
        .sum()
}

fn project_columns(atoms: &mut Matrix, cols: impl Iterator<Item = usize>) {
    for j in cols {
        let n = atoms.column(j).norm();
        if n > 1.0 {
            atoms.column_mut(j).unscale_mut(n);
        }
    }
}

/// Incremental codebook optimization. For every sample: normalized
/// locality weights, LLC code, restriction to coefficients above ε (0.01),
/// affine refit, then a gradient step on the active atoms followed by
/// projection onto `‖d_j‖ ≤ 1`.
///
/// Knobs: `"passes"` (1), `"learning_rate"` (1e-2, decayed by 0.95 per
/// pass), `"epsilon"` (0.01), `"sigma"` (mean sample-atom distance).
pub fn llc_codebook_optimize(
    data: &TrainingSet,
    initial: &Dictionary,
    mu: f64,
    config: &SolverConfig,
) -> Result<LlcOutcome> {
    config.validate()?;
    if !(mu > 0.0) {
        return Err(SparseError::InvalidParameter(format!("LLC weight must be positive, got {mu}")));
    }
    if data.dim() != initial.dim() {
        return Err(SparseError::DimensionMismatch(format!(
            "samples have {} rows, codebook {}",
            data.dim(),
            initial.dim()
        )));
    }
    let y = &data.samples;
    let mut atoms = initial.atoms().clone();
    let passes = config.step("passes", 1.0).max(0.0) as usize;
    let lr0 = config.step("learning_rate", 1e-2);
    let sigma = config.step("sigma", {
        let total: f64 = y.column_iter().map(|c| distances(&atoms, &c.into_owned()).sum()).sum();
        total / (y.ncols() * atoms.ncols()) as f64
    });
    let s = Settings { mu, sigma: sigma.max(f64::MIN_POSITIVE), epsilon: config.step("epsilon", 0.01) };
    project_columns(&mut atoms, 0..initial.num_atoms());

    let mut trace = vec![reconstruction_error(&atoms, y, &s)];
    let mut skipped = 0;
    for pass in 0..passes {
        let lr = lr0 * 0.95f64.powi(pass as i32);
        for yi in y.column_iter() {
            let yi = yi.into_owned();
            let Some((idx, x)) = active_refit(&atoms, &yi, &s) else {
                skipped += 1;
                continue;
            };
            if lr == 0.0 {
                continue;
            }
            let r = &yi - atoms.select_columns(&idx) * &x;
            for (a, &j) in idx.iter().enumerate() {
                atoms.column_mut(j).axpy(2.0 * lr * x[a], &r, 1.0);
            }
            project_columns(&mut atoms, idx.iter().copied());
        }
        trace.push(reconstruction_error(&atoms, y, &s));
    }
    Ok(LlcOutcome { dict: Dictionary::new(atoms)?, skipped, objective_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, gaussian_vector, seeded};
    use proptest::prelude::*;

    fn random_dict(seed: u64, d: usize, m: usize) -> Dictionary {
        Dictionary::normalized(gaussian_matrix(&mut seeded(seed), d, m)).unwrap()
    }

    #[test]
    fn code_concentrates_on_matching_atom() {
        let dict = random_dict(4, 6, 5);
        let y = dict.atoms().column(2).into_owned();
        let mu = 100.0;
        let x = llc_encode(&y, &dict, mu, Some(1.0)).unwrap();
        assert_eq!(x.iamax(), 2);

        // Independent oracle: assemble the regularized system entry by entry.
        let m = 5;
        let mut a = Matrix::zeros(m, m);
        for p in 0..m {
            for q in 0..m {
                let dp = dict.atoms().column(p) - &y;
                let dq = dict.atoms().column(q) - &y;
                a[(p, q)] = dp.dot(&dq);
            }
            let dist = (dict.atoms().column(p) - &y).norm();
            a[(p, p)] += mu * (dist.exp()).powi(2);
        }
        let xh = a.lu().solve(&Vector::from_element(m, 1.0)).unwrap();
        let oracle = &xh / xh.sum();
        assert!((x - oracle).norm() < 1e-10);
    }

    #[test]
    fn single_atom_code_is_one() {
        let dict = random_dict(1, 4, 1);
        let x = llc_encode(&gaussian_vector(&mut seeded(2), 4), &dict, 0.1, None).unwrap();
        assert_eq!(x.len(), 1);
        assert!((x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let dict = random_dict(1, 4, 3);
        let y = Vector::zeros(4);
        assert!(llc_encode(&y, &dict, 0.0, None).is_err());
        assert!(llc_encode(&y, &dict, 1.0, Some(-1.0)).is_err());
        assert!(llc_encode(&Vector::zeros(3), &dict, 1.0, None).is_err());
    }

    fn cluster(seed: u64, d: usize, n: usize) -> Matrix {
        let mut rng = seeded(seed);
        let center = gaussian_vector(&mut rng, d).normalize() * 0.8;
        let noise = gaussian_matrix(&mut rng, d, n) * 0.05;
        Matrix::from_fn(d, n, |i, j| center[i] + noise[(i, j)])
    }

    #[test]
    fn zero_learning_rate_keeps_codebook() {
        let y = cluster(5, 6, 40);
        let init = Dictionary::new(kmeans_codebook(&y, 4, 0, 50).unwrap()).unwrap();
        let data = TrainingSet::unlabeled(y).unwrap();
        let cfg = SolverConfig::default().with_override("learning_rate", 0.0).with_override("passes", 3.0);
        let out = llc_codebook_optimize(&data, &init, 1e-4, &cfg).unwrap();
        assert_eq!(out.dict.atoms(), init.atoms());
    }

    #[test]
    fn single_cluster_error_does_not_grow() {
        let y = cluster(9, 6, 60);
        let init = Dictionary::new(kmeans_codebook(&y, 5, 1, 50).unwrap()).unwrap();
        let data = TrainingSet::unlabeled(y).unwrap();
        let cfg = SolverConfig::default().with_override("passes", 5.0);
        let out = llc_codebook_optimize(&data, &init, 1e-4, &cfg).unwrap();
        assert!(out.objective_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{:?}", out.objective_trace);
        assert!(out.dict.atoms().column_iter().all(|c| c.norm() <= 1.0 + 1e-12));
    }

    #[test]
    fn kmeans_separates_blobs() {
        let mut y = Matrix::zeros(2, 20);
        for j in 0..20 {
            let base = if j % 2 == 0 { 5.0 } else { -5.0 };
            y[(0, j)] = base + 0.01 * j as f64;
            y[(1, j)] = base;
        }
        let c = kmeans_codebook(&y, 2, 3, 100).unwrap();
        let mut xs: Vec<f64> = c.row(0).iter().copied().collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 5.0).abs() < 0.2 && (xs[1] - 5.0).abs() < 0.2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn codes_sum_to_one(seed in any::<u64>(), m in 1usize..8, mu in 1e-4f64..10.0) {
            let dict = random_dict(seed, 5, m);
            let y = gaussian_vector(&mut seeded(seed ^ 1), 5);
            let x = llc_encode(&y, &dict, mu, None).unwrap();
            prop_assert!((x.sum() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn optimized_columns_stay_in_unit_ball(seed in any::<u64>()) {
            let y = gaussian_matrix(&mut seeded(seed), 4, 30) * 3.0;
            let init = Dictionary::new(kmeans_codebook(&y, 3, seed, 20).unwrap()).unwrap();
            let data = TrainingSet::unlabeled(y).unwrap();
            let cfg = SolverConfig::default().with_override("learning_rate", 0.05);
            let out = llc_codebook_optimize(&data, &init, 1e-3, &cfg).unwrap();
            prop_assert!(out.dict.atoms().column_iter().all(|c| c.norm() <= 1.0 + 1e-12));
        }
    }
}
