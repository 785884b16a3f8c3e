//! K-SVD with sparse per-column codes, plus the MOD least-squares update.

use nalgebra::SymmetricEigen;
use rand::seq::SliceRandom;

use super::{LearnedDictionary, TrainingSet};
use crate::error::{Result, SparseError};
use crate::greedy::omp_kernel;
use crate::linalg::{normalize_matrix_columns, Matrix, Vector};
use crate::par::map_indices;
use crate::problem::{Dictionary, SolverConfig};
use crate::rng::seeded;

/// How each sample is coded during the sparse-coding stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodingRule {
    /// At most `k` atoms per code.
    Sparsity(usize),
    /// Stop once `‖y − Dx‖ ≤ epsilon`, using at most `max_atoms` atoms.
    ErrorBound { epsilon: f64, max_atoms: usize },
}

/// Codes stored column by column as `(atom, coefficient)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodes {
    pub num_atoms: usize,
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl SparseCodes {
    pub fn zeros(num_atoms: usize, num_samples: usize) -> Self {
        SparseCodes { num_atoms, columns: vec![Vec::new(); num_samples] }
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let columns = m
            .column_iter()
            .map(|c| c.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect())
            .collect();
        SparseCodes { num_atoms: m.nrows(), columns }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.num_atoms, self.columns.len());
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Largest number of nonzero coefficients in any column.
    pub fn max_nnz(&self) -> usize {
        self.columns.iter().map(|c| c.iter().filter(|(_, v)| *v != 0.0).count()).max().unwrap_or(0)
    }

    /// `D x_j` for column `j`.
    pub fn reconstruct(&self, atoms: &Matrix, j: usize) -> Vector {
        let mut out = Vector::zeros(atoms.nrows());
        for &(i, v) in &self.columns[j] {
            out.axpy(v, &atoms.column(i), 1.0);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct KsvdOutcome {
    pub dict: Dictionary,
    pub codes: SparseCodes,
    /// `‖Y − DX‖_F` after every sweep.
    pub objective_trace: Vec<f64>,
}

fn code_column(dict: &Dictionary, y: &Vector, rule: CodingRule) -> Vec<(usize, f64)> {
    let (cap, tau) = match rule {
        CodingRule::Sparsity(k) => (k, 1e-12 * y.norm()),
        CodingRule::ErrorBound { epsilon, max_atoms } => (max_atoms, epsilon),
    };
    let code = omp_kernel(dict, y, cap, tau);
    let mut entries: Vec<(usize, f64)> = code.selected.iter().map(|&i| (i, code.alpha[i])).collect();
    entries.sort_by_key(|e| e.0);
    entries
}

fn check_rule(rule: CodingRule) -> Result<()> {
    match rule {
        CodingRule::Sparsity(0) => Err(SparseError::InvalidParameter("sparsity must be ≥ 1".into())),
        CodingRule::ErrorBound { epsilon, max_atoms } if !(epsilon >= 0.0) || max_atoms == 0 => Err(
            SparseError::InvalidParameter("error bound must be ≥ 0 with at least one atom".into()),
        ),
        _ => Ok(()),
    }
}

/// OMP-codes every column of `samples` against a unit-column dictionary.
pub fn sparse_code(dict: &Dictionary, samples: &Matrix, rule: CodingRule) -> Result<SparseCodes> {
    check_rule(rule)?;
    if !dict.is_normalized() {
        return Err(SparseError::InvalidParameter("sparse coding needs a unit-column dictionary".into()));
    }
    if samples.nrows() != dict.dim() {
        return Err(SparseError::DimensionMismatch(format!(
            "samples have {} rows, dictionary {}",
            samples.nrows(),
            dict.dim()
        )));
    }
    let columns = map_indices(samples.ncols(), |j| code_column(dict, &samples.column(j).into_owned(), rule));
    Ok(SparseCodes { num_atoms: dict.num_atoms(), columns })
}

/// Best rank-1 approximation `u wᵀ` of `e` with `‖u‖ = 1`.
///
/// The top singular vector comes from the eigen-decomposition of the smaller
/// of `e eᵀ` and `eᵀ e`; then `w = eᵀ u`. For a zero matrix `w` is zero.
pub fn rank_one_update(e: &Matrix) -> (Vector, Vector) {
    let (d, p) = e.shape();
    let top = |m: Matrix| {
        let eig = SymmetricEigen::new(m);
        let k = eig.eigenvalues.imax();
        eig.eigenvectors.column(k).into_owned()
    };
    let mut u = if d <= p {
        top(e * e.transpose())
    } else {
        let v = top(e.transpose() * e);
        e * v
    };
    let n = u.norm();
    if n == 0.0 || !n.is_finite() {
        let mut unit = Vector::zeros(d);
        unit[0] = 1.0;
        return (unit, Vector::zeros(p));
    }
    u /= n;
    if u[u.iamax()] < 0.0 {
        u.neg_mut();
    }
    let w = e.transpose() * &u;
    (u, w)
}

fn residual(samples: &Matrix, atoms: &Matrix, codes: &SparseCodes) -> Matrix {
    let mut r = samples.clone();
    for (j, col) in codes.columns.iter().enumerate() {
        for &(i, v) in col {
            r.column_mut(j).axpy(-v, &atoms.column(i), 1.0);
        }
    }
    r
}

/// Runs K-SVD sweeps from the given initial atoms (normalized first).
///
/// Each sweep codes every sample, then updates atoms one at a time by a
/// rank-1 fit of the residual restricted to the samples using that atom.
/// Under `CodingRule::Sparsity` a new code replaces the old one only if it
/// reconstructs at least as well, and an atom update is applied only if it
/// does not raise the restricted error, so the trace cannot increase. An
/// atom used by no sample is replaced by the worst-represented sample.
pub fn ksvd_train_from(samples: &Matrix, initial: &Matrix, rule: CodingRule, sweeps: usize) -> Result<KsvdOutcome> {
    check_rule(rule)?;
    if initial.nrows() != samples.nrows() {
        return Err(SparseError::DimensionMismatch(format!(
            "initial atoms have {} rows, samples {}",
            initial.nrows(),
            samples.nrows()
        )));
    }
    let mut atoms = normalize_matrix_columns(initial)?;
    let n = samples.ncols();
    let m = atoms.ncols();
    let mut codes = SparseCodes::zeros(m, n);
    let mut r = samples.clone();
    let mut trace = Vec::with_capacity(sweeps);
    let monotone = matches!(rule, CodingRule::Sparsity(_));

    for _ in 0..sweeps {
        let dict = Dictionary::new(atoms.clone())?;
        let fresh = map_indices(n, |j| {
            let y = samples.column(j).into_owned();
            let code = code_column(&dict, &y, rule);
            let mut res = y;
            for &(i, v) in &code {
                res.axpy(-v, &atoms.column(i), 1.0);
            }
            (code, res)
        });
        for (j, (code, res)) in fresh.into_iter().enumerate() {
            if !monotone || res.norm_squared() <= r.column(j).norm_squared() {
                codes.columns[j] = code;
                r.set_column(j, &res);
            }
        }

        // users[l] = (sample, slot in that sample's code) for every use of atom l
        let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
        for (j, col) in codes.columns.iter().enumerate() {
            for (slot, &(i, _)) in col.iter().enumerate() {
                users[i].push((j, slot));
            }
        }
        let mut replaced = vec![false; n];
        for (l, uses) in users.iter().enumerate() {
            if uses.is_empty() {
                let worst = (0..n)
                    .filter(|&j| !replaced[j] && samples.column(j).norm() > 0.0)
                    .max_by(|&a, &b| r.column(a).norm_squared().total_cmp(&r.column(b).norm_squared()));
                if let Some(j) = worst {
                    replaced[j] = true;
                    let s = samples.column(j);
                    atoms.set_column(l, &(s / s.norm()));
                }
                continue;
            }
            let dl = atoms.column(l).into_owned();
            let mut e = Matrix::zeros(samples.nrows(), uses.len());
            for (a, &(j, slot)) in uses.iter().enumerate() {
                let coef = codes.columns[j][slot].1;
                e.set_column(a, &(r.column(j) + &dl * coef));
            }
            let (u, w) = rank_one_update(&e);
            let fitted = &e - &u * w.transpose();
            let old: f64 = uses.iter().map(|&(j, _)| r.column(j).norm_squared()).sum();
            if monotone && fitted.norm_squared() > old {
                continue;
            }
            atoms.set_column(l, &u);
            for (a, &(j, slot)) in uses.iter().enumerate() {
                codes.columns[j][slot].1 = w[a];
                r.set_column(j, &fitted.column(a));
            }
        }
        r = residual(samples, &atoms, &codes);
        trace.push(r.norm());
    }
    let dict = Dictionary::normalized(atoms)?;
    Ok(KsvdOutcome { dict, codes, objective_trace: trace })
}

/// Indices of `m` distinct nonzero training columns chosen by a seeded
/// shuffle.
pub(crate) fn initial_indices(samples: &Matrix, m: usize, seed: u64) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..samples.ncols()).collect();
    order.shuffle(&mut seeded(seed));
    let picked: Vec<usize> = order.into_iter().filter(|&j| samples.column(j).norm() > 0.0).take(m).collect();
    if picked.len() < m {
        return Err(SparseError::InvalidParameter(format!(
            "need {m} nonzero training columns to initialize, found {}",
            picked.len()
        )));
    }
    Ok(picked)
}

pub(crate) fn initial_atoms(samples: &Matrix, m: usize, seed: u64) -> Result<Matrix> {
    Ok(samples.select_columns(&initial_indices(samples, m, seed)?))
}

pub(crate) fn check_sizes(data: &TrainingSet, num_atoms: usize, sparsity_k: usize) -> Result<()> {
    if num_atoms == 0 || num_atoms > data.len() {
        return Err(SparseError::InvalidParameter(format!(
            "atom count {num_atoms} must be in 1..={}",
            data.len()
        )));
    }
    if sparsity_k == 0 {
        return Err(SparseError::InvalidParameter("sparsity must be ≥ 1".into()));
    }
    Ok(())
}

/// K-SVD with at most `sparsity_k` atoms per code, initialized from
/// `num_atoms` training columns chosen by `config.seed`.
pub fn ksvd_train(
    data: &TrainingSet,
    num_atoms: usize,
    sparsity_k: usize,
    sweeps: usize,
    config: &SolverConfig,
) -> Result<LearnedDictionary> {
    config.validate()?;
    check_sizes(data, num_atoms, sparsity_k)?;
    let init = initial_atoms(&data.samples, num_atoms, config.seed)?;
    let out = ksvd_train_from(&data.samples, &init, CodingRule::Sparsity(sparsity_k), sweeps)?;
    Ok(LearnedDictionary { dict: out.dict, classifier: None, transform: None, objective_trace: out.objective_trace })
}

#[derive(Debug, Clone)]
pub struct ModUpdate {
    pub dict: Dictionary,
    /// Codes with rows rescaled so that `dict · codes` is unchanged.
    pub codes: Matrix,
    pub ridge_used: bool,
}

/// Least-squares dictionary `Y Xᵀ (X Xᵀ)⁻¹`, then unit columns with the
/// code rows rescaled to compensate. A numerically singular `X Xᵀ` gets a
/// ridge of 1e-10 (relative to its largest diagonal entry).
pub fn mod_update(data: &TrainingSet, codes: &Matrix) -> Result<ModUpdate> {
    if codes.ncols() != data.len() {
        return Err(SparseError::DimensionMismatch(format!(
            "codes have {} columns for {} samples",
            codes.ncols(),
            data.len()
        )));
    }
    let gram = codes * codes.transpose();
    let rhs = codes * data.samples.transpose();
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    let well_posed = gram.clone().cholesky().filter(|ch| {
        let l = ch.l_dirty();
        (0..gram.nrows()).all(|i| l[(i, i)] > 1e-7 * scale.sqrt())
    });
    let (sol, ridge_used) = match well_posed {
        Some(ch) => (ch.solve(&rhs), false),
        None => {
            let mut g = gram.clone();
            for i in 0..g.nrows() {
                g[(i, i)] += 1e-10 * scale;
            }
            let ch = g.cholesky().ok_or_else(|| SparseError::Singular("X Xᵀ is not invertible".into()))?;
            (ch.solve(&rhs), true)
        }
    };
    let mut d = sol.transpose();
    let mut x = codes.clone();
    for j in 0..d.ncols() {
        let n = d.column(j).norm();
        if n == 0.0 || !n.is_finite() {
            return Err(SparseError::ZeroColumn(j));
        }
        d.column_mut(j).unscale_mut(n);
        x.row_mut(j).scale_mut(n);
    }
    Ok(ModUpdate { dict: Dictionary::normalized(d)?, codes: x, ridge_used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd;
    use crate::rng::{gaussian_matrix, seeded};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    /// Planted `d × m` dictionary and `n` samples each combining `k` random
    /// atoms with standard normal weights.
    pub(crate) fn planted(seed: u64, d: usize, m: usize, n: usize, k: usize) -> (Matrix, Matrix) {
        let mut rng = seeded(seed);
        let d0 = normalize_matrix_columns(&gaussian_matrix(&mut rng, d, m)).unwrap();
        let mut y = Matrix::zeros(d, n);
        for j in 0..n {
            let mut idx: Vec<usize> = (0..m).collect();
            idx.shuffle(&mut rng);
            for &i in &idx[..k] {
                let c: f64 = StandardNormal.sample(&mut rng);
                y.column_mut(j).axpy(c, &d0.column(i), 1.0);
            }
        }
        (d0, y)
    }

    /// Greedy one-to-one matching: fraction of planted atoms with a learned
    /// atom at |inner product| above `thresh`.
    fn recovered_fraction(planted: &Matrix, learned: &Matrix, thresh: f64) -> f64 {
        let mut taken = vec![false; learned.ncols()];
        let mut hits = 0;
        for p in planted.column_iter() {
            let best = (0..learned.ncols())
                .filter(|&j| !taken[j])
                .max_by(|&a, &b| p.dot(&learned.column(a)).abs().total_cmp(&p.dot(&learned.column(b)).abs()));
            if let Some(j) = best {
                if p.dot(&learned.column(j)).abs() > thresh {
                    taken[j] = true;
                    hits += 1;
                }
            }
        }
        hits as f64 / planted.ncols() as f64
    }

    #[test]
    fn repeated_column_gives_that_column() {
        let col = Vector::from_vec(vec![3.0, 0.0, 4.0]);
        let y = Matrix::from_fn(3, 5, |i, _| col[i]);
        let data = TrainingSet::unlabeled(y).unwrap();
        let out = ksvd_train(&data, 1, 1, 3, &SolverConfig::default()).unwrap();
        let atom = out.dict.atoms().column(0).into_owned();
        assert!((atom - &col / 5.0).norm() < 1e-12);
        assert!(*out.objective_trace.last().unwrap() < 1e-10);
    }

    #[test]
    fn orthonormal_columns_fit_in_one_sweep() {
        let q = gaussian_matrix(&mut seeded(3), 6, 6).qr().q();
        let data = TrainingSet::unlabeled(q).unwrap();
        let out = ksvd_train(&data, 6, 1, 1, &SolverConfig::default()).unwrap();
        assert!(out.objective_trace[0] < 1e-8);
    }

    #[test]
    fn planted_dictionary_is_recovered() {
        let (d0, y) = planted(11, 16, 24, 400, 3);
        let data = TrainingSet::unlabeled(y).unwrap();
        let out = ksvd_train(&data, 24, 3, 30, &SolverConfig::default()).unwrap();
        let frac = recovered_fraction(&d0, out.dict.atoms(), 0.95);
        assert!(frac >= 0.7, "recovered {frac}");
        assert!(out.objective_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn rejects_bad_sizes() {
        let data = TrainingSet::unlabeled(Matrix::identity(3, 3)).unwrap();
        assert!(ksvd_train(&data, 4, 1, 1, &SolverConfig::default()).is_err());
        assert!(ksvd_train(&data, 2, 0, 1, &SolverConfig::default()).is_err());
    }

    #[test]
    fn mod_identity_codes_normalize_samples() {
        let y = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 2.0]);
        let data = TrainingSet::unlabeled(y.clone()).unwrap();
        let out = mod_update(&data, &Matrix::identity(2, 2)).unwrap();
        assert!((out.dict.atoms() - normalize_matrix_columns(&y).unwrap()).norm() < 1e-12);
        assert!(!out.ridge_used);
        assert!((out.dict.atoms() * &out.codes - y).norm() < 1e-12);
    }

    #[test]
    fn mod_recovers_consistent_dictionary() {
        let mut rng = seeded(8);
        let d0 = normalize_matrix_columns(&gaussian_matrix(&mut rng, 6, 4)).unwrap();
        let x = gaussian_matrix(&mut rng, 4, 30);
        let data = TrainingSet::unlabeled(&d0 * &x).unwrap();
        let out = mod_update(&data, &x).unwrap();
        // Columns may only differ by sign flips absorbed into the codes.
        let sign = Matrix::from_fn(1, 4, |_, j| d0.column(j).dot(&out.dict.atoms().column(j)).signum());
        let aligned = Matrix::from_fn(6, 4, |i, j| out.dict.atoms()[(i, j)] * sign[(0, j)]);
        assert!((aligned - d0).norm() < 1e-8);
    }

    #[test]
    fn mod_singular_codes_take_ridge() {
        let y = gaussian_matrix(&mut seeded(2), 3, 4);
        let x = Matrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0]);
        let data = TrainingSet::unlabeled(y).unwrap();
        assert!(mod_update(&data, &x).unwrap().ridge_used);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rank_one_meets_eckart_young(seed in any::<u64>(), d in 1usize..7, p in 1usize..9) {
            let e = gaussian_matrix(&mut seeded(seed), d, p);
            let (u, w) = rank_one_update(&e);
            let err = (&e - &u * w.transpose()).norm_squared();
            let s = svd(&e).unwrap().singular_values;
            let tail: f64 = s.iter().skip(1).map(|v| v * v).sum();
            prop_assert!((err - tail).abs() <= 1e-8 * e.norm_squared().max(1.0));
            prop_assert!((u.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn mod_satisfies_normal_equations(seed in any::<u64>()) {
            let mut rng = seeded(seed);
            let y = gaussian_matrix(&mut rng, 5, 20);
            let x = gaussian_matrix(&mut rng, 4, 20);
            let data = TrainingSet::unlabeled(y.clone()).unwrap();
            let out = mod_update(&data, &x).unwrap();
            let d = out.dict.atoms();
            let xs = &out.codes;
            let lhs = &y * xs.transpose() - d * (xs * xs.transpose());
            prop_assert!(lhs.norm() < 1e-8 * (y.norm() * xs.norm()).max(1.0));
        }

        #[test]
        fn ksvd_trace_codes_and_atoms(seed in any::<u64>(), k in 1usize..4) {
            let (_, y) = planted(seed, 8, 12, 60, 2);
            let data = TrainingSet::unlabeled(y).unwrap();
            let cfg = SolverConfig { seed, ..Default::default() };
            let init = initial_atoms(&data.samples, 12, cfg.seed).unwrap();
            let out = ksvd_train_from(&data.samples, &init, CodingRule::Sparsity(k), 6).unwrap();
            prop_assert!(out.objective_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
            prop_assert!(out.codes.max_nnz() <= k);
            prop_assert!(out.dict.atoms().column_iter().all(|c| (c.norm() - 1.0).abs() < 1e-10));
        }
    }
}
