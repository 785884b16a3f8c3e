//! Dense vector/matrix helpers: norms, SVD, ridge regression and PCA.
//!
//! Matrices hold samples or atoms as columns throughout the crate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SparseError};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub fn ensure_finite_vec(v: &Vector, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SparseError::NonFinite(what))
    }
}

pub fn ensure_finite_mat(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SparseError::NonFinite(what))
    }
}

/// `(Σ|v_i|^p)^{1/p}` for `p ≥ 1`; the penalty `Σ|v_i|^p` for `0 < p < 1`.
pub fn norm_lp(v: &Vector, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(SparseError::InvalidParameter(format!("p must be positive, got {p}")));
    }
    if p == 1.0 {
        return Ok(v.iter().map(|x| x.abs()).sum());
    }
    if p == 2.0 {
        return Ok(v.norm());
    }
    let s: f64 = v.iter().map(|x| x.abs().powf(p)).sum();
    Ok(if p >= 1.0 { s.powf(1.0 / p) } else { s })
}

/// Threshold used when counting nonzeros.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroTolerance {
    /// `1e-8 · max|v_i|`
    Auto,
    Absolute(f64),
}

impl ZeroTolerance {
    pub fn resolve(self, v: &Vector) -> f64 {
        match self {
            ZeroTolerance::Auto => 1e-8 * v.amax(),
            ZeroTolerance::Absolute(t) => t.max(0.0),
        }
    }
}

pub fn norm_l0(v: &Vector, tol: ZeroTolerance) -> usize {
    let t = tol.resolve(v);
    v.iter().filter(|x| x.abs() > t).count()
}

/// Sum of column l2 norms.
pub fn norm_l21(m: &Matrix) -> f64 {
    m.column_iter().map(|c| c.norm()).sum()
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let ev = SymmetricEigen::new(gram).eigenvalues;
    ev.iter().cloned().fold(0.0, f64::max).sqrt()
}

/// Thin, rank-truncated SVD: `M = U diag(s) Vᵀ` with `s` strictly positive
/// and sorted descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub singular_values: Vector,
    pub v: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    ensure_finite_mat(m, "svd input")?;
    let (d, n) = m.shape();
    let raw = m.clone().svd(true, true);
    let u = raw.u.expect("requested U");
    let vt = raw.v_t.expect("requested V^T");
    let s = raw.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let smax = order.first().map(|&i| s[i]).unwrap_or(0.0);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| s[i] > 0.0 && s[i] >= 1e-12 * smax)
        .collect();
    let r = keep.len();
    let mut uu = Matrix::zeros(d, r);
    let mut vv = Matrix::zeros(n, r);
    let mut ss = Vector::zeros(r);
    for (j, &i) in keep.iter().enumerate() {
        uu.set_column(j, &u.column(i));
        vv.set_column(j, &vt.row(i).transpose());
        ss[j] = s[i];
    }
    Ok(SvdResult { u: uu, singular_values: ss, v: vv })
}

/// Minimizer of `‖b − Ax‖² + μ‖x‖²`.
pub fn ridge_least_squares(a: &Matrix, b: &Vector, mu: f64) -> Result<Vector> {
    if a.nrows() != b.len() {
        return Err(SparseError::DimensionMismatch(format!(
            "matrix has {} rows but rhs has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    if !(mu >= 0.0) {
        return Err(SparseError::InvalidParameter(format!("ridge weight must be ≥ 0, got {mu}")));
    }
    let mut gram = a.transpose() * a;
    let rhs = a.transpose() * b;
    if mu == 0.0 {
        let s = svd(a)?;
        if s.rank() < a.ncols() {
            return Err(SparseError::Singular(format!(
                "AᵀA has rank {} < {}",
                s.rank(),
                a.ncols()
            )));
        }
    } else {
        for i in 0..gram.nrows() {
            gram[(i, i)] += mu;
        }
    }
    solve_spd(gram, &rhs)
}

/// Solves a symmetric positive definite system by Cholesky, falling back to
/// LU when rounding breaks definiteness.
pub fn solve_spd(a: Matrix, b: &Vector) -> Result<Vector> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.lu()
        .solve(b)
        .ok_or_else(|| SparseError::Singular("system matrix is not invertible".into()))
}

/// Solves the normal equations of a column subset, adding a tiny ridge when
/// the Gram matrix is numerically singular. Returns the solution and whether
/// the ridge was needed.
pub fn solve_gram_guarded(gram: &Matrix, rhs: &Vector, ridge: f64) -> (Vector, bool) {
    if let Some(ch) = gram.clone().cholesky() {
        let diag_min = (0..gram.nrows())
            .map(|i| ch.l_dirty()[(i, i)])
            .fold(f64::INFINITY, f64::min);
        let diag_max = (0..gram.nrows())
            .map(|i| gram[(i, i)])
            .fold(0.0, f64::max)
            .sqrt();
        if diag_min > 1e-7 * diag_max {
            return (ch.solve(rhs), false);
        }
    }
    let mut g = gram.clone();
    let scale = (0..g.nrows()).map(|i| g[(i, i)]).fold(0.0, f64::max).max(1.0);
    for i in 0..g.nrows() {
        g[(i, i)] += ridge * scale;
    }
    let x = match g.clone().cholesky() {
        Some(ch) => ch.solve(rhs),
        None => g.lu().solve(rhs).unwrap_or_else(|| Vector::zeros(rhs.len())),
    };
    (x, true)
}

/// Principal component projection fitted on the columns of a data matrix.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vector,
    /// `k × d`, orthonormal rows.
    pub projection: Matrix,
    /// All nonzero eigenvalues of the sample covariance, descending.
    pub eigenvalues: Vector,
}

impl Pca {
    pub fn dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn retained_energy(&self) -> f64 {
        let total: f64 = self.eigenvalues.sum();
        if total == 0.0 {
            return 1.0;
        }
        self.eigenvalues.rows(0, self.dim()).sum() / total
    }

    pub fn project(&self, data: &Matrix) -> Result<Matrix> {
        if data.nrows() != self.mean.len() {
            return Err(SparseError::DimensionMismatch(format!(
                "PCA fitted on dimension {}, got {}",
                self.mean.len(),
                data.nrows()
            )));
        }
        let mut centered = data.clone();
        for mut c in centered.column_iter_mut() {
            c -= &self.mean;
        }
        Ok(&self.projection * centered)
    }
}

/// Fits PCA on the columns of `data`, keeping the fewest leading directions
/// whose eigenvalue mass reaches `energy`.
pub fn pca_fit(data: &Matrix, energy: f64) -> Result<Pca> {
    if !(energy > 0.0 && energy <= 1.0) {
        return Err(SparseError::InvalidParameter(format!("energy must lie in (0,1], got {energy}")));
    }
    let (d, n) = data.shape();
    if n < 2 {
        return Err(SparseError::InvalidParameter("PCA needs at least 2 samples".into()));
    }
    ensure_finite_mat(data, "pca input")?;
    let mean = data.column_mean();
    let mut xc = data.clone();
    for mut c in xc.column_iter_mut() {
        c -= &mean;
    }
    let denom = (n - 1) as f64;

    // Eigenvectors of the smaller Gram matrix; for n < d the sample-space
    // eigenvectors are mapped back through the centered data.
    let (vals, dirs): (Vec<f64>, Matrix) = if d <= n {
        let cov = (&xc * xc.transpose()) / denom;
        let eig = SymmetricEigen::new(cov);
        (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
    } else {
        let k = (xc.transpose() * &xc) / denom;
        let eig = SymmetricEigen::new(k);
        let mut dirs = Matrix::zeros(d, n);
        for j in 0..n {
            let lam = eig.eigenvalues[j];
            if lam > 0.0 {
                let mut u = &xc * eig.eigenvectors.column(j);
                let nu = u.norm();
                if nu > 0.0 {
                    u /= nu;
                    dirs.set_column(j, &u);
                }
            }
        }
        (eig.eigenvalues.iter().cloned().collect(), dirs)
    };

    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let top = order.first().map(|&i| vals[i]).unwrap_or(0.0);
    let positive: Vec<usize> = order
        .into_iter()
        .filter(|&i| vals[i] > 1e-12 * top.max(f64::MIN_POSITIVE))
        .collect();
    let eigenvalues = Vector::from_iterator(positive.len(), positive.iter().map(|&i| vals[i]));
    let total: f64 = eigenvalues.sum();

    let mut k = 0;
    let mut acc = 0.0;
    while k < positive.len() {
        acc += eigenvalues[k];
        k += 1;
        if acc >= energy * total * (1.0 - 1e-12) {
            break;
        }
    }
    let k = k.max(1).min(d);
    let mut projection = Matrix::zeros(k, d);
    for (r, &i) in positive.iter().take(k).enumerate() {
        projection.set_row(r, &dirs.column(i).transpose());
    }
    Ok(Pca { mean, projection, eigenvalues })
}

/// Fits PCA and projects the fitting data in one go.
pub fn pca_reduce(data: &Matrix, energy: f64) -> Result<(Pca, Matrix)> {
    let pca = pca_fit(data, energy)?;
    let projected = pca.project(data)?;
    Ok((pca, projected))
}

/// Scales every column to unit l2 norm, failing on a zero column.
pub fn normalize_matrix_columns(m: &Matrix) -> Result<Matrix> {
    let mut out = m.clone();
    for (j, mut c) in out.column_iter_mut().enumerate() {
        let n = c.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(SparseError::ZeroColumn(j));
        }
        c /= n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, gaussian_vector, seeded};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn lp_norm_examples() {
        assert_relative_eq!(norm_lp(&Vector::from_vec(vec![3.0, 4.0]), 2.0).unwrap(), 5.0);
        assert_relative_eq!(norm_lp(&Vector::from_vec(vec![1.0, -1.0, 1.0]), 1.0).unwrap(), 3.0);
        assert_relative_eq!(norm_lp(&Vector::from_vec(vec![4.0, 0.0]), 0.5).unwrap(), 2.0);
        assert_relative_eq!(
            norm_lp(&Vector::from_vec(vec![1.0, 2.0, 2.0]), 3.0).unwrap(),
            17f64.powf(1.0 / 3.0)
        );
        assert!(norm_lp(&Vector::zeros(2), 0.0).is_err());
        assert!(norm_lp(&Vector::zeros(2), -1.0).is_err());
    }

    #[test]
    fn l0_examples() {
        let v = Vector::from_vec(vec![0.0, 2.0, 0.0, -1.0]);
        assert_eq!(norm_l0(&v, ZeroTolerance::Absolute(0.0)), 2);
        assert_eq!(norm_l0(&Vector::zeros(5), ZeroTolerance::Auto), 0);
        let v = Vector::from_vec(vec![1e-12, 1.0]);
        assert_eq!(norm_l0(&v, ZeroTolerance::Absolute(1e-10)), 1);
        assert_eq!(norm_l0(&v, ZeroTolerance::Auto), 1);
    }

    #[test]
    fn l21_examples() {
        assert_relative_eq!(norm_l21(&Matrix::identity(2, 2)), 2.0);
        assert_eq!(norm_l21(&Matrix::zeros(3, 2)), 0.0);
        let m = Matrix::from_column_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]);
        assert_relative_eq!(norm_l21(&m), 5.0);
    }

    #[test]
    fn svd_examples() {
        let s = svd(&Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 3.0]))).unwrap();
        assert_relative_eq!(s.singular_values[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(s.singular_values[1], 1.0, epsilon = 1e-12);

        let a = Vector::from_vec(vec![1.0, 2.0, 2.0]);
        let b = Vector::from_vec(vec![3.0, 4.0]);
        let s = svd(&(&a * b.transpose())).unwrap();
        assert_eq!(s.rank(), 1);
        assert_relative_eq!(s.singular_values[0], 15.0, epsilon = 1e-10);

        let mut rng = seeded(1);
        let m = gaussian_matrix(&mut rng, 5, 3);
        let s = svd(&m).unwrap();
        let eu = (s.u.transpose() * &s.u - Matrix::identity(3, 3)).amax();
        let ev = (s.v.transpose() * &s.v - Matrix::identity(3, 3)).amax();
        assert!(eu < 1e-10 && ev < 1e-10);

        let mut bad = Matrix::zeros(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(svd(&bad).is_err());
        assert_eq!(svd(&Matrix::zeros(3, 2)).unwrap().rank(), 0);
    }

    #[test]
    fn ridge_examples() {
        let x = ridge_least_squares(&Matrix::identity(2, 2), &Vector::from_vec(vec![1.0, 2.0]), 0.0).unwrap();
        assert_relative_eq!(x[0], 1.0);
        assert_relative_eq!(x[1], 2.0);
        let x = ridge_least_squares(&Matrix::identity(1, 1), &Vector::from_vec(vec![2.0]), 1.0).unwrap();
        assert_relative_eq!(x[0], 1.0);

        // Oracle: explicit inverse of the regularized Gram.
        let mut rng = seeded(2);
        let a = gaussian_matrix(&mut rng, 6, 4);
        let b = gaussian_vector(&mut rng, 6);
        let x = ridge_least_squares(&a, &b, 0.1).unwrap();
        let g = a.transpose() * &a + Matrix::identity(4, 4) * 0.1;
        let oracle = g.try_inverse().unwrap() * a.transpose() * &b;
        assert!((x - oracle).amax() < 1e-10);

        let rank_def = Matrix::from_column_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(matches!(
            ridge_least_squares(&rank_def, &Vector::zeros(2), 0.0),
            Err(SparseError::Singular(_))
        ));
    }

    #[test]
    fn pca_line_in_3d() {
        let dir = Vector::from_vec(vec![1.0, 2.0, -1.0]).normalize();
        let data = Matrix::from_fn(3, 20, |i, j| dir[i] * (j as f64 - 7.0) + 0.5);
        let (pca, proj) = pca_reduce(&data, 0.98).unwrap();
        assert_eq!(pca.dim(), 1);
        assert_eq!(proj.shape(), (1, 20));
    }

    #[test]
    fn pca_full_energy_is_rank() {
        let mut rng = seeded(3);
        // 4 samples in 6-D: centered rank is 3.
        let data = gaussian_matrix(&mut rng, 6, 4);
        let pca = pca_fit(&data, 1.0).unwrap();
        assert_eq!(pca.dim(), 3);
        assert!(pca_fit(&Matrix::zeros(3, 1), 0.9).is_err());
        assert!(pca_fit(&data, 0.0).is_err());
    }

    #[test]
    fn pca_minimal_dimension_matches_spectrum() {
        // Oracle: eigenvalues of the explicit covariance matrix.
        let mut rng = seeded(4);
        let data = gaussian_matrix(&mut rng, 10, 100);
        let pca = pca_fit(&data, 0.5).unwrap();
        let mean = data.column_mean();
        let mut xc = data.clone();
        for mut c in xc.column_iter_mut() {
            c -= &mean;
        }
        let cov = &xc * xc.transpose() / 99.0;
        let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = ev.iter().sum();
        let mut acc = 0.0;
        let mut want = 0;
        for e in &ev {
            acc += e;
            want += 1;
            if acc >= 0.5 * total {
                break;
            }
        }
        assert_eq!(pca.dim(), want);
        assert!(pca.retained_energy() >= 0.5);
    }

    #[test]
    fn pca_snapshot_route_matches_covariance_route() {
        let mut rng = seeded(5);
        let data = gaussian_matrix(&mut rng, 30, 8);
        let pca = pca_fit(&data, 1.0).unwrap();
        // Projection of the fitting data should preserve centered energy.
        let proj = pca.project(&data).unwrap();
        let mean = data.column_mean();
        let mut xc = data.clone();
        for mut c in xc.column_iter_mut() {
            c -= &mean;
        }
        assert_relative_eq!(proj.norm(), xc.norm(), max_relative = 1e-10);
    }

    proptest! {
        #[test]
        fn l2_squared_is_inner_product(v in prop::collection::vec(-1e3f64..1e3, 1..20)) {
            let v = Vector::from_vec(v);
            let n = norm_lp(&v, 2.0).unwrap();
            let ip = v.dot(&v);
            prop_assert!((n * n - ip).abs() <= 1e-12 * ip.max(1e-300));
        }

        #[test]
        fn svd_reconstructs_and_matches_frobenius(
            rows in 1usize..7, cols in 1usize..7, seed in any::<u64>()
        ) {
            let m = gaussian_matrix(&mut seeded(seed), rows, cols);
            let s = svd(&m).unwrap();
            let err = (s.reconstruct() - &m).norm() / m.norm();
            prop_assert!(err < 1e-8);
            prop_assert!((s.singular_values.norm() - m.norm()).abs() <= 1e-10 * m.norm());
            for w in s.singular_values.as_slice().windows(2) {
                prop_assert!(w[0] >= w[1] && w[1] > 0.0);
            }
        }

        #[test]
        fn ridge_satisfies_normal_equations(
            rows in 1usize..8, cols in 1usize..8, mu in 1e-3f64..10.0, seed in any::<u64>()
        ) {
            let mut rng = seeded(seed);
            let a = gaussian_matrix(&mut rng, rows, cols);
            let b = gaussian_vector(&mut rng, rows);
            let x = ridge_least_squares(&a, &b, mu).unwrap();
            let lhs = a.transpose() * &a * &x + &x * mu;
            let rhs = a.transpose() * &b;
            prop_assert!((lhs - &rhs).norm() <= 1e-8 * rhs.norm().max(1.0));
        }

        #[test]
        fn pca_rows_orthonormal(d in 2usize..12, n in 2usize..12, e in 0.1f64..1.0, seed in any::<u64>()) {
            let data = gaussian_matrix(&mut seeded(seed), d, n);
            let pca = pca_fit(&data, e).unwrap();
            let p = &pca.projection;
            let g = p * p.transpose() - Matrix::identity(p.nrows(), p.nrows());
            prop_assert!(g.amax() < 1e-10);
            prop_assert!(pca.retained_energy() >= e - 1e-12);
        }
    }
}
