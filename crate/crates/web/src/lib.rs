//! WebAssembly bindings for the browser demo in `www/`.

use sparse_rep::greedy::omp_solve;
use sparse_rep::homotopy::lasso_homotopy;
use sparse_rep::proximal::{half_threshold_scalar, soft_threshold_scalar};
use sparse_rep::rng::{gaussian_matrix, gaussian_vector, seeded};
use sparse_rep::{Constraint, Dictionary, SolverConfig, SparseProblem, Vector};
use wasm_bindgen::prelude::*;

type Out = Result<Vec<f64>, String>;

fn msg(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Samples `points` inputs evenly on `[-range, range]` and returns them
/// interleaved as `[x, soft(x), half(x), hard(x)]` per point, all at
/// threshold weight λ.
fn threshold_curves_impl(lambda: f64, range: f64, points: usize) -> Out {
    if !(lambda >= 0.0 && range > 0.0 && points >= 2) {
        return Err(String::from("need lambda ≥ 0, range > 0 and at least 2 points"));
    }
    let mut out = Vec::with_capacity(4 * points);
    for i in 0..points {
        let x = -range + 2.0 * range * i as f64 / (points - 1) as f64;
        out.extend([
            x,
            soft_threshold_scalar(x, lambda),
            half_threshold_scalar(x, lambda),
            if x.abs() > lambda { x } else { 0.0 },
        ]);
    }
    Ok(out)
}

/// Coefficient path of the LASSO homotopy on a random normalized
/// `rows × atoms` problem. Row-major: one row per breakpoint holding
/// `λ` followed by the `atoms` coefficients.
fn homotopy_path_impl(seed: u64, rows: usize, atoms: usize) -> Out {
    if rows == 0 || atoms == 0 || rows > 64 || atoms > 128 {
        return Err(String::from("need 1 ≤ rows ≤ 64 and 1 ≤ atoms ≤ 128"));
    }
    let mut rng = seeded(seed);
    let dict = Dictionary::normalized(gaussian_matrix(&mut rng, rows, atoms)).map_err(msg)?;
    let y = gaussian_vector(&mut rng, rows);
    let problem = SparseProblem::new(&dict, y, Constraint::Interpolating).map_err(msg)?;
    let (_, path) = lasso_homotopy(&problem, &SolverConfig::default()).map_err(msg)?;
    let mut out = Vec::with_capacity(path.len() * (atoms + 1));
    for p in &path {
        out.push(p.lambda);
        out.extend(p.alpha.iter());
    }
    Ok(out)
}

/// Plants a `k`-sparse ±[1, 2] signal in a random normalized
/// `rows × atoms` dictionary and recovers it with OMP. Returns the planted
/// coefficients, the recovered ones, then the final residual norm.
fn omp_recovery_impl(seed: u64, rows: usize, atoms: usize, k: usize) -> Out {
    if k == 0 || k > rows || rows > 256 || atoms > 512 || atoms < rows {
        return Err(String::from("need 1 ≤ k ≤ rows ≤ atoms, rows ≤ 256, atoms ≤ 512"));
    }
    let mut rng = seeded(seed);
    let dict = Dictionary::normalized(gaussian_matrix(&mut rng, rows, atoms)).map_err(msg)?;
    let draws = gaussian_vector(&mut rng, atoms);
    // Support: the k largest |draws|; magnitudes from the same draws.
    let mut order: Vec<usize> = (0..atoms).collect();
    order.sort_by(|&a, &b| draws[b].abs().total_cmp(&draws[a].abs()));
    let mut planted = Vector::zeros(atoms);
    for (r, &i) in order[..k].iter().enumerate() {
        let mag = 1.0 + draws[order[atoms - 1 - r]].abs().min(1.0);
        planted[i] = mag.copysign(draws[i]);
    }
    let y = dict.atoms() * &planted;
    let problem = SparseProblem::new(&dict, y, Constraint::Sparsity(k)).map_err(msg)?;
    let sol = omp_solve(&problem, &SolverConfig::default()).map_err(msg)?;
    let mut out: Vec<f64> = planted.iter().copied().collect();
    out.extend(sol.alpha.iter());
    out.push(sol.residual_norm);
    Ok(out)
}

#[wasm_bindgen]
pub fn threshold_curves(lambda: f64, range: f64, points: usize) -> Result<Vec<f64>, JsError> {
    threshold_curves_impl(lambda, range, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn homotopy_path(seed: u64, rows: usize, atoms: usize) -> Result<Vec<f64>, JsError> {
    homotopy_path_impl(seed, rows, atoms).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn omp_recovery(seed: u64, rows: usize, atoms: usize, k: usize) -> Result<Vec<f64>, JsError> {
    omp_recovery_impl(seed, rows, atoms, k).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_layout() {
        let c = threshold_curves_impl(1.0, 3.0, 7).unwrap();
        assert_eq!(c.len(), 28);
        // x = 3: soft 2, hard 3; x = 0 maps to 0 everywhere.
        assert_eq!(&c[24..28], &[3.0, 2.0, c[26], 3.0]);
        assert!(c[26] > 2.0 && c[26] < 3.0);
        assert_eq!(&c[13..16], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn path_ends_interpolating() {
        let p = homotopy_path_impl(3, 6, 10).unwrap();
        assert_eq!(p.len() % 11, 0);
        let rows = p.len() / 11;
        assert!(rows >= 2);
        assert!(p[0] > 0.0 && p[1..11].iter().all(|&a| a == 0.0));
        assert!(p[(rows - 1) * 11] < 1e-8);
    }

    #[test]
    fn omp_recovers_easy_instance() {
        let out = omp_recovery_impl(5, 40, 60, 3).unwrap();
        let (planted, rest) = out.split_at(60);
        assert!(planted.iter().filter(|&&v| v != 0.0).count() == 3);
        assert!(planted.iter().zip(rest).all(|(a, b)| (a - b).abs() < 1e-8));
        assert!(rest[60] < 1e-8);
        assert!(omp_recovery_impl(5, 4, 60, 5).is_err());
    }
}
