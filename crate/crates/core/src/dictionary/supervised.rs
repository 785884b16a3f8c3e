//! Label-aware K-SVD: the dictionary is learned jointly with a linear
//! classifier (and optionally a code transform) by stacking weighted label
//! blocks under the samples and running plain K-SVD on the stack.

use super::ksvd::{check_sizes, initial_indices, ksvd_train_from, CodingRule};
use super::{LearnedDictionary, TrainingSet};
use crate::error::{Result, SparseError};
use crate::greedy::omp_kernel;
use crate::linalg::{Matrix, Vector};
use crate::problem::{Dictionary, SolverConfig};

/// One-hot indicator `H` with `H[c, i] = 1` iff sample `i` has label `c`.
pub fn label_matrix(labels: &[usize], num_classes: usize) -> Matrix {
    let mut h = Matrix::zeros(num_classes, labels.len());
    for (i, &c) in labels.iter().enumerate() {
        if c < num_classes {
            h[(c, i)] = 1.0;
        }
    }
    h
}

/// Splits `num_atoms` into contiguous class blocks sized in proportion to
/// class frequencies (largest remainder, ties to the lower class). When
/// there are enough atoms every present class gets at least one.
pub fn assign_atom_classes(labels: &[usize], num_atoms: usize, num_classes: usize) -> Result<Vec<usize>> {
    if labels.is_empty() || num_atoms == 0 {
        return Err(SparseError::InvalidParameter("need labels and at least one atom".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= num_classes) {
        return Err(SparseError::InvalidParameter(format!("label {bad} outside {num_classes} classes")));
    }
    let mut counts = vec![0usize; num_classes];
    for &c in labels {
        counts[c] += 1;
    }
    let present: Vec<usize> = (0..num_classes).filter(|&c| counts[c] > 0).collect();
    let mut quota = vec![0usize; num_classes];
    let mut left = num_atoms;
    if num_atoms >= present.len() {
        for &c in &present {
            quota[c] = 1;
        }
        left -= present.len();
    }
    let n = labels.len() as f64;
    let share: Vec<f64> = counts.iter().map(|&k| left as f64 * k as f64 / n).collect();
    for c in 0..num_classes {
        quota[c] += share[c].floor() as usize;
    }
    let mut rest = num_atoms - quota.iter().sum::<usize>();
    let mut order: Vec<usize> = present.clone();
    order.sort_by(|&a, &b| (share[b] - share[b].floor()).total_cmp(&(share[a] - share[a].floor())).then(a.cmp(&b)));
    for &c in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        quota[c] += 1;
        rest -= 1;
    }
    Ok((0..num_classes).flat_map(|c| std::iter::repeat_n(c, quota[c])).collect())
}

/// Joint label matrix `L` (atoms × samples): `L[j, i] = 1` iff atom `j` and
/// sample `i` belong to the same class.
pub fn joint_label_matrix(labels: &[usize], atom_classes: &[usize]) -> Matrix {
    Matrix::from_fn(atom_classes.len(), labels.len(), |j, i| if atom_classes[j] == labels[i] { 1.0 } else { 0.0 })
}

struct Stacked {
    dict: Dictionary,
    /// Label-side blocks in input order, rescaled by the atom norms.
    blocks: Vec<Matrix>,
    codes: Matrix,
    trace: Vec<f64>,
}

/// K-SVD on `[Y; √w₁·B₁; …]`, then every block column is divided by the
/// norm of its dictionary part and codes are scaled up to match. Blocks
/// with zero weight are left out of the stack and returned empty.
fn stacked_ksvd(
    data: &TrainingSet,
    blocks: &[(f64, &Matrix)],
    num_atoms: usize,
    sparsity_k: usize,
    config: &SolverConfig,
) -> Result<Stacked> {
    config.validate()?;
    check_sizes(data, num_atoms, sparsity_k)?;
    let d = data.dim();
    let n = data.len();
    let used: Vec<(f64, &Matrix)> = blocks.iter().copied().filter(|(w, _)| *w > 0.0).collect();
    if let Some((w, _)) = blocks.iter().find(|(w, _)| !(*w >= 0.0) || !w.is_finite()) {
        return Err(SparseError::InvalidParameter(format!("block weight must be ≥ 0, got {w}")));
    }
    let rows = d + used.iter().map(|(_, b)| b.nrows()).sum::<usize>();
    let mut t = Matrix::zeros(rows, n);
    t.rows_mut(0, d).copy_from(&data.samples);
    let mut at = d;
    for (w, b) in &used {
        t.rows_mut(at, b.nrows()).copy_from(&(*b * w.sqrt()));
        at += b.nrows();
    }
    // Same initial columns as unsupervised K-SVD with this seed.
    let picked = initial_indices(&data.samples, num_atoms, config.seed)?;
    let sweeps = config.step("sweeps", 20.0).max(1.0) as usize;
    let out = ksvd_train_from(&t, &t.select_columns(&picked), CodingRule::Sparsity(sparsity_k), sweeps)?;

    let z = out.dict.atoms();
    let mut dpart = z.rows(0, d).into_owned();
    let norms: Vec<f64> = dpart.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&v| !(v > 1e-12)) {
        return Err(SparseError::ZeroColumn(j));
    }
    for (j, &v) in norms.iter().enumerate() {
        dpart.column_mut(j).unscale_mut(v);
    }
    let mut codes = out.codes.to_dense();
    for (j, &v) in norms.iter().enumerate() {
        codes.row_mut(j).scale_mut(v);
    }
    let mut result_blocks = Vec::with_capacity(blocks.len());
    let mut at = d;
    for (w, b) in blocks {
        if *w > 0.0 {
            let mut m = z.rows(at, b.nrows()) / w.sqrt();
            for (j, &v) in norms.iter().enumerate() {
                m.column_mut(j).unscale_mut(v);
            }
            result_blocks.push(m);
            at += b.nrows();
        } else {
            result_blocks.push(Matrix::zeros(0, 0));
        }
    }
    Ok(Stacked { dict: Dictionary::normalized(dpart)?, blocks: result_blocks, codes, trace: out.objective_trace })
}

/// Ridge fit `B Xᵀ (X Xᵀ + ρI)⁻¹` for a label block that was not stacked.
fn ridge_fit(target: &Matrix, codes: &Matrix) -> Result<Matrix> {
    let mut g = codes * codes.transpose();
    let rho = 1e-6 * g.diagonal().max().max(1e-12);
    for i in 0..g.nrows() {
        g[(i, i)] += rho;
    }
    let ch = g.cholesky().ok_or_else(|| SparseError::Singular("code Gram matrix".into()))?;
    Ok(ch.solve(&(codes * target.transpose())).transpose())
}

/// Discriminative K-SVD on `[Y; √μ·H]`. Knob `"sweeps"` (20). With μ = 0
/// the dictionary matches plain K-SVD and the classifier is a ridge fit of
/// the labels on the codes.
pub fn dksvd_train(
    data: &TrainingSet,
    num_atoms: usize,
    sparsity_k: usize,
    mu: f64,
    config: &SolverConfig,
) -> Result<LearnedDictionary> {
    let (labels, c) = data.require_labels()?;
    let h = label_matrix(labels, c);
    let st = stacked_ksvd(data, &[(mu, &h)], num_atoms, sparsity_k, config)?;
    let classifier = if mu > 0.0 { st.blocks[0].clone() } else { ridge_fit(&h, &st.codes)? };
    Ok(LearnedDictionary { dict: st.dict, classifier: Some(classifier), transform: None, objective_trace: st.trace })
}

/// Label-consistent K-SVD on `[Y; √μ·L; √η·H]` with `L` built from a
/// proportional atom-class assignment. The transform is present when μ > 0.
pub fn lcksvd_train(
    data: &TrainingSet,
    num_atoms: usize,
    sparsity_k: usize,
    mu: f64,
    eta: f64,
    config: &SolverConfig,
) -> Result<LearnedDictionary> {
    let (labels, c) = data.require_labels()?;
    let h = label_matrix(labels, c);
    let l = joint_label_matrix(labels, &assign_atom_classes(labels, num_atoms, c)?);
    let st = stacked_ksvd(data, &[(mu, &l), (eta, &h)], num_atoms, sparsity_k, config)?;
    let transform = (mu > 0.0).then(|| st.blocks[0].clone());
    let classifier = if eta > 0.0 { st.blocks[1].clone() } else { ridge_fit(&h, &st.codes)? };
    Ok(LearnedDictionary { dict: st.dict, classifier: Some(classifier), transform, objective_trace: st.trace })
}

/// OMP code of `y` with at most `sparsity_k` atoms, then the class with the
/// largest classifier response (lowest index on ties).
pub fn supervised_classify(model: &LearnedDictionary, y: &Vector, sparsity_k: usize) -> Result<usize> {
    let c = model.classifier.as_ref().ok_or(SparseError::MissingClassifier)?;
    if c.ncols() != model.dict.num_atoms() || y.len() != model.dict.dim() {
        return Err(SparseError::DimensionMismatch("probe, dictionary and classifier disagree".into()));
    }
    if !model.dict.is_normalized() {
        return Err(SparseError::InvalidParameter("model dictionary must have unit columns".into()));
    }
    if sparsity_k == 0 {
        return Err(SparseError::InvalidParameter("sparsity must be ≥ 1".into()));
    }
    let code = omp_kernel(&model.dict, y, sparsity_k, 1e-12 * y.norm());
    let f = c * code.alpha;
    Ok(argmax_first(&f))
}

fn argmax_first(f: &Vector) -> usize {
    let mut best = 0;
    for i in 1..f.len() {
        if f[i] > f[best] {
            best = i;
        }
    }
    best
}
