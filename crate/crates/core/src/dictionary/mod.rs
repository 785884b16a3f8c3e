//! Dictionary learning: K-SVD, MOD, LLC coding and codebook optimization,
//! and the label-aware K-SVD variants used for classification.

mod ksvd;
mod llc;
mod persist;
mod supervised;

pub use ksvd::{
    ksvd_train, ksvd_train_from, mod_update, rank_one_update, sparse_code, CodingRule, KsvdOutcome, ModUpdate,
    SparseCodes,
};
pub use llc::{kmeans_codebook, llc_codebook_optimize, llc_encode, LlcOutcome};
pub use persist::{load_model, save_model, write_trace_csv};
pub use supervised::{
    assign_atom_classes, dksvd_train, joint_label_matrix, label_matrix, lcksvd_train, supervised_classify,
};

use crate::error::{Result, SparseError};
use crate::linalg::{ensure_finite_mat, Matrix};
use crate::problem::Dictionary;

/// Training samples as columns, with optional class labels.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub samples: Matrix,
    pub labels: Option<Vec<usize>>,
}

impl TrainingSet {
    pub fn new(samples: Matrix, labels: Option<Vec<usize>>) -> Result<Self> {
        ensure_finite_mat(&samples, "training samples")?;
        if samples.ncols() == 0 || samples.nrows() == 0 {
            return Err(SparseError::DimensionMismatch("training set is empty".into()));
        }
        if let Some(l) = &labels {
            if l.len() != samples.ncols() {
                return Err(SparseError::DimensionMismatch(format!(
                    "{} labels for {} samples",
                    l.len(),
                    samples.ncols()
                )));
            }
        }
        Ok(TrainingSet { samples, labels })
    }

    pub fn unlabeled(samples: Matrix) -> Result<Self> {
        Self::new(samples, None)
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.nrows()
    }

    /// Number of classes, `1 + max label`.
    pub fn num_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    /// One-hot class indicator `H` (classes × samples).
    pub fn label_matrix(&self) -> Option<Matrix> {
        let c = self.num_classes()?;
        self.labels.as_ref().map(|l| label_matrix(l, c))
    }

    fn require_labels(&self) -> Result<(&[usize], usize)> {
        match (&self.labels, self.num_classes()) {
            (Some(l), Some(c)) => Ok((l, c)),
            _ => Err(SparseError::InvalidParameter("training set has no labels".into())),
        }
    }
}

/// Output of every learner. `classifier` (classes × atoms) and `transform`
/// (atoms × atoms) are present only for the supervised variants.
#[derive(Debug, Clone)]
pub struct LearnedDictionary {
    pub dict: Dictionary,
    pub classifier: Option<Matrix>,
    pub transform: Option<Matrix>,
    pub objective_trace: Vec<f64>,
}
