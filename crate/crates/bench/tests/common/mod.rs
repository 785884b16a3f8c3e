#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use sparse_rep::classify::LabeledDataset;
use sparse_rep::rng::{gaussian_matrix, gaussian_vector, seeded};
use sparse_rep::Matrix;

/// `per_class` noisy samples around each of `classes` random centers,
/// interleaved by class.
pub fn blobs(seed: u64, dim: usize, classes: usize, per_class: usize, spread: f64) -> LabeledDataset {
    let mut rng = seeded(seed);
    let centers = gaussian_matrix(&mut rng, dim, classes) * 3.0;
    let n = classes * per_class;
    let mut x = Matrix::zeros(dim, n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let c = j % classes;
        x.set_column(j, &(centers.column(c) + gaussian_vector(&mut rng, dim) * spread));
        labels.push(c);
    }
    LabeledDataset::new(x, labels, classes).unwrap()
}

/// Writes `data` as `data.csv` (one sample per row) + `labels.csv`.
pub fn write_csv(data: &LabeledDataset, dir: &Path) {
    let mut rows = String::new();
    let mut labels = String::new();
    for j in 0..data.len() {
        let vals: Vec<String> = data.samples.column(j).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(rows, "{}", vals.join(","));
        let _ = writeln!(labels, "{}", data.labels[j]);
    }
    std::fs::write(dir.join("data.csv"), rows).unwrap();
    std::fs::write(dir.join("labels.csv"), labels).unwrap();
}
