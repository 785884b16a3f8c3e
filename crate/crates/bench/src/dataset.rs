//! Dataset ingestion: `data.csv` + `labels.csv`, or one folder of P5
//! images per class.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sparse_rep::classify::LabeledDataset;
use sparse_rep::pgm::read_pgm_file;
use sparse_rep::Matrix;

use crate::error::{BenchError, Result};

fn data_err(msg: impl Into<String>) -> BenchError {
    BenchError::Data(msg.into())
}

/// Loads a dataset. Samples become columns; CSV labels are mapped to
/// `0..c` in increasing order, and image classes follow the sorted
/// folder names.
pub fn load_dataset(path: &Path, resize: Option<(usize, usize)>) -> Result<LabeledDataset> {
    if !path.is_dir() {
        return Err(data_err(format!("dataset directory {} not found", path.display())));
    }
    if path.join("data.csv").is_file() {
        if resize.is_some() {
            return Err(BenchError::Config("resize applies to image folders only".into()));
        }
        load_csv(&path.join("data.csv"), &path.join("labels.csv"))
    } else {
        load_pgm_folders(path, resize)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| BenchError::io(path, e))
}

fn load_csv(data_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let text = read_text(data_path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| data_err(format!("{}:{}: malformed number", data_path.display(), n + 1)))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(data_err(format!(
                    "{}:{}: {} values, expected {}",
                    data_path.display(),
                    n + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(data_err(format!("{} has no samples", data_path.display())));
    }

    let raw: Vec<i64> = read_text(labels_path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<i64>().map_err(|_| data_err(format!("unknown label `{l}` in {}", labels_path.display()))))
        .collect::<Result<_>>()?;
    if raw.len() != rows.len() {
        return Err(data_err(format!("{} labels for {} samples", raw.len(), rows.len())));
    }
    let mut ids: BTreeMap<i64, usize> = raw.iter().map(|&l| (l, 0)).collect();
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    let labels = raw.iter().map(|l| ids[l]).collect();
    let d = rows[0].len();
    let samples = Matrix::from_fn(d, rows.len(), |i, j| rows[j][i]);
    Ok(LabeledDataset::new(samples, labels, ids.len())?)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| BenchError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| BenchError::io(dir, err)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

fn load_pgm_folders(root: &Path, resize: Option<(usize, usize)>) -> Result<LabeledDataset> {
    let classes: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if classes.is_empty() {
        return Err(data_err(format!("{} has neither data.csv nor class folders", root.display())));
    }
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (label, dir) in classes.iter().enumerate() {
        let images: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
            .collect();
        if images.is_empty() {
            return Err(data_err(format!("class folder {} has no .pgm images", dir.display())));
        }
        for file in images {
            let img = read_pgm_file(&file).map_err(|e| data_err(format!("{}: {e}", file.display())))?;
            let img = match resize {
                Some((h, w)) => img.resize_bilinear(h, w)?,
                None => img,
            };
            if let Some(first) = columns.first() {
                if first.len() != img.pixels().len() {
                    return Err(data_err(format!(
                        "{} is {}×{}, unlike earlier images",
                        file.display(),
                        img.height(),
                        img.width()
                    )));
                }
            }
            columns.push(img.pixels().to_vec());
            labels.push(label);
        }
    }
    let samples = Matrix::from_fn(columns[0].len(), columns.len(), |i, j| columns[j][i]);
    Ok(LabeledDataset::new(samples, labels, classes.len())?)
}
