//! Repeated random-split evaluation with per-solver λ selection.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use sparse_rep::classify::{evaluate_prepared, ClassifierSpec, LabeledDataset, PreparedTrain, SolverKind};
use sparse_rep::linalg::pca_fit;
use sparse_rep::rng::seeded;
use sparse_rep::{Matrix, SolverConfig};

use crate::config::BenchConfig;
use crate::dataset::load_dataset;
use crate::error::{BenchError, Result};

/// Seed stream for trial `t` of a run seeded with `seed`.
fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Per class, a seeded shuffle puts `per_class` samples in the training
/// part and the rest in the test part. Both index lists come back sorted.
pub fn per_class_split(data: &LabeledDataset, per_class: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = seeded(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..data.num_classes {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == c).collect();
        if idx.len() < per_class {
            return Err(BenchError::Data(format!(
                "class {c} has {} samples, fewer than train_per_class = {per_class}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..per_class]);
        test.extend_from_slice(&idx[per_class..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Scales nonzero columns to unit length.
fn unit_columns(mut m: Matrix) -> Matrix {
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    m
}

/// Fits PCA on `train` alone, projects both parts and scales every sample
/// to unit length.
pub fn project_split(train: &LabeledDataset, test: &LabeledDataset, energy: f64) -> Result<(LabeledDataset, LabeledDataset)> {
    let pca = pca_fit(&train.samples, energy)?;
    let tr = unit_columns(pca.project(&train.samples)?);
    let te = unit_columns(pca.project(&test.samples)?);
    Ok((
        LabeledDataset::new(tr, train.labels.clone(), train.num_classes)?,
        LabeledDataset::new(te, test.labels.clone(), test.num_classes)?,
    ))
}

fn spec_for(name: &str, lambda: f64) -> Result<ClassifierSpec> {
    ClassifierSpec::from_name(name, lambda).map_err(|e| BenchError::Config(e.to_string()))
}

/// Whether the solver's accuracy depends on λ at all.
pub fn uses_lambda(name: &str) -> bool {
    name.parse::<SolverKind>().map_or(true, |k| !k.is_interpolating())
}

/// Picks λ by a 50/50 per-class split of the (already projected) training
/// part: the grid value with the best held-out accuracy, earliest on ties.
/// Returns `None` for solvers that ignore λ. Classes with a single training
/// sample keep it on the fitting side; if nothing is held out the grid's
/// middle value is used.
pub fn select_lambda(train: &LabeledDataset, name: &str, grid: &[f64], seed: u64, config: &SolverConfig) -> Result<Option<f64>> {
    if !uses_lambda(name) {
        return Ok(None);
    }
    if grid.len() == 1 {
        return Ok(Some(grid[0]));
    }
    let mut rng = seeded(seed);
    let mut fit = Vec::new();
    let mut held = Vec::new();
    for c in 0..train.num_classes {
        let mut idx: Vec<usize> = (0..train.len()).filter(|&i| train.labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let keep = idx.len().div_ceil(2);
        fit.extend_from_slice(&idx[..keep]);
        held.extend_from_slice(&idx[keep..]);
    }
    if held.is_empty() {
        return Ok(Some(grid[grid.len() / 2]));
    }
    fit.sort_unstable();
    held.sort_unstable();
    let prepared = PreparedTrain::new(&train.subset(&fit))?;
    let val = train.subset(&held);
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &lam in grid {
        let acc = evaluate_prepared(&prepared, &val, &spec_for(name, lam)?, config)?.accuracy;
        if acc > best.0 {
            best = (acc, lam);
        }
    }
    Ok(Some(best.1))
}

/// One solver's outcome on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub solver: String,
    pub trial: usize,
    /// `None` for solvers that ignore λ.
    pub lambda: Option<f64>,
    pub accuracy: f64,
    pub seconds_per_sample: f64,
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSummary {
    pub solver: String,
    pub trials: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation over trials; 0 for a single trial.
    pub std_accuracy: f64,
    pub mean_seconds_per_sample: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub rows: Vec<TrialRow>,
    pub summary: Vec<SolverSummary>,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Per-solver aggregates, in the order solvers first appear in `rows`.
pub fn summarize(rows: &[TrialRow]) -> Vec<SolverSummary> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.solver.as_str()) {
            names.push(&r.solver);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let mine: Vec<&TrialRow> = rows.iter().filter(|r| r.solver == name).collect();
            let acc: Vec<f64> = mine.iter().map(|r| r.accuracy).collect();
            let secs: Vec<f64> = mine.iter().map(|r| r.seconds_per_sample).collect();
            SolverSummary {
                solver: name.to_string(),
                trials: mine.len(),
                mean_accuracy: mean(&acc),
                std_accuracy: sample_std(&acc),
                mean_seconds_per_sample: mean(&secs),
            }
        })
        .collect()
}

/// Splits, projects and (in self-test mode) replaces the test part with
/// the training part.
fn prepare_trial(data: &LabeledDataset, config: &BenchConfig, trial: usize) -> Result<(LabeledDataset, LabeledDataset)> {
    let (tr, te) = per_class_split(data, config.train_per_class, trial_seed(config.seed, trial))?;
    let train = data.subset(&tr);
    let test = if config.self_test { train.clone() } else { data.subset(&te) };
    if test.is_empty() {
        return Err(BenchError::Data("no samples left for testing; lower train_per_class".into()));
    }
    project_split(&train, &test, config.pca_energy)
}

fn run_trial(data: &LabeledDataset, config: &BenchConfig, trial: usize) -> Result<Vec<TrialRow>> {
    let (train, test) = prepare_trial(data, config, trial)?;
    let prepared = PreparedTrain::new(&train)?;
    let inner_seed = trial_seed(config.seed ^ 0x5EED, trial);
    config
        .solvers
        .iter()
        .map(|name| {
            let lambda = select_lambda(&train, name, &config.lambdas, inner_seed, &config.solver)?;
            let spec = spec_for(name, lambda.unwrap_or(config.lambdas[0]))?;
            let score = evaluate_prepared(&prepared, &test, &spec, &config.solver)?;
            Ok(TrialRow {
                solver: name.clone(),
                trial,
                lambda,
                accuracy: score.accuracy,
                seconds_per_sample: score.per_sample_seconds,
                unconverged: score.unconverged,
            })
        })
        .collect()
}

/// Runs every trial (in parallel) on an already loaded dataset.
pub fn run_on(data: &LabeledDataset, config: &BenchConfig) -> Result<BenchOutcome> {
    let per_trial: Vec<Result<Vec<TrialRow>>> =
        (0..config.trials).into_par_iter().map(|t| run_trial(data, config, t)).collect();
    let mut rows = Vec::new();
    for r in per_trial {
        rows.extend(r?);
    }
    let summary = summarize(&rows);
    Ok(BenchOutcome { rows, summary })
}

pub fn run_benchmark(config: &BenchConfig) -> Result<BenchOutcome> {
    run_on(&load_dataset(&config.dataset, config.resize)?, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub solver: String,
    pub lambda: f64,
    pub accuracy: f64,
}

/// Accuracy at every grid value for every solver, on the split of trial 0.
pub fn sweep_on(data: &LabeledDataset, config: &BenchConfig) -> Result<Vec<SweepRow>> {
    let (train, test) = prepare_trial(data, config, 0)?;
    let prepared = PreparedTrain::new(&train)?;
    let mut rows = Vec::new();
    for name in &config.solvers {
        let mut fixed = None;
        for &lambda in &config.lambdas {
            let accuracy = match fixed {
                Some(a) => a,
                None => {
                    let a = evaluate_prepared(&prepared, &test, &spec_for(name, lambda)?, &config.solver)?.accuracy;
                    if !uses_lambda(name) {
                        fixed = Some(a);
                    }
                    a
                }
            };
            rows.push(SweepRow { solver: name.clone(), lambda, accuracy });
        }
    }
    Ok(rows)
}

pub fn sweep_lambda(config: &BenchConfig) -> Result<Vec<SweepRow>> {
    sweep_on(&load_dataset(&config.dataset, config.resize)?, config)
}
