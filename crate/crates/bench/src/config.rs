//! Benchmark settings: a flat `key = value` file merged with command-line
//! flags (flags win), then parsed and validated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sparse_rep::classify::ClassifierSpec;
use sparse_rep::SolverConfig;

use crate::error::{BenchError, Result};

pub const DEFAULT_SOLVERS: &str = "omp,l1ls,palm,fista,dalm,lasso-homotopy,tptsr";
pub const DEFAULT_LAMBDAS: &str = "1e-4:1:10log";

const KEYS: &[&str] = &[
    "dataset",
    "solvers",
    "lambdas",
    "train_per_class",
    "trials",
    "seed",
    "pca_energy",
    "out",
    "resize",
    "max_iter",
    "tolerance",
    "self_test",
];

fn config_err(msg: impl Into<String>) -> BenchError {
    BenchError::Config(msg.into())
}

/// Raw string settings keyed by canonical snake_case names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    fn canonical(key: &str) -> Result<String> {
        let k = key.trim().replace('-', "_");
        let k = if k == "output" { "out".to_string() } else { k };
        if KEYS.contains(&k.as_str()) {
            Ok(k)
        } else {
            Err(config_err(format!("unknown setting `{}`", key.trim())))
        }
    }

    /// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Settings::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", n + 1)))?;
            out.0.insert(Settings::canonical(k)?, v.trim().to_string());
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config file {}: {e}", path.display())))?;
        Settings::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        self.0.insert(Settings::canonical(key)?, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| config_err(format!("`{key}` has invalid value `{v}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub dataset: PathBuf,
    pub solvers: Vec<String>,
    pub lambdas: Vec<f64>,
    pub train_per_class: usize,
    pub trials: usize,
    pub seed: u64,
    pub pca_energy: f64,
    pub output: PathBuf,
    /// Image `(height, width)` after resampling; PGM datasets only.
    pub resize: Option<(usize, usize)>,
    pub solver: SolverConfig,
    /// Evaluate on the training samples themselves (sanity check).
    pub self_test: bool,
}

impl BenchConfig {
    pub fn from_settings(s: &Settings, default_out: &str) -> Result<Self> {
        let dataset = s.get("dataset").ok_or_else(|| config_err("no dataset given (--dataset)"))?;
        let solvers = parse_solvers(s.get("solvers").unwrap_or(DEFAULT_SOLVERS))?;
        let lambdas = parse_lambda_grid(s.get("lambdas").unwrap_or(DEFAULT_LAMBDAS))?;
        let train_per_class: usize = s.parsed("train_per_class", 5)?;
        let trials: usize = s.parsed("trials", 10)?;
        let pca_energy: f64 = s.parsed("pca_energy", 0.98)?;
        if train_per_class == 0 {
            return Err(config_err("train_per_class must be ≥ 1"));
        }
        if trials == 0 {
            return Err(config_err("trials must be ≥ 1"));
        }
        if !(pca_energy > 0.0 && pca_energy <= 1.0) {
            return Err(config_err(format!("pca_energy must lie in (0, 1], got {pca_energy}")));
        }
        let solver = SolverConfig::new(s.parsed("max_iter", 5000)?, s.parsed("tolerance", 1e-6)?)
            .map_err(|e| config_err(e.to_string()))?;
        let resize = s.get("resize").map(parse_resize).transpose()?;
        Ok(BenchConfig {
            dataset: PathBuf::from(dataset),
            solvers,
            lambdas,
            train_per_class,
            trials,
            seed: s.parsed("seed", 0)?,
            pca_energy,
            output: PathBuf::from(s.get("out").unwrap_or(default_out)),
            resize,
            solver,
            self_test: s.parsed("self_test", false)?,
        })
    }
}

/// Comma-separated solver names, validated against the known set.
pub fn parse_solvers(list: &str) -> Result<Vec<String>> {
    let names: Vec<String> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
    if names.is_empty() {
        return Err(config_err("solver list is empty"));
    }
    for n in &names {
        ClassifierSpec::from_name(n, 1.0).map_err(|e| config_err(e.to_string()))?;
    }
    Ok(names)
}

/// `a:b:Nlog` (N log-spaced points), `a:b:N` (N linear points), or a
/// comma-separated list. Every value must be positive and finite.
pub fn parse_lambda_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || config_err(format!("invalid lambda grid `{spec}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let grid: Vec<f64> = match spec.split(':').collect::<Vec<_>>()[..] {
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let (count, log) = match n.trim().strip_suffix("log") {
                Some(c) => (c, true),
                None => (n.trim(), false),
            };
            let count: usize = count.parse().map_err(|_| bad())?;
            if count == 0 {
                return Err(bad());
            }
            if log && !(a > 0.0 && b > 0.0) {
                return Err(bad());
            }
            let at = |i: usize| {
                let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                if log {
                    10f64.powf(a.log10() + t * (b.log10() - a.log10()))
                } else {
                    a + t * (b - a)
                }
            };
            (0..count).map(at).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<_>>()?,
        _ => return Err(bad()),
    };
    if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(config_err(format!("lambda grid `{spec}` must contain positive finite values")));
    }
    Ok(grid)
}

/// `HxW`, e.g. `56x46`.
pub fn parse_resize(spec: &str) -> Result<(usize, usize)> {
    let bad = || config_err(format!("invalid resize `{spec}`, expected HxW"));
    let (h, w) = spec.split_once(['x', 'X']).ok_or_else(bad)?;
    let (h, w): (usize, usize) = (h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?);
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}
