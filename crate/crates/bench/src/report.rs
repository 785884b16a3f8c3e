//! CSV output. Accuracy files hold only deterministic quantities; timings
//! go to a separate file so that reruns with the same seed compare equal.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{BenchError, Result};
use crate::protocol::{BenchOutcome, SweepRow};

fn fmt_lambda(l: Option<f64>) -> String {
    l.map(|v| v.to_string()).unwrap_or_default()
}

/// `solver,trial,lambda,accuracy,unconverged`; λ is empty for solvers that
/// ignore it.
pub fn trials_csv(out: &BenchOutcome) -> String {
    let mut s = String::from("solver,trial,lambda,accuracy,unconverged\n");
    for r in &out.rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.solver, r.trial, fmt_lambda(r.lambda), r.accuracy, r.unconverged);
    }
    s
}

/// `solver,trials,mean_accuracy,std_accuracy`
pub fn summary_csv(out: &BenchOutcome) -> String {
    let mut s = String::from("solver,trials,mean_accuracy,std_accuracy\n");
    for r in &out.summary {
        let _ = writeln!(s, "{},{},{},{}", r.solver, r.trials, r.mean_accuracy, r.std_accuracy);
    }
    s
}

/// `solver,trial,seconds_per_sample`
pub fn timing_csv(out: &BenchOutcome) -> String {
    let mut s = String::from("solver,trial,seconds_per_sample\n");
    for r in &out.rows {
        let _ = writeln!(s, "{},{},{}", r.solver, r.trial, r.seconds_per_sample);
    }
    s
}

/// `solver,lambda,accuracy`
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("solver,lambda,accuracy\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.solver, r.lambda, r.accuracy);
    }
    s
}

/// `results.csv` → `results.<tag>.csv`
pub fn sidecar(path: &Path, tag: &str) -> PathBuf {
    path.with_extension(format!("{tag}.csv"))
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

/// Writes the trial table to `path` plus `.summary.csv` and `.timing.csv`
/// sidecars; returns the paths written.
pub fn write_outcome(out: &BenchOutcome, path: &Path) -> Result<Vec<PathBuf>> {
    let files = vec![
        (path.to_path_buf(), trials_csv(out)),
        (sidecar(path, "summary"), summary_csv(out)),
        (sidecar(path, "timing"), timing_csv(out)),
    ];
    for (p, text) in &files {
        write_file(p, text)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Human-readable table: accuracy as percent mean ± std, time per sample.
pub fn summary_table(out: &BenchOutcome) -> String {
    let mut s = format!("{:<22} {:>18} {:>16}\n", "solver", "accuracy (%)", "s / test sample");
    for r in &out.summary {
        let _ = writeln!(
            s,
            "{:<22} {:>9.2} ± {:<6.3} {:>16.3e}",
            r.solver,
            100.0 * r.mean_accuracy,
            100.0 * r.std_accuracy,
            r.mean_seconds_per_sample
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{summarize, TrialRow};

    #[test]
    fn layout() {
        let rows = vec![
            TrialRow { solver: "omp".into(), trial: 0, lambda: Some(0.01), accuracy: 0.5, seconds_per_sample: 1e-3, unconverged: 0 },
            TrialRow { solver: "dalm".into(), trial: 0, lambda: None, accuracy: 1.0, seconds_per_sample: 2e-3, unconverged: 1 },
        ];
        let out = BenchOutcome { summary: summarize(&rows), rows };
        assert_eq!(trials_csv(&out), "solver,trial,lambda,accuracy,unconverged\nomp,0,0.01,0.5,0\ndalm,0,,1,1\n");
        assert_eq!(summary_csv(&out), "solver,trials,mean_accuracy,std_accuracy\nomp,1,0.5,0\ndalm,1,1,0\n");
        assert_eq!(sidecar(Path::new("a/results.csv"), "timing"), PathBuf::from("a/results.timing.csv"));
    }
}
