//! `sparsebench run | sweep | denoise`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sparse_rep::denoise::{denoise_image, psnr, DenoiseConfig};
use sparse_rep::pgm::{read_pgm_file, write_pgm_file};

use crate::config::{BenchConfig, Settings};
use crate::error::{BenchError, Result};
use crate::protocol::{run_benchmark, sweep_lambda};
use crate::report::{summary_table, sweep_csv, write_file, write_outcome};

#[derive(Debug, Parser)]
#[command(name = "sparsebench", version, about = "Sparse-representation classification benchmark and patch denoiser")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Repeated random splits with per-solver λ selection.
    Run(BenchArgs),
    /// Accuracy against every λ on one split.
    Sweep(BenchArgs),
    /// Denoise a P5 image.
    Denoise(DenoiseArgs),
}

/// Every flag overrides the same key in `--config`.
#[derive(Debug, Args)]
struct BenchArgs {
    /// Flat `key = value` settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Folder with data.csv + labels.csv, or one subfolder of .pgm images per class.
    #[arg(long)]
    dataset: Option<String>,
    /// Comma-separated solver names.
    #[arg(long)]
    solvers: Option<String>,
    /// `a:b:Nlog`, `a:b:N` or a comma list.
    #[arg(long)]
    lambdas: Option<String>,
    /// Training samples drawn per class (default 5).
    #[arg(long)]
    train_per_class: Option<String>,
    /// Number of random splits (default 10).
    #[arg(long)]
    trials: Option<String>,
    /// Base seed for splits and solvers (default 0).
    #[arg(long)]
    seed: Option<String>,
    /// Fraction of training variance kept by PCA (default 0.98).
    #[arg(long)]
    pca_energy: Option<String>,
    /// Trial table path; summary and timing sidecars go next to it.
    #[arg(long)]
    out: Option<String>,
    /// Resample images to `HxW`.
    #[arg(long)]
    resize: Option<String>,
    /// Iteration cap for every solver.
    #[arg(long)]
    max_iter: Option<String>,
    /// Stopping tolerance for every solver (default 1e-6).
    #[arg(long)]
    tolerance: Option<String>,
    /// Test on the training samples.
    #[arg(long)]
    self_test: bool,
}

impl BenchArgs {
    fn config(&self, default_out: &str) -> Result<BenchConfig> {
        let mut s = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        let flags = [
            ("dataset", &self.dataset),
            ("solvers", &self.solvers),
            ("lambdas", &self.lambdas),
            ("train_per_class", &self.train_per_class),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("pca_energy", &self.pca_energy),
            ("out", &self.out),
            ("resize", &self.resize),
            ("max_iter", &self.max_iter),
            ("tolerance", &self.tolerance),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                s.set(k, v.clone())?;
            }
        }
        if self.self_test {
            s.set("self_test", "true")?;
        }
        BenchConfig::from_settings(&s, default_out)
    }
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Noise standard deviation in gray levels.
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 8)]
    patch: usize,
    #[arg(long, default_value_t = 256)]
    atoms: usize,
    #[arg(long, default_value_t = 10)]
    sweeps: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Fidelity weight (default 30/σ).
    #[arg(long)]
    delta: Option<f64>,
    /// Clean image for PSNR reporting.
    #[arg(long)]
    reference: Option<PathBuf>,
}

fn denoise(a: &DenoiseArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = DenoiseConfig {
        sigma: a.sigma,
        patch: a.patch,
        stride: a.stride,
        atoms: a.atoms,
        sweeps: a.sweeps,
        delta: a.delta,
        ..DenoiseConfig::new(a.sigma)
    };
    if !(cfg.sigma > 0.0) || !cfg.sigma.is_finite() {
        return Err(BenchError::Config(format!("--sigma must be positive, got {}", cfg.sigma)));
    }
    let k = (cfg.atoms as f64).sqrt().round() as usize;
    if cfg.patch == 0 || cfg.stride == 0 || cfg.stride > cfg.patch || k * k != cfg.atoms || cfg.atoms == 0 {
        return Err(BenchError::Config("need 1 ≤ stride ≤ patch and a perfect-square atom count".into()));
    }
    let noisy = read_pgm_file(&a.input).map_err(|e| BenchError::Data(format!("{}: {e}", a.input.display())))?;
    let reference = a
        .reference
        .as_ref()
        .map(|p| read_pgm_file(p).map_err(|e| BenchError::Data(format!("{}: {e}", p.display()))))
        .transpose()?;
    let out = denoise_image(&noisy, &cfg)?;
    write_pgm_file(&out.image, &a.out).map_err(|e| BenchError::Data(format!("{}: {e}", a.out.display())))?;
    let _ = writeln!(stdout, "wrote {}", a.out.display());
    if let Some(r) = reference {
        // Scored on the 8-bit image actually written.
        let written = read_pgm_file(&a.out)?;
        let _ = writeln!(stdout, "PSNR noisy    {:.3} dB", psnr(&noisy, &r)?);
        let _ = writeln!(stdout, "PSNR denoised {:.3} dB", psnr(&written, &r)?);
    }
    Ok(())
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Run(a) => {
            let cfg = a.config("results.csv")?;
            let outcome = run_benchmark(&cfg)?;
            let written = write_outcome(&outcome, &cfg.output)?;
            let _ = write!(stdout, "{}", summary_table(&outcome));
            for p in written {
                let _ = writeln!(stdout, "wrote {}", p.display());
            }
        }
        Command::Sweep(a) => {
            let cfg = a.config("sweep.csv")?;
            let rows = sweep_lambda(&cfg)?;
            write_file(&cfg.output, &sweep_csv(&rows))?;
            let _ = writeln!(stdout, "wrote {}", cfg.output.display());
        }
        Command::Denoise(a) => denoise(&a, stdout)?,
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code: 0 success, 2 configuration error,
/// 3 data or run error.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "sparsebench: {e}");
            e.exit_code()
        }
    }
}
