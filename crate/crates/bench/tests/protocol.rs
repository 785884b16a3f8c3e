mod common;

use std::path::PathBuf;

use proptest::prelude::*;
use sparse_rep::classify::LabeledDataset;
use sparse_rep::denoise::GrayImage;
use sparse_rep::pgm::write_pgm_file;
use sparse_rep::{Matrix, SolverConfig};
use sparsebench::config::{parse_lambda_grid, parse_solvers};
use sparsebench::dataset::load_dataset;
use sparsebench::protocol::{per_class_split, project_split, run_on, sweep_on};
use sparsebench::report::{summary_csv, trials_csv};
use sparsebench::{BenchConfig, BenchError};

fn config(solvers: &str, lambdas: &str, train_per_class: usize, trials: usize) -> BenchConfig {
    BenchConfig {
        dataset: PathBuf::new(),
        solvers: parse_solvers(solvers).unwrap(),
        lambdas: parse_lambda_grid(lambdas).unwrap(),
        train_per_class,
        trials,
        seed: 42,
        pca_energy: 0.98,
        output: PathBuf::new(),
        resize: None,
        solver: SolverConfig::default(),
        self_test: false,
    }
}

#[test]
fn same_seed_same_tables() {
    let data = common::blobs(1, 20, 4, 10, 1.0);
    let cfg = config("omp,fista,tptsr", "1e-3:1e-1:3log", 5, 3);
    let a = run_on(&data, &cfg).unwrap();
    let b = run_on(&data, &cfg).unwrap();
    assert_eq!(trials_csv(&a), trials_csv(&b));
    assert_eq!(summary_csv(&a), summary_csv(&b));
    let other = run_on(&data, &BenchConfig { seed: 43, ..cfg }).unwrap();
    assert_eq!(other.rows.len(), a.rows.len());
}

#[test]
fn summary_std_matches_recomputation() {
    let data = common::blobs(2, 16, 3, 12, 1.5);
    let out = run_on(&data, &config("omp,tptsr", "0.01,0.1", 4, 5)).unwrap();
    for s in &out.summary {
        let acc: Vec<f64> = out.rows.iter().filter(|r| r.solver == s.solver).map(|r| r.accuracy).collect();
        let n = acc.len() as f64;
        let m = acc.iter().sum::<f64>() / n;
        // Sum-of-squares route, independent of the two-pass implementation.
        let var = (acc.iter().map(|x| x * x).sum::<f64>() - n * m * m) / (n - 1.0);
        assert_eq!(s.trials, 5);
        assert!((s.mean_accuracy - m).abs() <= 1e-12);
        assert!((s.std_accuracy - var.max(0.0).sqrt()).abs() <= 1e-12, "{} vs {}", s.std_accuracy, var.sqrt());
    }
}

#[test]
fn self_split_with_interpolating_solver_is_perfect() {
    let data = common::blobs(3, 12, 3, 6, 0.5);
    let cfg = BenchConfig { self_test: true, ..config("dalm", "0.1", 3, 1) };
    let out = run_on(&data, &cfg).unwrap();
    assert_eq!(out.rows[0].accuracy, 1.0);
    assert_eq!(out.rows[0].lambda, None);
}

#[test]
fn undersized_class_is_a_data_error() {
    let data = common::blobs(4, 8, 3, 4, 1.0);
    let err = run_on(&data, &config("omp", "0.1", 5, 1)).unwrap_err();
    assert!(matches!(err, BenchError::Data(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn pca_ignores_test_samples() {
    let data = common::blobs(5, 30, 3, 8, 1.0);
    let (tr, te) = per_class_split(&data, 4, 9).unwrap();
    let train = data.subset(&tr);
    let test = data.subset(&te);
    let shifted = LabeledDataset::new(test.samples.map(|v| 5.0 * v + 1.0), test.labels.clone(), 3).unwrap();
    let (a_train, a_test) = project_split(&train, &test, 0.9).unwrap();
    let (b_train, b_test) = project_split(&train, &shifted, 0.9).unwrap();
    assert_eq!(a_train, b_train);
    assert_eq!(a_test.dim(), b_test.dim());
    assert!(a_train.dim() < 12);
}

#[test]
fn sweep_shapes() {
    let data = common::blobs(6, 16, 3, 10, 1.0);
    let one = sweep_on(&data, &config("omp,palm,tptsr", "0.05", 5, 1)).unwrap();
    assert_eq!(one.iter().map(|r| r.solver.as_str()).collect::<Vec<_>>(), ["omp", "palm", "tptsr"]);
    let grid = sweep_on(&data, &config("omp,fista,tptsr", "1e-4:1:10log", 5, 1)).unwrap();
    assert_eq!(grid.len(), 30);
    assert!(grid.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

#[test]
fn tptsr_is_least_sensitive_to_lambda() {
    let data = common::blobs(7, 20, 4, 15, 2.0);
    let rows = sweep_on(&data, &config("tptsr,fista,l1ls", "1e-4:1:10log", 7, 1)).unwrap();
    let curve = |name: &str| rows.iter().filter(|r| r.solver == name).map(|r| r.accuracy).collect::<Vec<_>>();
    let tp = variance(&curve("tptsr"));
    for l1 in ["fista", "l1ls"] {
        assert!(tp < variance(&curve(l1)), "tptsr {tp} vs {l1} {}", variance(&curve(l1)));
    }
}

#[test]
fn pgm_folders_load_in_lexicographic_order() {
    let dir = tempfile::tempdir().unwrap();
    for (class, shade) in [("b_second", 200.0), ("a_first", 10.0)] {
        let sub = dir.path().join(class);
        std::fs::create_dir(&sub).unwrap();
        for i in 0..2 {
            let img = GrayImage::from_fn(4, 6, |r, c| shade + (r * 6 + c + i) as f64).unwrap();
            write_pgm_file(&img, &sub.join(format!("{i}.pgm"))).unwrap();
        }
    }
    let d = load_dataset(dir.path(), None).unwrap();
    assert_eq!(d.labels, vec![0, 0, 1, 1]);
    assert_eq!(d.dim(), 24);
    // Row-major vectorization: entry (r=1, c=0) sits at index 6.
    assert_eq!(d.samples[(6, 0)], 16.0);
    assert_eq!(d.samples[(0, 2)], 200.0);
    let small = load_dataset(dir.path(), Some((2, 3))).unwrap();
    assert_eq!(small.dim(), 6);

    let one = tempfile::tempdir().unwrap();
    std::fs::create_dir(one.path().join("only")).unwrap();
    write_pgm_file(&GrayImage::from_fn(3, 3, |_, _| 1.0).unwrap(), &one.path().join("only/x.pgm")).unwrap();
    write_pgm_file(&GrayImage::from_fn(3, 3, |_, _| 2.0).unwrap(), &one.path().join("only/y.pgm")).unwrap();
    assert!(load_dataset(one.path(), None).unwrap().labels.iter().all(|&l| l == 0));
}

#[test]
fn csv_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let data = LabeledDataset::new(Matrix::from_row_slice(3, 2, &[0.1, -2.5e-7, 3.0, 1e10, 1.0 / 3.0, 0.0]), vec![0, 1], 2).unwrap();
    common::write_csv(&data, dir.path());
    assert_eq!(load_dataset(dir.path(), None).unwrap(), data);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn splits_are_disjoint_and_exhaustive(classes in 1usize..5, per_class in 1usize..8, k in 1usize..8, seed in any::<u64>()) {
        prop_assume!(k <= per_class);
        let data = common::blobs(seed, 3, classes, per_class, 1.0);
        let (train, test) = per_class_split(&data, k, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..data.len()).collect::<Vec<_>>());
        for c in 0..classes {
            prop_assert_eq!(train.iter().filter(|&&i| data.labels[i] == c).count(), k);
        }
        prop_assert_eq!(per_class_split(&data, k, seed).unwrap(), (train, test));
    }
}
