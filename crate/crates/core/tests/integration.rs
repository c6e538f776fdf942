use std::fs;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsroots::benchmarks::Benchmark;
use tsroots::bo::{run_bo, AcquisitionSpec, BoConfig};
use tsroots::chebapprox::eig_hessenberg;
use tsroots::harness::{run_experiment, write_outputs, ExperimentConfig, RunOptions};
use tsroots::tsroots::TsRootsConfig;

#[test]
fn hessenberg_eigenvalues_match_schur() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let n = rng.random_range(2..=30);
        let m = DMatrix::from_fn(n, n, |i, j| if i > j + 1 { 0.0 } else { rng.random_range(-1.0..1.0) });
        let mut ours: Vec<(f64, f64)> = eig_hessenberg(&m).unwrap().iter().map(|z| (z.re, z.im)).collect();
        let mut want: Vec<(f64, f64)> = m.clone().complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
        let key = |a: &(f64, f64), b: &(f64, f64)| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1));
        ours.sort_by(key);
        want.sort_by(key);
        assert_eq!(ours.len(), n);
        // Match greedily; sorting alone can interleave near-equal real parts.
        let mut used = vec![false; n];
        for a in &ours {
            let (j, d) = want
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, b)| (j, ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            used[j] = true;
            assert!(d < 1e-8, "n = {n}: {a:?} off by {d:e}");
        }
    }
}

#[test]
fn every_acquisition_improves_on_rosenbrock() {
    let b = Benchmark::by_name("rosenbrock4").unwrap();
    for spec in ["ts_roots", "ts_random_multistart", "ts_grid", "ts_lhs", "ts_rff:300", "ats:10", "ei", "lcb"] {
        let cfg = BoConfig {
            acquisition: spec.parse::<AcquisitionSpec>().unwrap(),
            budget: 8,
            n_init: Some(12),
            ts: TsRootsConfig::fast(),
            n_starts: Some(30),
            refit_every: 4,
            ..BoConfig::default()
        };
        let run = run_bo(&b, &cfg, 5).unwrap();
        assert_eq!(run.records.len(), 8, "{spec}");
        let last = run.records.last().unwrap();
        assert!(last.y_min <= run.initial_y_min(), "{spec}");
        assert!(last.log_err.is_some() && last.log_dist.is_some(), "{spec}");
        assert!(run.records.windows(2).all(|w| w[1].t_cum >= w[0].t_cum), "{spec}");
    }
}

#[test]
fn untimed_outputs_are_reproducible() {
    let cfg = ExperimentConfig::from_toml(
        r#"
schema_version = 1
mode = "inner_compare"
benchmark = "levy2"
seeds = [1, 2]
budget = 4
n_init = 10
timing = false
[set_sizes]
n_explore = 15
n_exploit = 15
[inner]
optimizers = ["ts_roots", "ts_lhs", "ts_roots"]
reference_starts = 300
"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for (k, workers) in [1, 2].into_iter().enumerate() {
        let out = run_experiment(&cfg, &RunOptions { workers, seed_offset: 0 }).unwrap();
        assert!(out.failures.is_empty());
        let sub = dir.path().join(k.to_string());
        write_outputs(&out, &sub).unwrap();
        bodies.push(fs::read_to_string(sub.join("inner_compare.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    // An optimizer listed twice yields identical columns.
    let rows: Vec<Vec<&str>> = bodies[0].lines().skip(1).map(|l| l.split(',').collect()).collect();
    for it in rows.chunks(3) {
        assert_eq!(it[0][4..], it[2][4..]);
        assert_eq!(it[0][5], it[1][5], "equal start budgets");
    }
}

#[test]
fn set_size_study_reports_ranks() {
    let cfg = ExperimentConfig::from_toml(
        r#"
schema_version = 1
mode = "set_size_study"
benchmark = "ackley2"
seeds = [3]
budget = 5
n_init = 10
timing = false
[set_sizes]
n_candidates = 200
n_explore = 20
n_exploit = 20
"#,
    )
    .unwrap();
    let out = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&out, dir.path()).unwrap();
    let s = fs::read_to_string(dir.path().join("set_size.csv")).unwrap();
    assert!(s.starts_with("run_id,seed,iter,n_starts,i_explore,i_exploit,i_overall,win_src\n"));
    assert_eq!(s.lines().count(), 6);
    for r in &out.records {
        assert!(r.record.win_explore.is_some() || r.record.win_exploit.is_some());
    }
}
