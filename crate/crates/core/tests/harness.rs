use etdlab::harness::{
    aggregate, grid_alphas, run_evaluation, sweep, sweep_with, write_records_csv, RunConfig,
    RunRecord, GRID_NS,
};
use etdlab::learners::AlgorithmName;
use etdlab::{build_env, AlgorithmSpec, EnvConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn two_state_td0_grows_or_diverges_at_every_step_size() {
    let env = build_env(&EnvConfig::named("two-state")).unwrap();
    let spec = AlgorithmSpec::new(AlgorithmName::NstepTd, 1).unwrap();
    let seeds: Vec<u64> = (0..20).collect();
    let (_, cells) = sweep_with(
        &env,
        &[spec],
        &grid_alphas(),
        &[1],
        &seeds,
        &RunConfig::for_env(&env),
    )
    .unwrap();
    for records in cells {
        let agg = aggregate(&records).unwrap();
        let half = agg.median.len() / 2;
        let rising = agg.median[half..].windows(2).all(|w| w[1] > w[0]);
        let every_run_diverged = records.iter().all(|r| r.diverged);
        assert!(
            rising || every_run_diverged,
            "alpha {}: {:?}",
            records[0].alpha,
            &agg.median[half..]
        );
    }
}

#[test]
fn two_state_clip_netd_learns_at_its_best_step_size() {
    let env = build_env(&EnvConfig::named("two-state")).unwrap();
    let spec = AlgorithmSpec::new(AlgorithmName::ClipNetd, 1).unwrap();
    let seeds: Vec<u64> = (0..10).collect();
    let res = sweep(
        &env,
        &[spec],
        &grid_alphas(),
        &[1],
        &seeds,
        env.default_steps,
    )
    .unwrap();
    let best = res.best("clip-netd").unwrap();
    assert_eq!(best.diverged_fraction, 0.0);
    // theta0 = 1 with features (1, 2) under d = (1/2, 1/2)
    let initial = 2.5f64.sqrt();
    assert!(best.median_final < 0.05 * initial);
}

#[test]
fn sweep_grid_and_order_independence() {
    let env = build_env(&EnvConfig::named("two-state")).unwrap();
    let specs = [
        AlgorithmSpec::new(AlgorithmName::Netd, 1).unwrap(),
        AlgorithmSpec::new(AlgorithmName::Vtrace, 1).unwrap(),
    ];
    let seeds = [3, 1, 2];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sweep(&env, &specs, &grid_alphas(), &GRID_NS, &seeds, 300).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert_eq!(a.grid.len(), 65);
    assert_eq!(a.cells.len(), 130);
    for (id, best) in &a.best_cells {
        let min = a
            .cells
            .iter()
            .filter(|c| &c.spec_id == id)
            .map(|c| c.mean)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best.mean, min);
    }
    assert!(sweep(&env, &specs, &[], &[1], &seeds, 300).is_err());
    assert!(sweep(&env, &specs, &[0.1], &[1], &[], 300).is_err());
}

#[test]
fn runs_with_distinct_seeds_differ_and_repeat_exactly() {
    let env = build_env(&EnvConfig::named("collision")).unwrap();
    let spec = AlgorithmSpec::new(AlgorithmName::Wevtrace, 2).unwrap();
    let runs: Vec<RunRecord> = (0..5)
        .map(|s| run_evaluation(&env, &spec, 0.01, 2000, s, 100).unwrap())
        .collect();
    for (i, a) in runs.iter().enumerate() {
        assert_eq!(
            a,
            &run_evaluation(&env, &spec, 0.01, 2000, i as u64, 100).unwrap()
        );
        assert!(a.rmsve.iter().all(|&x| x >= 0.0));
        for b in &runs[i + 1..] {
            assert_ne!(a.final_theta, b.final_theta);
        }
    }
}

#[test]
fn csv_output_has_one_row_per_sample() {
    let env = build_env(&EnvConfig::named("baird")).unwrap();
    let spec = AlgorithmSpec::new(AlgorithmName::Vtrace, 5).unwrap();
    let records: Vec<_> = (0..3)
        .map(|s| run_evaluation(&env, &spec, 0.01, 1000, s, 250).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("baird_vtrace.csv");
    write_records_csv(std::fs::File::create(&path).unwrap(), &records).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        vec!["step", "seed", "alpha", "n", "rmsve", "diverged"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 * 5);
    assert!(rows.iter().all(|r| r[5] == *"true" || r[5] == *"false"));
    assert_eq!(&rows[4][0], "1000");
}

/// Bootstrap oracle: the spread of a mean of `k` resampled runs shrinks like
/// `1/sqrt(k)`.
#[test]
fn aggregate_band_shrinks_with_more_runs() {
    let env = build_env(&EnvConfig::named("two-state")).unwrap();
    let spec = AlgorithmSpec::new(AlgorithmName::ClipNetd, 1).unwrap();
    let records: Vec<RunRecord> = (0..50)
        .map(|s| run_evaluation(&env, &spec, 0.0078125, 2000, s, 100).unwrap())
        .collect();
    let agg = aggregate(&records).unwrap();
    let point = agg.mean.len() / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut spread = |k: usize| {
        let means: Vec<f64> = (0..4000)
            .map(|_| {
                let sample: Vec<RunRecord> = (0..k)
                    .map(|_| records[rng.gen_range(0..records.len())].clone())
                    .collect();
                aggregate(&sample).unwrap().mean[point]
            })
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / means.len() as f64).sqrt()
    };
    let (s4, s16) = (spread(4), spread(16));
    let ratio = s4 / s16;
    assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    assert!((s4 - agg.std[point] / 2.0).abs() < 0.1 * s4);
}
