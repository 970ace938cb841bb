//! Seeded evaluation runs, hyper-parameter sweeps and aggregation.
//!
//! Every run owns a `ChaCha8Rng` seeded from its seed alone, so a record
//! depends only on `(env, spec, alpha, n, seed)` and never on scheduling.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{BehaviorStream, Environment};
use crate::error::{Error, Result};
use crate::learners::{AlgorithmSpec, StreamingLearner};

/// RMSVE recorded for diverged parameters; keeps sweep means finite.
pub const RMSVE_PENALTY: f64 = 1e8;

/// `2^-14, ..., 2^-2`.
pub fn grid_alphas() -> Vec<f64> {
    (-14..=-2).map(|i| 2f64.powi(i)).collect()
}

pub const GRID_NS: [usize; 5] = [1, 2, 3, 4, 5];

/// Per-run options shared by all runs of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub steps: usize,
    pub record_every: usize,
    /// Uniform state weighting instead of the behavior distribution.
    #[serde(default)]
    pub unweighted: bool,
    /// Overrides the environment's initial parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(steps: usize, record_every: usize) -> Self {
        Self {
            steps,
            record_every,
            unweighted: false,
            theta0: None,
        }
    }

    /// The environment's default run length and sampling period.
    pub fn for_env(env: &Environment) -> Self {
        Self::new(env.default_steps, env.default_record_every)
    }

    pub fn unweighted(mut self, unweighted: bool) -> Self {
        self.unweighted = unweighted;
        self
    }

    pub fn with_theta0(mut self, theta0: Option<Vec<f64>>) -> Self {
        self.theta0 = theta0;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.record_every == 0 {
            return Err(Error::InvalidSpec("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// One evaluation run. `rmsve[k]` is measured after `k * record_every`
/// transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub spec_id: String,
    pub env: String,
    pub seed: u64,
    pub alpha: f64,
    pub n: usize,
    pub record_every: usize,
    pub rmsve: Vec<f64>,
    pub diverged: bool,
    /// Transition count at which divergence was detected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<usize>,
    pub final_theta: Vec<f64>,
}

impl RunRecord {
    pub fn initial(&self) -> f64 {
        self.rmsve[0]
    }

    pub fn last(&self) -> f64 {
        *self.rmsve.last().expect("series is never empty")
    }

    /// Mean over all samples, the sweep's selection score.
    pub fn time_average(&self) -> f64 {
        self.rmsve.iter().sum::<f64>() / self.rmsve.len() as f64
    }

    fn same_config(&self, other: &RunRecord) -> bool {
        self.spec_id == other.spec_id
            && self.env == other.env
            && self.alpha == other.alpha
            && self.n == other.n
            && self.record_every == other.record_every
            && self.rmsve.len() == other.rmsve.len()
    }
}

/// Weighted value error against the exact target-policy values.
#[derive(Debug, Clone)]
pub struct ValueError {
    weights: Vec<f64>,
    truth: Vec<f64>,
    phi: Vec<Vec<f64>>,
}

impl ValueError {
    pub fn new(env: &Environment, unweighted: bool) -> Result<Self> {
        let ns = env.mdp.num_states();
        let weights = if unweighted {
            vec![1.0 / ns as f64; ns]
        } else {
            env.behavior_distribution()?
        };
        Ok(Self {
            weights,
            truth: env.true_values()?,
            phi: env.mdp.features().to_vec(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sqrt(sum_s w(s) (theta^T phi(s) - v(s))^2)`, saturating at
    /// [`RMSVE_PENALTY`].
    pub fn rmsve(&self, theta: &[f64]) -> f64 {
        let sq: f64 = self
            .phi
            .iter()
            .zip(&self.truth)
            .zip(&self.weights)
            .map(|((phi, v), w)| {
                let e = phi.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() - v;
                w * e * e
            })
            .sum();
        let r = sq.sqrt();
        if r.is_finite() {
            r.min(RMSVE_PENALTY)
        } else {
            RMSVE_PENALTY
        }
    }
}

/// Runs `spec` for `steps` behavior transitions and records the RMSVE every
/// `record_every` transitions. Divergence is recorded, not returned as an
/// error.
pub fn run_evaluation(
    env: &Environment,
    spec: &AlgorithmSpec,
    alpha: f64,
    steps: usize,
    seed: u64,
    record_every: usize,
) -> Result<RunRecord> {
    let cfg = RunConfig::new(steps, record_every);
    run_with(env, spec, alpha, seed, &cfg, &ValueError::new(env, false)?)
}

/// [`run_evaluation`] with a precomputed error metric.
pub fn run_with(
    env: &Environment,
    spec: &AlgorithmSpec,
    alpha: f64,
    seed: u64,
    cfg: &RunConfig,
    metric: &ValueError,
) -> Result<RunRecord> {
    cfg.validate()?;
    let theta0 = cfg.theta0.clone().unwrap_or_else(|| env.theta0.clone());
    let mut learner =
        StreamingLearner::new(spec, &env.mdp, &env.target, &env.behavior, theta0, alpha)?;
    let mut stream = BehaviorStream::new(env, ChaCha8Rng::seed_from_u64(seed));
    let samples = cfg.steps / cfg.record_every;
    let mut rmsve = Vec::with_capacity(samples + 1);
    rmsve.push(metric.rmsve(learner.theta()));
    let mut diverged_at = learner.diverged().then_some(0);
    for k in 1..=samples {
        if diverged_at.is_some() {
            rmsve.push(RMSVE_PENALTY);
            continue;
        }
        for step in 0..cfg.record_every {
            learner.push(stream.next_transition())?;
            if learner.diverged() {
                diverged_at = Some((k - 1) * cfg.record_every + step + 1);
                break;
            }
        }
        rmsve.push(if diverged_at.is_some() {
            RMSVE_PENALTY
        } else {
            metric.rmsve(learner.theta())
        });
    }
    Ok(RunRecord {
        spec_id: spec.id(),
        env: env.name.clone(),
        seed,
        alpha,
        n: spec.n,
        record_every: cfg.record_every,
        rmsve,
        diverged: diverged_at.is_some(),
        diverged_at,
        final_theta: learner.theta().to_vec(),
    })
}

/// Statistics of one `(spec, alpha, n)` cell over its seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub spec_id: String,
    pub alpha: f64,
    pub n: usize,
    pub seeds: usize,
    /// Mean over seeds of the time-averaged RMSVE.
    pub mean: f64,
    /// Population standard deviation over seeds of the time-averaged RMSVE.
    pub std: f64,
    pub median_final: f64,
    pub diverged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub env: String,
    pub steps: usize,
    pub seeds: Vec<u64>,
    /// `(alpha, n)` cells, in grid order.
    pub grid: Vec<(f64, usize)>,
    pub cells: Vec<CellStats>,
    /// Per algorithm id, the cell with the smallest mean.
    pub best_cells: BTreeMap<String, CellStats>,
}

impl SweepResult {
    pub fn best(&self, spec_id: &str) -> Option<&CellStats> {
        self.best_cells.get(spec_id)
    }

    pub fn cell(&self, spec_id: &str, alpha: f64, n: usize) -> Option<&CellStats> {
        self.cells
            .iter()
            .find(|c| c.spec_id == spec_id && c.alpha == alpha && c.n == n)
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k;
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn cell_stats(records: &[RunRecord]) -> CellStats {
    let scores: Vec<f64> = records.iter().map(RunRecord::time_average).collect();
    let finals: Vec<f64> = records.iter().map(RunRecord::last).collect();
    let (mean, std) = mean_std(&scores);
    let first = &records[0];
    CellStats {
        spec_id: first.spec_id.clone(),
        alpha: first.alpha,
        n: first.n,
        seeds: records.len(),
        mean,
        std,
        median_final: median(&finals),
        diverged_fraction: records.iter().filter(|r| r.diverged).count() as f64
            / records.len() as f64,
    }
}

/// Runs every `(spec, alpha, n, seed)` combination with the environment's
/// default sampling period. Each spec is re-instantiated at every `n`; specs
/// that reject an `n` are an error.
pub fn sweep(
    env: &Environment,
    specs: &[AlgorithmSpec],
    alphas: &[f64],
    ns: &[usize],
    seeds: &[u64],
    steps: usize,
) -> Result<SweepResult> {
    let cfg = RunConfig::new(steps, env.default_record_every.min(steps.max(1)));
    Ok(sweep_with(env, specs, alphas, ns, seeds, &cfg)?.0)
}

/// [`sweep`] with explicit run options, also returning every record grouped
/// by cell in grid order (spec, then alpha, then n, then seed).
pub fn sweep_with(
    env: &Environment,
    specs: &[AlgorithmSpec],
    alphas: &[f64],
    ns: &[usize],
    seeds: &[u64],
    cfg: &RunConfig,
) -> Result<(SweepResult, Vec<Vec<RunRecord>>)> {
    if specs.is_empty() || alphas.is_empty() || ns.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidSpec("sweep grids must be nonempty".into()));
    }
    cfg.validate()?;
    let metric = ValueError::new(env, cfg.unweighted)?;
    let mut jobs = Vec::with_capacity(specs.len() * alphas.len() * ns.len());
    for spec in specs {
        for &alpha in alphas {
            for &n in ns {
                let mut cell = spec.clone();
                cell.n = n;
                cell.validate()?;
                jobs.push((cell, alpha));
            }
        }
    }
    let records: Vec<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|(spec, alpha)| {
            seeds
                .par_iter()
                .map(|&seed| run_with(env, spec, *alpha, seed, cfg, &metric))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let cells: Vec<CellStats> = records.iter().map(|r| cell_stats(r)).collect();
    let mut best_cells: BTreeMap<String, CellStats> = BTreeMap::new();
    for c in &cells {
        match best_cells.get(&c.spec_id) {
            Some(b) if b.mean <= c.mean => {}
            _ => {
                best_cells.insert(c.spec_id.clone(), c.clone());
            }
        }
    }
    let grid = alphas
        .iter()
        .flat_map(|&a| ns.iter().map(move |&n| (a, n)))
        .collect();
    let result = SweepResult {
        env: env.name.clone(),
        steps: cfg.steps,
        seeds: seeds.to_vec(),
        grid,
        cells,
        best_cells,
    };
    Ok((result, records))
}

/// Pointwise statistics of runs sharing one configuration. `std` uses the
/// population convention (divide by the number of runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub spec_id: String,
    pub env: String,
    pub alpha: f64,
    pub n: usize,
    pub runs: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub median: Vec<f64>,
    pub diverged_fraction: f64,
}

pub fn aggregate(records: &[RunRecord]) -> Result<Aggregate> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidSpec("cannot aggregate zero records".into()))?;
    if let Some(bad) = records.iter().find(|r| !first.same_config(r)) {
        return Err(Error::InvalidSpec(format!(
            "mixed configurations: ({}, {}, alpha={}, n={}) vs ({}, {}, alpha={}, n={})",
            first.spec_id, first.env, first.alpha, first.n, bad.spec_id, bad.env, bad.alpha, bad.n
        )));
    }
    let len = first.rmsve.len();
    let mut mean = Vec::with_capacity(len);
    let mut std = Vec::with_capacity(len);
    let mut med = Vec::with_capacity(len);
    let mut column = vec![0.0; records.len()];
    for k in 0..len {
        for (c, r) in column.iter_mut().zip(records) {
            *c = r.rmsve[k];
        }
        let (m, s) = mean_std(&column);
        mean.push(m);
        std.push(s);
        med.push(median(&column));
    }
    Ok(Aggregate {
        spec_id: first.spec_id.clone(),
        env: first.env.clone(),
        alpha: first.alpha,
        n: first.n,
        runs: records.len(),
        mean,
        std,
        median: med,
        diverged_fraction: records.iter().filter(|r| r.diverged).count() as f64
            / records.len() as f64,
    })
}

#[derive(Serialize)]
struct CsvRow {
    step: usize,
    seed: u64,
    alpha: f64,
    n: usize,
    rmsve: f64,
    diverged: bool,
}

/// Writes `step, seed, alpha, n, rmsve, diverged` rows; `diverged` is true
/// from the first sample at or after the divergence step.
pub fn write_records_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        for (k, &rmsve) in r.rmsve.iter().enumerate() {
            let step = k * r.record_every;
            w.serialize(CsvRow {
                step,
                seed: r.seed,
                alpha: r.alpha,
                n: r.n,
                rmsve,
                diverged: r.diverged_at.is_some_and(|d| d <= step),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{build_env, EnvConfig};
    use crate::learners::AlgorithmName;

    fn record(series: Vec<f64>) -> RunRecord {
        RunRecord {
            spec_id: "netd".into(),
            env: "two-state".into(),
            seed: 0,
            alpha: 0.5,
            n: 1,
            record_every: 1,
            rmsve: series,
            diverged: false,
            diverged_at: None,
            final_theta: vec![0.0],
        }
    }

    #[test]
    fn aggregate_population_std() {
        let a = aggregate(&[record(vec![1.0; 3]), record(vec![3.0; 3])]).unwrap();
        assert_eq!(a.mean, vec![2.0; 3]);
        assert_eq!(a.std, vec![1.0; 3]);
        let single = aggregate(&[record(vec![1.0, 2.0])]).unwrap();
        assert_eq!(single.mean, vec![1.0, 2.0]);
        assert_eq!(single.std, vec![0.0, 0.0]);
        let mut other = record(vec![1.0; 3]);
        other.alpha = 0.25;
        assert!(aggregate(&[record(vec![1.0; 3]), other]).is_err());
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn series_length_and_determinism() {
        let env = build_env(&EnvConfig::named("two-state")).unwrap();
        let spec = AlgorithmSpec::new(AlgorithmName::ClipNetd, 1).unwrap();
        let a = run_evaluation(&env, &spec, 0.01, 1050, 3, 100).unwrap();
        assert_eq!(a.rmsve.len(), 11);
        let b = run_evaluation(&env, &spec, 0.01, 1050, 3, 100).unwrap();
        assert_eq!(a, b);
        let c = run_evaluation(&env, &spec, 0.01, 1050, 4, 100).unwrap();
        assert_ne!(a.rmsve, c.rmsve);
    }

    #[test]
    fn divergence_is_padded() {
        let env = build_env(&EnvConfig::named("two-state")).unwrap();
        let spec = AlgorithmSpec::new(AlgorithmName::NstepTd, 1).unwrap();
        let r = run_evaluation(&env, &spec, 4.0, 5000, 0, 10).unwrap();
        assert!(r.diverged);
        assert_eq!(r.last(), RMSVE_PENALTY);
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,seed,alpha,n,rmsve,diverged\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(",false"));
        assert!(text.trim_end().ends_with(",true"));
    }

    #[test]
    fn single_cell_sweep() {
        let env = build_env(&EnvConfig::named("two-state")).unwrap();
        let spec = AlgorithmSpec::new(AlgorithmName::Netd, 1).unwrap();
        let res = sweep(&env, &[spec], &[0.01], &[1], &[0], 500).unwrap();
        assert_eq!(res.cells.len(), 1);
        assert_eq!(res.best("netd").unwrap(), &res.cells[0]);
        assert_eq!(grid_alphas().len() * GRID_NS.len(), 65);
    }
}
