//! Experiment configuration: a JSON document whose fields are all optional,
//! merged with command-line flags (flags win).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use etdlab::harness::{grid_alphas, RunConfig, GRID_NS};
use etdlab::stability::Variant;
use etdlab::{build_env, AlgorithmSpec, EnvConfig, Environment, Scheme};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "ETDLAB_SEED";
pub const DEFAULT_ALPHA: f64 = 0.0078125;
pub const DEFAULT_SEEDS: usize = 10;
pub const DEFAULT_OUT: &str = "results";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Environment name (see `etdlab list`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env: Option<String>,
    /// Discount override.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Reward override (Collision goal reward).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    /// JSON file holding a states x features matrix.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    /// Seed of the `random` environment.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_seed: Option<u64>,

    /// Algorithm names, comma separated.
    #[arg(long = "alg", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algs: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    /// Bootstrap length of `run` and `stability`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Trace clip of clip-netd and clip-wetd.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_clip: Option<f64>,
    /// V-trace target clip on the TD-error weights.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_bar: Option<f64>,
    /// V-trace target clip on the trace product.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_bar: Option<f64>,
    /// Interest interpolation of the emphasis, in (0, 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Constant trace discount replacing gamma on non-terminal steps.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Ceiling on the emphatic trace.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_trace: Option<f64>,
    /// Mixed scheme: compute a window's updates from its starting parameters.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frozen_window: Option<bool>,

    /// Step size of `run`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Step sizes of `sweep`, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Bootstrap lengths of `sweep`, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    /// Sweep alpha = 2^-14..2^-2 and n = 1..5.
    #[arg(long, alias = "paper-grid", num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_grid: Option<bool>,

    /// First seed; defaults to $ETDLAB_SEED, then 0.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    /// Explicit seeds, comma separated (overrides --seed/--seeds).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_list: Option<Vec<u64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    /// Uniform state weighting in the RMSVE.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unweighted: Option<bool>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Maximum number of concurrent runs.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,

    /// Key-matrix form of `stability`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),+ $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )+
    };
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }

    /// Fields set in `top` replace those of `self`.
    pub fn merged(mut self, top: Config) -> Self {
        overlay!(
            self,
            top,
            env,
            gamma,
            reward,
            features,
            random_seed,
            algs,
            scheme,
            n,
            trace_clip,
            rho_bar,
            c_bar,
            eta,
            beta,
            max_trace,
            frozen_window,
            alpha,
            alphas,
            ns,
            full_grid,
            seed,
            seeds,
            seed_list,
            steps,
            record_every,
            unweighted,
            out,
            jobs,
            variant,
        );
        self
    }

    pub fn environment(&self) -> Result<Environment> {
        let Some(name) = &self.env else {
            bail!(
                "missing --env (expected one of: {})",
                etdlab::envs::ENV_NAMES.join(", ")
            );
        };
        let mut cfg = EnvConfig::named(name);
        cfg.gamma = self.gamma;
        cfg.reward = self.reward;
        cfg.random_seed = self.random_seed;
        if let Some(path) = &self.features {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading features {}", path.display()))?;
            cfg.features = Some(
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing features {}", path.display()))?,
            );
        }
        Ok(build_env(&cfg)?)
    }

    pub fn alg_names(&self) -> Result<&[String]> {
        match &self.algs {
            Some(v) if !v.is_empty() => Ok(v),
            _ => bail!(
                "missing --alg (expected one of: {})",
                etdlab::AlgorithmName::ALL.map(|a| a.as_str()).join(", ")
            ),
        }
    }

    /// The spec of algorithm `name` at bootstrap length `n` with every
    /// configured override applied.
    pub fn spec(&self, name: &str, n: usize) -> Result<AlgorithmSpec> {
        let mut spec = AlgorithmSpec::parse(name, n)?;
        if let Some(scheme) = self.scheme {
            spec = spec.with_scheme(scheme)?;
        }
        if let Some(clip) = self.trace_clip {
            spec = spec.with_trace_clip(clip)?;
        }
        if self.rho_bar.is_some() || self.c_bar.is_some() {
            let clips = spec.target_clips.unwrap_or_default();
            spec = spec.with_target_clips(
                self.rho_bar.unwrap_or(clips.rho_bar),
                self.c_bar.unwrap_or(clips.c_bar),
            )?;
        }
        if let Some(eta) = self.eta {
            spec = spec.with_eta(eta)?;
        }
        if self.beta.is_some() {
            spec = spec.with_beta(self.beta)?;
        }
        if self.max_trace.is_some() {
            spec = spec.with_max_trace(self.max_trace)?;
        }
        if let Some(frozen) = self.frozen_window {
            spec = spec.with_frozen_window(frozen);
            spec.validate()?;
        }
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(1)
    }

    pub fn seed_values(&self) -> Result<Vec<u64>> {
        let seeds = match &self.seed_list {
            Some(list) => list.clone(),
            None => {
                let base = match self.seed {
                    Some(s) => s,
                    None => match std::env::var(SEED_ENV) {
                        Ok(v) => v
                            .trim()
                            .parse()
                            .with_context(|| format!("{SEED_ENV}={v} is not a seed"))?,
                        Err(_) => 0,
                    },
                };
                let count = self.seeds.unwrap_or(DEFAULT_SEEDS) as u64;
                (base..base + count).collect()
            }
        };
        if seeds.is_empty() {
            bail!("the seed list is empty");
        }
        Ok(seeds)
    }

    pub fn run_config(&self, env: &Environment) -> Result<RunConfig> {
        let steps = self.steps.unwrap_or(env.default_steps);
        let record_every = self
            .record_every
            .unwrap_or(env.default_record_every.min(steps.max(1)));
        if record_every == 0 {
            bail!("--record-every must be >= 1");
        }
        Ok(RunConfig::new(steps, record_every).unweighted(self.unweighted.unwrap_or(false)))
    }

    /// Sweep grid: explicit lists, else the full grid, else the single
    /// `alpha`/`n` values.
    pub fn grid(&self) -> Result<(Vec<f64>, Vec<usize>)> {
        let full = self.full_grid.unwrap_or(false);
        let alphas = match &self.alphas {
            Some(a) => a.clone(),
            None if full => grid_alphas(),
            None => vec![self.alpha.unwrap_or(DEFAULT_ALPHA)],
        };
        let ns = match &self.ns {
            Some(n) => n.clone(),
            None if full => GRID_NS.to_vec(),
            None => vec![self.n()],
        };
        if alphas.is_empty() || ns.is_empty() {
            bail!("the sweep grid is empty");
        }
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            bail!("step size {a} is not a finite non-negative number");
        }
        Ok((alphas, ns))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full() -> Config {
        Config {
            env: Some("collision".into()),
            gamma: Some(0.8),
            reward: Some(2.0),
            features: Some(PathBuf::from("f.json")),
            random_seed: Some(3),
            algs: Some(vec!["wevtrace".into(), "vtrace".into()]),
            scheme: Some(Scheme::Mixed),
            n: Some(3),
            trace_clip: Some(0.5),
            rho_bar: Some(1.5),
            c_bar: Some(0.9),
            eta: Some(0.5),
            beta: Some(0.3),
            max_trace: Some(50.0),
            frozen_window: Some(true),
            alpha: Some(0.25),
            alphas: Some(vec![0.1, 0.2]),
            ns: Some(vec![1, 2]),
            full_grid: Some(false),
            seed: Some(9),
            seeds: Some(4),
            seed_list: Some(vec![1, 5]),
            steps: Some(1000),
            record_every: Some(10),
            unweighted: Some(true),
            out: Some(PathBuf::from("x")),
            jobs: Some(2),
            variant: Some(Variant::NevtraceEmphatic),
        }
    }

    #[test]
    fn json_round_trip() {
        for cfg in [full(), Config::default()] {
            let text = cfg.to_json();
            let back: Config = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_json(), text);
        }
        assert!(serde_json::from_str::<Config>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = full();
        let flags = Config {
            n: Some(5),
            algs: Some(vec!["netd".into()]),
            ..Config::default()
        };
        let m = file.clone().merged(flags);
        assert_eq!(m.n, Some(5));
        assert_eq!(m.algs, Some(vec!["netd".to_string()]));
        assert_eq!(m.gamma, file.gamma);
        assert_eq!(file.clone().merged(Config::default()), file);
    }

    #[test]
    fn invalid_pair_names_both_sides() {
        let cfg = Config {
            scheme: Some(Scheme::Mixed),
            ..Config::default()
        };
        let err = cfg.spec("netd", 1).unwrap_err().to_string();
        assert!(err.contains("`netd`") && err.contains("`mixed`"), "{err}");
    }

    #[test]
    fn grid_and_seeds() {
        let cfg = Config {
            full_grid: Some(true),
            ..Config::default()
        };
        let (a, n) = cfg.grid().unwrap();
        assert_eq!(a.len() * n.len(), 65);
        let cfg = Config {
            seed_list: Some(vec![]),
            ..Config::default()
        };
        assert!(cfg.seed_values().is_err());
        let cfg = Config {
            seed: Some(4),
            seeds: Some(3),
            ..Config::default()
        };
        assert_eq!(cfg.seed_values().unwrap(), vec![4, 5, 6]);
    }
}
