//! `etdlab`: run, sweep and analyze off-policy TD algorithms.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use etdlab::harness::{run_with, sweep_with, write_records_csv, RunRecord, ValueError};
use etdlab::stability::{key_matrix_with, KeyMatrixOptions, Variant};
use etdlab::{AlgorithmName, Scheme};

use crate::config::Config;

#[derive(Parser)]
#[command(name = "etdlab", version, about = "Emphatic off-policy TD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one algorithm at one step size over several seeds.
    Run(CommonArgs),
    /// Evaluate algorithms over a step-size by bootstrap-length grid.
    Sweep(CommonArgs),
    /// Print the key matrix and its stability verdict as JSON.
    Stability(CommonArgs),
    /// List environments, algorithms and key-matrix variants.
    List,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective config as JSON and exit.
    #[arg(long)]
    dump_config: bool,
    #[command(flatten)]
    flags: Config,
}

impl CommonArgs {
    fn resolve(self) -> Result<Config> {
        let base = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        Ok(base.merged(self.flags))
    }
}

fn with_jobs<T: Send>(cfg: &Config, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match cfg.jobs {
        Some(0) => anyhow::bail!("--jobs must be >= 1"),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()?
            .install(f),
        None => f(),
    }
}

fn write_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_records_csv(&mut w, records)?;
    w.flush()?;
    Ok(())
}

fn cmd_run(cfg: &Config) -> Result<()> {
    let env = cfg.environment()?;
    let names = cfg.alg_names()?;
    if names.len() != 1 {
        anyhow::bail!("`run` takes a single --alg (got {})", names.join(","));
    }
    let spec = cfg.spec(&names[0], cfg.n())?;
    let alpha = cfg.alpha.unwrap_or(config::DEFAULT_ALPHA);
    let seeds = cfg.seed_values()?;
    let run_cfg = cfg.run_config(&env)?;
    let metric = ValueError::new(&env, run_cfg.unweighted)?;
    let records = with_jobs(cfg, || {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|&seed| {
                run_with(&env, &spec, alpha, seed, &run_cfg, &metric).map_err(anyhow::Error::from)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let out = cfg.out_dir();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(format!("{}_{}.csv", env.name, spec.id()));
    write_csv(&path, &records)?;
    let diverged = records.iter().filter(|r| r.diverged).count();
    let finals: Vec<f64> = records.iter().map(RunRecord::last).collect();
    println!(
        "{} on {} (n={}, alpha={alpha}): {} runs, {diverged} diverged, median final RMSVE {:.6}",
        spec.id(),
        env.name,
        spec.n,
        records.len(),
        etdlab::harness::median(&finals)
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sweep(cfg: &Config) -> Result<()> {
    let env = cfg.environment()?;
    let (alphas, ns) = cfg.grid()?;
    let specs = cfg
        .alg_names()?
        .iter()
        .map(|name| cfg.spec(name, ns[0]))
        .collect::<Result<Vec<_>>>()?;
    let seeds = cfg.seed_values()?;
    let run_cfg = cfg.run_config(&env)?;
    let (result, cells) = with_jobs(cfg, || {
        Ok(sweep_with(&env, &specs, &alphas, &ns, &seeds, &run_cfg)?)
    })?;
    let out = cfg.out_dir();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for records in &cells {
        let r = &records[0];
        write_csv(
            &out.join(format!(
                "{}_{}_n{}_alpha{}.csv",
                env.name, r.spec_id, r.n, r.alpha
            )),
            records,
        )?;
    }
    let summary = out.join(format!("sweep_{}.json", env.name));
    fs::write(&summary, serde_json::to_string_pretty(&result)? + "\n")
        .with_context(|| format!("writing {}", summary.display()))?;
    for (id, best) in &result.best_cells {
        println!(
            "{id}: best alpha={} n={} mean RMSVE {:.6} (diverged {:.0}%)",
            best.alpha,
            best.n,
            best.mean,
            100.0 * best.diverged_fraction
        );
    }
    println!(
        "wrote {} and {} cell CSVs to {}",
        summary.display(),
        cells.len(),
        out.display()
    );
    Ok(())
}

fn cmd_stability(cfg: &Config) -> Result<()> {
    let env = cfg.environment()?;
    let variant = cfg.variant.unwrap_or(Variant::Nstep);
    let opts = KeyMatrixOptions {
        rho_bar: cfg.rho_bar.unwrap_or(1.0),
        c_bar: cfg.c_bar.unwrap_or(1.0),
        weighting: Some(env.behavior_distribution()?),
    };
    let report = key_matrix_with(
        &env.mdp,
        &env.target,
        &env.behavior,
        cfg.n(),
        variant,
        &opts,
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_list() {
    println!("environments:");
    for name in etdlab::envs::ENV_NAMES {
        println!("  {name}");
    }
    println!("algorithms:");
    for alg in AlgorithmName::ALL {
        let schemes = match alg.required_scheme() {
            Some(Scheme::Fixed) => "fixed",
            Some(Scheme::Mixed) => "mixed",
            None => "fixed, mixed",
        };
        println!("  {:<10} schemes: {schemes}", alg.as_str());
    }
    println!("stability variants:");
    for v in Variant::ALL {
        println!("  {v}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            cmd_list();
            Ok(())
        }
        Command::Run(args) | Command::Sweep(args) | Command::Stability(args)
            if args.dump_config =>
        {
            args.resolve().map(|cfg| println!("{}", cfg.to_json()))
        }
        Command::Run(args) => args.resolve().and_then(|cfg| cmd_run(&cfg)),
        Command::Sweep(args) => args.resolve().and_then(|cfg| cmd_sweep(&cfg)),
        Command::Stability(args) => args.resolve().and_then(|cfg| cmd_stability(&cfg)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
