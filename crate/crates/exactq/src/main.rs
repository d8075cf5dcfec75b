use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use exactq::config::{resolve, PRESETS};
use exactq::experiment::{infeasibility_reason, lindley_run};
use exactq::output::{emit, render_audit, write_batches_csv, write_json};
use exactq::{on_walk, run_experiment, AppError, AppResult, RunOptions, ScenarioConfig};
use exactq_core::oracles::{batch_means_from, ratio_bound_audit};
use exactq_core::params::{minimize_m, K_AUDIT};
use serde_json::json;

#[derive(Parser)]
#[command(name = "exactq", version, about = "Exact sampling of the stationary single-server queue workload")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw exact replicas of M_0 and the first idle time, plus a Lindley run.
    Sample {
        /// JSON file, or preset:NAME
        #[arg(long)]
        config: String,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Check the pathwise identities on every replica.
        #[arg(long)]
        audit: bool,
        /// Run even if the parameters fail the feasibility checks.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        skip_lindley: bool,
        /// Overrides output_dir from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feasibility at the configured m and the smallest feasible m.
    SolveParams {
        #[arg(long)]
        config: String,
    },
    /// Forward Lindley chain with batch means.
    Lindley {
        #[arg(long)]
        config: String,
        #[arg(long)]
        length: usize,
        #[arg(long)]
        batch: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerical ratio-bound audit for k = 1..=kmax.
    Audit {
        #[arg(long)]
        config: String,
        #[arg(long, default_value_t = 30)]
        kmax: u32,
    },
    /// List the embedded presets.
    Presets,
}

fn run(cli: Cli) -> AppResult<i32> {
    match cli.cmd {
        Cmd::Sample { config, replicas, seed, threads, audit, force, skip_lindley, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let mut opts = RunOptions::from_config(&cfg);
            opts.replicas = replicas.unwrap_or(opts.replicas);
            opts.seed = seed.unwrap_or(opts.seed);
            opts.threads = threads.or(opts.threads);
            opts.audit = audit;
            opts.force = force;
            opts.lindley = !skip_lindley;
            let e = run_experiment(&cfg, &opts)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let w = emit(&dir, &e)?;
            print!("{}", std::fs::read_to_string(&w.table).map_err(|err| AppError::io(&w.table, err))?);
            if !e.summary.feasibility.feasible {
                eprintln!("warning: ran with infeasible parameters: {}", infeasibility_reason(&e.summary.feasibility));
            }
            for a in &e.summary.aborted {
                eprintln!("replica {} aborted: {}", a.replica_id, a.error);
            }
            if let Some(r) = e.summary.identities.filter(|r| r.violations > 0) {
                eprintln!("{} identity violations, first: {}", r.violations, r.first_violation.unwrap_or("?"));
            }
            Ok(if e.summary.has_failures() { 1 } else { 0 })
        }
        Cmd::SolveParams { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            let target = cfg.target()?;
            let (p, rep) = resolve(&cfg, &target)?;
            let solved = on_walk!(&target, cfg.mu, |law, _mu| minimize_m(law, &p, K_AUDIT));
            let (code, minimal) = match solved {
                Ok((q, r)) => (0, json!({ "m": q.m, "report": r })),
                Err(exactq_core::Error::NoFeasibleM) => (2, json!(null)),
                Err(e) => return Err(e.into()),
            };
            let v = json!({ "name": cfg.name, "params": p, "feasibility": rep, "minimal": minimal });
            println!("{}", serde_json::to_string_pretty(&v)?);
            Ok(code)
        }
        Cmd::Lindley { config, length, batch, seed, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let target = cfg.target()?;
            let t = std::time::Instant::now();
            let means = lindley_run(&target, cfg.mu, length, batch, seed.unwrap_or(cfg.seed))?;
            let ci = batch_means_from(&means, batch, length)?;
            let secs = t.elapsed().as_secs_f64();
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            std::fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
            write_batches_csv(&dir.join(format!("{}_lindley.csv", cfg.name)), &means, batch)?;
            let v = json!({ "name": cfg.name, "lindley": ci, "wall_clock_s": secs });
            write_json(&dir.join(format!("{}_lindley.json", cfg.name)), &v)?;
            println!("{}", serde_json::to_string_pretty(&v)?);
            Ok(0)
        }
        Cmd::Audit { config, kmax } => {
            let cfg = ScenarioConfig::load(&config)?;
            let target = cfg.target()?;
            let (p, _) = resolve(&cfg, &target)?;
            let a = on_walk!(&target, cfg.mu, |law, _mu| ratio_bound_audit(&p, law, kmax))?;
            print!("{}", render_audit(&a));
            match a.first_failure {
                None => Ok(0),
                Some(k) => {
                    eprintln!("ratio bound exceeds 1 at k = {k}");
                    Ok(2)
                }
            }
        }
        Cmd::Presets => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
