//! Parallel replica driver and the companion Lindley run.

use std::time::Instant;

use exactq_core::coupling::{build_coupling, check_coupled, CoupledBuilder};
use exactq_core::oracles::{batch_means_from, lindley_batches, mean_ci, BatchMeansResult, MeanCi};
use exactq_core::proposals::Tally;
use exactq_core::sampler::{check_identities, IdentityReport};
use exactq_core::{AlgorithmParams, FeasibilityReport, LatticeLaw, Sampler};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{resolve, Distribution, ScenarioConfig, Target};
use crate::error::{AppError, AppResult};

/// Stream reserved for the Lindley chain; replicas use streams `0..n`.
pub const LINDLEY_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub replicas: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub audit: bool,
    pub force: bool,
    pub lindley: bool,
}

impl RunOptions {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self { replicas: cfg.replicas, seed: cfg.seed, threads: cfg.threads, audit: false, force: false, lindley: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaRecord {
    pub replica_id: u64,
    pub m0: Option<f64>,
    pub first_idle: Option<usize>,
    pub function_evals: u64,
    pub error: Option<String>,
    pub identities: Option<IdentityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Abort {
    pub replica_id: u64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WallClock {
    pub exact_s: f64,
    pub lindley_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub distribution: Distribution,
    pub mu: f64,
    pub rho: Option<f64>,
    /// Parameters of the walk the sampler builds (drift `μ′` under coupling).
    pub params: AlgorithmParams,
    pub coupling_h: Option<f64>,
    pub feasibility: FeasibilityReport,
    pub forced: bool,
    pub seed: u64,
    pub replicas: usize,
    pub completed: usize,
    pub aborted: Vec<Abort>,
    pub exact: MeanCi,
    pub first_idle_mean: f64,
    pub function_evals_mean: f64,
    pub lindley: Option<BatchMeansResult>,
    pub overlap: Option<bool>,
    pub identities: Option<IdentityReport>,
    pub wall_clock: WallClock,
}

impl Summary {
    /// Aborted replicas or identity violations.
    pub fn has_failures(&self) -> bool {
        !self.aborted.is_empty() || self.identities.is_some_and(|r| r.violations > 0)
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub records: Vec<ReplicaRecord>,
    pub lindley_means: Vec<f64>,
    pub summary: Summary,
}

pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn record_from<T>(id: u64, tally: &Tally, r: exactq_core::Result<T>, f: impl FnOnce(T) -> ReplicaRecord) -> ReplicaRecord {
    match r {
        Ok(v) => f(v),
        Err(e) => ReplicaRecord {
            replica_id: id,
            m0: None,
            first_idle: None,
            function_evals: tally.evals,
            error: Some(e.to_string()),
            identities: None,
        },
    }
}

fn lattice_replica<L: LatticeLaw>(s: &mut Sampler<'_, L>, id: u64, seed: u64, limit: u64, audit: bool) -> ReplicaRecord {
    let mut rng = replica_rng(seed, id);
    let mut tally = Tally::new(limit);
    let r = s.sample_through_first_idle(&mut rng, &mut tally);
    let p = *s.params();
    record_from(id, &tally, r, |b| ReplicaRecord {
        replica_id: id,
        m0: Some(b.m0()),
        first_idle: b.first_idle(),
        function_evals: tally.evals,
        error: None,
        identities: audit.then(|| check_identities(&b, &p)),
    })
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> AppResult<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build()?;
    Ok(pool.install(f))
}

/// Exact replicas `0..n`, in order. Each replica uses its own stream of
/// `seed`, so the output does not depend on the thread count.
pub fn run_replicas(cfg: &ScenarioConfig, target: &Target, params: &AlgorithmParams, opts: &RunOptions) -> AppResult<Vec<ReplicaRecord>> {
    let n = opts.replicas as u64;
    let (seed, limit, audit) = (opts.seed, cfg.max_evals, opts.audit);
    match target {
        Target::Pareto(law) => {
            let base = Sampler::new(law, *params)?;
            in_pool(opts.threads, || {
                (0..n).into_par_iter().map_init(|| base.clone(), |s, i| lattice_replica(s, i, seed, limit, audit)).collect()
            })
        }
        Target::Finite(law) => {
            let base = Sampler::new(law, *params)?;
            in_pool(opts.threads, || {
                (0..n).into_par_iter().map_init(|| base.clone(), |s, i| lattice_replica(s, i, seed, limit, audit)).collect()
            })
        }
        Target::Continuous(cp, h) => {
            let coupling = build_coupling(cp, *h, cfg.mu)?;
            let base = Sampler::new(&coupling.lattice, *params)?;
            let mu = cfg.mu;
            in_pool(opts.threads, || {
                (0..n)
                    .into_par_iter()
                    .map_init(
                        || base.clone(),
                        |s, i| {
                            let mut rng = replica_rng(seed, i);
                            let mut tally = Tally::new(limit);
                            let mut b = match CoupledBuilder::with_sampler(&coupling, s.clone()) {
                                Ok(b) => b,
                                Err(e) => return record_from(i, &tally, Err::<(), _>(e), |_| unreachable!()),
                            };
                            let r = b.through_first_idle(&mut rng, &mut tally);
                            *s = b.into_sampler();
                            record_from(i, &tally, r, |(c, k)| ReplicaRecord {
                                replica_id: i,
                                m0: Some(c.m0()),
                                first_idle: Some(k),
                                function_evals: tally.evals,
                                error: None,
                                identities: audit.then(|| check_coupled(&c, mu)),
                            })
                        },
                    )
                    .collect()
            })
        }
    }
}

/// Per-batch means of the forward chain for the target law at drift `mu`.
pub fn lindley_run(target: &Target, mu: f64, length: usize, batch: usize, seed: u64) -> AppResult<Vec<f64>> {
    let mut rng = replica_rng(seed, LINDLEY_STREAM);
    Ok(match target {
        Target::Pareto(l) => lindley_batches(l, mu, length, batch, &mut rng)?,
        Target::Finite(l) => lindley_batches(l, mu, length, batch, &mut rng)?,
        Target::Continuous(cp, _) => lindley_batches(cp, mu, length, batch, &mut rng)?,
    })
}

/// 95% interval for `E M_0` from the completed replicas.
pub fn exact_ci(records: &[ReplicaRecord]) -> AppResult<MeanCi> {
    let xs: Vec<f64> = records.iter().filter_map(|r| r.m0).collect();
    Ok(mean_ci(&xs)?)
}

/// Gate on feasibility, run the replicas and, if requested, the Lindley chain.
pub fn run_experiment(cfg: &ScenarioConfig, opts: &RunOptions) -> AppResult<Experiment> {
    let target = cfg.target()?;
    let (params, feasibility) = resolve(cfg, &target)?;
    if !feasibility.feasible && !opts.force {
        return Err(AppError::Infeasible(infeasibility_reason(&feasibility)));
    }

    let t0 = Instant::now();
    let records = run_replicas(cfg, &target, &params, opts)?;
    let exact_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let (lindley_means, lindley) = match (opts.lindley, cfg.lindley) {
        (true, Some(spec)) => {
            let means = lindley_run(&target, cfg.mu, spec.length, spec.batch, opts.seed)?;
            let ci = batch_means_from(&means, spec.batch, spec.length)?;
            (means, Some(ci))
        }
        _ => (Vec::new(), None),
    };
    let lindley_s = t1.elapsed().as_secs_f64();

    let exact = exact_ci(&records)?;
    let ok: Vec<&ReplicaRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let mean_of = |f: &dyn Fn(&ReplicaRecord) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64;
    let identities = opts.audit.then(|| {
        let mut acc = IdentityReport::default();
        ok.iter().filter_map(|r| r.identities.as_ref()).for_each(|r| acc.merge(r));
        acc
    });
    let summary = Summary {
        name: cfg.name.clone(),
        distribution: cfg.distribution.clone(),
        mu: cfg.mu,
        rho: target.traffic_intensity(cfg.mu),
        params,
        coupling_h: match target {
            Target::Continuous(_, h) => Some(h),
            _ => None,
        },
        feasibility,
        forced: !feasibility.feasible,
        seed: opts.seed,
        replicas: opts.replicas,
        completed: ok.len(),
        aborted: records
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| Abort { replica_id: r.replica_id, error: e.clone() }))
            .collect(),
        exact,
        first_idle_mean: mean_of(&|r| r.first_idle.unwrap_or(0) as f64),
        function_evals_mean: mean_of(&|r| r.function_evals as f64),
        lindley,
        overlap: lindley.map(|b| b.overlaps(exact.lower, exact.upper)),
        identities,
        wall_clock: WallClock { exact_s, lindley_s },
    };
    Ok(Experiment { records, lindley_means, summary })
}

pub fn infeasibility_reason(r: &FeasibilityReport) -> String {
    let mut parts = Vec::new();
    if !r.cm3_pass {
        parts.push(format!("moment bound on m fails ({:.3e})", r.cm3_value));
    }
    if !r.cond_alpha_pass {
        parts.push(format!("index condition fails (needs moments of order {:.3})", 2.0 + r.epsilon));
    }
    if !r.ci1.pass {
        parts.push(format!("first grid inequality fails (sup {:.3e} at k = {})", r.ci1.sup, r.ci1.argmax_k));
    }
    if !r.ci2.pass {
        parts.push(format!("second grid inequality fails (sup {:.3e} at k = {})", r.ci2.sup, r.ci2.argmax_k));
    }
    parts.join("; ")
}

/// Used by the acceptance target for laws that are not configured from JSON.
pub fn sample_m0_batch<L: LatticeLaw>(
    law: &L,
    params: &AlgorithmParams,
    n: u64,
    seed: u64,
    threads: Option<usize>,
) -> AppResult<Vec<ReplicaRecord>> {
    let base = Sampler::new(law, *params)?;
    in_pool(threads, || {
        (0..n)
            .into_par_iter()
            .map_init(|| base.clone(), |s, i| lattice_replica(s, i, seed, Tally::DEFAULT_LIMIT, false))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(name: &str, replicas: usize) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::preset(name).unwrap();
        cfg.replicas = replicas;
        cfg.lindley = Some(crate::config::LindleySpec { length: 20_000, batch: 100 });
        cfg
    }

    #[test]
    fn thread_count_does_not_change_replicas() {
        let cfg = small("a7_rho03", 200);
        let mut o = RunOptions::from_config(&cfg);
        o.threads = Some(1);
        let a = run_experiment(&cfg, &o).unwrap();
        o.threads = Some(4);
        let b = run_experiment(&cfg, &o).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.lindley_means, b.lindley_means);
    }

    #[test]
    fn infeasible_preset_is_gated() {
        let cfg = small("a29_rho08", 10);
        let err = run_experiment(&cfg, &RunOptions::from_config(&cfg)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn audit_reports_identities() {
        let cfg = small("a7_rho03", 100);
        let mut o = RunOptions::from_config(&cfg);
        o.audit = true;
        let e = run_experiment(&cfg, &o).unwrap();
        let r = e.summary.identities.unwrap();
        assert!(r.checked > 0);
        assert_eq!(r.violations, 0);
        assert!(!e.summary.has_failures());
    }

    #[test]
    fn continuous_target_through_coupling() {
        let text = r#"{
            "name": "cont", "distribution": {"kind": "centered_pareto", "alpha_prime": 7, "c": 3},
            "mu": 1.0, "params": {"m": 16, "L": 1.1, "alpha": 4, "gamma": 1.7, "delta": 0.38},
            "replicas": 50, "seed": 3, "coupling": {}
        }"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        let mut o = RunOptions::from_config(&cfg);
        o.audit = true;
        o.force = true;
        let e = run_experiment(&cfg, &o).unwrap();
        assert_eq!(e.summary.coupling_h, Some(0.1));
        assert!(e.summary.params.mu < 1.0);
        assert_eq!(e.summary.identities.unwrap().violations, 0);
        assert!(e.records.iter().all(|r| r.first_idle.is_some()));
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(exact_ci(&[]).is_err());
    }
}
