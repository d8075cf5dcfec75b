//! JSON scenario configuration and the embedded presets.

use std::path::{Path, PathBuf};

use exactq_core::params::{feasibility, minimize_m, K_AUDIT};
use exactq_core::proposals::Tally;
use exactq_core::{AlgorithmParams, BetaMode, CenteredPareto, FeasibilityReport, FiniteLattice, LatticeLaw, ParetoLattice};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    /// `h⌊(c/h)V⌋` centered, `V` Pareto with index `alpha_prime`.
    LatticePareto { alpha_prime: f64, c: f64, h: f64 },
    /// `cV` centered; sampled through the dominating lattice coupling.
    CenteredPareto { alpha_prime: f64, c: f64 },
    /// Atoms `(min_index + i)·span` recentered to mean zero.
    FiniteLattice { span: f64, min_index: i64, probs: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solve {
    Solve,
}

/// `m` is either a number or the string `"solve"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MSpec {
    Value(f64),
    Solve(Solve),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub m: MSpec,
    #[serde(rename = "L")]
    pub big_l: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    #[serde(default = "default_mode")]
    pub mode: BetaMode,
}

fn default_mode() -> BetaMode {
    BetaMode::FiniteVariance
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindleySpec {
    pub length: usize,
    pub batch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    /// Defaults to `mu / 10`.
    #[serde(default)]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub distribution: Distribution,
    pub mu: f64,
    pub params: ParamSpec,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub lindley: Option<LindleySpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub coupling: Option<CouplingSpec>,
    #[serde(default = "default_max_evals")]
    pub max_evals: u64,
}

fn default_replicas() -> usize {
    1000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_max_evals() -> u64 {
    Tally::DEFAULT_LIMIT
}

pub const PRESETS: [(&str, &str); 4] = [
    ("a7_rho03", include_str!("../presets/a7_rho03.json")),
    ("a7_rho08", include_str!("../presets/a7_rho08.json")),
    ("a29_rho03", include_str!("../presets/a29_rho03.json")),
    ("a29_rho08", include_str!("../presets/a29_rho08.json")),
];

impl ScenarioConfig {
    pub fn from_json(s: &str) -> AppResult<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> AppResult<Self> {
        let (_, text) =
            PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| AppError::UnknownPreset(name.to_string()))?;
        Self::from_json(text)
    }

    /// A file path, or `preset:NAME` for an embedded preset.
    pub fn load(spec: &str) -> AppResult<Self> {
        if let Some(name) = spec.strip_prefix("preset:") {
            return Self::preset(name);
        }
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text)
    }

    fn check(&self) -> AppResult<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(AppError::Config("name must be non-empty and contain no path separators".into()));
        }
        if self.mu.is_nan() || self.mu <= 0.0 {
            return Err(AppError::Config("mu must be positive".into()));
        }
        if self.coupling.is_some() && !matches!(self.distribution, Distribution::CenteredPareto { .. }) {
            return Err(AppError::Config("coupling applies only to centered_pareto".into()));
        }
        Ok(())
    }

    pub fn target(&self) -> AppResult<Target> {
        Ok(match &self.distribution {
            Distribution::LatticePareto { alpha_prime, c, h } => {
                Target::Pareto(ParetoLattice::lattice_pareto(*alpha_prime, *c, *h)?)
            }
            Distribution::CenteredPareto { alpha_prime, c } => {
                let h = self.coupling.and_then(|c| c.h).unwrap_or(self.mu / 10.0);
                Target::Continuous(CenteredPareto::new(*alpha_prime, *c)?, h)
            }
            Distribution::FiniteLattice { span, min_index, probs } => {
                Target::Finite(FiniteLattice::new(*span, *min_index, probs)?)
            }
        })
    }
}

/// The increment law of a scenario. Continuous targets carry the coupling `h`.
#[derive(Debug, Clone)]
pub enum Target {
    Pareto(ParetoLattice),
    Finite(FiniteLattice),
    Continuous(CenteredPareto, f64),
}

impl Target {
    /// Nominal traffic intensity, when the law is a shifted Pareto.
    pub fn traffic_intensity(&self, mu: f64) -> Option<f64> {
        match self {
            Target::Pareto(l) => Some(l.traffic_intensity(mu)),
            Target::Continuous(cp, _) => {
                let c0 = -cp.lower_end();
                Some(c0 / (c0 + mu))
            }
            Target::Finite(_) => None,
        }
    }
}

/// Run `$body` with `$law` bound to the lattice law of the walk that the
/// exact sampler actually builds and `$mu` to its drift.
#[macro_export]
macro_rules! on_walk {
    ($target:expr, $mu:expr, |$law:ident, $drift:ident| $body:expr) => {
        match $target {
            $crate::config::Target::Pareto(l) => {
                let ($law, $drift) = (l, $mu);
                $body
            }
            $crate::config::Target::Finite(l) => {
                let ($law, $drift) = (l, $mu);
                $body
            }
            $crate::config::Target::Continuous(cp, h) => {
                let coupling = exactq_core::coupling::build_coupling(cp, *h, $mu)?;
                let ($law, $drift) = (&coupling.lattice, coupling.mu_prime);
                $body
            }
        }
    };
}

/// Algorithm parameters for a walk with drift `mu`, solving for `m` when asked.
pub fn walk_params<L: LatticeLaw>(law: &L, mu: f64, spec: &ParamSpec) -> AppResult<(AlgorithmParams, FeasibilityReport)> {
    let m0 = match spec.m {
        MSpec::Value(m) => m,
        MSpec::Solve(_) => 1.0,
    };
    let p = AlgorithmParams::new(mu, m0, spec.big_l, spec.alpha, spec.gamma, spec.delta, spec.mode)?;
    match spec.m {
        MSpec::Value(_) => Ok((p, feasibility(&p, law, K_AUDIT))),
        MSpec::Solve(_) => Ok(minimize_m(law, &p, K_AUDIT)?),
    }
}

/// Parameters and feasibility for the walk of `cfg`.
pub fn resolve(cfg: &ScenarioConfig, target: &Target) -> AppResult<(AlgorithmParams, FeasibilityReport)> {
    on_walk!(target, cfg.mu, |law, mu| walk_params(law, mu, &cfg.params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            let cfg = ScenarioConfig::preset(name).unwrap();
            assert_eq!(cfg.name, name);
            cfg.target().unwrap();
        }
    }

    #[test]
    fn m_accepts_number_or_solve() {
        let a: ParamSpec =
            serde_json::from_str(r#"{"m": 16, "L": 1.1, "alpha": 4, "gamma": 1.7, "delta": 0.38}"#).unwrap();
        assert_eq!(a.m, MSpec::Value(16.0));
        assert_eq!(a.mode, BetaMode::FiniteVariance);
        let b: ParamSpec =
            serde_json::from_str(r#"{"m": "solve", "L": 1.1, "alpha": 4, "gamma": 1.7, "delta": 0.38}"#).unwrap();
        assert_eq!(b.m, MSpec::Solve(Solve::Solve));
        assert!(serde_json::from_str::<ParamSpec>(r#"{"m": "x", "L": 1, "alpha": 4, "gamma": 1, "delta": 0.3}"#).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(PRESETS[0].1).unwrap();
        v["bogus"] = 1.into();
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(ScenarioConfig::load("preset:nope"), Err(AppError::UnknownPreset(_))));
    }

    #[test]
    fn light_preset_is_feasible() {
        let cfg = ScenarioConfig::preset("a7_rho03").unwrap();
        let (p, rep) = resolve(&cfg, &cfg.target().unwrap()).unwrap();
        assert_eq!(p.m, 16.0);
        assert!(rep.feasible);
    }
}
