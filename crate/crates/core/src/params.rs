//! Parameter constraints and the feasibility checker.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increment::LatticeLaw;
use crate::math;
use crate::oracles;

/// Default audit horizon: `z = μ 2^k` for `k = 0..=60`.
pub const K_AUDIT: u32 = 60;

const GRID_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// `E|X|^{2+ε} < ∞`; `α > 2`.
    FiniteVariance,
    /// `E|X|^{1+ε} < ∞` with `ε ∈ (0, 1)`; `1 < α ≤ (1+ε)(1-δ)`.
    BetaInOneTwo { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    pub mu: f64,
    pub m: f64,
    #[serde(rename = "L")]
    pub big_l: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub mode: BetaMode,
}

impl AlgorithmParams {
    pub fn new(mu: f64, m: f64, big_l: f64, alpha: f64, gamma: f64, delta: f64, mode: BetaMode) -> Result<Self> {
        let p = Self { mu, m, big_l, alpha, gamma, delta, mode };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParameter("mu must be positive"));
        }
        if !(self.m >= 1.0) {
            return Err(Error::InvalidParameter("m must be at least 1"));
        }
        if !(self.big_l >= 1.0) {
            return Err(Error::InvalidParameter("L must be at least 1"));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter("gamma must be positive"));
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::InvalidParameter("delta must lie in (0, 1/2]"));
        }
        match self.mode {
            BetaMode::FiniteVariance => {
                if !(self.alpha > 2.0) {
                    return Err(Error::InvalidParameter("finite-variance mode needs alpha > 2"));
                }
            }
            BetaMode::BetaInOneTwo { epsilon } => {
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return Err(Error::InvalidParameter("epsilon must lie in (0, 1)"));
                }
                if !(self.alpha > 1.0 && self.alpha <= (1.0 + epsilon) * (1.0 - self.delta)) {
                    return Err(Error::InvalidParameter("need 1 < alpha ≤ (1+ε)(1-δ)"));
                }
            }
        }
        Ok(())
    }

    pub fn with_m(&self, m: f64) -> Self {
        Self { m, ..*self }
    }
}

/// Outcome of one grid inequality plus its closed-form envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub pass: bool,
    pub sup: f64,
    pub argmax_k: u32,
    pub envelope: f64,
    pub envelope_pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub cm3_pass: bool,
    pub cm3_value: f64,
    pub cond_alpha_pass: bool,
    /// The ε actually used by the index condition and the envelopes.
    pub epsilon: f64,
    pub ci1: GridCheck,
    pub ci2: GridCheck,
    pub feasible: bool,
}

/// `ln((1+2z+m)^α / ((α-1)(m+1)^{α-1}))`, shared by both inequalities.
fn ln_core(p: &AlgorithmParams, z: f64) -> f64 {
    p.alpha * math::ln(1.0 + 2.0 * z + p.m) - math::ln(p.alpha - 1.0) - (p.alpha - 1.0) * math::ln(p.m + 1.0)
}

/// Left side of the first grid inequality at `z`.
pub fn ci1_lhs<L: LatticeLaw>(p: &AlgorithmParams, law: &L, z: f64) -> f64 {
    let tail = law.tail(math::powf(z + p.m, 1.0 - p.delta));
    if tail <= 0.0 {
        return 0.0;
    }
    math::exp(math::ln(6.0) + ln_core(p, z) + math::ln(tail) - math::ln(p.mu))
}

/// Left side of the second grid inequality at `z`.
pub fn ci2_lhs<L: LatticeLaw>(p: &AlgorithmParams, law: &L, z: f64) -> f64 {
    let ex2 = law.second_moment();
    let tail = law.tail(math::powf(z + p.m, 1.0 - p.delta));
    let g = p.gamma;
    let expo = -g * math::powf(p.m + z, p.delta)
        + g * g * math::exp(g) * ex2 * z / (math::powf(p.m + z, 2.0 * (1.0 - p.delta)) * p.mu)
        + 4.0 * (z / p.mu) * tail;
    math::exp(expo + math::ln(3.0) + ln_core(p, z) - math::ln(z))
}

fn grid<F: Fn(f64) -> f64>(p: &AlgorithmParams, k_audit: u32, f: F) -> (f64, u32) {
    let mut sup = f64::NEG_INFINITY;
    let mut arg = 0;
    for k in 0..=k_audit {
        let v = f(p.mu * math::powf(2.0, k as f64));
        if v > sup || v.is_nan() {
            sup = v;
            arg = k;
        }
    }
    (sup, arg)
}

/// `max_{u ≥ u0} u^α e^{-u^δ}`; the unconstrained maximiser is `(α/δ)^{1/δ}`.
pub fn max_power_exp(alpha: f64, delta: f64, u0: f64) -> f64 {
    let ln_star = math::ln(alpha / delta) / delta;
    let ln_u = if u0 > 0.0 && math::ln(u0) > ln_star { math::ln(u0) } else { ln_star };
    math::exp(alpha * ln_u - math::exp(delta * ln_u))
}

/// `A = (γ² e^γ / 2 + 2) E(X²)`.
pub fn drift_constant_finite(gamma: f64, ex2: f64) -> f64 {
    (gamma * gamma * math::exp(gamma) / 2.0 + 2.0) * ex2
}

/// `A(γ) = (γ²/2 · max(e^γ, e)/(1-ε) + 2) E|X|^{1+ε}`.
pub fn drift_constant_beta12(gamma: f64, epsilon: f64, abs_moment: f64) -> f64 {
    let e = math::exp(gamma).max(core::f64::consts::E);
    (gamma * gamma / 2.0 * e / (1.0 - epsilon) + 2.0) * abs_moment
}

/// `E(X²)/m^{2(1-δ)} ≤ 1/2`.
pub fn check_cm3<L: LatticeLaw>(p: &AlgorithmParams, law: &L) -> (bool, f64) {
    let v = law.second_moment() / math::powf(p.m, 2.0 * (1.0 - p.delta));
    (v <= 0.5, v)
}

/// Index condition and the ε it implies.
pub fn cond_alpha<L: LatticeLaw>(p: &AlgorithmParams, law: &L) -> (bool, f64) {
    match p.mode {
        BetaMode::FiniteVariance => {
            // smallest ε with α ≤ (2+ε)(1-δ)
            let eps = (p.alpha / (1.0 - p.delta) - 2.0).max(1e-9);
            (2.0 + eps < law.moment_index(), eps)
        }
        BetaMode::BetaInOneTwo { epsilon } => {
            let ok = p.alpha > 1.0 && p.alpha <= (1.0 + epsilon) * (1.0 - p.delta);
            (ok && 1.0 + epsilon < law.moment_index(), epsilon)
        }
    }
}

fn envelope_ci1<L: LatticeLaw>(p: &AlgorithmParams, law: &L, eps: f64) -> f64 {
    let order = match p.mode {
        BetaMode::FiniteVariance => 2.0 + eps,
        BetaMode::BetaInOneTwo { .. } => 1.0 + eps,
    };
    let moment = law.positive_moment(order);
    6.0 * math::powf(2.0, p.alpha) * moment
        / ((p.alpha - 1.0) * math::powf(p.m + 1.0, p.alpha - 1.0) * p.mu)
}

fn ln_prefactor_ci2(p: &AlgorithmParams) -> f64 {
    math::ln(3.0) + p.alpha * math::ln(2.0) - (p.alpha / p.delta) * math::ln(p.gamma)
        - math::ln(p.alpha - 1.0)
        - (p.alpha - 1.0) * math::ln(p.m + 1.0)
        - math::ln(p.mu)
}

fn envelope_ci2<L: LatticeLaw>(p: &AlgorithmParams, law: &L) -> f64 {
    let d = p.delta;
    let g = p.gamma;
    let one_minus_2d = 1.0 - 2.0 * d;
    let aux = if one_minus_2d > 0.0 { math::powf(one_minus_2d, one_minus_2d) } else { 1.0 };
    let denom = math::powf(2.0 * (1.0 - d), 2.0 * (1.0 - d)) * p.mu * math::powf(p.m, one_minus_2d);
    let expo = (g * g * math::exp(g) + 4.0) * law.second_moment() * aux / denom;
    let u0 = math::powf(g, 1.0 / d) * p.m;
    math::exp(ln_prefactor_ci2(p) + expo) * max_power_exp(p.alpha, d, u0)
}

/// First grid inequality and its Chebyshev envelope.
pub fn check_ci1<L: LatticeLaw>(p: &AlgorithmParams, law: &L, k_audit: u32) -> GridCheck {
    let (sup, argmax_k) = grid(p, k_audit, |z| ci1_lhs(p, law, z));
    let (_, eps) = cond_alpha(p, law);
    let envelope = envelope_ci1(p, law, eps);
    GridCheck { pass: sup <= 1.0 + GRID_SLACK, sup, argmax_k, envelope, envelope_pass: envelope <= 1.0 }
}

/// Second grid inequality (finite-variance mode) and its closed-form envelope.
pub fn check_ci2<L: LatticeLaw>(p: &AlgorithmParams, law: &L, k_audit: u32) -> GridCheck {
    let (sup, argmax_k) = grid(p, k_audit, |z| ci2_lhs(p, law, z));
    let envelope = envelope_ci2(p, law);
    GridCheck { pass: sup <= 1.0 + GRID_SLACK, sup, argmax_k, envelope, envelope_pass: envelope <= 1.0 }
}

/// Replacement of the second inequality when only `E|X|^{1+ε}` is finite.
/// There is no grid form; the closed-form bound is the check.
pub fn check_ci2_beta12<L: LatticeLaw>(p: &AlgorithmParams, law: &L) -> GridCheck {
    let eps = match p.mode {
        BetaMode::BetaInOneTwo { epsilon } => epsilon,
        BetaMode::FiniteVariance => 1.0 - 1e-9,
    };
    let a = drift_constant_beta12(p.gamma, eps, law.positive_moment(1.0 + eps) + law.negative_moment(1.0 + eps));
    let u0 = math::powf(p.gamma, 1.0 / p.delta) * p.m;
    let v = math::exp(ln_prefactor_ci2(p) + 2.0 * a / p.mu) * max_power_exp(p.alpha, p.delta, u0);
    GridCheck { pass: v <= 1.0, sup: v, argmax_k: 0, envelope: v, envelope_pass: v <= 1.0 }
}

/// Full report. Feasibility is the grid audit plus the moment conditions;
/// the envelopes are reported but do not gate.
pub fn feasibility<L: LatticeLaw>(p: &AlgorithmParams, law: &L, k_audit: u32) -> FeasibilityReport {
    let (cm3_pass, cm3_value) = match p.mode {
        BetaMode::FiniteVariance => check_cm3(p, law),
        BetaMode::BetaInOneTwo { .. } => (true, f64::NAN),
    };
    let (cond_alpha_pass, epsilon) = cond_alpha(p, law);
    let ci1 = check_ci1(p, law, k_audit);
    let ci2 = match p.mode {
        BetaMode::FiniteVariance => check_ci2(p, law, k_audit),
        BetaMode::BetaInOneTwo { .. } => check_ci2_beta12(p, law),
    };
    let feasible = cm3_pass && cond_alpha_pass && ci1.pass && ci2.pass;
    FeasibilityReport { cm3_pass, cm3_value, cond_alpha_pass, epsilon, ci1, ci2, feasible }
}

/// Whether the stationary mass of `(m, (L+1)m]` was observed in a pilot run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cm0Status {
    Verified { frequency: f64 },
    Assumed,
}

/// Pilot Lindley chain of `steps` steps counting visits to `(m, (L+1)m]`.
pub fn check_cm0<L: LatticeLaw, R: Rng + ?Sized>(p: &AlgorithmParams, law: &L, steps: usize, rng: &mut R) -> Cm0Status {
    let hi = (p.big_l + 1.0) * p.m;
    let mut w = 0.0;
    let mut hits = 0usize;
    for _ in 0..steps {
        w = oracles::lindley_step(w, law.value(law.draw_index(rng)) - p.mu);
        if w > p.m && w <= hi {
            hits += 1;
        }
    }
    if hits > 0 {
        Cm0Status::Verified { frequency: hits as f64 / steps as f64 }
    } else {
        Cm0Status::Assumed
    }
}

fn gate<L: LatticeLaw>(p: &AlgorithmParams, law: &L, k_audit: u32) -> bool {
    let cm3 = match p.mode {
        BetaMode::FiniteVariance => check_cm3(p, law).0,
        BetaMode::BetaInOneTwo { .. } => true,
    };
    cm3 && check_ci1(p, law, k_audit).pass
        && match p.mode {
            BetaMode::FiniteVariance => check_ci2(p, law, k_audit).pass,
            BetaMode::BetaInOneTwo { .. } => check_ci2_beta12(p, law).pass,
        }
}

/// Smallest `m ∈ [1, 1e9]` passing the grid inequalities and the moment
/// bound on `m`, to relative precision `1e-3`.
pub fn minimize_m<L: LatticeLaw>(
    law: &L,
    template: &AlgorithmParams,
    k_audit: u32,
) -> Result<(AlgorithmParams, FeasibilityReport)> {
    let at = |m: f64| template.with_m(m);
    let (mut lo, mut hi) = (1.0f64, 1e9f64);
    if gate(&at(lo), law, k_audit) {
        let p = at(lo);
        return Ok((p, feasibility(&p, law, k_audit)));
    }
    if !gate(&at(hi), law, k_audit) {
        return Err(Error::NoFeasibleM);
    }
    while hi / lo > 1.0 + 1e-3 {
        let mid = math::sqrt(lo * hi);
        if gate(&at(mid), law, k_audit) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p = at(hi);
    Ok((p, feasibility(&p, law, k_audit)))
}
