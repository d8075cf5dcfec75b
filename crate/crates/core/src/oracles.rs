//! Ground truth that does not go through the exact sampler: forward Lindley
//! chains with batch means, crude crossing probabilities, Kolmogorov–Smirnov
//! statistics and the numerical ratio-bound audit.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increment::{IncrementLaw, LatticeLaw};
use crate::math;
use crate::params::AlgorithmParams;
use crate::partition::{block_start, block_start_f, gbar, RecordLaw};
use crate::proposals::{Block, TiltedLaw};

pub const Z95: f64 = 1.96;
pub const MIN_BATCHES: usize = 30;

/// `(w + y)⁺`.
#[inline]
pub fn lindley_step(w: f64, x_minus_mu: f64) -> f64 {
    (w + x_minus_mu).max(0.0)
}

/// `W_1..W_n` from `W_0 = 0` for the given values of `X_j - μ`.
pub fn lindley_from_steps(steps: &[f64]) -> Vec<f64> {
    let mut w = 0.0;
    steps
        .iter()
        .map(|y| {
            w = lindley_step(w, *y);
            w
        })
        .collect()
}

/// Forward chain `W_1..W_length` from `W_0 = 0`.
pub fn lindley_chain<L: IncrementLaw + ?Sized, R: Rng + ?Sized>(law: &L, mu: f64, length: usize, rng: &mut R) -> Vec<f64> {
    let mut w = 0.0;
    (0..length)
        .map(|_| {
            w = lindley_step(w, law.sample(rng) - mu);
            w
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeansResult {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub batch_size: usize,
    pub batches: usize,
    pub length: usize,
}

impl BatchMeansResult {
    pub fn overlaps(&self, lo: f64, hi: f64) -> bool {
        self.lower <= hi && lo <= self.upper
    }
}

/// Interval from per-batch means of a chain of `length` steps.
pub fn batch_means_from(means: &[f64], batch_size: usize, length: usize) -> Result<BatchMeansResult> {
    let b = means.len();
    if b < MIN_BATCHES {
        return Err(Error::TooFewBatches(b));
    }
    let ci = mean_ci(means)?;
    Ok(BatchMeansResult { mean: ci.mean, lower: ci.lower, upper: ci.upper, batch_size, batches: b, length })
}

/// Batch-means 95% interval; a trailing partial batch is dropped.
pub fn batch_means_ci(chain: &[f64], batch_size: usize) -> Result<BatchMeansResult> {
    if batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be positive"));
    }
    let means: Vec<f64> = chain.chunks_exact(batch_size).map(|c| c.iter().sum::<f64>() / batch_size as f64).collect();
    batch_means_from(&means, batch_size, chain.len())
}

/// Per-batch means of a forward chain from `W_0 = 0`, streamed without
/// storing the chain. A trailing partial batch is dropped.
pub fn lindley_batches<L: IncrementLaw + ?Sized, R: Rng + ?Sized>(
    law: &L,
    mu: f64,
    length: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be positive"));
    }
    let batches = length / batch_size;
    let mut means = Vec::with_capacity(batches);
    let mut w = 0.0;
    for _ in 0..batches {
        let mut acc = 0.0;
        for _ in 0..batch_size {
            w = lindley_step(w, law.sample(rng) - mu);
            acc += w;
        }
        means.push(acc / batch_size as f64);
    }
    Ok(means)
}

/// Streaming version of `batch_means_ci(lindley_chain(..))`.
pub fn lindley_batch_means<L: IncrementLaw + ?Sized, R: Rng + ?Sized>(
    law: &L,
    mu: f64,
    length: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<BatchMeansResult> {
    let means = lindley_batches(law, mu, length, batch_size, rng)?;
    batch_means_from(&means, batch_size, length)
}

/// Normal-theory 95% interval for a mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub std_err: f64,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

impl MeanCi {
    pub fn overlaps(&self, lo: f64, hi: f64) -> bool {
        self.lower <= hi && lo <= self.upper
    }
}

pub fn mean_ci(xs: &[f64]) -> Result<MeanCi> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::EmptySample);
    }
    let mut s = math::KahanSum::new();
    xs.iter().for_each(|x| s.add(*x));
    let mean = s.value() / n as f64;
    let mut v = math::KahanSum::new();
    xs.iter().for_each(|x| v.add((x - mean) * (x - mean)));
    let std_err = math::sqrt(v.value() / (n - 1) as f64 / n as f64);
    Ok(MeanCi { mean, std_err, lower: mean - Z95 * std_err, upper: mean + Z95 * std_err, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter("NaN in sample"));
    }
    let mut v = xs.to_vec();
    v.sort_unstable_by(|a, b| a.total_cmp(b));
    Ok(v)
}

fn ks_p_value(d: f64, ne: f64) -> f64 {
    let s = math::sqrt(ne);
    math::kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// Two-sample Kolmogorov–Smirnov statistic with its asymptotic p-value.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, na * nb / (na + nb)) })
}

/// One-sample Kolmogorov–Smirnov test against a continuous cdf.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<KsResult> {
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, n) })
}

/// Crude estimate of `P(T_m < ∞)` from walks truncated at `horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrudeInterval {
    pub estimate: f64,
    pub lower: f64,
    /// Includes the tail correction.
    pub upper: f64,
    /// Bound on `P(horizon < T_m < ∞)` from the tail of `g`.
    pub tail_bound: f64,
    pub hits: u64,
    pub reps: u64,
}

/// `Σ_{k ≥ k0} g(k)` where `k0` is the first block reaching past `horizon`.
/// It bounds `P(horizon < T_m < ∞)` whenever the ratio bounds hold.
pub fn g_tail_bound(p: &AlgorithmParams, horizon: u64) -> Result<f64> {
    let mut k0 = 2u32;
    while block_start_f(k0) <= horizon as f64 + 1.0 {
        k0 += 1;
    }
    let num = gbar(p.m + p.mu * block_start_f(k0 - 1), p.alpha)?;
    Ok(num / gbar(p.m + p.mu, p.alpha)?)
}

pub fn crude_tm_prob<L: IncrementLaw + ?Sized, R: Rng + ?Sized>(
    p: &AlgorithmParams,
    law: &L,
    horizon: u64,
    rng: &mut R,
    reps: u64,
) -> Result<CrudeInterval> {
    if reps == 0 {
        return Err(Error::EmptySample);
    }
    let mut hits = 0u64;
    for _ in 0..reps {
        let mut s = 0.0;
        for _ in 0..horizon {
            s += law.sample(rng) - p.mu;
            if s > p.m {
                hits += 1;
                break;
            }
        }
    }
    let est = hits as f64 / reps as f64;
    let se = math::sqrt(est * (1.0 - est) / reps as f64);
    let tail = g_tail_bound(p, horizon)?;
    Ok(CrudeInterval {
        estimate: est,
        lower: (est - Z95 * se).max(0.0),
        upper: (est + Z95 * se + tail).min(1.0),
        tail_bound: tail,
        hits,
        reps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub k: u32,
    pub g: f64,
    /// `3 n_k P(X > u_k) / g(k)`.
    pub a_surrogate: f64,
    /// `3 Σ_{j in block} P(X > t_j) / g(k)`, the bound actually needed.
    pub a_union: f64,
    /// `3 exp(-θ_k C_k + max(n_{k-1}ψ_k, n_k ψ_k)) / g(k)`.
    pub tilt_envelope: f64,
    /// `3 P(B_k) sup_T exp(-θ_k(m + μT) + Tψ_k) / g(k)` over the block, using
    /// `S_T > m + μT` at the crossing; the bound the runtime ratio obeys.
    pub tilt_sharp: f64,
    /// `3 (n_k - 1) P(X > u_k) / g(k)`.
    pub bc_union: f64,
}

impl RatioRow {
    pub fn pass(&self) -> bool {
        let ok = |x: f64| x <= 1.0 + 1e-12;
        ok(self.a_union) && ok(self.tilt_sharp) && ok(self.bc_union)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioAudit {
    pub rows: Vec<RatioRow>,
    pub pass: bool,
    pub first_failure: Option<u32>,
}

/// Evaluate the three analytic ratio bounds for `k = 2..=k_max`.
pub fn ratio_bound_audit<L: LatticeLaw>(p: &AlgorithmParams, law: &L, k_max: u32) -> Result<RatioAudit> {
    let record = RecordLaw::new(p.alpha, p.m, p.mu)?;
    let mut rows = Vec::new();
    for k in 2..=k_max {
        let b = Block::new(law, p.mu, p.m, p.delta, &record, k)?;
        let nk = block_start(k)? as f64;
        let t = TiltedLaw::new(law, p.mu, p.m, p.gamma, p.delta, k)?;
        let growth = (b.first as f64 * t.psi).max(nk * t.psi);
        let slope = t.psi - t.theta * p.mu;
        let sharp = -t.theta * p.m + (b.first as f64 * slope).max(b.last as f64 * slope);
        rows.push(RatioRow {
            k,
            g: b.g,
            a_surrogate: 3.0 * nk * b.tail_u / b.g,
            a_union: 3.0 * b.lambda_a / b.g,
            tilt_envelope: 3.0 * math::exp(-t.theta * t.c_k + growth) / b.g,
            tilt_sharp: 3.0 * b.p_b * math::exp(sharp) / b.g,
            bc_union: 3.0 * b.lambda_b / b.g,
        });
    }
    let first_failure = rows.iter().find(|r| !r.pass()).map(|r| r.k);
    Ok(RatioAudit { pass: first_failure.is_none(), first_failure, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increment::{FiniteLattice, ParetoLattice};
    use crate::params::BetaMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lindley_small_examples() {
        assert_eq!(lindley_from_steps(&[1.0, -2.0, 0.5]), [1.0, 0.0, 0.5]);
        assert_eq!(lindley_step(2.0, -2.0), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        assert!(lindley_chain(&FiniteLattice::zero(), 1.0, 100, &mut rng).iter().all(|w| *w == 0.0));
    }

    #[test]
    fn batch_means_basics() {
        let c = alloc::vec![2.5; 300];
        let r = batch_means_ci(&c, 10).unwrap();
        assert_eq!((r.lower, r.mean, r.upper), (2.5, 2.5, 2.5));
        assert!(matches!(batch_means_ci(&c, 11), Err(Error::TooFewBatches(27))));
    }

    #[test]
    fn batch_means_width_scales_with_batches() {
        // IID uniform data: width ∝ 1/√(#batches)
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let xs: Vec<f64> = (0..400_000).map(|_| rng.random::<f64>()).collect();
        let w = |n: usize| {
            let r = batch_means_ci(&xs[..n], 100).unwrap();
            assert!(r.lower <= r.mean && r.mean <= r.upper);
            r.upper - r.lower
        };
        let ratio = w(100_000) / w(400_000);
        assert!((ratio - 2.0).abs() < 0.25, "{ratio}");
    }

    #[test]
    fn ks_extremes() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_distance(&a, &a).unwrap().statistic, 0.0);
        assert_eq!(ks_distance(&a, &[4.0, 5.0]).unwrap().statistic, 1.0);
        assert!(ks_distance(&[], &a).is_err());
        let r = ks_distance(&[3.0, 1.0, 2.0], &[2.0, 3.0, 1.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_one_sample_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap().p_value > 0.001);
        assert!(ks_one_sample(&xs, |x| (x * x).clamp(0.0, 1.0)).unwrap().p_value < 1e-6);
    }

    fn light() -> (AlgorithmParams, ParetoLattice) {
        let p = AlgorithmParams::new(1.0, 16.0, 1.1, 4.0, 1.7, 0.38, BetaMode::FiniteVariance).unwrap();
        (p, ParetoLattice::lattice_pareto(7.0, 3.0, 0.1).unwrap())
    }

    #[test]
    fn crude_zero_law_and_monotone_in_m() {
        let (p, law) = light();
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let z = crude_tm_prob(&p, &FiniteLattice::zero(), 1000, &mut rng, 100).unwrap();
        assert_eq!(z.estimate, 0.0);
        let lo = crude_tm_prob(&p.with_m(1.0), &law, 2000, &mut ChaCha8Rng::seed_from_u64(54), 2000).unwrap();
        let hi = crude_tm_prob(&p, &law, 2000, &mut ChaCha8Rng::seed_from_u64(54), 2000).unwrap();
        assert!(lo.estimate >= hi.estimate);
        assert!(hi.tail_bound < 1e-4);
    }

    #[test]
    fn audit_light_row_passes_and_m1_heavy_fails() {
        let (p, law) = light();
        let a = ratio_bound_audit(&p, &law, 30).unwrap();
        assert!(a.pass, "{:?}", a.first_failure);
        let heavy = ParetoLattice::lattice_pareto(2.9, 8.0, 0.1).unwrap();
        let q = AlgorithmParams::new(1.0, 1.0, 1.1, 2.01, 0.74, 0.38, BetaMode::FiniteVariance).unwrap();
        let b = ratio_bound_audit(&q, &heavy, 30).unwrap();
        assert!(!b.pass);
        assert!(b.first_failure.unwrap() <= 4);
    }

    #[test]
    fn audit_zero_law_surrogates_vanish() {
        let (p, _) = light();
        let a = ratio_bound_audit(&p, &FiniteLattice::zero(), 20).unwrap();
        assert!(a.rows.iter().all(|r| r.a_surrogate == 0.0 && r.bc_union == 0.0 && r.a_union == 0.0));
    }
}
