//! Increment laws for the random walk.
//!
//! Lattice laws expose their atoms through an integer index `I` with value
//! `I·span + offset`; the offset is chosen so that the mean is exactly zero.
//! The sampler works on indices internally so that threshold comparisons are
//! consistent bit for bit.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, KahanSum};

/// Largest index we ever materialise; keeps `i64 -> f64` conversions exact.
const INDEX_CAP: i64 = 1 << 52;

/// Conditioning region for a single increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Above(f64),
    AtMost(f64),
}

/// Uniform on `(0, 1]`.
#[inline]
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// `P(V > t) = (1+t)^{-α'}` for the raw Pareto variable, `t ≥ 0`.
pub fn pareto_tail(alpha_prime: f64, t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else {
        math::exp(-alpha_prime * math::ln_1p(t))
    }
}

/// A centered law supported on `{j·span + offset : min_index ≤ j ≤ max_index}`.
pub trait LatticeLaw: Send + Sync {
    fn span(&self) -> f64;
    fn offset(&self) -> f64;
    fn min_index(&self) -> i64;
    fn max_index(&self) -> i64 {
        INDEX_CAP
    }

    /// `P(I ≥ j)`.
    fn upper(&self, j: i64) -> f64;

    fn atom(&self, j: i64) -> f64 {
        (self.upper(j) - self.upper(j + 1)).max(0.0)
    }

    /// Inverse-CDF draw of `I` restricted to `lo..=hi`. The caller guarantees
    /// the range has positive mass.
    fn index_in<R: Rng + ?Sized>(&self, lo: i64, hi: i64, rng: &mut R) -> i64;

    fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.index_in(self.min_index(), self.max_index(), rng)
    }

    fn second_moment(&self) -> f64;

    /// Upper bound on `E[(X⁺)^p]`; `+∞` when the moment does not exist.
    fn positive_moment(&self, p: f64) -> f64;

    /// Supremum of the orders `p` with `E|X|^p < ∞`.
    fn moment_index(&self) -> f64;

    #[inline]
    fn value(&self, j: i64) -> f64 {
        j as f64 * self.span() + self.offset()
    }

    /// Largest index whose value is `≤ t`, or `min_index - 1` if none.
    fn index_at_most(&self, t: f64) -> i64 {
        let (lo, hi) = (self.min_index(), self.max_index());
        let guess = math::floor((t - self.offset()) / self.span());
        if guess.is_nan() || guess < lo as f64 - 1.0 {
            return lo - 1;
        }
        if guess >= hi as f64 {
            return hi;
        }
        let mut j = guess as i64;
        while j < hi && self.value(j + 1) <= t {
            j += 1;
        }
        while j >= lo && self.value(j) > t {
            j -= 1;
        }
        j
    }

    /// `P(X > t)`.
    fn tail(&self, t: f64) -> f64 {
        self.upper(self.index_at_most(t) + 1)
    }

    /// `E[(X⁻)^p]`, a finite sum since every lattice law here is bounded below.
    fn negative_moment(&self, p: f64) -> f64 {
        let top = self.index_at_most(0.0).min(self.max_index());
        let mut acc = KahanSum::new();
        for j in self.min_index()..=top {
            let v = -self.value(j);
            if v > 0.0 {
                acc.add(self.atom(j) * math::powf(v, p));
            }
        }
        acc.value()
    }

    /// `E[e^{θX} I(X ≤ cutoff)]` as an exact finite sum over the atoms.
    fn mgf_below(&self, theta: f64, cutoff: f64) -> f64 {
        let top = self.index_at_most(cutoff);
        let mut acc = KahanSum::new();
        for j in self.min_index()..=top {
            acc.add(self.atom(j) * math::exp(theta * self.value(j)));
        }
        acc.value()
    }
}

/// Operations shared by lattice and non-lattice laws.
pub trait IncrementLaw: Send + Sync {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;

    /// `P(X > t)`.
    fn tail_prob(&self, t: f64) -> f64;

    /// `P(X ≥ t)`.
    fn prob_at_least(&self, t: f64) -> f64;

    fn sample_conditional<R: Rng + ?Sized>(&self, region: Region, rng: &mut R) -> Result<f64>;

    /// Draw from the law restricted to `[lo, hi)`.
    fn sample_between<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> Result<f64>;

    fn lattice_span(&self) -> Option<f64>;

    /// `E[e^{θX} I(X ≤ cutoff)]`.
    fn truncated_mgf(&self, theta: f64, cutoff: f64) -> Result<f64>;

    fn second_moment(&self) -> f64;

    /// Upper bound on `E|X|^p`.
    fn abs_moment(&self, p: f64) -> f64;
}

impl<T: LatticeLaw> IncrementLaw for T {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.value(self.draw_index(rng))
    }

    fn tail_prob(&self, t: f64) -> f64 {
        self.tail(t)
    }

    fn prob_at_least(&self, t: f64) -> f64 {
        // smallest index with value ≥ t
        let j = self.index_at_most(t);
        if j >= self.min_index() && self.value(j) == t {
            self.upper(j)
        } else {
            self.upper(j + 1)
        }
    }

    fn sample_conditional<R: Rng + ?Sized>(&self, region: Region, rng: &mut R) -> Result<f64> {
        let (lo, hi) = match region {
            Region::Above(t) => (self.index_at_most(t) + 1, self.max_index()),
            Region::AtMost(t) => (self.min_index(), self.index_at_most(t)),
        };
        let lo = lo.max(self.min_index());
        if lo > hi || self.upper(lo) - self.upper(hi.saturating_add(1)) <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        Ok(self.value(self.index_in(lo, hi, rng)))
    }

    fn sample_between<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
        let mut a = self.index_at_most(lo);
        if a < self.min_index() || self.value(a) < lo {
            a += 1;
        }
        let mut b = self.index_at_most(hi);
        if b >= self.min_index() && self.value(b) >= hi {
            b -= 1;
        }
        let a = a.max(self.min_index());
        if a > b || self.upper(a) - self.upper(b + 1) <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        Ok(self.value(self.index_in(a, b, rng)))
    }

    fn lattice_span(&self) -> Option<f64> {
        Some(self.span())
    }

    fn truncated_mgf(&self, theta: f64, cutoff: f64) -> Result<f64> {
        if !cutoff.is_finite() || theta < 0.0 {
            return Err(Error::InvalidParameter("truncated_mgf needs θ ≥ 0 and a finite cutoff"));
        }
        Ok(self.mgf_below(theta, cutoff))
    }

    fn second_moment(&self) -> f64 {
        LatticeLaw::second_moment(self)
    }

    fn abs_moment(&self, p: f64) -> f64 {
        self.positive_moment(p) + self.negative_moment(p)
    }
}

/// Index law with Pareto tail `P(I ≥ i) = (κ(i+β))^{-α'}` above `i0` and an
/// atom at `i0` absorbing the rest.
///
/// With `i0 = 0`, `κ = h/c`, `β = c/h` this is `⌊(c/h)V⌋`, the lattice-Pareto
/// example. With `i0 = ⌊-b/h⌋`, `β = (c+b)/h` it is `⌊X/h⌋` for the
/// continuous centered Pareto `X = cV - b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoLattice {
    alpha_prime: f64,
    c: f64,
    h: f64,
    i0: i64,
    kappa: f64,
    beta: f64,
    /// `κβ - 1`, kept separately so that `ln(κ(i+β))` is a `ln_1p`.
    shift: f64,
    mean_index: f64,
    offset: f64,
    second: f64,
}

impl ParetoLattice {
    /// `X = h⌊(c/h)V⌋ - E(h⌊(c/h)V⌋)` with `P(V > t) = (1+t)^{-α'}`.
    pub fn lattice_pareto(alpha_prime: f64, c: f64, h: f64) -> Result<Self> {
        if !(alpha_prime > 1.0) {
            return Err(Error::InvalidParameter("alpha_prime must exceed 1 (finite mean)"));
        }
        if !(c > 0.0 && h > 0.0) {
            return Err(Error::InvalidParameter("c and h must be positive"));
        }
        Ok(Self::build(alpha_prime, c, h, 0, h / c, c / h, 0.0))
    }

    /// Floor law `⌊X/h⌋` of the continuous centered Pareto `X = cV - c/(α'-1)`,
    /// re-centered; this is the dominating lattice of the coupling.
    pub fn floored(alpha_prime: f64, c: f64, h: f64) -> Result<Self> {
        if !(alpha_prime > 1.0) {
            return Err(Error::InvalidParameter("alpha_prime must exceed 1 (finite mean)"));
        }
        if !(c > 0.0 && h > 0.0) {
            return Err(Error::InvalidParameter("c and h must be positive"));
        }
        let b = c / (alpha_prime - 1.0);
        let i0 = math::floor(-b / h) as i64;
        Ok(Self::build(alpha_prime, c, h, i0, h / c, (c + b) / h, b / c))
    }

    fn build(alpha_prime: f64, c: f64, h: f64, i0: i64, kappa: f64, beta: f64, shift: f64) -> Self {
        let q = i0 as f64 + 1.0 + beta;
        let scale = math::powf(kappa, -alpha_prime);
        let (z1, _) = math::hurwitz_zeta(alpha_prime, q);
        let mean_index = i0 as f64 + scale * z1;
        let second = if alpha_prime > 2.0 {
            let (z0, _) = math::hurwitz_zeta(alpha_prime - 1.0, q);
            let i0f = i0 as f64;
            let e2 = i0f * i0f + scale * (2.0 * z0 - (2.0 * beta + 1.0) * z1);
            h * h * (e2 - mean_index * mean_index)
        } else {
            f64::INFINITY
        };
        Self {
            alpha_prime,
            c,
            h,
            i0,
            kappa,
            beta,
            shift,
            mean_index,
            offset: -h * mean_index,
            second,
        }
    }

    pub fn alpha_prime(&self) -> f64 {
        self.alpha_prime
    }

    pub fn scale(&self) -> f64 {
        self.c
    }

    /// The centering constant `E(h⌊·⌋)` subtracted from the floored variable.
    pub fn centering(&self) -> f64 {
        self.h * self.mean_index
    }

    /// Traffic intensity `centering/(centering + μ)` for the lattice-Pareto example.
    pub fn traffic_intensity(&self, mu: f64) -> f64 {
        let c0 = self.centering();
        c0 / (c0 + mu)
    }

    #[inline]
    fn log_base(&self, i: i64) -> f64 {
        // ln(κ(i+β)) = ln(1 + shift + κ i)
        math::ln_1p(self.shift + self.kappa * i as f64)
    }
}

impl LatticeLaw for ParetoLattice {
    fn span(&self) -> f64 {
        self.h
    }

    fn offset(&self) -> f64 {
        self.offset
    }

    fn min_index(&self) -> i64 {
        self.i0
    }

    fn upper(&self, j: i64) -> f64 {
        if j <= self.i0 {
            1.0
        } else if j > INDEX_CAP {
            0.0
        } else {
            math::exp(-self.alpha_prime * self.log_base(j))
        }
    }

    fn atom(&self, j: i64) -> f64 {
        if j < self.i0 || j > INDEX_CAP {
            0.0
        } else if j == self.i0 {
            1.0 - self.upper(j + 1)
        } else {
            // upper(j) (1 - (1 + 1/(j+β))^{-α'})
            let r = math::ln_1p(1.0 / (j as f64 + self.beta));
            -self.upper(j) * math::exp_m1(-self.alpha_prime * r)
        }
    }

    fn index_in<R: Rng + ?Sized>(&self, lo: i64, hi: i64, rng: &mut R) -> i64 {
        let lo = lo.max(self.i0);
        let hi = hi.min(INDEX_CAP);
        let top = self.upper(lo);
        let bottom = self.upper(hi.saturating_add(1));
        let u = rng.random::<f64>();
        let s = top - u * (top - bottom);
        self.quantile(s).clamp(lo, hi)
    }

    fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.quantile(open_unit(rng)).max(self.i0)
    }

    fn second_moment(&self) -> f64 {
        self.second
    }

    fn positive_moment(&self, p: f64) -> f64 {
        if p >= self.alpha_prime {
            return f64::INFINITY;
        }
        let start = self.index_at_most(0.0) + 1;
        let mut acc = KahanSum::new();
        let mut j = start.max(self.i0);
        let mut n = (j + 4096).max(64);
        loop {
            while j <= n {
                acc.add(self.atom(j) * math::powf(self.value(j), p));
                j += 1;
            }
            // Σ_{i>n} value(i)^p atom(i) ≤ h^p [ (n+1+β)^p upper(n+1)
            //   + p κ^{-α'} (n+β)^{p-α'}/(α'-p) ]
            let y0 = (n + 1) as f64 + self.beta;
            let y1 = n as f64 + self.beta;
            let bound = math::powf(self.h, p)
                * (math::powf(y0, p) * self.upper(n + 1)
                    + p * math::powf(self.kappa, -self.alpha_prime) * math::powf(y1, p - self.alpha_prime)
                        / (self.alpha_prime - p));
            let partial = acc.value();
            if bound <= 1e-13 * partial.max(1e-300) || n >= (1 << 18) {
                return partial + bound;
            }
            n *= 2;
        }
    }

    fn moment_index(&self) -> f64 {
        self.alpha_prime
    }
}

impl ParetoLattice {
    /// Largest `i` with `upper(i) ≥ s`, unclamped below.
    #[inline]
    fn quantile(&self, s: f64) -> i64 {
        let x = math::powf(s, -1.0 / self.alpha_prime) / self.kappa - self.beta;
        if !(x < INDEX_CAP as f64) {
            return INDEX_CAP;
        }
        math::floor(x) as i64
    }
}

/// `E(h⌊(c/h)V⌋)` for the raw Pareto variable.
pub fn mean_floor(alpha_prime: f64, c: f64, h: f64) -> Result<f64> {
    Ok(ParetoLattice::lattice_pareto(alpha_prime, c, h)?.centering())
}

/// A finitely supported centered lattice law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteLattice {
    span: f64,
    min_index: i64,
    probs: Vec<f64>,
    /// `upper[i] = P(I ≥ min_index + i)`
    upper: Vec<f64>,
    offset: f64,
}

impl FiniteLattice {
    /// Atoms at `(min_index + i)·span + offset` with probabilities `probs[i]`;
    /// the offset is chosen to center the law.
    pub fn new(span: f64, min_index: i64, probs: &[f64]) -> Result<Self> {
        if !(span > 0.0) || probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParameter("finite lattice needs span > 0 and non-negative probabilities"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("probabilities must sum to 1"));
        }
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let mut upper = Vec::with_capacity(probs.len() + 1);
        let mut acc = 0.0;
        upper.push(0.0);
        for p in probs.iter().rev() {
            acc += p;
            upper.push(acc);
        }
        upper.reverse();
        upper[0] = 1.0;
        let mean_index: f64 = probs
            .iter()
            .enumerate()
            .map(|(i, p)| (min_index + i as i64) as f64 * p)
            .sum();
        Ok(Self { span, min_index, probs, upper, offset: -span * mean_index })
    }

    /// The degenerate law `X ≡ 0`.
    pub fn zero() -> Self {
        Self::new(1.0, 0, &[1.0]).expect("valid degenerate law")
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (self.value(self.min_index + i as i64), *p))
    }
}

impl LatticeLaw for FiniteLattice {
    fn span(&self) -> f64 {
        self.span
    }

    fn offset(&self) -> f64 {
        self.offset
    }

    fn min_index(&self) -> i64 {
        self.min_index
    }

    fn max_index(&self) -> i64 {
        self.min_index + self.probs.len() as i64 - 1
    }

    fn upper(&self, j: i64) -> f64 {
        if j <= self.min_index {
            1.0
        } else if j > self.max_index() {
            0.0
        } else {
            self.upper[(j - self.min_index) as usize]
        }
    }

    fn atom(&self, j: i64) -> f64 {
        if j < self.min_index || j > self.max_index() {
            0.0
        } else {
            self.probs[(j - self.min_index) as usize]
        }
    }

    fn index_in<R: Rng + ?Sized>(&self, lo: i64, hi: i64, rng: &mut R) -> i64 {
        let lo = lo.max(self.min_index);
        let hi = hi.min(self.max_index());
        let mass: f64 = (lo..=hi).map(|j| self.atom(j)).sum();
        let mut u = rng.random::<f64>() * mass;
        let mut last = lo;
        for j in lo..=hi {
            let p = self.atom(j);
            if p > 0.0 {
                last = j;
                if u < p {
                    return j;
                }
                u -= p;
            }
        }
        last
    }

    fn second_moment(&self) -> f64 {
        self.atoms().map(|(v, p)| v * v * p).sum()
    }

    fn positive_moment(&self, p: f64) -> f64 {
        self.atoms().filter(|(v, _)| *v > 0.0).map(|(v, q)| math::powf(v, p) * q).sum()
    }

    fn moment_index(&self) -> f64 {
        f64::INFINITY
    }
}

/// Continuous centered Pareto `X = cV - c/(α'-1)`. Not lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteredPareto {
    pub alpha_prime: f64,
    pub c: f64,
}

impl CenteredPareto {
    pub fn new(alpha_prime: f64, c: f64) -> Result<Self> {
        if !(alpha_prime > 1.0 && c > 0.0) {
            return Err(Error::InvalidParameter("centered Pareto needs alpha_prime > 1, c > 0"));
        }
        Ok(Self { alpha_prime, c })
    }

    pub fn lower_end(&self) -> f64 {
        -self.c / (self.alpha_prime - 1.0)
    }

    fn survival(&self, t: f64) -> f64 {
        pareto_tail(self.alpha_prime, (t - self.lower_end()) / self.c)
    }

    fn quantile_of_survival(&self, s: f64) -> f64 {
        self.c * (math::powf(s, -1.0 / self.alpha_prime) - 1.0) + self.lower_end()
    }
}

impl IncrementLaw for CenteredPareto {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile_of_survival(open_unit(rng))
    }

    fn tail_prob(&self, t: f64) -> f64 {
        self.survival(t)
    }

    fn prob_at_least(&self, t: f64) -> f64 {
        self.survival(t)
    }

    fn sample_conditional<R: Rng + ?Sized>(&self, region: Region, rng: &mut R) -> Result<f64> {
        match region {
            Region::Above(t) => {
                let top = self.survival(t);
                if top <= 0.0 {
                    return Err(Error::ZeroProbability);
                }
                Ok(self.quantile_of_survival(top * open_unit(rng)).max(t.next_up()))
            }
            Region::AtMost(t) => self.sample_between(f64::NEG_INFINITY, t.next_up(), rng),
        }
    }

    fn sample_between<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
        let a = lo.max(self.lower_end());
        let top = self.survival(a);
        let bottom = self.survival(hi);
        if !(top > bottom) {
            return Err(Error::ZeroProbability);
        }
        let s = top - rng.random::<f64>() * (top - bottom);
        Ok(self.quantile_of_survival(s).clamp(a, hi.next_down()))
    }

    fn lattice_span(&self) -> Option<f64> {
        None
    }

    fn truncated_mgf(&self, _theta: f64, _cutoff: f64) -> Result<f64> {
        Err(Error::NonLattice)
    }

    fn second_moment(&self) -> f64 {
        let a = self.alpha_prime;
        if a <= 2.0 {
            return f64::INFINITY;
        }
        // Var(cV) with E V² = 2/((a-1)(a-2))
        let ev = 1.0 / (a - 1.0);
        self.c * self.c * (2.0 / ((a - 1.0) * (a - 2.0)) - ev * ev)
    }

    fn abs_moment(&self, p: f64) -> f64 {
        if p >= self.alpha_prime {
            return f64::INFINITY;
        }
        // |X| ≤ cV + b, Minkowski with E V^p ≤ 1 + p/(α'-p) (split at V = 1)
        let b = -self.lower_end();
        let ev = 1.0 + p / (self.alpha_prime - p);
        let norm = self.c * math::powf(ev, 1.0 / p) + b;
        math::powf(norm, p)
    }
}
