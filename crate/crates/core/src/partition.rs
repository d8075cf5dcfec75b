//! Dyadic block structure, the record events `A_k`/`B_k`, and the
//! dominating block law `g`.
//!
//! Block `k ≥ 2` covers the times `n_{k-1} ..= n_k - 1` with `n_k = 2^{k-1}`.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::increment::{open_unit, LatticeLaw};
use crate::math;

/// Largest block index the sampler will ever build. `n_k` is still exact in
/// both `u64` and `f64` here.
pub const MAX_BLOCK: u32 = 62;

/// `n_k = 2^{k-1}` as a float; valid for every `k ≥ 1`.
#[inline]
pub fn block_start_f(k: u32) -> f64 {
    math::powf(2.0, k as f64 - 1.0)
}

/// `n_k` as an integer.
pub fn block_start(k: u32) -> Result<u64> {
    if k == 0 || k > MAX_BLOCK + 1 {
        return Err(Error::BlockIndex(k));
    }
    Ok(1u64 << (k - 1))
}

/// `Ḡ(t) = ∫_t^∞ (1+s)^{-α} ds = (1+t)^{1-α}/(α-1)`.
pub fn gbar(t: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter("alpha must exceed 1"));
    }
    Ok(math::powf(1.0 + t, 1.0 - alpha) / (alpha - 1.0))
}

/// The law of `K` on `{2, 3, …}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordLaw {
    pub alpha: f64,
    pub m: f64,
    pub mu: f64,
}

impl RecordLaw {
    pub fn new(alpha: f64, m: f64, mu: f64) -> Result<Self> {
        if !(alpha > 1.0) || !(mu > 0.0) || !(m >= 0.0) {
            return Err(Error::InvalidParameter("record law needs alpha > 1, mu > 0, m ≥ 0"));
        }
        Ok(Self { alpha, m, mu })
    }

    /// `ln(Ḡ(m+μn_k)/Ḡ(m+μn_1)) = P(K > k)` in log form.
    fn ln_survival(&self, k: u32) -> f64 {
        let base = 1.0 + self.m + self.mu;
        let extra = self.mu * (block_start_f(k) - 1.0);
        (1.0 - self.alpha) * math::ln_1p(extra / base)
    }

    /// `P(K > k)`.
    pub fn survival(&self, k: u32) -> f64 {
        if k < 2 {
            1.0
        } else {
            math::exp(self.ln_survival(k))
        }
    }

    /// `P(K ≤ k)`.
    pub fn cdf(&self, k: u32) -> f64 {
        if k < 2 {
            0.0
        } else {
            -math::exp_m1(self.ln_survival(k))
        }
    }

    /// `g(k)` computed as `P(K > k-1)(1 - ratio^{1-α})` to avoid cancellation.
    pub fn pmf(&self, k: u32) -> Result<f64> {
        if k < 2 {
            return Err(Error::BlockIndex(k));
        }
        let prev = 1.0 + self.m + self.mu * block_start_f(k - 1);
        let step = self.mu * (block_start_f(k) - block_start_f(k - 1));
        let r = math::ln_1p(step / prev);
        Ok(self.survival(k - 1) * -math::exp_m1((1.0 - self.alpha) * r))
    }

    /// Smallest `k ≥ 2` with `P(K > k) ≤ w` for `w ∈ (0, 1]`.
    pub fn quantile_survival(&self, w: f64) -> u32 {
        // (1+m+μ n_k) ≥ (1+m+μ) w^{-1/(α-1)}
        let base = 1.0 + self.m + self.mu;
        let target = base * math::powf(w, -1.0 / (self.alpha - 1.0));
        let need = (target - 1.0 - self.m) / self.mu;
        let mut k = if need <= 2.0 {
            2
        } else {
            let e = math::ceil(math::log2(need));
            if e >= 200.0 { 201 } else { e as u32 + 1 }
        };
        k = k.max(2);
        while k > 2 && self.survival(k - 1) <= w {
            k -= 1;
        }
        while self.survival(k) > w {
            k += 1;
        }
        k
    }

    /// Inverse-CDF draw of `K`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.quantile_survival(open_unit(rng))
    }
}

/// Threshold `(μj + m)^{1-δ}` for time `j`.
#[inline]
pub fn threshold(mu: f64, m: f64, delta: f64, j: f64) -> f64 {
    math::powf(mu * j + m, 1.0 - delta)
}

/// Membership of a path in `A_k` and `B_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventFlags {
    pub in_ak: bool,
    pub in_bk: bool,
}

/// Evaluate `A_k` and `B_k` on increments `X_1..X_{n_k-1}`; `increments[0]`
/// is `X_1`.
pub fn event_indicators(increments: &[f64], k: u32, mu: f64, m: f64, delta: f64) -> Result<EventFlags> {
    if !(2..=MAX_BLOCK).contains(&k) {
        return Err(Error::BlockIndex(k));
    }
    let nk = block_start(k)? as usize;
    let nprev = nk / 2;
    if increments.len() != nk - 1 {
        return Err(Error::Length { expected: nk - 1, got: increments.len() });
    }
    let u = threshold(mu, m, delta, nprev as f64);
    let in_bk = increments.iter().all(|x| *x <= u);
    let in_ak = (nprev..nk).any(|j| increments[j - 1] > threshold(mu, m, delta, j as f64));
    Ok(EventFlags { in_ak, in_bk })
}

/// A maximal run of block times whose thresholds fall between the same two
/// lattice atoms, so that `P(X_j > t_j)` is constant along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelGroup {
    pub first: u64,
    pub len: u64,
    /// Largest lattice index at or below the thresholds of the group.
    pub level: i64,
    /// `P(X > t_j)` for every `j` in the group.
    pub tail: f64,
}

/// Partition `first..=last` into level groups for thresholds `(μj+m)^{1-δ}`.
///
/// The count is at most the number of lattice atoms crossed by the thresholds
/// plus one, independent of the block length.
pub fn level_groups<L: LatticeLaw>(law: &L, mu: f64, m: f64, delta: f64, first: u64, last: u64) -> Vec<LevelGroup> {
    let t = |j: u64| threshold(mu, m, delta, j as f64);
    let mut out = Vec::new();
    let mut cur = first;
    while cur <= last {
        let level = law.index_at_most(t(cur));
        let next_value = law.value(level + 1);
        // first j > cur with t_j ≥ value(level + 1)
        let next = if level >= law.max_index() {
            last + 1
        } else {
            first_reaching(mu, m, delta, next_value, cur + 1, last + 1)
        };
        out.push(LevelGroup { first: cur, len: next - cur, level, tail: law.upper(level + 1) });
        cur = next;
    }
    out
}

/// Smallest `j ∈ [lo, cap]` with `t_j ≥ v`, or `cap` if none below it.
fn first_reaching(mu: f64, m: f64, delta: f64, v: f64, lo: u64, cap: u64) -> u64 {
    let t = |j: u64| threshold(mu, m, delta, j as f64);
    if lo >= cap {
        return cap;
    }
    if v <= 0.0 || t(lo) >= v {
        return lo;
    }
    let est = (math::powf(v, 1.0 / (1.0 - delta)) - m) / mu;
    let mut j = if !(est > lo as f64) {
        lo
    } else if est >= cap as f64 {
        cap
    } else {
        math::ceil(est) as u64
    };
    // t is monotone in j; walk to the exact boundary
    while j > lo && t(j - 1) >= v {
        j -= 1;
    }
    while j < cap && t(j) < v {
        j += 1;
    }
    j
}
