//! Proposal laws for one block `k` of the record-breaker partition:
//! the path given `A_k`, the truncated exponentially tilted path, and the
//! path given `B_k^c`.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::increment::LatticeLaw;
use crate::math;
use crate::partition::{block_start, level_groups, threshold, LevelGroup, RecordLaw, MAX_BLOCK};

/// Function-evaluation counter with a watchdog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tally {
    pub evals: u64,
    pub limit: u64,
}

impl Tally {
    pub const DEFAULT_LIMIT: u64 = 1_000_000_000;

    pub fn new(limit: u64) -> Self {
        Self { evals: 0, limit }
    }

    #[inline]
    pub fn charge(&mut self, n: u64) -> Result<()> {
        self.evals += n;
        if self.evals > self.limit {
            Err(Error::Watchdog(self.evals))
        } else {
            Ok(())
        }
    }

    /// Fail early when `n` more evaluations would exceed the limit.
    pub fn reserve(&self, n: u64) -> Result<()> {
        if self.evals.saturating_add(n) > self.limit {
            Err(Error::Watchdog(self.evals.saturating_add(n)))
        } else {
            Ok(())
        }
    }
}

impl Default for Tally {
    fn default() -> Self {
        Self::new(Self::DEFAULT_LIMIT)
    }
}

/// The truncated tilt used on `B_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedLaw {
    pub k: u32,
    pub theta: f64,
    pub c_k: f64,
    /// Truncation point `C_k^{1-δ}`.
    pub cutoff: f64,
    /// Largest lattice index at or below the cutoff.
    pub cutoff_index: i64,
    /// `P(X ≤ cutoff)`.
    pub p_below: f64,
    pub psi: f64,
    pub gamma: f64,
}

impl TiltedLaw {
    pub fn new<L: LatticeLaw>(law: &L, mu: f64, level: f64, gamma: f64, delta: f64, k: u32) -> Result<Self> {
        if !(2..=MAX_BLOCK).contains(&k) {
            return Err(Error::BlockIndex(k));
        }
        let c_k = block_start(k - 1)? as f64 * mu + level;
        let cutoff = math::powf(c_k, 1.0 - delta);
        let theta = gamma / cutoff;
        let cutoff_index = law.index_at_most(cutoff);
        let p_below = 1.0 - law.upper(cutoff_index + 1);
        if !(p_below > 0.0) {
            return Err(Error::ZeroProbability);
        }
        let psi = math::ln(law.mgf_below(theta, cutoff) / p_below);
        Ok(Self { k, theta, c_k, cutoff, cutoff_index, p_below, psi, gamma })
    }

    /// Number of atoms summed to evaluate `ψ_k`.
    pub fn atoms_summed<L: LatticeLaw>(&self, law: &L) -> u64 {
        (self.cutoff_index - law.min_index() + 1).max(0) as u64
    }
}

/// One increment from the tilted truncated law by acceptance-rejection from
/// the nominal law with acceptance `exp(θX - γ) I(X ≤ cutoff)`.
/// Returns the lattice index and the number of proposals used.
pub fn sample_pk1_increment<L: LatticeLaw, R: Rng + ?Sized>(tilt: &TiltedLaw, law: &L, rng: &mut R) -> (i64, u32) {
    let mut tries = 0u32;
    loop {
        tries += 1;
        let i = law.draw_index(rng);
        let u = rng.random::<f64>();
        if i <= tilt.cutoff_index && u < math::exp(tilt.theta * law.value(i) - tilt.gamma) {
            return (i, tries);
        }
    }
}

/// `exp(-θ_k S_T + T ψ_k)` for the raw (undrifted) sum `S_T` at time `T`.
pub fn pk1_path_likelihood(tilt: &TiltedLaw, raw_sum: f64, t: u64) -> f64 {
    math::exp(-tilt.theta * raw_sum + t as f64 * tilt.psi)
}

/// Everything about block `k` at milestone height `level` that the three
/// branches need.
#[derive(Debug, Clone)]
pub struct Block {
    pub k: u32,
    /// `n_{k-1}`.
    pub first: u64,
    /// `n_k - 1`.
    pub last: u64,
    pub g: f64,
    /// `u_k = (μ n_{k-1} + level)^{1-δ}`.
    pub u: f64,
    pub u_index: i64,
    pub tail_u: f64,
    /// `P(B_k)`.
    pub p_b: f64,
    /// `P(B_k^c)`.
    pub p_bc: f64,
    /// `Σ_{j ≤ n_k-1} P(X_j > u_k)`.
    pub lambda_b: f64,
    pub groups: Vec<LevelGroup>,
    /// Prefix sums of `len · tail` over the groups.
    pub cumulative: Vec<f64>,
    /// `Σ_{j in block} P(X_j > t_j)`.
    pub lambda_a: f64,
    /// `P(A_k)`.
    pub p_a: f64,
}

impl Block {
    pub fn new<L: LatticeLaw>(law: &L, mu: f64, level: f64, delta: f64, record: &RecordLaw, k: u32) -> Result<Self> {
        if !(2..=MAX_BLOCK).contains(&k) {
            return Err(Error::BlockIndex(k));
        }
        let first = block_start(k - 1)?;
        let last = block_start(k)? - 1;
        let g = record.pmf(k)?;
        let u = threshold(mu, level, delta, first as f64);
        let u_index = law.index_at_most(u);
        let tail_u = law.upper(u_index + 1);
        let ln_b = last as f64 * math::ln_1p(-tail_u);
        let groups = level_groups(law, mu, level, delta, first, last);
        let mut cumulative = Vec::with_capacity(groups.len());
        let mut acc = 0.0;
        let mut ln_a = 0.0;
        for gr in &groups {
            acc += gr.len as f64 * gr.tail;
            ln_a += gr.len as f64 * math::ln_1p(-gr.tail);
            cumulative.push(acc);
        }
        Ok(Self {
            k,
            first,
            last,
            g,
            u,
            u_index,
            tail_u,
            p_b: math::exp(ln_b),
            p_bc: -math::exp_m1(ln_b),
            lambda_b: last as f64 * tail_u,
            groups,
            cumulative,
            lambda_a: acc,
            p_a: -math::exp_m1(ln_a),
        })
    }
}

/// Which increments a proposal records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Store {
    Nothing,
    /// Positions and increments up to the first crossing of the level.
    UntilCrossing,
    /// Every increment `X_1..X_{n_k-1}`.
    All,
}

/// Running state of a drifted walk started at 0.
#[derive(Debug, Clone)]
pub struct Track {
    pub mu: f64,
    pub level: f64,
    pub pos: f64,
    pub raw: f64,
    pub time: u64,
    pub crossing: Option<u64>,
    pub raw_at_crossing: f64,
    store: Store,
    pub positions: Vec<f64>,
    pub increments: Vec<f64>,
}

impl Track {
    pub fn new(mu: f64, level: f64, store: Store) -> Self {
        Self {
            mu,
            level,
            pos: 0.0,
            raw: 0.0,
            time: 0,
            crossing: None,
            raw_at_crossing: 0.0,
            store,
            positions: Vec::new(),
            increments: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.time += 1;
        self.raw += x;
        self.pos += x - self.mu;
        let keep = match self.store {
            Store::Nothing => false,
            Store::UntilCrossing => self.crossing.is_none(),
            Store::All => true,
        };
        if keep {
            self.positions.push(self.pos);
            self.increments.push(x);
        }
        if self.crossing.is_none() && self.pos > self.level {
            self.crossing = Some(self.time);
            self.raw_at_crossing = self.raw;
        }
    }

    pub fn done_storing(&self) -> bool {
        self.store == Store::UntilCrossing && self.crossing.is_some()
    }
}

/// The record set a conditioned proposal forces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordSet {
    /// `A_k`: some `X_j > (μj+m)^{1-δ}` with `j` in the block.
    InBlock,
    /// `B_k^c`: some `X_j > u_k` with `j ≤ n_k - 1`.
    Uniform,
}

/// One proposal from `Q = ½P + ½P̄` together with its acceptance decision.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub accepted: bool,
    pub track: Track,
    /// Number of record indicators that fired.
    pub records: u64,
    /// Whether `A_k` occurred.
    pub in_a: bool,
}

/// Draw one proposal for `P(· | A_k)` or `P(· | B_k^c)` and decide acceptance
/// with probability `(1+Λ)/(records+Λ)` on the event.
#[allow(clippy::too_many_arguments)]
pub fn propose<L: LatticeLaw, R: Rng + ?Sized>(
    block: &Block,
    set: RecordSet,
    law: &L,
    mu: f64,
    level: f64,
    store: Store,
    rng: &mut R,
    tally: &mut Tally,
) -> Result<Proposal> {
    let lambda = match set {
        RecordSet::InBlock => block.lambda_a,
        RecordSet::Uniform => block.lambda_b,
    };
    tally.reserve(3 * block.last)?;
    let use_forced = rng.random::<bool>();
    let forced = if use_forced {
        Some(match set {
            RecordSet::InBlock => {
                let target = rng.random::<f64>() * lambda;
                let gi = block.cumulative.partition_point(|c| *c <= target).min(block.groups.len() - 1);
                let g = &block.groups[gi];
                g.first + rng.random_range(0..g.len)
            }
            RecordSet::Uniform => rng.random_range(1..=block.last),
        })
    } else {
        None
    };
    tally.charge(4)?;
    let mut track = Track::new(mu, level, store);
    let mut records = 0u64;
    let mut in_a = false;
    let mut gi = 0usize;
    let mut group_end = block.groups.first().map_or(0, |g| g.first + g.len);
    for j in 1..=block.last {
        let level_j = if j >= block.first {
            while j >= group_end {
                gi += 1;
                group_end = block.groups[gi].first + block.groups[gi].len;
            }
            Some(block.groups[gi].level)
        } else {
            None
        };
        let threshold_index = match set {
            RecordSet::InBlock => level_j,
            RecordSet::Uniform => Some(block.u_index),
        };
        let i = if Some(j) == forced {
            let lo = threshold_index.expect("forced time has a threshold") + 1;
            law.index_in(lo, law.max_index(), rng)
        } else {
            law.draw_index(rng)
        };
        if let Some(t) = threshold_index {
            if i > t {
                records += 1;
            }
        }
        if let Some(lj) = level_j {
            if i > lj {
                in_a = true;
            }
        }
        track.push(law.value(i));
        if track.done_storing() {
            // replay only needs the path up to the crossing
            return Ok(Proposal { accepted: true, track, records, in_a });
        }
    }
    tally.charge(3 * block.last)?;
    let accepted = if records == 0 {
        false
    } else {
        let q = (1.0 + lambda) / (records as f64 + lambda);
        rng.random::<f64>() < q
    };
    tally.charge(2)?;
    Ok(Proposal { accepted, track, records, in_a })
}

/// A path from `P(· | A_k)`: the increments `X_1..X_{n_k-1}` and the number
/// of proposals used.
pub fn sample_pk0_path<L: LatticeLaw, R: Rng + ?Sized>(
    block: &Block,
    law: &L,
    mu: f64,
    level: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, u32)> {
    conditioned_path(block, RecordSet::InBlock, law, mu, level, rng)
}

/// A path from `P(· | B_k^c)`.
pub fn sample_pk2_path<L: LatticeLaw, R: Rng + ?Sized>(
    block: &Block,
    law: &L,
    mu: f64,
    level: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, u32)> {
    conditioned_path(block, RecordSet::Uniform, law, mu, level, rng)
}

fn conditioned_path<L: LatticeLaw, R: Rng + ?Sized>(
    block: &Block,
    set: RecordSet,
    law: &L,
    mu: f64,
    level: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, u32)> {
    let p = match set {
        RecordSet::InBlock => block.p_a,
        RecordSet::Uniform => block.p_bc,
    };
    if !(p > 0.0) {
        return Err(Error::ZeroProbability);
    }
    let mut tally = Tally::new(u64::MAX);
    let mut tries = 0;
    loop {
        tries += 1;
        let prop = propose(block, set, law, mu, level, Store::All, rng, &mut tally)?;
        if prop.accepted {
            return Ok((prop.track.increments, tries));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increment::{FiniteLattice, ParetoLattice};
    use crate::partition::event_indicators;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_tilt_law() {
        let law = FiniteLattice::new(2.0, 0, &[0.5, 0.5]).unwrap();
        // level chosen so the cutoff exceeds 1 and θ·cutoff = γ with θ = 0.3
        let gamma = 0.3;
        let tilt = TiltedLaw { k: 2, theta: 0.3, c_k: 1.0, cutoff: 1.0, cutoff_index: 1, p_below: 1.0, psi: 0.0, gamma };
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 400_000;
        let ups = (0..n).filter(|_| law.value(sample_pk1_increment(&tilt, &law, &mut rng).0) > 0.0).count();
        let expect = math::exp(0.3) / (math::exp(0.3) + math::exp(-0.3));
        assert!((expect - 0.6457).abs() < 1e-4);
        let f = ups as f64 / n as f64;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((f - expect).abs() < 4.0 * se, "{f} vs {expect}");
    }

    #[test]
    fn tilted_marginal_matches_enumeration_on_five_atoms() {
        let law = FiniteLattice::new(1.0, 0, &[0.3, 0.25, 0.2, 0.15, 0.1]).unwrap();
        let tilt = TiltedLaw::new(&law, 1.0, 3.0, 0.9, 0.3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let n = 1_000_000;
        let mut counts = [0f64; 5];
        for _ in 0..n {
            let (i, _) = sample_pk1_increment(&tilt, &law, &mut rng);
            counts[i as usize] += 1.0;
        }
        let mut weights = [0f64; 5];
        for (i, w) in weights.iter_mut().enumerate() {
            let v = law.value(i as i64);
            if v <= tilt.cutoff {
                *w = law.atom(i as i64) * math::exp(tilt.theta * v);
            }
        }
        let z: f64 = weights.iter().sum();
        assert!((math::ln(z / tilt.p_below) - tilt.psi).abs() < 1e-14);
        let tv: f64 = (0..5).map(|i| (counts[i] / n as f64 - weights[i] / z).abs()).sum::<f64>() / 2.0;
        assert!(tv < 1e-3, "tv = {tv}");
    }

    #[test]
    fn tilt_invariants_for_light_row() {
        let law = ParetoLattice::lattice_pareto(7.0, 3.0, 0.1).unwrap();
        let a = crate::params::drift_constant_finite(1.7, LatticeLaw::second_moment(&law));
        let mut last = f64::INFINITY;
        for k in 2..30 {
            let t = TiltedLaw::new(&law, 1.0, 16.0, 1.7, 0.38, k).unwrap();
            assert!(t.theta > 0.0 && t.theta < last);
            last = t.theta;
            assert!(t.psi <= a / t.c_k + 1e-15, "k={k}");
        }
    }

    #[test]
    fn likelihood_degenerate_theta() {
        let tilt = TiltedLaw { k: 2, theta: 0.0, c_k: 1.0, cutoff: 1.0, cutoff_index: 0, p_below: 0.9, psi: math::ln(0.9), gamma: 0.0 };
        let v = pk1_path_likelihood(&tilt, 5.0, 3);
        assert!(v <= 1.0 && (v - 0.729).abs() < 1e-12);
    }

    fn toy_block(law: &FiniteLattice, level: f64) -> Block {
        let record = RecordLaw::new(3.0, level, 0.5).unwrap();
        Block::new(law, 0.5, level, 0.5, &record, 2).unwrap()
    }

    /// Exhaustive conditional law on the single increment of block 2 versus
    /// the proposal mechanism, for both record sets.
    #[test]
    fn conditioned_block_two_matches_enumeration() {
        let law = FiniteLattice::new(1.0, 0, &[0.4, 0.3, 0.2, 0.1]).unwrap();
        let block = toy_block(&law, 1.0);
        let t = threshold(0.5, 1.0, 0.5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 1_000_000;
        for set in [RecordSet::InBlock, RecordSet::Uniform] {
            let mut counts = [0f64; 4];
            let mut tries = 0u64;
            for _ in 0..n {
                let (xs, k) = conditioned_path(&block, set, &law, 0.5, 1.0, &mut rng).unwrap();
                tries += k as u64;
                counts[law.index_at_most(xs[0]) as usize] += 1.0;
            }
            let mass: f64 = (0..4).filter(|i| law.value(*i) > t).map(|i| law.atom(i)).sum();
            let tv: f64 = (0..4)
                .map(|i| {
                    let p = if law.value(i) > t { law.atom(i) / mass } else { 0.0 };
                    (counts[i as usize] / n as f64 - p).abs()
                })
                .sum::<f64>()
                / 2.0;
            assert!(tv < 0.01, "tv = {tv}");
            assert!((tries as f64 / n as f64) <= 6.0);
        }
    }

    /// With three increments (block 3 plus X_1) the two record sets and the
    /// remaining case partition the space, and `A_k ⊆ B_k^c` holds.
    #[test]
    fn three_increment_enumeration_partitions_cases() {
        let law = FiniteLattice::new(1.0, 0, &[0.4, 0.3, 0.2, 0.1]).unwrap();
        let (mu, m, d) = (0.5, 1.0, 0.5);
        let mut total = [0f64; 3];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let xs = [law.value(a), law.value(b), law.value(c)];
                    let p = law.atom(a) * law.atom(b) * law.atom(c);
                    let f = event_indicators(&xs, 3, mu, m, d).unwrap();
                    assert!(!(f.in_ak && f.in_bk));
                    let case = if f.in_ak { 0 } else if f.in_bk { 1 } else { 2 };
                    total[case] += p;
                }
            }
        }
        assert!((total.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let record = RecordLaw::new(3.0, m, mu).unwrap();
        let block = Block::new(&law, mu, m, d, &record, 3).unwrap();
        assert!((block.p_a - total[0]).abs() < 1e-12);
        assert!((block.p_b - total[1]).abs() < 1e-12);
    }

    #[test]
    fn accepted_paths_satisfy_their_events() {
        let law = ParetoLattice::lattice_pareto(7.0, 3.0, 0.1).unwrap();
        let record = RecordLaw::new(4.0, 16.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for k in 2..9 {
            let block = Block::new(&law, 1.0, 16.0, 0.38, &record, k).unwrap();
            for _ in 0..200 {
                let (xs, _) = sample_pk0_path(&block, &law, 1.0, 16.0, &mut rng).unwrap();
                assert!(event_indicators(&xs, k, 1.0, 16.0, 0.38).unwrap().in_ak);
                let (ys, _) = sample_pk2_path(&block, &law, 1.0, 16.0, &mut rng).unwrap();
                assert!(!event_indicators(&ys, k, 1.0, 16.0, 0.38).unwrap().in_bk);
            }
        }
    }

    #[test]
    fn block_probabilities_against_direct_products() {
        let law = ParetoLattice::lattice_pareto(2.9, 0.85, 0.1).unwrap();
        let record = RecordLaw::new(2.01, 35.0, 1.0).unwrap();
        for k in 2..16 {
            let b = Block::new(&law, 1.0, 35.0, 0.38, &record, k).unwrap();
            let mut ln_a = 0.0;
            let mut lam = 0.0;
            for j in b.first..=b.last {
                let p = law.tail(threshold(1.0, 35.0, 0.38, j as f64));
                ln_a += math::ln_1p(-p);
                lam += p;
            }
            assert!((b.p_a - (-math::exp_m1(ln_a))).abs() <= 1e-12 * b.p_a.max(1e-300) + 1e-18);
            assert!((b.lambda_a - lam).abs() <= 1e-10 * lam);
            let pb = math::powf(1.0 - law.tail(b.u), b.last as f64);
            assert!((b.p_b - pb).abs() < 1e-12);
        }
    }

    #[test]
    fn watchdog_trips() {
        let mut t = Tally::new(10);
        assert!(t.charge(5).is_ok());
        assert!(matches!(t.charge(6), Err(Error::Watchdog(11))));
        assert!(Tally::new(10).reserve(11).is_err());
    }
}
