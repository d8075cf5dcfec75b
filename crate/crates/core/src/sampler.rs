//! The exact samplers: the Bernoulli for `{T_m < ∞}` with its path, the
//! stationary maximum with its path, the conditioned downward patch, and the
//! backward sequence `(M_0, …, M_n)`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::increment::LatticeLaw;
use crate::params::AlgorithmParams;
use crate::partition::{block_start, RecordLaw, MAX_BLOCK};
use crate::proposals::{
    pk1_path_likelihood, propose, sample_pk1_increment, Block, RecordSet, Store, Tally, TiltedLaw, Track,
};

pub const BRANCH_A: u8 = 0;
pub const BRANCH_TILT: u8 = 1;
pub const BRANCH_BC: u8 = 2;

/// Positions `S_1, S_2, …` of a drifted walk relative to its start, and the
/// raw increments producing them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WalkPath {
    pub positions: Vec<f64>,
    pub increments: Vec<f64>,
}

impl WalkPath {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, position: f64, increment: f64) {
        self.positions.push(position);
        self.increments.push(increment);
    }

    /// `max(0, S_1, S_2, …)`.
    pub fn running_max(&self) -> f64 {
        self.positions.iter().fold(0.0f64, |a, b| a.max(*b))
    }

    fn from_track(t: Track) -> Self {
        Self { positions: t.positions, increments: t.increments }
    }
}

/// Result of one Bernoulli draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchOutcome {
    pub j: bool,
    pub k: u32,
    pub branch: u8,
    /// Path up to the crossing when `j` holds and the path was requested.
    pub path: WalkPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchKind {
    /// Nominal walk down to the first time below `start - Lm`.
    Down,
    /// Excursion returned by the Bernoulli sampler, ending above `start + m`.
    Up,
}

/// A patch covering path indices `start..end`; index 0 is the segment origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Patch {
    pub kind: PatchKind,
    pub start: usize,
    pub end: usize,
}

/// Output of the stationary-maximum sampler.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segment {
    pub path: WalkPath,
    pub patches: Vec<Patch>,
}

impl Segment {
    pub fn m0(&self) -> f64 {
        self.path.running_max()
    }
}

/// Per-branch counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct BranchStats {
    pub calls: [u64; 3],
    pub hits: [u64; 3],
    pub proposals: [u64; 3],
}

pub struct Sampler<'a, L: LatticeLaw> {
    law: &'a L,
    params: AlgorithmParams,
    record: RecordLaw,
    blocks: Vec<Option<Arc<Block>>>,
    tilts: Vec<Option<TiltedLaw>>,
    pub stats: BranchStats,
}

impl<L: LatticeLaw> Clone for Sampler<'_, L> {
    fn clone(&self) -> Self {
        Self {
            law: self.law,
            params: self.params,
            record: self.record,
            blocks: self.blocks.clone(),
            tilts: self.tilts.clone(),
            stats: self.stats,
        }
    }
}

impl<'a, L: LatticeLaw> Sampler<'a, L> {
    pub fn new(law: &'a L, params: AlgorithmParams) -> Result<Self> {
        params.validate()?;
        let record = RecordLaw::new(params.alpha, params.m, params.mu)?;
        let slots = MAX_BLOCK as usize + 1;
        Ok(Self {
            law,
            params,
            record,
            blocks: alloc::vec![None; slots],
            tilts: alloc::vec![None; slots],
            stats: BranchStats::default(),
        })
    }

    pub fn params(&self) -> &AlgorithmParams {
        &self.params
    }

    pub fn law(&self) -> &'a L {
        self.law
    }

    fn block(&mut self, level: f64, record: &RecordLaw, k: u32) -> Result<Arc<Block>> {
        let p = self.params;
        if level != p.m {
            return Ok(Arc::new(Block::new(self.law, p.mu, level, p.delta, record, k)?));
        }
        if let Some(b) = &self.blocks[k as usize] {
            return Ok(b.clone());
        }
        let b = Arc::new(Block::new(self.law, p.mu, level, p.delta, record, k)?);
        self.blocks[k as usize] = Some(b.clone());
        Ok(b)
    }

    fn tilt(&mut self, level: f64, k: u32) -> Result<TiltedLaw> {
        let p = self.params;
        if level != p.m {
            return TiltedLaw::new(self.law, p.mu, level, p.gamma, p.delta, k);
        }
        if let Some(t) = self.tilts[k as usize] {
            return Ok(t);
        }
        let t = TiltedLaw::new(self.law, p.mu, level, p.gamma, p.delta, k)?;
        self.tilts[k as usize] = Some(t);
        Ok(t)
    }

    /// Bernoulli with success probability `P(T_m < ∞)`, returning the path up
    /// to `T_m` on success.
    pub fn bernoulli_tm<R: Rng + Clone>(&mut self, rng: &mut R, tally: &mut Tally) -> Result<PatchOutcome> {
        self.bernoulli_at(self.params.m, true, rng, tally)
    }

    /// Same as [`Self::bernoulli_tm`] at an arbitrary level, optionally
    /// skipping the path reconstruction.
    pub fn bernoulli_at<R: Rng + Clone>(
        &mut self,
        level: f64,
        keep_path: bool,
        rng: &mut R,
        tally: &mut Tally,
    ) -> Result<PatchOutcome> {
        let record = if level == self.params.m {
            self.record
        } else {
            RecordLaw::new(self.params.alpha, level, self.params.mu)?
        };
        tally.charge(4)?;
        let k = record.sample(rng);
        let branch = rng.random_range(0..3u8);
        let v = rng.random::<f64>();
        let miss = PatchOutcome { j: false, k, branch, path: WalkPath::default() };
        if k > MAX_BLOCK {
            return Err(Error::Watchdog(u64::MAX));
        }
        let last = block_start(k)? - 1;
        tally.reserve(last)?;
        self.stats.calls[branch as usize] += 1;
        let block = self.block(level, &record, k)?;
        let mu = self.params.mu;
        let (hit, ratio, replay) = match branch {
            BRANCH_A | BRANCH_BC => {
                let (set, p) = if branch == BRANCH_A {
                    (RecordSet::InBlock, block.p_a)
                } else {
                    (RecordSet::Uniform, block.p_bc)
                };
                if !(p > 0.0) {
                    return Ok(miss);
                }
                let (prop, snap) = loop {
                    let snap = rng.clone();
                    self.stats.proposals[branch as usize] += 1;
                    let prop = propose(&block, set, self.law, mu, level, Store::Nothing, rng, tally)?;
                    if prop.accepted {
                        break (prop, snap);
                    }
                };
                let in_block = prop.track.crossing.is_some_and(|t| t >= block.first);
                let hit = in_block && (branch == BRANCH_A || !prop.in_a);
                (hit, 3.0 * p / block.g, snap)
            }
            _ => {
                if !(block.p_b > 0.0) {
                    return Ok(miss);
                }
                let tilt = self.tilt(level, k)?;
                let snap = rng.clone();
                let track = self.tilted_walk(&tilt, &block, level, Store::Nothing, rng, tally)?;
                match track.crossing {
                    Some(t) if t >= block.first => {
                        let lr = pk1_path_likelihood(&tilt, track.raw_at_crossing, t);
                        (true, 3.0 * block.p_b * lr / block.g, snap)
                    }
                    _ => (false, 0.0, snap),
                }
            }
        };
        if !hit {
            return Ok(miss);
        }
        if ratio > 1.0 {
            return Err(Error::RatioViolation { k, branch, ratio });
        }
        if !(v <= ratio) {
            return Ok(miss);
        }
        self.stats.hits[branch as usize] += 1;
        let path = if keep_path {
            let mut r = replay;
            let track = if branch == BRANCH_TILT {
                let tilt = self.tilt(level, k)?;
                self.tilted_walk(&tilt, &block, level, Store::UntilCrossing, &mut r, tally)?
            } else {
                let set = if branch == BRANCH_A { RecordSet::InBlock } else { RecordSet::Uniform };
                propose(&block, set, self.law, mu, level, Store::UntilCrossing, &mut r, tally)?.track
            };
            WalkPath::from_track(track)
        } else {
            WalkPath::default()
        };
        Ok(PatchOutcome { j: true, k, branch, path })
    }

    /// Tilted truncated walk stopped at the crossing of `level` or at `n_k - 1`,
    /// or as soon as the crossing can no longer happen in time.
    fn tilted_walk<R: Rng + ?Sized>(
        &mut self,
        tilt: &TiltedLaw,
        block: &Block,
        level: f64,
        store: Store,
        rng: &mut R,
        tally: &mut Tally,
    ) -> Result<Track> {
        let mu = self.params.mu;
        let mut track = Track::new(mu, level, store);
        let top = self.law.value(tilt.cutoff_index) - mu;
        for j in 1..=block.last {
            let (i, tries) = sample_pk1_increment(tilt, self.law, rng);
            tally.charge(5 * tries as u64)?;
            self.stats.proposals[BRANCH_TILT as usize] += tries as u64;
            track.push(self.law.value(i));
            if track.crossing.is_some() {
                break;
            }
            if track.pos + (block.last - j) as f64 * top <= level {
                break;
            }
        }
        Ok(track)
    }

    /// One nominal step from `pos`; returns the new position and increment.
    #[inline]
    fn step<R: Rng + ?Sized>(&self, pos: f64, rng: &mut R, tally: &mut Tally) -> Result<(f64, f64)> {
        tally.charge(3)?;
        let x = self.law.value(self.law.draw_index(rng));
        Ok((pos + (x - self.params.mu), x))
    }

    /// Downward patches alternating with Bernoulli excursions until a
    /// Bernoulli failure. With a ceiling the segment is abandoned (`None`) as
    /// soon as it rises above it.
    pub fn segment<R: Rng + Clone>(
        &mut self,
        ceiling: Option<f64>,
        rng: &mut R,
        tally: &mut Tally,
    ) -> Result<Option<Segment>> {
        let lm = self.params.big_l * self.params.m;
        let mut seg = Segment::default();
        let mut pos = 0.0;
        loop {
            let start = seg.path.len();
            let base = pos;
            loop {
                let (p, x) = self.step(pos, rng, tally)?;
                pos = p;
                seg.path.push(pos, x);
                if ceiling.is_some_and(|c| pos > c) {
                    return Ok(None);
                }
                if pos < base - lm {
                    break;
                }
            }
            seg.patches.push(Patch { kind: PatchKind::Down, start, end: seg.path.len() });
            let out = self.bernoulli_at(self.params.m, true, rng, tally)?;
            if !out.j {
                return Ok(Some(seg));
            }
            let start = seg.path.len();
            for x in out.path.increments {
                pos += x - self.params.mu;
                seg.path.push(pos, x);
            }
            if ceiling.is_some_and(|c| pos > c) {
                return Ok(None);
            }
            seg.patches.push(Patch { kind: PatchKind::Up, start, end: seg.path.len() });
        }
    }

    /// `M_0 = max_{n≥0} S_n(μ)` together with a path certifying it.
    pub fn sample_m0_and_path<R: Rng + Clone>(&mut self, rng: &mut R, tally: &mut Tally) -> Result<Segment> {
        Ok(self.segment(None, rng, tally)?.expect("no ceiling"))
    }

    /// A nominal walk stopped below `-Lm`, conditioned on the whole walk
    /// never exceeding `barrier ≥ 0`.
    pub fn sample_downward_patch<R: Rng + Clone>(
        &mut self,
        barrier: f64,
        rng: &mut R,
        tally: &mut Tally,
    ) -> Result<WalkPath> {
        if !(barrier >= 0.0) {
            return Err(Error::InvalidParameter("barrier must be non-negative"));
        }
        let lm = self.params.big_l * self.params.m;
        'propose: loop {
            let mut path = WalkPath::default();
            let mut pos = 0.0;
            while !(pos < -lm) {
                let (p, x) = self.step(pos, rng, tally)?;
                pos = p;
                if pos > barrier {
                    continue 'propose;
                }
                path.push(pos, x);
            }
            let out = self.bernoulli_at(barrier - pos, false, rng, tally)?;
            if !out.j {
                return Ok(path);
            }
        }
    }

    /// Exact `(M_0, …, M_n)`, certified up to a horizon of at least `n`.
    pub fn sample_backward_sequence<R: Rng + Clone>(
        &mut self,
        n: usize,
        rng: &mut R,
        tally: &mut Tally,
    ) -> Result<BackwardSample> {
        let mut b = BackwardBuilder::new();
        b.grow(self, n, rng, tally)?;
        Ok(b.finish())
    }

    /// Backward sample extended until the first `k` with `M_k = 0`.
    pub fn sample_through_first_idle<R: Rng + Clone>(
        &mut self,
        rng: &mut R,
        tally: &mut Tally,
    ) -> Result<BackwardSample> {
        let mut b = BackwardBuilder::new();
        b.grow(self, 0, rng, tally)?;
        let mut checked = 0usize;
        loop {
            let h = b.horizon();
            // scan (checked..=h] from the end, carrying the suffix max
            let mut sup = f64::NEG_INFINITY;
            let mut found = None;
            for i in (checked..b.positions.len()).rev() {
                sup = sup.max(b.positions[i]);
                if i <= h && b.positions[i] >= sup {
                    found = Some(i);
                }
            }
            if found.is_some() {
                return Ok(b.finish());
            }
            checked = h + 1;
            b.grow(self, h + 1, rng, tally)?;
        }
    }
}

/// Incremental construction of the backward sequence, one milestone at a time.
#[derive(Debug, Clone)]
pub struct BackwardBuilder {
    positions: Vec<f64>,
    increments: Vec<f64>,
    milestones: Vec<usize>,
    patches: Vec<Patch>,
}

impl Default for BackwardBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl BackwardBuilder {
    pub fn new() -> Self {
        Self { positions: alloc::vec![0.0], increments: Vec::new(), milestones: alloc::vec![0], patches: Vec::new() }
    }

    /// Largest index whose `M` is certified, the second-to-last milestone.
    pub fn horizon(&self) -> usize {
        let n = self.milestones.len();
        if n < 2 {
            0
        } else {
            self.milestones[n - 2]
        }
    }

    /// Positions `S_0..` and increments built so far.
    pub fn path(&self) -> (&[f64], &[f64]) {
        (&self.positions, &self.increments)
    }

    fn append(&mut self, seg: Segment, mu: f64) {
        let offset = self.positions.len() - 1;
        let mut pos = *self.positions.last().expect("origin present");
        for x in seg.path.increments {
            pos += x - mu;
            self.positions.push(pos);
            self.increments.push(x);
        }
        self.patches.extend(
            seg.patches.into_iter().map(|p| Patch { kind: p.kind, start: p.start + offset, end: p.end + offset }),
        );
        self.milestones.push(self.positions.len() - 1);
    }

    /// Extend until the horizon reaches `n`.
    pub fn grow<L: LatticeLaw, R: Rng + Clone>(
        &mut self,
        sampler: &mut Sampler<'_, L>,
        n: usize,
        rng: &mut R,
        tally: &mut Tally,
    ) -> Result<()> {
        let mu = sampler.params.mu;
        if self.milestones.len() == 1 {
            let seg = sampler.sample_m0_and_path(rng, tally)?;
            self.append(seg, mu);
        }
        while self.horizon() < n {
            let seg = loop {
                if let Some(s) = sampler.segment(Some(sampler.params.m), rng, tally)? {
                    break s;
                }
            };
            self.append(seg, mu);
        }
        Ok(())
    }

    pub fn finish(self) -> BackwardSample {
        let h = self.horizon();
        let mut maxima = alloc::vec![0.0; h + 1];
        let mut sup = f64::NEG_INFINITY;
        for i in (0..self.positions.len()).rev() {
            sup = sup.max(self.positions[i]);
            if i <= h {
                maxima[i] = sup - self.positions[i];
            }
        }
        BackwardSample {
            positions: self.positions,
            increments: self.increments,
            milestones: self.milestones,
            patches: self.patches,
            maxima,
        }
    }
}

/// A path `S_0 = 0, S_1, …` with its milestones and the certified maxima
/// `M_k = max_{j≥k} S_j - S_k` for `k ≤ horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSample {
    pub positions: Vec<f64>,
    pub increments: Vec<f64>,
    pub milestones: Vec<usize>,
    pub patches: Vec<Patch>,
    pub maxima: Vec<f64>,
}

impl BackwardSample {
    pub fn horizon(&self) -> usize {
        self.maxima.len() - 1
    }

    pub fn m0(&self) -> f64 {
        self.maxima[0]
    }

    /// Smallest certified `k` with `M_k = 0`.
    pub fn first_idle(&self) -> Option<usize> {
        self.maxima.iter().position(|m| *m == 0.0)
    }

    /// Forward waiting times `W_j = M_{n-j}` for `j = 0..=n`.
    pub fn waiting_times(&self, n: usize) -> Result<Vec<f64>> {
        if n > self.horizon() {
            return Err(Error::Length { expected: n, got: self.horizon() });
        }
        Ok((0..=n).map(|j| self.maxima[n - j]).collect())
    }
}

/// Tally of the deterministic identities checked on a backward sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct IdentityReport {
    pub checked: u64,
    pub violations: u64,
    pub first_violation: Option<&'static str>,
}

impl IdentityReport {
    pub fn record(&mut self, ok: bool, what: &'static str) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            self.first_violation.get_or_insert(what);
        }
    }

    pub fn merge(&mut self, other: &IdentityReport) {
        self.checked += other.checked;
        self.violations += other.violations;
        if self.first_violation.is_none() {
            self.first_violation = other.first_violation;
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Check the suffix-max definition, the backward Lindley recursion, the
/// increment bookkeeping and the milestone geometry.
pub fn check_identities(s: &BackwardSample, p: &AlgorithmParams) -> IdentityReport {
    let mut r = IdentityReport::default();
    let h = s.horizon();
    r.record(s.positions.len() == s.increments.len() + 1, "length");
    r.record(s.positions[0] == 0.0, "origin");
    for i in 1..s.positions.len() {
        r.record(close(s.positions[i] - s.positions[i - 1], s.increments[i - 1] - p.mu), "increment");
    }
    let mut sup = f64::NEG_INFINITY;
    for i in (0..s.positions.len()).rev() {
        sup = sup.max(s.positions[i]);
        if i <= h {
            r.record(s.maxima[i] >= 0.0 && close(s.maxima[i], sup - s.positions[i]), "suffix max");
        }
    }
    for k in 0..h {
        let w = (s.maxima[k + 1] + s.increments[k] - p.mu).max(0.0);
        r.record(close(s.maxima[k], w), "backward lindley");
    }
    r.record(s.milestones[0] == 0, "first milestone");
    r.record(s.milestones.windows(2).all(|w| w[0] < w[1]), "milestones increase");
    r.record(*s.milestones.last().unwrap() == s.positions.len() - 1, "last milestone");
    let lm = p.big_l * p.m;
    for w in s.milestones.windows(2).skip(1) {
        let top = s.positions[w[0]..=w[1]].iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        r.record(top <= s.positions[w[0]] + p.m + 1e-9 * (1.0 + top.abs()), "segment ceiling");
    }
    for w in s.milestones.windows(2).skip(1) {
        let end = s.positions[w[1]];
        r.record(end < s.positions[w[0]] + p.m - lm + 1e-9 * (1.0 + end.abs()), "segment end");
    }
    for pa in &s.patches {
        let base = s.positions[pa.start];
        let end = s.positions[pa.end];
        match pa.kind {
            PatchKind::Down => {
                r.record(end < base - lm, "down patch depth");
                let early = s.positions[pa.start + 1..pa.end].iter().all(|x| *x >= base - lm);
                r.record(early, "down patch first passage");
            }
            PatchKind::Up => {
                r.record(end > base + p.m - 1e-9 * (1.0 + end.abs()), "up patch height");
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increment::{FiniteLattice, ParetoLattice};
    use crate::params::BetaMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn light() -> (ParetoLattice, AlgorithmParams) {
        let law = ParetoLattice::lattice_pareto(7.0, 3.0, 0.1).unwrap();
        let p = AlgorithmParams::new(1.0, 16.0, 1.1, 4.0, 1.7, 0.38, BetaMode::FiniteVariance).unwrap();
        (law, p)
    }

    #[test]
    fn zero_increments_give_zero_maximum() {
        let law = FiniteLattice::zero();
        let p = AlgorithmParams::new(1.0, 2.0, 1.1, 4.0, 1.0, 0.38, BetaMode::FiniteVariance).unwrap();
        let mut s = Sampler::new(&law, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mut tally = Tally::default();
        let seg = s.sample_m0_and_path(&mut rng, &mut tally).unwrap();
        assert_eq!(seg.m0(), 0.0);
        // first time strictly below -2.2 with unit drift
        assert_eq!(seg.path.len(), 3);
        let out = s.bernoulli_tm(&mut rng, &mut tally).unwrap();
        assert!(!out.j);
    }

    #[test]
    fn replayed_path_crosses_exactly_once_at_its_end() {
        let (law, p) = light();
        let mut s = Sampler::new(&law, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut tally = Tally::default();
        let mut hits = 0;
        for _ in 0..200_000 {
            let out = s.bernoulli_tm(&mut rng, &mut tally).unwrap();
            if out.j {
                hits += 1;
                let pos = &out.path.positions;
                assert!(*pos.last().unwrap() > p.m);
                assert!(pos[..pos.len() - 1].iter().all(|x| *x <= p.m));
                let first = block_start(out.k - 1).unwrap() as usize;
                assert!(pos.len() >= first && pos.len() < 2 * first);
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn identities_hold_on_light_backward_samples() {
        let (law, p) = light();
        let mut s = Sampler::new(&law, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let mut tally = Tally::default();
            let b = s.sample_backward_sequence(60, &mut rng, &mut tally).unwrap();
            assert!(b.horizon() >= 60);
            let r = check_identities(&b, &p);
            assert_eq!(r.violations, 0, "{:?}", r.first_violation);
            let w = b.waiting_times(60).unwrap();
            assert_eq!(w[60], b.m0());
        }
    }

    #[test]
    fn first_idle_is_certified() {
        let (law, p) = light();
        let mut s = Sampler::new(&law, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..300 {
            let mut tally = Tally::default();
            let b = s.sample_through_first_idle(&mut rng, &mut tally).unwrap();
            let k = b.first_idle().unwrap();
            assert!(b.maxima[..k].iter().all(|m| *m > 0.0));
        }
    }

    #[test]
    fn downward_patch_respects_barrier() {
        let (law, p) = light();
        let mut s = Sampler::new(&law, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let mut tally = Tally::default();
        for _ in 0..200 {
            let w = s.sample_downward_patch(20.0, &mut rng, &mut tally).unwrap();
            assert!(w.positions.iter().all(|x| *x <= 20.0));
            assert!(*w.positions.last().unwrap() < -p.big_l * p.m);
        }
    }

    #[test]
    fn watchdog_aborts_runaway_replica() {
        let (law, p) = light();
        let mut s = Sampler::new(&law, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let mut tally = Tally::new(50);
        let mut tripped = false;
        for _ in 0..100 {
            tally.evals = 0;
            if let Err(Error::Watchdog(_)) = s.sample_backward_sequence(1000, &mut rng, &mut tally) {
                tripped = true;
                break;
            }
        }
        assert!(tripped);
    }

    #[test]
    fn ratio_violation_is_reported() {
        // m = 1 for the heavy-tailed law breaks the bounds almost everywhere
        let law = ParetoLattice::lattice_pareto(2.9, 8.0, 0.1).unwrap();
        let p = AlgorithmParams::new(1.0, 1.0, 1.1, 2.01, 0.74, 0.38, BetaMode::FiniteVariance).unwrap();
        let mut s = Sampler::new(&law, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let mut seen = false;
        for _ in 0..20_000 {
            let mut tally = Tally::default();
            if let Err(Error::RatioViolation { ratio, .. }) = s.bernoulli_tm(&mut rng, &mut tally) {
                assert!(ratio > 1.0);
                seen = true;
                break;
            }
        }
        assert!(seen);
    }

    #[test]
    fn same_seed_same_sample() {
        let (law, p) = light();
        let run = |seed| {
            let mut s = Sampler::new(&law, p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut tally = Tally::default();
            let b = s.sample_backward_sequence(10, &mut rng, &mut tally).unwrap();
            (b, tally.evals)
        };
        assert_eq!(run(7), run(7));
    }
}
