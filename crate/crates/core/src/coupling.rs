//! Exact `ψ_k` for lattice laws and the dominating lattice coupling that
//! lets a non-lattice increment law be sampled through a lattice one.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::increment::{CenteredPareto, FiniteLattice, IncrementLaw, LatticeLaw, ParetoLattice};
use crate::math;
use crate::params::AlgorithmParams;
use crate::proposals::Tally;
use crate::sampler::{BackwardBuilder, IdentityReport, Sampler};

/// `ln(E[e^{θX} I(X ≤ cutoff)] / P(X ≤ cutoff))`.
pub fn psi_lattice_eval<L: IncrementLaw + ?Sized>(law: &L, theta: f64, cutoff: f64) -> Result<f64> {
    if law.lattice_span().is_none() {
        return Err(Error::NonLattice);
    }
    let mgf = law.truncated_mgf(theta, cutoff)?;
    let p = 1.0 - law.tail_prob(cutoff);
    if !(p > 0.0) {
        return Err(Error::ZeroProbability);
    }
    Ok(math::ln(mgf / p))
}

/// An increment law with a lattice law of `h⌊X/h⌋`, recentered, and the
/// conditional law of `X` on each cell `[jh, (j+1)h)`.
pub trait Dominated: IncrementLaw {
    type Lattice: LatticeLaw + Clone;

    /// Law of `X′ = h⌊X/h⌋ - E(h⌊X/h⌋)`.
    fn dominating_lattice(&self, h: f64) -> Result<Self::Lattice>;

    /// `E(h⌊X/h⌋)`.
    fn floor_mean(&self, h: f64) -> Result<f64>;

    /// Draw `X` given that `X′` took lattice index `index`.
    fn refine<R: Rng + ?Sized>(&self, lattice: &Self::Lattice, index: i64, h: f64, rng: &mut R) -> Result<f64>;
}

impl Dominated for CenteredPareto {
    type Lattice = ParetoLattice;

    fn dominating_lattice(&self, h: f64) -> Result<ParetoLattice> {
        ParetoLattice::floored(self.alpha_prime, self.c, h)
    }

    fn floor_mean(&self, h: f64) -> Result<f64> {
        Ok(self.dominating_lattice(h)?.centering())
    }

    fn refine<R: Rng + ?Sized>(&self, _lattice: &ParetoLattice, index: i64, h: f64, rng: &mut R) -> Result<f64> {
        let lo = index as f64 * h;
        self.sample_between(lo, lo + h, rng)
    }
}

/// `h` must divide the span; then `h⌊X/h⌋` is `X` shifted by a constant and
/// the recentered lattice law is the law itself.
fn lattice_floor_mean<L: LatticeLaw>(law: &L, h: f64) -> Result<f64> {
    let ratio = law.span() / h;
    if !(h > 0.0) || (ratio - math::floor(ratio + 0.5)).abs() > 1e-9 || ratio < 0.5 {
        return Err(Error::InvalidParameter("coupling of a lattice law needs h dividing the span"));
    }
    let q = law.offset() / h;
    Ok(-h * (q - math::floor(q)))
}

macro_rules! lattice_dominated {
    ($t:ty) => {
        impl Dominated for $t {
            type Lattice = $t;

            fn dominating_lattice(&self, h: f64) -> Result<$t> {
                lattice_floor_mean(self, h)?;
                Ok(self.clone())
            }

            fn floor_mean(&self, h: f64) -> Result<f64> {
                lattice_floor_mean(self, h)
            }

            fn refine<R: Rng + ?Sized>(&self, lattice: &$t, index: i64, _h: f64, _rng: &mut R) -> Result<f64> {
                if lattice.atom(index) <= 0.0 {
                    return Err(Error::ZeroProbability);
                }
                Ok(lattice.value(index))
            }
        }
    };
}

lattice_dominated!(FiniteLattice);
lattice_dominated!(ParetoLattice);

/// `X′ = h⌊X/h⌋ - E(h⌊X/h⌋)` with drift `μ′ = μ - E(h⌊X/h⌋) - h`, so that
/// `X′ - μ′ ≥ X - μ` pathwise.
#[derive(Debug, Clone)]
pub struct LatticeCoupling<'a, T: Dominated> {
    pub target: &'a T,
    pub h: f64,
    pub mu: f64,
    pub mu_prime: f64,
    pub floor_mean: f64,
    pub lattice: T::Lattice,
}

pub fn build_coupling<T: Dominated>(target: &T, h: f64, mu: f64) -> Result<LatticeCoupling<'_, T>> {
    if !(h > 0.0) || !(mu > 0.0) {
        return Err(Error::InvalidParameter("coupling needs h > 0 and mu > 0"));
    }
    if h > mu {
        return Err(Error::InvalidParameter("coupling needs h ≤ mu"));
    }
    let lattice = target.dominating_lattice(h)?;
    let floor_mean = target.floor_mean(h)?;
    let mu_prime = mu - floor_mean - h;
    if !(mu_prime > 0.0) {
        return Err(Error::InvalidParameter("coupled drift is not positive"));
    }
    Ok(LatticeCoupling { target, h, mu, mu_prime, floor_mean, lattice })
}

impl<T: Dominated> LatticeCoupling<'_, T> {
    /// Draw `X` given the lattice index of `X′`.
    pub fn refine_increment<R: Rng + ?Sized>(&self, index: i64, rng: &mut R) -> Result<f64> {
        self.target.refine(&self.lattice, index, self.h, rng)
    }

    /// Paired draw `(X′, X)`.
    pub fn paired<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let i = self.lattice.draw_index(rng);
        Ok((self.lattice.value(i), self.refine_increment(i, rng)?))
    }
}

/// Target walk `S_k(μ)` up to the stopping time, its maxima `M_0..M_n`, and
/// the dominating walk `S′_k(μ′)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSample {
    pub positions: Vec<f64>,
    pub increments: Vec<f64>,
    pub maxima: Vec<f64>,
    pub dominating: Vec<f64>,
    /// The stopping time `N`.
    pub stop: usize,
    /// `max_{j ≥ N} S′_j(μ′)`.
    pub dominating_sup: f64,
}

impl CoupledSample {
    pub fn m0(&self) -> f64 {
        self.maxima[0]
    }
}

/// Resumable coupled construction: the dominating backward builder plus the
/// refined target increments along it.
pub struct CoupledBuilder<'c, T: Dominated> {
    coupling: &'c LatticeCoupling<'c, T>,
    sampler: Sampler<'c, T::Lattice>,
    builder: BackwardBuilder,
    positions: Vec<f64>,
    increments: Vec<f64>,
}

impl<'c, T: Dominated> CoupledBuilder<'c, T> {
    /// `params` are for the lattice walk and must use the drift `μ′`.
    pub fn new(coupling: &'c LatticeCoupling<'c, T>, params: &AlgorithmParams) -> Result<Self> {
        Self::with_sampler(coupling, Sampler::new(&coupling.lattice, *params)?)
    }

    /// Reuse a sampler (and its block caches) for the lattice walk.
    pub fn with_sampler(coupling: &'c LatticeCoupling<'c, T>, sampler: Sampler<'c, T::Lattice>) -> Result<Self> {
        let mu = sampler.params().mu;
        if (mu - coupling.mu_prime).abs() > 1e-12 * coupling.mu_prime {
            return Err(Error::InvalidParameter("params must use the coupled drift"));
        }
        Ok(Self { coupling, sampler, builder: BackwardBuilder::new(), positions: alloc::vec![0.0], increments: Vec::new() })
    }

    pub fn into_sampler(self) -> Sampler<'c, T::Lattice> {
        self.sampler
    }

    fn refine_new<R: Rng + ?Sized>(&mut self, rng: &mut R, tally: &mut Tally) -> Result<()> {
        let c = self.coupling;
        let (_, dom_inc) = self.builder.path();
        for x in &dom_inc[self.increments.len()..] {
            let y = c.refine_increment(c.lattice.index_at_most(*x), rng)?;
            tally.charge(3)?;
            let last = *self.positions.last().expect("origin present");
            self.positions.push(last + (y - c.mu));
            self.increments.push(y);
        }
        Ok(())
    }

    /// Extend until `(S_k(μ), M_k)_{k ≤ n}` is certified and return it.
    pub fn certify<R: Rng + Clone>(&mut self, n: usize, rng: &mut R, tally: &mut Tally) -> Result<CoupledSample> {
        self.builder.grow(&mut self.sampler, n, rng, tally)?;
        self.refine_new(rng, tally)?;
        let floor_n = self.positions[..=n].iter().fold(f64::INFINITY, |a, b| a.min(*b));
        let mut checked = n;
        loop {
            let h = self.builder.horizon();
            let (dom, _) = self.builder.path();
            let mut sup = f64::NEG_INFINITY;
            let mut stop = None;
            for k in (checked..dom.len()).rev() {
                sup = sup.max(dom[k]);
                if k <= h && sup <= floor_n {
                    stop = Some((k, sup));
                }
            }
            if let Some((stop, dominating_sup)) = stop {
                let mut maxima = alloc::vec![0.0; n + 1];
                let mut top = f64::NEG_INFINITY;
                for k in (0..=stop).rev() {
                    top = top.max(self.positions[k]);
                    if k <= n {
                        maxima[k] = top - self.positions[k];
                    }
                }
                return Ok(CoupledSample {
                    positions: self.positions[..=stop].to_vec(),
                    increments: self.increments[..stop].to_vec(),
                    maxima,
                    dominating: dom[..=stop].to_vec(),
                    stop,
                    dominating_sup,
                });
            }
            checked = h + 1;
            self.builder.grow(&mut self.sampler, h + 1, rng, tally)?;
            self.refine_new(rng, tally)?;
        }
    }

    /// Certify successively longer prefixes until some `M_k = 0` appears.
    pub fn through_first_idle<R: Rng + Clone>(&mut self, rng: &mut R, tally: &mut Tally) -> Result<(CoupledSample, usize)> {
        let mut n = 0;
        loop {
            let s = self.certify(n, rng, tally)?;
            if let Some(k) = s.maxima.iter().position(|m| *m == 0.0) {
                return Ok((s, k));
            }
            n = 2 * n + 1;
        }
    }
}

/// Exact `(S_k(μ), M_k)_{k ≤ n}` for the target law. `params` are for the
/// lattice walk with drift `μ′`.
pub fn sample_backward_via_coupling<T: Dominated, R: Rng + Clone>(
    coupling: &LatticeCoupling<'_, T>,
    params: &AlgorithmParams,
    n: usize,
    rng: &mut R,
    tally: &mut Tally,
) -> Result<CoupledSample> {
    CoupledBuilder::new(coupling, params)?.certify(n, rng, tally)
}

/// Domination, stopping rule, suffix maxima and backward Lindley on a
/// coupled sample.
pub fn check_coupled(s: &CoupledSample, mu: f64) -> IdentityReport {
    let mut r = IdentityReport::default();
    let tol = |a: f64| 1e-9 * (1.0 + a.abs());
    for k in 0..=s.stop {
        r.record(s.dominating[k] >= s.positions[k] - tol(s.positions[k]), "domination");
    }
    let floor_n = s.positions[..s.maxima.len()].iter().fold(f64::INFINITY, |a, b| a.min(*b));
    r.record(s.dominating_sup <= floor_n, "stopping rule");
    let mut top = f64::NEG_INFINITY;
    for k in (0..=s.stop).rev() {
        top = top.max(s.positions[k]);
        if k < s.maxima.len() {
            r.record((s.maxima[k] - (top - s.positions[k])).abs() <= tol(top), "suffix max");
        }
    }
    for k in 0..s.maxima.len().saturating_sub(1) {
        let w = (s.maxima[k + 1] + s.increments[k] - mu).max(0.0);
        r.record((s.maxima[k] - w).abs() <= tol(w), "backward lindley");
    }
    r
}
