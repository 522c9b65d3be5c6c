//! Simulation of compound sums, exact enumeration on small instances and
//! exponentially tilted importance sampling of half-space events.
//!
//! Replications are split into fixed blocks of [`BLOCK_SIZE`]; block `b` draws
//! counts from ChaCha stream `b` of the counting seed and summands from
//! stream `b` of the summand seed. Results are therefore identical for any
//! number of workers, and the counts never depend on the summand seed.

mod checks;

pub use checks::*;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::CountingModel;
use crate::dual::{pair, DualVector, ExtendedReal, PrimalVector};
use crate::error::{Error, Result};
use crate::numeric::{golden_section_min, ln_gamma};
use crate::summand::SummandModel;
use crate::variational::{legendre_transform, Conjugate, ConjugateTarget, OptimizerSettings};

pub const BLOCK_SIZE: usize = 1000;
/// Log-weights above this abort the estimate instead of overflowing.
pub const MAX_LOG_WEIGHT: f64 = 700.0;
/// Largest enumeration `m^K·(K+1)` attempted by [`enumerate_exact`].
pub const ENUMERATION_LIMIT: f64 = 1e7;
/// Relative slack in event membership.
pub const MEMBERSHIP_RTOL: f64 = 1e-12;
pub const DEFAULT_TILTED_REPS: usize = 10_000;
pub const DEFAULT_PLAIN_REPS: usize = 100_000;

/// Seeds of the two independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub counting: u64,
    pub summand: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seeds {
    pub fn from_master(seed: u64) -> Self {
        let counting = splitmix(seed);
        Self {
            counting,
            summand: splitmix(counting),
        }
    }

    /// Seeds for the `index`-th sub-experiment.
    pub fn derive(&self, index: u64) -> Self {
        Self {
            counting: splitmix(self.counting ^ splitmix(index)),
            summand: splitmix(self.summand ^ splitmix(index.wrapping_add(0x51ed))),
        }
    }
}

fn block_rngs(seeds: Seeds, block: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut c = ChaCha8Rng::seed_from_u64(seeds.counting);
    c.set_stream(block as u64);
    let mut x = ChaCha8Rng::seed_from_u64(seeds.summand);
    x.set_stream(block as u64);
    (c, x)
}

/// Runs `reps` replications in blocks, in parallel on `workers` threads,
/// and returns the per-replication outputs in order.
pub(crate) fn run_blocks<T, F>(reps: usize, seeds: Seeds, workers: usize, body: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    let blocks = reps.div_ceil(BLOCK_SIZE);
    let run = |b: usize| -> Result<Vec<T>> {
        let (mut c, mut x) = block_rngs(seeds, b);
        let len = BLOCK_SIZE.min(reps - b * BLOCK_SIZE);
        (0..len).map(|_| body(&mut c, &mut x)).collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidValue(format!("thread pool: {e}")))?;
    let nested: Vec<Result<Vec<T>>> =
        pool.install(|| (0..blocks).into_par_iter().map(run).collect());
    let mut out = Vec::with_capacity(reps);
    for b in nested {
        out.extend(b?);
    }
    Ok(out)
}

/// One draw of `(S_{N_n}/n, N_n/n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundSample {
    pub s_over_n: PrimalVector,
    pub n_over_n: f64,
    pub raw_n: u64,
}

pub fn simulate_compound(
    mx: &SummandModel,
    mn: &CountingModel,
    n: u64,
    reps: usize,
    seeds: Seeds,
    workers: usize,
) -> Result<Vec<CompoundSample>> {
    if reps == 0 {
        return Err(Error::InvalidValue("reps must be at least 1".into()));
    }
    let sampler = mn.law_at(n)?.sampler()?;
    let nf = n as f64;
    run_blocks(reps, seeds, workers, |c, x| {
        let k = sampler.sample(c);
        let s = mx.sample_sum(x, k);
        Ok(CompoundSample {
            s_over_n: s.scaled(1.0 / nf),
            n_over_n: k as f64 / nf,
            raw_n: k,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventMode {
    /// `{⟨v, S/n⟩ ≥ a}`.
    SumCoordinate,
    /// `{N/n ≥ a}`.
    CountCoordinate,
}

/// A half-space event of the pair `(S/n, N/n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceEvent {
    pub direction: DualVector,
    pub level: f64,
    pub mode: EventMode,
}

impl HalfSpaceEvent {
    pub fn sum(direction: DualVector, level: f64) -> Result<Self> {
        if direction.is_zero(0.0) {
            return Err(Error::InvalidValue(
                "event direction must be nonzero".into(),
            ));
        }
        if !level.is_finite() {
            return Err(Error::InvalidValue(format!(
                "event level {level} must be finite"
            )));
        }
        Ok(Self {
            direction,
            level,
            mode: EventMode::SumCoordinate,
        })
    }

    pub fn count(level: f64, dim: usize) -> Result<Self> {
        if !level.is_finite() {
            return Err(Error::InvalidValue(format!(
                "event level {level} must be finite"
            )));
        }
        Ok(Self {
            direction: DualVector::zeros(dim),
            level,
            mode: EventMode::CountCoordinate,
        })
    }

    /// Membership of the unscaled pair `(S, N)` at stage `n`.
    pub fn contains_raw(&self, s: &PrimalVector, count: u64, n: u64) -> bool {
        let threshold = self.level * n as f64;
        let value = match self.mode {
            EventMode::SumCoordinate => pair(&self.direction, s).unwrap_or(f64::NAN),
            EventMode::CountCoordinate => count as f64,
        };
        value >= threshold - MEMBERSHIP_RTOL * threshold.abs().max(1.0)
    }

    pub fn contains(&self, sample: &CompoundSample, n: u64) -> bool {
        self.contains_raw(&sample.s_over_n.scaled(n as f64), sample.raw_n, n)
    }
}

/// Exact `P((S/n, N/n) ∈ event)` by summing over counts and atom compositions.
pub fn enumerate_exact(
    mx: &SummandModel,
    mn: &CountingModel,
    n: u64,
    event: &HalfSpaceEvent,
) -> Result<f64> {
    let fs = mx.as_finite_support().ok_or_else(|| {
        Error::Unsupported("exact enumeration needs a finite-support summand".into())
    })?;
    let pmf = mn.law_at(n)?.bounded_pmf()?;
    let k_max = pmf.len() - 1;
    let m = fs.atoms().len();
    let terms = (m as f64).powi(k_max as i32) * (k_max as f64 + 1.0);
    if terms > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            terms,
            limit: ENUMERATION_LIMIT,
        });
    }
    let log_p: Vec<f64> = fs.probs().iter().map(|p| p.ln()).collect();
    let mut total = 0.0;
    for (k, &pk) in pmf.iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        if event.mode == EventMode::CountCoordinate {
            if event.contains_raw(&PrimalVector::zeros(fs.dim()), k as u64, n) {
                total += pk;
            }
            continue;
        }
        let mut inner = 0.0;
        let mut counts = vec![0usize; m];
        for_each_composition(k, &mut counts, 0, &mut |c| {
            let mut s = vec![0.0; fs.dim()];
            for (ci, atom) in c.iter().zip(fs.atoms()) {
                for (si, ai) in s.iter_mut().zip(atom.coords()) {
                    *si += *ci as f64 * ai;
                }
            }
            let sv = PrimalVector::new(s).expect("finite");
            if event.contains_raw(&sv, k as u64, n) {
                let lw = ln_gamma(k as f64 + 1.0)
                    + c.iter()
                        .zip(&log_p)
                        .map(|(&ci, lp)| ci as f64 * lp - ln_gamma(ci as f64 + 1.0))
                        .sum::<f64>();
                inner += lw.exp();
            }
        });
        total += pk * inner;
    }
    Ok(total.min(1.0))
}

fn for_each_composition(left: usize, counts: &mut [usize], i: usize, f: &mut impl FnMut(&[usize])) {
    if i == counts.len() - 1 {
        counts[i] = left;
        f(counts);
        return;
    }
    for c in 0..=left {
        counts[i] = c;
        for_each_composition(left - c, counts, i + 1, f);
    }
}

/// Saddle point used to tilt the sampling laws towards an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltParameters {
    pub theta: DualVector,
    pub eta: f64,
    /// Rate-minimizing point of the event boundary.
    pub x_star: PrimalVector,
    pub y_star: f64,
    /// Infimum of the rate over the event.
    pub rate: f64,
}

/// `t ↦ Λ_X(t v)` as a scalar target.
struct ProjectedCgf<'a> {
    mx: &'a SummandModel,
    v: &'a DualVector,
}

impl ConjugateTarget for ProjectedCgf<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, p: &[f64]) -> Result<f64> {
        self.mx.cgf(&self.v.scaled(p[0]))
    }

    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![pair(
            self.v,
            &self.mx.cgf_gradient(&self.v.scaled(p[0]))?,
        )?])
    }

    fn hessian(&self, p: &[f64]) -> Option<Result<nalgebra::DMatrix<f64>>> {
        let h = || -> Result<f64> {
            let m = self.mx.cgf_hessian(&self.v.scaled(p[0]))?;
            let v = nalgebra::DVector::from_column_slice(self.v.coords());
            Ok(v.dot(&(m * &v)))
        };
        Some(h().map(|x| nalgebra::DMatrix::from_element(1, 1, x)))
    }
}

/// `(Λ*_{⟨v,X⟩}(z), argmax t)`.
fn projected_rate(
    mx: &SummandModel,
    v: &DualVector,
    z: f64,
    settings: &OptimizerSettings,
) -> Result<(ExtendedReal, f64)> {
    match legendre_transform(&ProjectedCgf { mx, v }, &[z], settings)? {
        Conjugate::Attained { value, argmax } => {
            Ok((ExtendedReal::Finite(value.max(0.0)), argmax[0]))
        }
        Conjugate::Unbounded => Ok((ExtendedReal::PosInf, f64::NAN)),
    }
}

const BOUNDARY_GRID: usize = 48;

/// Minimizes the explicit rate over the event and returns the matching
/// `(θ*, η*)`, the maximizer of the joint supremum at the minimizing point.
pub fn tilt_parameters(
    mx: &SummandModel,
    mn: &CountingModel,
    event: &HalfSpaceEvent,
    settings: &OptimizerSettings,
) -> Result<TiltParameters> {
    let d = mn.derivs_at_zero()?;
    let mu = mx.mean();
    let h = mx.dim();
    match event.mode {
        EventMode::CountCoordinate => {
            let a = event.level;
            if d.d1 >= a {
                return Err(Error::ZeroRate);
            }
            let rate = mn.rate_n_with(a, settings)?;
            let eta = mn.rate_n_argmax(a)?;
            match (rate, eta) {
                (ExtendedReal::Finite(r), Some(eta)) => Ok(TiltParameters {
                    theta: DualVector::zeros(h),
                    eta,
                    x_star: mu.scaled(a),
                    y_star: a,
                    rate: r,
                }),
                _ => Err(Error::Precondition(format!(
                    "the count event N/n ≥ {a} has infinite rate"
                ))),
            }
        }
        EventMode::SumCoordinate => {
            let v = &event.direction;
            let a = event.level;
            let vm = pair(v, &mu)?;
            if d.d1 * vm >= a {
                return Err(Error::ZeroRate);
            }
            let range = mx.projected_range(v)?;
            // Feasible y keep a/y inside the range of ⟨v, X⟩.
            let (mut y_lo, mut y_hi) = (0.0_f64, f64::INFINITY);
            if let Some((lo, hi)) = range {
                if a > 0.0 {
                    if hi <= 0.0 {
                        return Err(Error::Precondition("the event has infinite rate".into()));
                    }
                    y_lo = a / hi;
                    if lo > 0.0 {
                        y_hi = a / lo;
                    }
                } else if a < 0.0 {
                    if lo >= 0.0 {
                        return Err(Error::Precondition("the event has infinite rate".into()));
                    }
                    y_lo = a / lo;
                    if hi < 0.0 {
                        y_hi = a / hi;
                    }
                }
            }
            let scale = d.d1.max(y_lo).max(a.abs()).max(1.0);
            let lo = if y_lo > 0.0 {
                y_lo * (1.0 + 1e-9)
            } else {
                1e-6 * scale
            };
            let hi = if y_hi.is_finite() {
                y_hi * (1.0 - 1e-9)
            } else {
                50.0 * scale
            };
            if !(hi > lo) {
                return Err(Error::Precondition(
                    "the event boundary is degenerate".into(),
                ));
            }
            let objective = |y: f64| -> f64 {
                let Ok((r, _)) = projected_rate(mx, v, a / y, settings) else {
                    return f64::INFINITY;
                };
                let Ok(rn) = mn.rate_n_with(y, settings) else {
                    return f64::INFINITY;
                };
                y * r.to_f64() + rn.to_f64()
            };
            let ratio = (hi / lo).powf(1.0 / (BOUNDARY_GRID - 1) as f64);
            let grid: Vec<f64> = (0..BOUNDARY_GRID)
                .map(|i| lo * ratio.powi(i as i32))
                .collect();
            let values: Vec<f64> = grid.iter().map(|&y| objective(y)).collect();
            let best = values
                .iter()
                .enumerate()
                .fold(0, |b, (i, &v)| if v < values[b] { i } else { b });
            if !values[best].is_finite() {
                return Err(Error::Precondition("the event has infinite rate".into()));
            }
            let left = grid[best.saturating_sub(1)];
            let right = grid[(best + 1).min(BOUNDARY_GRID - 1)];
            let (mut y_star, mut rate) = golden_section_min(objective, left, right, 1e-10);
            // candidate at the origin when it belongs to the event
            if a <= 0.0 {
                if let ExtendedReal::Finite(r0) = mn.lambda_at_minus_infinity().neg() {
                    if r0 < rate {
                        return Err(Error::Precondition(
                            "the rate infimum sits at the origin, which cannot be tilted towards"
                                .into(),
                        ));
                    }
                }
            }
            if values[best] < rate {
                y_star = grid[best];
                rate = values[best];
            }
            let (_, t) = projected_rate(mx, v, a / y_star, settings)?;
            let theta = v.scaled(t);
            let x_star = mx.cgf_gradient(&theta)?.scaled(y_star);
            let alpha = mn
                .rate_n_argmax(y_star)?
                .ok_or_else(|| Error::Precondition("no finite count tilt".into()))?;
            Ok(TiltParameters {
                eta: alpha - mx.cgf(&theta)?,
                theta,
                x_star,
                y_star,
                rate,
            })
        }
    }
}

/// Infimum of the large deviation rate over the event; zero when the event
/// contains the limit point.
pub fn event_rate_infimum(
    mx: &SummandModel,
    mn: &CountingModel,
    event: &HalfSpaceEvent,
) -> Result<ExtendedReal> {
    match tilt_parameters(mx, mn, event, &OptimizerSettings::default()) {
        Ok(t) => Ok(ExtendedReal::Finite(t.rate)),
        Err(Error::ZeroRate) => Ok(ExtendedReal::ZERO),
        Err(Error::Precondition(_)) => Ok(ExtendedReal::PosInf),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Plain,
    Tilted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    /// No replication hit the event.
    pub degenerate: bool,
    pub reps: usize,
    /// Method actually used; tilting falls back to plain sampling when the
    /// event has zero or infinite rate.
    pub method: Method,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let m = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (m, 0.0);
    }
    let v = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r - 1.0);
    (m, (v / r).sqrt())
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_event_prob(
    mx: &SummandModel,
    mn: &CountingModel,
    n: u64,
    event: &HalfSpaceEvent,
    reps: usize,
    method: Method,
    seeds: Seeds,
    workers: usize,
) -> Result<EventEstimate> {
    if reps == 0 {
        return Err(Error::InvalidValue("reps must be at least 1".into()));
    }
    let tilt = match method {
        Method::Plain => None,
        Method::Tilted => {
            if matches!(mn, CountingModel::Renewal { .. }) {
                return Err(Error::Unsupported(
                    "tilted estimation needs an exact finite-n count law; renewal counts only support plain sampling"
                        .into(),
                ));
            }
            match tilt_parameters(mx, mn, event, &OptimizerSettings::default()) {
                Ok(t) => Some(t),
                Err(Error::ZeroRate) | Err(Error::Precondition(_)) => None,
                Err(e) => return Err(e),
            }
        }
    };
    let law = mn.law_at(n)?;
    let weights: Vec<f64> = match &tilt {
        None => {
            let sampler = law.sampler()?;
            run_blocks(reps, seeds, workers, |c, x| {
                let k = sampler.sample(c);
                let s = mx.sample_sum(x, k);
                Ok(if event.contains_raw(&s, k, n) {
                    1.0
                } else {
                    0.0
                })
            })?
        }
        Some(t) => {
            let s_tilt = t.eta + mx.cgf(&t.theta)?;
            let log_mgf = law.log_mgf(s_tilt)?;
            let sampler = law.tilted(s_tilt)?.sampler()?;
            let tilted_x = mx.tilted(&t.theta)?;
            run_blocks(reps, seeds, workers, |c, x| {
                let k = sampler.sample(c);
                let s = tilted_x.sample_sum(x, k);
                if !event.contains_raw(&s, k, n) {
                    return Ok(0.0);
                }
                let lw = -pair(&t.theta, &s)? - t.eta * k as f64 + log_mgf;
                if lw > MAX_LOG_WEIGHT {
                    return Err(Error::WeightOverflow(lw));
                }
                Ok(lw.exp())
            })?
        }
    };
    let (p_hat, std_err) = mean_and_se(&weights);
    Ok(EventEstimate {
        p_hat,
        std_err,
        degenerate: weights.iter().all(|&w| w == 0.0),
        reps,
        method: if tilt.is_some() {
            Method::Tilted
        } else {
            Method::Plain
        },
    })
}

/// `(1/n) log` of the empirical MGF of `⟨θ,S⟩ + ηN`, with a delta-method
/// standard error.
#[allow(clippy::too_many_arguments)]
pub fn empirical_joint_cgf(
    mx: &SummandModel,
    mn: &CountingModel,
    n: u64,
    reps: usize,
    theta: &DualVector,
    eta: f64,
    seeds: Seeds,
    workers: usize,
) -> Result<(f64, f64)> {
    let samples = simulate_compound(mx, mn, n, reps, seeds, workers)?;
    let nf = n as f64;
    let w: Vec<f64> = samples
        .iter()
        .map(|s| Ok((nf * (pair(theta, &s.s_over_n)? + eta * s.n_over_n)).exp()))
        .collect::<Result<_>>()?;
    let (m, se) = mean_and_se(&w);
    Ok((m.ln() / nf, se / m / nf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm1() -> SummandModel {
        SummandModel::rademacher(0.5).unwrap()
    }

    #[test]
    fn degenerate_count_gives_empty_sums() {
        let mn = CountingModel::bernoulli_constant(0.0).unwrap();
        let s = simulate_compound(&pm1(), &mn, 5, 20, Seeds::from_master(1), 2).unwrap();
        assert!(s
            .iter()
            .all(|c| c.raw_n == 0 && c.s_over_n.coords() == [0.0]));
    }

    #[test]
    fn simulation_is_worker_independent() {
        let mn = CountingModel::poisson(1.3).unwrap();
        let seeds = Seeds::from_master(42);
        let a = simulate_compound(&pm1(), &mn, 30, 2500, seeds, 1).unwrap();
        let b = simulate_compound(&pm1(), &mn, 30, 2500, seeds, 4).unwrap();
        assert_eq!(a, b);
        let other = Seeds {
            summand: seeds.summand ^ 1,
            ..seeds
        };
        let c = simulate_compound(&pm1(), &mn, 30, 2500, other, 3).unwrap();
        assert!(a.iter().zip(&c).all(|(x, y)| x.raw_n == y.raw_n));
        assert_ne!(a, c);
    }

    #[test]
    fn enumeration_edges() {
        let mn = CountingModel::bernoulli_constant(0.5).unwrap();
        let v = DualVector::new(vec![1.0]).unwrap();
        let all = HalfSpaceEvent::sum(v.clone(), -2.0).unwrap();
        assert!((enumerate_exact(&pm1(), &mn, 6, &all).unwrap() - 1.0).abs() < 1e-15);
        let none = HalfSpaceEvent::sum(v, 1.5).unwrap();
        assert_eq!(enumerate_exact(&pm1(), &mn, 6, &none).unwrap(), 0.0);
        let big = CountingModel::bernoulli_constant(0.5).unwrap();
        let e = HalfSpaceEvent::sum(DualVector::new(vec![1.0]).unwrap(), 0.5).unwrap();
        assert!(matches!(
            enumerate_exact(&pm1(), &big, 40, &e),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn count_tilt_is_log_two() {
        let mn = CountingModel::poisson(1.0).unwrap();
        let e = HalfSpaceEvent::count(2.0, 1).unwrap();
        let t = tilt_parameters(&pm1(), &mn, &e, &OptimizerSettings::default()).unwrap();
        assert!((t.eta - 2f64.ln()).abs() < 1e-8);
        let inside = HalfSpaceEvent::count(1.0, 1).unwrap();
        assert_eq!(
            tilt_parameters(&pm1(), &mn, &inside, &OptimizerSettings::default()),
            Err(Error::ZeroRate)
        );
    }

    #[test]
    fn sum_tilt_lands_on_boundary() {
        let mn = CountingModel::poisson(1.0).unwrap();
        let e = HalfSpaceEvent::sum(DualVector::new(vec![1.0]).unwrap(), 0.5).unwrap();
        let t = tilt_parameters(&pm1(), &mn, &e, &OptimizerSettings::default()).unwrap();
        assert!(t.theta[0] > 0.0);
        assert!((t.x_star[0] - 0.5).abs() < 1e-8);
        assert!((t.theta[0].tanh() * t.y_star - 0.5).abs() < 1e-8);
        // the tilted joint law has mean (x*, y*)
        let s = t.eta + pm1().cgf(&t.theta).unwrap();
        let (_, d1, _) = mn.cgf_n_limit_with_derivatives(s).unwrap();
        assert!((d1 - t.y_star).abs() < 1e-8);
    }
}
