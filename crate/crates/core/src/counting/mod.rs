//! Counting processes `N_n` and their limiting cumulant generating function
//! `Λ_N(η) = lim (1/n) log E[e^{ηN_n}]`.
//!
//! Five families are supported: i.i.d. sums, (possibly inhomogeneous) Poisson,
//! the alternative fractional Poisson process, sums of independent Bernoulli
//! variables and renewal processes.

mod law;
mod renewal;

use std::fmt;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use law::{CountLaw, CountSampler, MassTable, ZLaw, MASS_TAIL_TOL};
pub use renewal::{renewal_inverse, InterArrival, ScalarCgf, TabulatedCgf};

use crate::dual::ExtendedReal;
use crate::error::{Error, Result};
use crate::numeric::{dilog_unit, integrate};
use crate::special::MIN_NU;
use crate::variational::{self, Conjugate, ConjugateTarget, OptimizerSettings};
use law::{log_bernoulli_mgf, tilt_bernoulli};

/// Quadrature tolerance for cumulative intensities and Bernoulli profiles.
pub const QUADRATURE_TOL: f64 = 1e-10;
const PROFILE_TOL: f64 = 1e-13;
/// Probe grid used by [`CountingModel::validate`].
pub const PROBE_GRID: [f64; 9] = [-10.0, -5.0, -2.0, -0.5, 0.0, 0.5, 2.0, 5.0, 10.0];
/// Draws used for Monte Carlo renewal means.
pub const RENEWAL_MEAN_REPS: usize = 20_000;
const RENEWAL_MEAN_SEED: u64 = 0x5eed_0001;

/// A user-supplied intensity `s ↦ λ(s)`.
#[derive(Clone)]
pub struct IntensityFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl fmt::Debug for IntensityFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IntensityFn(..)")
    }
}

impl PartialEq for IntensityFn {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntensityShape {
    Constant(f64),
    /// `base + amplitude·sin(2πs/period)`.
    Periodic {
        base: f64,
        amplitude: f64,
        period: f64,
    },
    /// `base + boost·e^{−s/scale}`.
    DecayingBoost {
        base: f64,
        boost: f64,
        scale: f64,
    },
    /// Arbitrary intensity with long-run average `limit`.
    Custom {
        limit: f64,
        func: IntensityFn,
    },
}

/// Intensity of a Poisson process with its cumulative integral cached on the
/// integers.
#[derive(Clone)]
pub struct Intensity {
    shape: IntensityShape,
    cumulative: Arc<Mutex<Vec<f64>>>,
}

impl fmt::Debug for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.shape.fmt(f)
    }
}

impl PartialEq for Intensity {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
    }
}

impl Intensity {
    pub fn new(shape: IntensityShape) -> Result<Self> {
        let ok = match &shape {
            IntensityShape::Constant(r) => *r > 0.0 && r.is_finite(),
            IntensityShape::Periodic {
                base,
                amplitude,
                period,
            } => *base > 0.0 && *amplitude >= 0.0 && amplitude <= base && *period > 0.0,
            IntensityShape::DecayingBoost { base, boost, scale } => {
                *base > 0.0 && *boost >= 0.0 && *scale > 0.0
            }
            IntensityShape::Custom { limit, .. } => *limit > 0.0 && limit.is_finite(),
        };
        if !ok {
            return Err(Error::Validation(format!(
                "intensity {shape:?} must be non-negative with a positive long-run rate"
            )));
        }
        Ok(Self {
            shape,
            cumulative: Arc::new(Mutex::new(vec![0.0])),
        })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(IntensityShape::Constant(rate))
    }

    pub fn shape(&self) -> &IntensityShape {
        &self.shape
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self.shape, IntensityShape::Constant(_))
    }

    pub fn rate(&self, s: f64) -> f64 {
        match &self.shape {
            IntensityShape::Constant(r) => *r,
            IntensityShape::Periodic {
                base,
                amplitude,
                period,
            } => base + amplitude * (std::f64::consts::TAU * s / period).sin(),
            IntensityShape::DecayingBoost { base, boost, scale } => {
                base + boost * (-s / scale).exp()
            }
            IntensityShape::Custom { func, .. } => (func.0)(s),
        }
    }

    /// `λ̃ = lim (1/n) ∫_0^n λ(s) ds`.
    pub fn limit(&self) -> f64 {
        match &self.shape {
            IntensityShape::Constant(r) => *r,
            IntensityShape::Periodic { base, .. } | IntensityShape::DecayingBoost { base, .. } => {
                *base
            }
            IntensityShape::Custom { limit, .. } => *limit,
        }
    }

    /// `∫_0^n λ(s) ds`.
    pub fn cumulative(&self, n: u64) -> f64 {
        if let IntensityShape::Constant(r) = self.shape {
            return r * n as f64;
        }
        let mut cache = self.cumulative.lock().unwrap_or_else(|e| e.into_inner());
        while cache.len() <= n as usize {
            let k = (cache.len() - 1) as f64;
            let piece = integrate(&|s| self.rate(s), k, k + 1.0, QUADRATURE_TOL);
            let last = *cache.last().expect("seeded with zero");
            cache.push(last + piece);
        }
        cache[n as usize]
    }
}

/// Success probabilities of a Bernoulli sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BernoulliProfile {
    /// Every trial succeeds with probability `p`.
    Constant { p: f64 },
    /// `p(x) = e^{−λcx}` at `x_{j,n} = (j−1)/n`, so the points fill `[0,1]`.
    Runs { lambda: f64, c: f64 },
}

impl BernoulliProfile {
    pub fn p_at(&self, x: f64) -> f64 {
        match *self {
            BernoulliProfile::Constant { p } => p,
            BernoulliProfile::Runs { lambda, c } => (-lambda * c * x).exp(),
        }
    }

    /// Probabilities of the `n` trials at stage `n`.
    pub fn probs(&self, n: u64) -> Vec<f64> {
        (0..n).map(|j| self.p_at(j as f64 / n as f64)).collect()
    }

    fn average<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        match *self {
            BernoulliProfile::Constant { p } => g(p),
            BernoulliProfile::Runs { .. } => integrate(&|x| g(self.p_at(x)), 0.0, 1.0, PROFILE_TOL),
        }
    }
}

/// A counting process family.
#[derive(Debug, Clone, PartialEq)]
pub enum CountingModel {
    /// `N_n = Z_1 + … + Z_n` with i.i.d. `Z_i`.
    IidSum {
        z: ZLaw,
    },
    Poisson {
        intensity: Intensity,
    },
    /// Alternative fractional Poisson process with `E[e^{ηN_n}] = E_{ν,1}(e^ηλn^ν)/E_{ν,1}(λn^ν)`.
    FractionalPoisson {
        nu: f64,
        lambda: f64,
    },
    BernoulliSum {
        profile: BernoulliProfile,
    },
    /// `N_n = #{k ≥ 1 : T_1 + … + T_k ≤ n}`.
    Renewal {
        inter_arrival: InterArrival,
    },
}

/// `Λ_N′(0)`, `Λ_N″(0)` and `Λ_N(−∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingDerivatives {
    pub d1: f64,
    pub d2: f64,
    pub lambda_at_minus_inf: ExtendedReal,
}

/// A value with its Monte Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl CountingModel {
    pub fn poisson(rate: f64) -> Result<Self> {
        Self::checked(CountingModel::Poisson {
            intensity: Intensity::constant(rate)?,
        })
    }

    pub fn poisson_inhomogeneous(shape: IntensityShape) -> Result<Self> {
        Self::checked(CountingModel::Poisson {
            intensity: Intensity::new(shape)?,
        })
    }

    pub fn fractional_poisson(nu: f64, lambda: f64) -> Result<Self> {
        Self::checked(CountingModel::FractionalPoisson { nu, lambda })
    }

    pub fn bernoulli_constant(p: f64) -> Result<Self> {
        Self::checked(CountingModel::BernoulliSum {
            profile: BernoulliProfile::Constant { p },
        })
    }

    pub fn bernoulli_runs(lambda: f64, c: f64) -> Result<Self> {
        Self::checked(CountingModel::BernoulliSum {
            profile: BernoulliProfile::Runs { lambda, c },
        })
    }

    pub fn iid_sum(z: ZLaw) -> Result<Self> {
        Self::checked(CountingModel::IidSum { z })
    }

    pub fn renewal(inter_arrival: InterArrival) -> Result<Self> {
        Self::checked(CountingModel::Renewal { inter_arrival })
    }

    pub fn renewal_exponential(rate: f64) -> Result<Self> {
        Self::renewal(InterArrival::Exponential { rate })
    }

    fn checked(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CountingModel::IidSum { .. } => "iid-sum",
            CountingModel::Poisson { .. } => "poisson",
            CountingModel::FractionalPoisson { .. } => "fractional-poisson",
            CountingModel::BernoulliSum { .. } => "bernoulli-sum",
            CountingModel::Renewal { .. } => "renewal",
        }
    }

    /// Checks parameter domains, then that `Λ_N` is finite and non-decreasing
    /// on [`PROBE_GRID`] with `Λ_N(0) = 0`.
    pub fn validate(&self) -> Result<()> {
        match self {
            CountingModel::IidSum { z } => z.validate()?,
            CountingModel::Poisson { .. } => {}
            CountingModel::FractionalPoisson { nu, lambda } => {
                if !(*nu > 0.0 && *nu <= 1.0) {
                    return Err(Error::Validation(format!("nu = {nu} must lie in (0, 1]")));
                }
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::Validation(format!(
                        "lambda = {lambda} must be positive"
                    )));
                }
            }
            CountingModel::BernoulliSum { profile } => match *profile {
                BernoulliProfile::Constant { p } if !(0.0..=1.0).contains(&p) => {
                    return Err(Error::Validation(format!("p = {p} must lie in [0, 1]")))
                }
                BernoulliProfile::Runs { lambda, c }
                    if !(lambda > 0.0 && c > 0.0 && lambda.is_finite() && c.is_finite()) =>
                {
                    return Err(Error::Validation(format!(
                        "runs profile needs lambda = {lambda} > 0 and c = {c} > 0"
                    )))
                }
                _ => {}
            },
            CountingModel::Renewal { inter_arrival } => inter_arrival.validate()?,
        }
        let mut prev = f64::NEG_INFINITY;
        for eta in PROBE_GRID {
            let v = self.cgf_n_limit(eta)?;
            if !v.is_finite() {
                return Err(Error::Validation(format!("Λ_N({eta}) is not finite")));
            }
            if v < prev - 1e-12 * prev.abs().max(1.0) {
                return Err(Error::Validation(format!("Λ_N decreases before η = {eta}")));
            }
            if eta == 0.0 && v.abs() > 1e-12 {
                return Err(Error::Validation(format!("Λ_N(0) = {v}, not 0")));
            }
            prev = v;
        }
        Ok(())
    }

    /// `Λ_N(η)`.
    pub fn cgf_n_limit(&self, eta: f64) -> Result<f64> {
        Ok(self.cgf_n_limit_with_derivatives(eta)?.0)
    }

    /// `(Λ_N(η), Λ_N′(η), Λ_N″(η))`.
    pub fn cgf_n_limit_with_derivatives(&self, eta: f64) -> Result<(f64, f64, f64)> {
        if !eta.is_finite() {
            return Err(Error::InvalidValue(format!("eta = {eta} must be finite")));
        }
        Ok(match self {
            CountingModel::IidSum { z } => {
                let (m, v) = z.tilted_moments(eta);
                (z.log_mgf(eta), m, v)
            }
            CountingModel::Poisson { intensity } => {
                let l = intensity.limit();
                let e = eta.exp();
                (l * eta.exp_m1(), l * e, l * e)
            }
            CountingModel::FractionalPoisson { nu, lambda } => {
                let l = lambda.powf(1.0 / nu);
                let e = (eta / nu).exp();
                (l * (eta / nu).exp_m1(), l * e / nu, l * e / (nu * nu))
            }
            CountingModel::BernoulliSum { profile } => {
                let v = profile.average(|p| log_bernoulli_mgf(p, eta));
                let d1 = profile.average(|p| tilt_bernoulli(p, eta));
                let d2 = profile.average(|p| {
                    let q = tilt_bernoulli(p, eta);
                    q * (1.0 - q)
                });
                (v, d1, d2)
            }
            CountingModel::Renewal { inter_arrival } => {
                let r = renewal_inverse(inter_arrival, -eta)?;
                let k1 = inter_arrival.derivative(r);
                let k2 = inter_arrival.second_derivative(r);
                (-r, 1.0 / k1, k2 / (k1 * k1 * k1))
            }
        })
    }

    /// `Λ_N(−∞)`, from the closed form of each family.
    pub fn lambda_at_minus_infinity(&self) -> ExtendedReal {
        let v = match self {
            CountingModel::IidSum { z } => z.log_prob_zero(),
            CountingModel::Poisson { intensity } => -intensity.limit(),
            CountingModel::FractionalPoisson { nu, lambda } => -lambda.powf(1.0 / nu),
            CountingModel::BernoulliSum { profile } => match *profile {
                BernoulliProfile::Constant { p } => (-p).ln_1p(),
                BernoulliProfile::Runs { lambda, c } => {
                    // ∫_0^1 log(1 − e^{−bx}) dx = −(π²/6 − Li₂(e^{−b}))/b
                    let b = lambda * c;
                    -(std::f64::consts::PI.powi(2) / 6.0 - dilog_unit((-b).exp())) / b
                }
            },
            CountingModel::Renewal { inter_arrival } => -inter_arrival.upper_bound(),
        };
        if v == f64::NEG_INFINITY {
            ExtendedReal::NegInf
        } else {
            ExtendedReal::Finite(v)
        }
    }

    pub fn derivs_at_zero(&self) -> Result<CountingDerivatives> {
        let (d1, d2) = match self {
            CountingModel::BernoulliSum {
                profile: BernoulliProfile::Runs { lambda, c },
            } => {
                let b = lambda * c;
                let m1 = -(-b).exp_m1() / b;
                let m2 = -(-2.0 * b).exp_m1() / (2.0 * b);
                (m1, m1 - m2)
            }
            _ => {
                let (_, d1, d2) = self.cgf_n_limit_with_derivatives(0.0)?;
                (d1, d2)
            }
        };
        Ok(CountingDerivatives {
            d1,
            d2,
            lambda_at_minus_inf: self.lambda_at_minus_infinity(),
        })
    }

    /// Exact law of `N_n`.
    pub fn law_at(&self, n: u64) -> Result<CountLaw> {
        if n == 0 {
            return Err(Error::InvalidValue("n must be at least 1".into()));
        }
        Ok(match self {
            CountingModel::IidSum { z } => CountLaw::IidSum { n, z: z.clone() },
            CountingModel::Poisson { intensity } => CountLaw::Poisson {
                mean: intensity.cumulative(n),
            },
            CountingModel::FractionalPoisson { nu, lambda } => {
                check_nu(*nu)?;
                CountLaw::MassTable(MassTable::fractional(*nu, lambda * (n as f64).powf(*nu))?)
            }
            CountingModel::BernoulliSum { profile } => CountLaw::Bernoulli {
                probs: profile.probs(n),
            },
            CountingModel::Renewal { inter_arrival } => CountLaw::Renewal {
                n,
                inter_arrival: inter_arrival.clone(),
            },
        })
    }

    /// `(1/n) log E[e^{ηN_n}]`.
    pub fn cgf_n_finite(&self, n: u64, eta: f64) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidValue("n must be at least 1".into()));
        }
        let log_mgf = match self {
            CountingModel::FractionalPoisson { nu, lambda } => {
                check_nu(*nu)?;
                let x = lambda * (n as f64).powf(*nu);
                crate::special::log_mittag_leffler_ratio(*nu, x * eta.exp(), x)?
            }
            CountingModel::Renewal { .. } => {
                return Err(Error::Unsupported(
                    "renewal counts have no closed finite-n cumulant generating function; sample instead"
                        .into(),
                ))
            }
            _ => self.law_at(n)?.log_mgf(eta)?,
        };
        Ok(log_mgf / n as f64)
    }

    /// `E[N_n]`, exact except for renewal processes, which are simulated.
    pub fn mean_n(&self, n: u64) -> Result<Estimate> {
        match self {
            CountingModel::Renewal { .. } => {
                self.mean_n_monte_carlo(n, RENEWAL_MEAN_REPS, RENEWAL_MEAN_SEED)
            }
            CountingModel::FractionalPoisson { nu, lambda } => {
                check_nu(*nu)?;
                let x = lambda * (n as f64).powf(*nu);
                let l = x.ln() - nu.ln() + crate::special::log_mittag_leffler(*nu, *nu, x)?
                    - crate::special::log_mittag_leffler(*nu, 1.0, x)?;
                Ok(Estimate {
                    value: l.exp(),
                    std_err: 0.0,
                })
            }
            _ => Ok(Estimate {
                value: self.law_at(n)?.mean()?,
                std_err: 0.0,
            }),
        }
    }

    /// Sample mean of `reps` draws of `N_n`.
    pub fn mean_n_monte_carlo(&self, n: u64, reps: usize, seed: u64) -> Result<Estimate> {
        let sampler = self.law_at(n)?.sampler()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<f64> = (0..reps).map(|_| sampler.sample(&mut rng) as f64).collect();
        let m = draws.iter().sum::<f64>() / reps as f64;
        let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0).max(1.0);
        Ok(Estimate {
            value: m,
            std_err: (v / reps as f64).sqrt(),
        })
    }

    /// `Var[N_n]`; unsupported for renewal processes.
    pub fn var_n(&self, n: u64) -> Result<f64> {
        self.law_at(n)?.variance()
    }

    /// One draw of `N_n`.
    pub fn sample_n<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Result<u64> {
        Ok(self.law_at(n)?.sampler()?.sample(rng))
    }

    /// Right end of the range of `N_n/n` with `Λ_N*` at that point, for
    /// families where `N_n ≤ c·n`.
    fn upper_edge(&self) -> Option<(f64, f64)> {
        match self {
            CountingModel::IidSum { z } => Some((z.max_value()? as f64, -z.log_prob_max()?)),
            CountingModel::BernoulliSum { profile } => match *profile {
                BernoulliProfile::Constant { p } => Some((1.0, -p.ln())),
                BernoulliProfile::Runs { lambda, c } => Some((1.0, 0.5 * lambda * c)),
            },
            _ => None,
        }
    }

    /// `Λ_N*(y) = sup_η {ηy − Λ_N(η)}`.
    pub fn rate_n(&self, y: f64) -> Result<ExtendedReal> {
        self.rate_n_with(y, &OptimizerSettings::default())
    }

    pub fn rate_n_with(&self, y: f64, settings: &OptimizerSettings) -> Result<ExtendedReal> {
        if !y.is_finite() {
            return Err(Error::InvalidValue(format!("y = {y} must be finite")));
        }
        if y == 0.0 {
            return Ok(self.lambda_at_minus_infinity().neg());
        }
        if let Some((top, at_top)) = self.upper_edge() {
            if y > top {
                return Ok(ExtendedReal::PosInf);
            }
            if y == top {
                return ExtendedReal::from_f64(at_top);
            }
        }
        match variational::legendre_transform(&CountingCgf(self), &[y], settings)? {
            Conjugate::Unbounded => Ok(ExtendedReal::PosInf),
            Conjugate::Attained { value, .. } => Ok(ExtendedReal::Finite(value.max(0.0))),
        }
    }

    /// The maximizer η* of `ηy − Λ_N(η)` when finite.
    pub fn rate_n_argmax(&self, y: f64) -> Result<Option<f64>> {
        if y <= 0.0 {
            return Ok(None);
        }
        match variational::legendre_transform(
            &CountingCgf(self),
            &[y],
            &OptimizerSettings::default(),
        )? {
            Conjugate::Unbounded => Ok(None),
            Conjugate::Attained { argmax, .. } => Ok(Some(argmax[0])),
        }
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if nu < MIN_NU {
        return Err(Error::Unsupported(format!(
            "finite-n fractional Poisson quantities need nu ≥ {MIN_NU}, got {nu}"
        )));
    }
    Ok(())
}

/// `Λ_N` as a one-dimensional conjugation target.
pub struct CountingCgf<'a>(pub &'a CountingModel);

impl ConjugateTarget for CountingCgf<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, p: &[f64]) -> Result<f64> {
        self.0.cgf_n_limit(p[0])
    }

    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.0.cgf_n_limit_with_derivatives(p[0])?.1])
    }

    fn hessian(&self, p: &[f64]) -> Option<Result<nalgebra::DMatrix<f64>>> {
        Some(
            self.0
                .cgf_n_limit_with_derivatives(p[0])
                .map(|(_, _, h)| nalgebra::DMatrix::from_element(1, 1, h)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn limit_cgf_examples() {
        assert_eq!(
            CountingModel::poisson(1.0)
                .unwrap()
                .cgf_n_limit(0.0)
                .unwrap(),
            0.0
        );
        let fp = CountingModel::fractional_poisson(1.0, 2.0).unwrap();
        assert!(close(fp.cgf_n_limit(1.0).unwrap(), 2.0 * (E - 1.0), 1e-12));
        let r = CountingModel::renewal_exponential(2.0).unwrap();
        assert!(close(r.cgf_n_limit(1.0).unwrap(), 2.0 * (E - 1.0), 1e-12));
    }

    #[test]
    fn derivative_examples() {
        let d = CountingModel::fractional_poisson(0.5, 1.0)
            .unwrap()
            .derivs_at_zero()
            .unwrap();
        assert!(close(d.d1, 2.0, 1e-14) && close(d.d2, 4.0, 1e-14));
        let d = CountingModel::poisson(3.0)
            .unwrap()
            .derivs_at_zero()
            .unwrap();
        assert!(close(d.d1, 3.0, 1e-14) && close(d.d2, 3.0, 1e-14));
        assert_eq!(d.lambda_at_minus_inf, ExtendedReal::Finite(-3.0));
        let d = CountingModel::bernoulli_constant(0.5)
            .unwrap()
            .derivs_at_zero()
            .unwrap();
        assert!(close(d.d1, 0.5, 1e-15) && close(d.d2, 0.25, 1e-15));
    }

    #[test]
    fn runs_profile_closed_forms_match_quadrature() {
        let m = CountingModel::bernoulli_runs(1.5, 0.8).unwrap();
        let d = m.derivs_at_zero().unwrap();
        let (_, q1, q2) = m.cgf_n_limit_with_derivatives(0.0).unwrap();
        assert!(close(d.d1, q1, 1e-11) && close(d.d2, q2, 1e-11));
        let far = m.cgf_n_limit(-40.0).unwrap();
        assert!(close(d.lambda_at_minus_inf.to_f64(), far, 1e-6), "{far}");
    }

    #[test]
    fn finite_cgf_examples() {
        let z = ZLaw::Finite {
            values: vec![0, 1],
            probs: vec![0.5, 0.5],
        };
        let m = CountingModel::iid_sum(z).unwrap();
        for n in [1, 7] {
            let v = m.cgf_n_finite(n, 0.7).unwrap();
            assert!(close(v, (0.5 + 0.5 * 0.7f64.exp()).ln(), 1e-14));
        }
        let p = CountingModel::poisson(2.5).unwrap();
        assert!(close(
            p.cgf_n_finite(10, 0.3).unwrap(),
            2.5 * 0.3f64.exp_m1(),
            1e-14
        ));
        let fp = CountingModel::fractional_poisson(0.5, 1.0).unwrap();
        assert_eq!(fp.cgf_n_finite(100, 0.0).unwrap(), 0.0);
        assert!(matches!(
            CountingModel::renewal_exponential(1.0)
                .unwrap()
                .cgf_n_finite(5, 0.1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn mean_examples() {
        assert_eq!(
            CountingModel::poisson(1.0)
                .unwrap()
                .mean_n(7)
                .unwrap()
                .value,
            7.0
        );
        let z = ZLaw::Finite {
            values: vec![0, 1],
            probs: vec![0.5, 0.5],
        };
        assert_eq!(
            CountingModel::iid_sum(z).unwrap().mean_n(10).unwrap().value,
            5.0
        );
        // 20·E_{.5,.5}(10)/E_{.5,1}(10), extended-precision series
        let fp = CountingModel::fractional_poisson(0.5, 1.0).unwrap();
        let m = fp.mean_n(100).unwrap().value;
        assert!(close(m, 200.0, 1e-9), "{m}");
    }

    #[test]
    fn inhomogeneous_poisson_converges() {
        let m = CountingModel::poisson_inhomogeneous(IntensityShape::DecayingBoost {
            base: 1.0,
            boost: 2.0,
            scale: 3.0,
        })
        .unwrap();
        let Some(CountingModel::Poisson { intensity }) = Some(&m) else {
            unreachable!()
        };
        let exact = 10.0 + 6.0 * (1.0 - (-10.0f64 / 3.0).exp());
        assert!(close(intensity.cumulative(10), exact, 1e-9));
        for eta in [-1.0, -0.1, 0.1, 1.0] {
            let lim = m.cgf_n_limit(eta).unwrap();
            let errs: Vec<f64> = [10, 100, 1000]
                .iter()
                .map(|&n| (m.cgf_n_finite(n, eta).unwrap() - lim).abs())
                .collect();
            assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        }
    }

    #[test]
    fn renewal_mean_by_simulation() {
        let m = CountingModel::renewal_exponential(1.5).unwrap();
        let e = m.mean_n(200).unwrap();
        assert!(
            (e.value / 200.0 - 1.5).abs() < 4.0 * e.std_err / 200.0,
            "{e:?}"
        );
    }

    #[test]
    fn rate_examples() {
        let m = CountingModel::poisson(1.0).unwrap();
        assert!(close(m.rate_n(1.0).unwrap().to_f64(), 0.0, 1e-12));
        let v = m.rate_n(2.0).unwrap().to_f64();
        assert!(close(v, 2.0 * 2f64.ln() - 1.0, 1e-10), "{v}");
        assert_eq!(m.rate_n(-0.5).unwrap(), ExtendedReal::PosInf);
        assert_eq!(m.rate_n(0.0).unwrap(), ExtendedReal::Finite(1.0));
    }

    #[test]
    fn degenerate_bernoulli_samples_zero() {
        let m = CountingModel::bernoulli_constant(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(m.sample_n(12, &mut rng).unwrap(), 0);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(CountingModel::fractional_poisson(1.5, 1.0).is_err());
        assert!(CountingModel::poisson(0.0).is_err());
        assert!(CountingModel::bernoulli_constant(1.2).is_err());
        let table = TabulatedCgf::new(vec![-1.0, 0.0, 1.0], vec![-0.5, 0.0, 1.0]).unwrap();
        assert!(CountingModel::renewal(InterArrival::Tabulated(table)).is_ok());
    }
}
