//! Exact laws of `N_n` at a fixed `n`, with their tilts and samplers.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp, Gamma, Poisson};

use super::renewal::InterArrival;
use crate::error::{Error, Result};
use crate::numeric::{ln_gamma, log_sum_exp};
use crate::special::{log_mittag_leffler, log_mittag_leffler_ratio};

/// Tail mass below which the fractional Poisson table is truncated.
pub const MASS_TAIL_TOL: f64 = 1e-12;

/// `log(1 + p(e^s − 1))` without overflow for large `s`.
pub(crate) fn log_bernoulli_mgf(p: f64, s: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else if s > 0.0 {
        s + (p + (1.0 - p) * (-s).exp()).ln()
    } else {
        let d = p * s.exp_m1();
        if d < -0.5 {
            ((1.0 - p) + p * s.exp()).ln()
        } else {
            d.ln_1p()
        }
    }
}

/// Success probability after tilting by `e^{s·1}`.
pub(crate) fn tilt_bernoulli(p: f64, s: f64) -> f64 {
    if p == 0.0 || p == 1.0 {
        return p;
    }
    1.0 / (1.0 + (1.0 - p) / p * (-s).exp())
}

/// Law of the increments `Z_i` of an i.i.d. counting sum.
#[derive(Debug, Clone, PartialEq)]
pub enum ZLaw {
    Finite { values: Vec<u64>, probs: Vec<f64> },
    Poisson { mean: f64 },
}

impl ZLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            ZLaw::Finite { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::Validation(
                        "Z law needs matching non-empty values and probabilities".into(),
                    ));
                }
                if probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
                    return Err(Error::Validation(
                        "Z probabilities must lie in (0, 1]".into(),
                    ));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "Z probabilities sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
            ZLaw::Poisson { mean } if !(*mean > 0.0 && mean.is_finite()) => Err(Error::Validation(
                format!("Poisson Z mean {mean} must be positive"),
            )),
            ZLaw::Poisson { .. } => Ok(()),
        }
    }

    /// `log E[e^{ηZ}]`.
    pub fn log_mgf(&self, eta: f64) -> f64 {
        match self {
            ZLaw::Finite { values, probs } => {
                let logs: Vec<f64> = values
                    .iter()
                    .zip(probs)
                    .map(|(&v, &p)| p.ln() + eta * v as f64)
                    .collect();
                log_sum_exp(&logs)
            }
            ZLaw::Poisson { mean } => mean * eta.exp_m1(),
        }
    }

    /// Mean and variance of the law tilted by `e^{ηZ}`.
    pub fn tilted_moments(&self, eta: f64) -> (f64, f64) {
        match self {
            ZLaw::Finite { values, .. } => {
                let w = self.tilt_weights(eta);
                let m: f64 = values.iter().zip(&w).map(|(&v, w)| w * v as f64).sum();
                let v: f64 = values
                    .iter()
                    .zip(&w)
                    .map(|(&v, w)| w * (v as f64 - m).powi(2))
                    .sum();
                (m, v)
            }
            ZLaw::Poisson { mean } => {
                let m = mean * eta.exp();
                (m, m)
            }
        }
    }

    fn tilt_weights(&self, eta: f64) -> Vec<f64> {
        match self {
            ZLaw::Finite { values, probs } => {
                let logs: Vec<f64> = values
                    .iter()
                    .zip(probs)
                    .map(|(&v, &p)| p.ln() + eta * v as f64)
                    .collect();
                let norm = log_sum_exp(&logs);
                logs.iter().map(|l| (l - norm).exp()).collect()
            }
            ZLaw::Poisson { .. } => Vec::new(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.tilted_moments(0.0).0
    }

    pub fn variance(&self) -> f64 {
        self.tilted_moments(0.0).1
    }

    /// `log P(Z = 0)`, `-inf` when zero is not in the support.
    pub fn log_prob_zero(&self) -> f64 {
        match self {
            ZLaw::Finite { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(&v, _)| v == 0)
                .map(|(_, &p)| p)
                .sum::<f64>()
                .ln(),
            ZLaw::Poisson { mean } => -mean,
        }
    }

    pub fn max_value(&self) -> Option<u64> {
        match self {
            ZLaw::Finite { values, .. } => values.iter().copied().max(),
            ZLaw::Poisson { .. } => None,
        }
    }

    /// `log P(Z = max Z)` for bounded laws.
    pub fn log_prob_max(&self) -> Option<f64> {
        let top = self.max_value()?;
        let ZLaw::Finite { values, probs } = self else {
            return None;
        };
        let p: f64 = values
            .iter()
            .zip(probs)
            .filter(|(&v, _)| v == top)
            .map(|(_, &p)| p)
            .sum();
        Some(p.ln())
    }

    pub fn tilted(&self, s: f64) -> Result<ZLaw> {
        match self {
            ZLaw::Finite { values, .. } => {
                let mut w = self.tilt_weights(s);
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= total);
                if w.iter().any(|&x| x <= 0.0) {
                    return Err(Error::InvalidValue(
                        "tilt too strong: a Z value lost all of its mass".into(),
                    ));
                }
                Ok(ZLaw::Finite {
                    values: values.clone(),
                    probs: w,
                })
            }
            ZLaw::Poisson { mean } => Ok(ZLaw::Poisson {
                mean: mean * s.exp(),
            }),
        }
    }
}

/// Law of the count `N_n` for one fixed `n`.
#[derive(Debug, Clone, PartialEq)]
pub enum CountLaw {
    Poisson { mean: f64 },
    IidSum { n: u64, z: ZLaw },
    Bernoulli { probs: Vec<f64> },
    MassTable(MassTable),
    Renewal { n: u64, inter_arrival: InterArrival },
}

/// Fractional Poisson mass `p_k = x^k / (Γ(νk+1) E_{ν,1}(x))`, truncated once
/// the remaining tail is below [`MASS_TAIL_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct MassTable {
    nu: f64,
    x: f64,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl MassTable {
    pub fn fractional(nu: f64, x: f64) -> Result<Self> {
        let log_norm = log_mittag_leffler(nu, 1.0, x)?;
        let mut pmf = Vec::new();
        if x == 0.0 {
            pmf.push(1.0);
        } else {
            let lx = x.ln();
            let log_term = |k: usize| k as f64 * lx - ln_gamma(nu * k as f64 + 1.0) - log_norm;
            let mut k = 0;
            let mut lt = log_term(0);
            loop {
                pmf.push(lt.exp());
                let next = log_term(k + 1);
                // Terms are log-concave, so past the mode the tail is bounded
                // by a geometric series with the current ratio.
                if next < lt {
                    let ratio = (next - lt).exp();
                    let tail = next.exp() / (1.0 - ratio);
                    if tail < MASS_TAIL_TOL {
                        break;
                    }
                }
                k += 1;
                lt = next;
                if k > 50_000_000 {
                    return Err(Error::EnumerationTooLarge {
                        terms: k as f64,
                        limit: 5e7,
                    });
                }
            }
        }
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { nu, x, pmf, cdf })
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random::<f64>() * self.cdf.last().copied().unwrap_or(1.0);
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.pmf.len() - 1) as u64
    }
}

impl CountLaw {
    /// `log E[e^{sN_n}]`.
    pub fn log_mgf(&self, s: f64) -> Result<f64> {
        match self {
            CountLaw::Poisson { mean } => Ok(mean * s.exp_m1()),
            CountLaw::IidSum { n, z } => Ok(*n as f64 * z.log_mgf(s)),
            CountLaw::Bernoulli { probs } => {
                Ok(probs.iter().map(|&p| log_bernoulli_mgf(p, s)).sum())
            }
            CountLaw::MassTable(t) => {
                if t.x == 0.0 {
                    return Ok(0.0);
                }
                log_mittag_leffler_ratio(t.nu, t.x * s.exp(), t.x)
            }
            CountLaw::Renewal { .. } => Err(Error::Unsupported(
                "renewal counts have no closed finite-n cumulant generating function".into(),
            )),
        }
    }

    pub fn mean(&self) -> Result<f64> {
        match self {
            CountLaw::Poisson { mean } => Ok(*mean),
            CountLaw::IidSum { n, z } => Ok(*n as f64 * z.mean()),
            CountLaw::Bernoulli { probs } => Ok(probs.iter().sum()),
            CountLaw::MassTable(t) => {
                if t.x == 0.0 {
                    return Ok(0.0);
                }
                let l = t.x.ln() - t.nu.ln() + log_mittag_leffler(t.nu, t.nu, t.x)?
                    - log_mittag_leffler(t.nu, 1.0, t.x)?;
                Ok(l.exp())
            }
            CountLaw::Renewal { .. } => Err(Error::Unsupported(
                "renewal counts have no exact finite-n mean; use Monte Carlo".into(),
            )),
        }
    }

    pub fn variance(&self) -> Result<f64> {
        match self {
            CountLaw::Poisson { mean } => Ok(*mean),
            CountLaw::IidSum { n, z } => Ok(*n as f64 * z.variance()),
            CountLaw::Bernoulli { probs } => Ok(probs.iter().map(|p| p * (1.0 - p)).sum()),
            CountLaw::MassTable(t) => {
                let total: f64 = t.pmf.iter().sum();
                let m: f64 = t
                    .pmf
                    .iter()
                    .enumerate()
                    .map(|(k, p)| k as f64 * p)
                    .sum::<f64>()
                    / total;
                Ok(t.pmf
                    .iter()
                    .enumerate()
                    .map(|(k, p)| p * (k as f64 - m).powi(2))
                    .sum::<f64>()
                    / total)
            }
            CountLaw::Renewal { .. } => Err(Error::Unsupported(
                "renewal counts have no exact finite-n variance".into(),
            )),
        }
    }

    /// The law tilted by `e^{sN_n}`.
    pub fn tilted(&self, s: f64) -> Result<CountLaw> {
        match self {
            CountLaw::Poisson { mean } => Ok(CountLaw::Poisson {
                mean: mean * s.exp(),
            }),
            CountLaw::IidSum { n, z } => Ok(CountLaw::IidSum {
                n: *n,
                z: z.tilted(s)?,
            }),
            CountLaw::Bernoulli { probs } => Ok(CountLaw::Bernoulli {
                probs: probs.iter().map(|&p| tilt_bernoulli(p, s)).collect(),
            }),
            CountLaw::MassTable(t) => Ok(CountLaw::MassTable(MassTable::fractional(
                t.nu,
                t.x * s.exp(),
            )?)),
            CountLaw::Renewal { .. } => Err(Error::Unsupported(
                "tilted sampling is not available for renewal counts".into(),
            )),
        }
    }

    /// Largest possible value of `N_n`, when bounded.
    pub fn max_count(&self) -> Option<u64> {
        match self {
            CountLaw::IidSum { n, z } => z.max_value().map(|m| m * n),
            CountLaw::Bernoulli { probs } => Some(probs.len() as u64),
            _ => None,
        }
    }

    /// Exact mass function on `0..=max_count` for bounded laws.
    pub fn bounded_pmf(&self) -> Result<Vec<f64>> {
        match self {
            CountLaw::Bernoulli { probs } => {
                let mut pmf = vec![1.0];
                for &p in probs {
                    let mut next = vec![0.0; pmf.len() + 1];
                    for (k, &q) in pmf.iter().enumerate() {
                        next[k] += q * (1.0 - p);
                        next[k + 1] += q * p;
                    }
                    pmf = next;
                }
                Ok(pmf)
            }
            CountLaw::IidSum {
                n,
                z: ZLaw::Finite { values, probs },
            } => {
                let mut pmf = vec![1.0];
                let top = *values.iter().max().expect("non-empty") as usize;
                for _ in 0..*n {
                    let mut next = vec![0.0; pmf.len() + top];
                    for (k, &q) in pmf.iter().enumerate() {
                        for (&v, &p) in values.iter().zip(probs) {
                            next[k + v as usize] += q * p;
                        }
                    }
                    pmf = next;
                }
                Ok(pmf)
            }
            _ => Err(Error::Unsupported(
                "exact enumeration needs a counting law with bounded support".into(),
            )),
        }
    }

    pub fn sampler(&self) -> Result<CountSampler> {
        Ok(match self {
            CountLaw::Poisson { mean } => CountSampler::Poisson(poisson_dist(*mean)?),
            CountLaw::IidSum {
                n,
                z: ZLaw::Poisson { mean },
            } => CountSampler::Poisson(poisson_dist(*n as f64 * mean)?),
            CountLaw::IidSum {
                n,
                z: ZLaw::Finite { values, probs },
            } => CountSampler::Multinomial {
                n: *n,
                values: values.clone(),
                probs: probs.clone(),
            },
            CountLaw::Bernoulli { probs } => CountSampler::Bernoulli(probs.clone()),
            CountLaw::MassTable(t) => CountSampler::Table(t.clone()),
            CountLaw::Renewal { n, inter_arrival } => {
                let horizon = *n as f64;
                match *inter_arrival {
                    InterArrival::Exponential { rate } => CountSampler::RenewalExp {
                        horizon,
                        dist: Exp::new(rate).map_err(|e| Error::InvalidValue(e.to_string()))?,
                    },
                    InterArrival::Gamma { shape, rate } => CountSampler::RenewalGamma {
                        horizon,
                        dist: Gamma::new(shape, 1.0 / rate)
                            .map_err(|e| Error::InvalidValue(e.to_string()))?,
                    },
                    InterArrival::Tabulated(_) => {
                        return Err(Error::Unsupported(
                            "a tabulated inter-arrival cumulant cannot be sampled".into(),
                        ))
                    }
                }
            }
        })
    }
}

fn poisson_dist(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::InvalidValue(format!("Poisson mean {mean}: {e}")))
}

/// A prepared sampler for one count law.
#[derive(Debug, Clone)]
pub enum CountSampler {
    Poisson(Option<Poisson<f64>>),
    Multinomial {
        n: u64,
        values: Vec<u64>,
        probs: Vec<f64>,
    },
    Bernoulli(Vec<f64>),
    Table(MassTable),
    RenewalExp {
        horizon: f64,
        dist: Exp<f64>,
    },
    RenewalGamma {
        horizon: f64,
        dist: Gamma<f64>,
    },
}

impl CountSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            CountSampler::Poisson(None) => 0,
            CountSampler::Poisson(Some(d)) => d.sample(rng) as u64,
            CountSampler::Multinomial { n, values, probs } => {
                let mut remaining = *n;
                let mut mass_left = 1.0;
                let mut total = 0;
                let last = values.len() - 1;
                for (i, (&v, &p)) in values.iter().zip(probs).enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let c = if i == last {
                        remaining
                    } else {
                        let q = (p / mass_left).clamp(0.0, 1.0);
                        Binomial::new(remaining, q)
                            .expect("valid binomial")
                            .sample(rng)
                    };
                    total += c * v;
                    remaining -= c;
                    mass_left -= p;
                }
                total
            }
            CountSampler::Bernoulli(probs) => {
                probs.iter().filter(|&&p| rng.random::<f64>() < p).count() as u64
            }
            CountSampler::Table(t) => t.sample(rng),
            CountSampler::RenewalExp { horizon, dist } => {
                renewal_count(*horizon, || dist.sample(rng))
            }
            CountSampler::RenewalGamma { horizon, dist } => {
                renewal_count(*horizon, || dist.sample(rng))
            }
        }
    }
}

fn renewal_count(horizon: f64, mut draw: impl FnMut() -> f64) -> u64 {
    let mut t = 0.0;
    let mut k = 0;
    loop {
        t += draw();
        if t > horizon {
            return k;
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fractional_mass_reproduces_mgf_ratio() {
        let t = MassTable::fractional(0.5, 10.0).unwrap();
        let law = CountLaw::MassTable(t.clone());
        let total: f64 = t.pmf().iter().sum();
        assert!((total - 1.0).abs() < 1e-11);
        let s = -0.5;
        let direct: f64 = t
            .pmf()
            .iter()
            .enumerate()
            .map(|(k, p)| p * (s * k as f64).exp())
            .sum::<f64>()
            .ln();
        assert!((direct - law.log_mgf(s).unwrap()).abs() < 1e-9);
        // tilting the table is the table at x·e^s
        for s in [0.1, 0.3] {
            let lm = law.log_mgf(s).unwrap();
            let CountLaw::MassTable(tilted) = law.tilted(s).unwrap() else {
                unreachable!()
            };
            for k in [150, 200, 260] {
                let want = (t.pmf()[k].ln() + s * k as f64 - lm).exp();
                assert!((tilted.pmf()[k] - want).abs() < 1e-10 * want, "s={s} k={k}");
            }
        }
        let m: f64 = t.pmf().iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        assert!((m - law.mean().unwrap()).abs() < 1e-8 * m);
    }

    #[test]
    fn bernoulli_pmf_and_tilt() {
        let law = CountLaw::Bernoulli {
            probs: vec![0.5; 6],
        };
        let pmf = law.bounded_pmf().unwrap();
        assert!((pmf[3] - 20.0 / 64.0).abs() < 1e-15);
        let t = law.tilted(2f64.ln()).unwrap();
        let CountLaw::Bernoulli { probs } = &t else {
            unreachable!()
        };
        assert!((probs[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((log_bernoulli_mgf(0.3, 800.0) - (800.0 + 0.3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn iid_pmf_convolves() {
        let z = ZLaw::Finite {
            values: vec![0, 2],
            probs: vec![0.25, 0.75],
        };
        let law = CountLaw::IidSum { n: 2, z };
        let pmf = law.bounded_pmf().unwrap();
        assert_eq!(pmf.len(), 5);
        assert!((pmf[2] - 2.0 * 0.25 * 0.75).abs() < 1e-15);
        assert!((pmf[4] - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn samplers_are_deterministic() {
        let law = CountLaw::MassTable(MassTable::fractional(0.7, 4.0).unwrap());
        let s = law.sampler().unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| s.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
    }
}
