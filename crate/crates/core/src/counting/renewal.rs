//! Inter-arrival laws of renewal counting processes and the inversion of
//! their cumulant generating function `κ_T`.

use crate::dual::ExtendedReal;
use crate::error::{Error, Result};

/// A convex, strictly increasing scalar CGF, finite on `(−∞, upper_bound)`.
pub trait ScalarCgf {
    /// `κ(r)`, `+inf` outside the finite domain.
    fn value(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;
    fn second_derivative(&self, r: f64) -> f64;
    /// Supremum of the finite domain (possibly `+inf`).
    fn upper_bound(&self) -> f64;
    /// `lim_{r→−∞} κ(r)`.
    fn at_minus_infinity(&self) -> ExtendedReal;
}

/// Inter-arrival time law `T`.
#[derive(Debug, Clone, PartialEq)]
pub enum InterArrival {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Tabulated(TabulatedCgf),
}

impl InterArrival {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InterArrival::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => Err(
                Error::Validation(format!("exponential rate {rate} must be positive")),
            ),
            InterArrival::Gamma { shape, rate }
                if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) =>
            {
                Err(Error::Validation(format!(
                    "gamma shape {shape} and rate {rate} must be positive"
                )))
            }
            _ => {
                if self.at_minus_infinity() != ExtendedReal::NegInf {
                    return Err(Error::Validation(
                        "renewal counting needs κ_T(−∞) = −∞".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn is_samplable(&self) -> bool {
        !matches!(self, InterArrival::Tabulated(_))
    }
}

impl ScalarCgf for InterArrival {
    fn value(&self, r: f64) -> f64 {
        match self {
            InterArrival::Exponential { rate } => gamma_cgf(1.0, *rate, r),
            InterArrival::Gamma { shape, rate } => gamma_cgf(*shape, *rate, r),
            InterArrival::Tabulated(t) => t.value(r),
        }
    }

    fn derivative(&self, r: f64) -> f64 {
        match self {
            InterArrival::Exponential { rate } => gamma_cgf_d(1.0, *rate, r, 1),
            InterArrival::Gamma { shape, rate } => gamma_cgf_d(*shape, *rate, r, 1),
            InterArrival::Tabulated(t) => t.derivative(r),
        }
    }

    fn second_derivative(&self, r: f64) -> f64 {
        match self {
            InterArrival::Exponential { rate } => gamma_cgf_d(1.0, *rate, r, 2),
            InterArrival::Gamma { shape, rate } => gamma_cgf_d(*shape, *rate, r, 2),
            InterArrival::Tabulated(t) => t.second_derivative(r),
        }
    }

    fn upper_bound(&self) -> f64 {
        match self {
            InterArrival::Exponential { rate } | InterArrival::Gamma { rate, .. } => *rate,
            InterArrival::Tabulated(_) => f64::INFINITY,
        }
    }

    fn at_minus_infinity(&self) -> ExtendedReal {
        match self {
            InterArrival::Exponential { .. } | InterArrival::Gamma { .. } => ExtendedReal::NegInf,
            InterArrival::Tabulated(t) => t.at_minus_infinity(),
        }
    }
}

/// `k log(λ/(λ−r))` for `r < λ`.
fn gamma_cgf(shape: f64, rate: f64, r: f64) -> f64 {
    if r >= rate {
        f64::INFINITY
    } else {
        -shape * (-r / rate).ln_1p()
    }
}

fn gamma_cgf_d(shape: f64, rate: f64, r: f64, order: i32) -> f64 {
    if r >= rate {
        return f64::INFINITY;
    }
    let d = rate - r;
    match order {
        1 => shape / d,
        _ => shape / (d * d),
    }
}

/// `κ_T` given by a table, interpolated by monotone cubic Hermite splines and
/// extended linearly beyond both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCgf {
    etas: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedCgf {
    pub fn new(etas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = etas.len();
        if n < 3 || values.len() != n {
            return Err(Error::Validation(
                "tabulated κ_T needs at least three (η, κ) pairs of equal length".into(),
            ));
        }
        if etas.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Validation("tabulated κ_T must be finite".into()));
        }
        if etas.windows(2).any(|w| w[1] <= w[0]) || values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "tabulated κ_T must be strictly increasing in η and in value".into(),
            ));
        }
        let Some(zero) = etas.iter().position(|&e| e == 0.0) else {
            return Err(Error::Validation("tabulated κ_T must contain η = 0".into()));
        };
        if values[zero].abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "tabulated κ_T(0) = {} but must be 0",
                values[zero]
            )));
        }
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (values[i + 1] - values[i]) / (etas[i + 1] - etas[i]))
            .collect();
        if secants
            .windows(2)
            .any(|w| w[1] < w[0] - 1e-12 * w[0].abs().max(1.0))
        {
            return Err(Error::Validation("tabulated κ_T must be convex".into()));
        }
        // Fritsch–Carlson slopes: harmonic mean of adjacent secants inside,
        // one-sided secants at the ends.
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            let (h0, h1) = (etas[i] - etas[i - 1], etas[i + 1] - etas[i]);
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            slopes[i] = (w1 + w2) / (w1 / a + w2 / b);
        }
        Ok(Self {
            etas,
            values,
            slopes,
        })
    }

    fn segment(&self, r: f64) -> Option<usize> {
        let n = self.etas.len();
        if r < self.etas[0] || r > self.etas[n - 1] {
            return None;
        }
        let i = self.etas.partition_point(|&e| e <= r).saturating_sub(1);
        Some(i.min(n - 2))
    }

    fn value(&self, r: f64) -> f64 {
        let n = self.etas.len();
        match self.segment(r) {
            None if r < self.etas[0] => self.values[0] + self.slopes[0] * (r - self.etas[0]),
            None => self.values[n - 1] + self.slopes[n - 1] * (r - self.etas[n - 1]),
            Some(i) => {
                let h = self.etas[i + 1] - self.etas[i];
                let t = (r - self.etas[i]) / h;
                let (t2, t3) = (t * t, t * t * t);
                (2.0 * t3 - 3.0 * t2 + 1.0) * self.values[i]
                    + (t3 - 2.0 * t2 + t) * h * self.slopes[i]
                    + (-2.0 * t3 + 3.0 * t2) * self.values[i + 1]
                    + (t3 - t2) * h * self.slopes[i + 1]
            }
        }
    }

    fn derivative(&self, r: f64) -> f64 {
        let n = self.etas.len();
        match self.segment(r) {
            None if r < self.etas[0] => self.slopes[0],
            None => self.slopes[n - 1],
            Some(i) => {
                let h = self.etas[i + 1] - self.etas[i];
                let t = (r - self.etas[i]) / h;
                let t2 = t * t;
                ((6.0 * t2 - 6.0 * t) * self.values[i]
                    + (3.0 * t2 - 4.0 * t + 1.0) * h * self.slopes[i]
                    + (-6.0 * t2 + 6.0 * t) * self.values[i + 1]
                    + (3.0 * t2 - 2.0 * t) * h * self.slopes[i + 1])
                    / h
            }
        }
    }

    /// Symmetric difference of the derivative; averages the one-sided second
    /// derivatives at knots.
    fn second_derivative(&self, r: f64) -> f64 {
        let step = 1e-5;
        (self.derivative(r + step) - self.derivative(r - step)) / (2.0 * step)
    }

    fn at_minus_infinity(&self) -> ExtendedReal {
        if self.slopes[0] > 0.0 {
            ExtendedReal::NegInf
        } else {
            ExtendedReal::Finite(self.values[0])
        }
    }
}

const MAX_BRACKET_STEPS: usize = 2000;

/// Solves `κ(r) = u` by geometric bracketing followed by safeguarded Newton.
pub fn renewal_inverse<K: ScalarCgf + ?Sized>(kappa: &K, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::NoRoot { target: u });
    }
    let ub = kappa.upper_bound();
    let mut lo = -1.0_f64;
    let mut steps = 0;
    while kappa.value(lo) > u {
        lo *= 2.0;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || !lo.is_finite() {
            return Err(Error::NoRoot { target: u });
        }
    }
    let mut hi = if ub > 1.0 { 1.0 } else { 0.5 * ub.max(0.0) };
    steps = 0;
    while kappa.value(hi) < u {
        lo = lo.max(hi);
        hi = if ub.is_finite() {
            hi + 0.5 * (ub - hi)
        } else {
            2.0 * hi.max(1.0)
        };
        steps += 1;
        if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
            return Err(Error::NoRoot { target: u });
        }
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..300 {
        let f = kappa.value(r) - u;
        if f == 0.0 {
            return Ok(r);
        }
        if f > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        let d = kappa.derivative(r);
        let newton = r - f / d;
        let next = if d.is_finite() && d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let width = hi - lo;
        if (next - r).abs() <= 4.0 * f64::EPSILON * r.abs().max(1e-300)
            || width <= f64::EPSILON * hi.abs().max(lo.abs())
        {
            return Ok(next);
        }
        r = next;
    }
    Ok(r)
}
