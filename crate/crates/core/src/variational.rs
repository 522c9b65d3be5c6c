//! Legendre–Fenchel transforms and the rate functions of the compound pair
//! `(S_{N_n}/n, N_n/n)`.
//!
//! * `I(x, y)`: the large deviation rate, both as the supremum over `(θ, η)`
//!   of `⟨θ,x⟩ + ηy − Λ_N(η + Λ_X(θ))` and in explicit form;
//! * `J1`, `J2`: the moderate deviation rates for centered summands and for
//!   the centered compound sum;
//! * the limits of means and covariances of the pair.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::counting::CountingModel;
use crate::dual::{
    apply_cov, dot, pair, same_dim, solve_cov, CovSolve, DualVector, ExtendedReal, PrimalVector,
};
use crate::error::{Error, Result};
use crate::summand::SummandModel;

/// Window of iterations over which the objective must keep increasing before
/// a run-away iterate is declared unbounded.
pub const UNBOUNDED_WINDOW: usize = 10;
/// Starting Levenberg-Marquardt damping, relative to the Hessian norm.
pub const INITIAL_DAMPING: f64 = 1e-3;
const MIN_DAMPING: f64 = 1e-12;
const DAMPING_TRIES: usize = 12;
/// Damped steps are capped at this multiple of `max(1, ‖p‖)`.
const MAX_STEP_RATIO: f64 = 10.0;
/// Distance from `(0, 0)` treated as the origin by the explicit rate.
pub const ORIGIN_TOL: f64 = 1e-10;
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const PINV_RTOL: f64 = 1e-12;

/// A convex function to conjugate.
pub trait ConjugateTarget {
    fn dim(&self) -> usize;
    fn value(&self, p: &[f64]) -> Result<f64>;
    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>>;
    /// Hessian, when cheap; enables Newton polishing.
    fn hessian(&self, _p: &[f64]) -> Option<Result<DMatrix<f64>>> {
        None
    }
}

/// A target built from closures.
pub struct FnTarget<F, G> {
    pub dim: usize,
    pub f: F,
    pub grad: G,
}

impl<F, G> ConjugateTarget for FnTarget<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, p: &[f64]) -> Result<f64> {
        Ok((self.f)(p))
    }

    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok((self.grad)(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub divergence_threshold: f64,
    pub initial_step: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            gradient_tolerance: 1e-9,
            divergence_threshold: 1e4,
            initial_step: 1.0,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && [
                self.gradient_tolerance,
                self.divergence_threshold,
                self.initial_step,
            ]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "optimizer settings must be positive: {self:?}"
            )))
        }
    }
}

/// Outcome of a conjugation.
#[derive(Debug, Clone, PartialEq)]
pub enum Conjugate {
    Attained { value: f64, argmax: Vec<f64> },
    Unbounded,
}

impl Conjugate {
    pub fn value(&self) -> ExtendedReal {
        match self {
            Conjugate::Attained { value, .. } => ExtendedReal::Finite(*value),
            Conjugate::Unbounded => ExtendedReal::PosInf,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn pinv_apply(h: DMatrix<f64>, g: &[f64]) -> Option<Vec<f64>> {
    let svd = h.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0 && smax.is_finite()) {
        return None;
    }
    let pinv = svd.pseudo_inverse(smax * PINV_RTOL).ok()?;
    let d = pinv * DVector::from_column_slice(g);
    Some(d.iter().copied().collect())
}

/// One Levenberg-Marquardt step `(H + μ‖H‖I)⁻¹ g`, raising `μ` until the
/// step increases the objective enough. Flat directions of `H` get long
/// steps, which is what drives unbounded problems past the divergence
/// threshold quickly.
#[allow(clippy::too_many_arguments)]
fn damped_newton<O, A>(
    objective: &O,
    ascent: &A,
    p: &[f64],
    value: f64,
    grad: &[f64],
    h: DMatrix<f64>,
    damping: &mut f64,
    slack: f64,
) -> Result<Option<(Vec<f64>, f64, Vec<f64>)>>
where
    O: Fn(&[f64]) -> Result<f64>,
    A: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let scale = h.norm();
    if !scale.is_finite() {
        return Ok(None);
    }
    let gn = norm(grad);
    let n = p.len();
    for _ in 0..DAMPING_TRIES {
        let mu = *damping * scale.max(f64::MIN_POSITIVE);
        let a = &h + DMatrix::identity(n, n) * mu;
        let Some(mut dir) = pinv_apply(a, grad) else {
            return Ok(None);
        };
        let cap = MAX_STEP_RATIO * norm(p).max(1.0);
        let len = norm(&dir);
        if len > cap {
            dir.iter_mut().for_each(|d| *d *= cap / len);
        }
        let gain = dot(grad, &dir);
        if gain > 0.0 && dir.iter().all(|d| d.is_finite()) {
            let cand: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a + d).collect();
            let v = objective(&cand)?;
            if v.is_finite() && v >= value + ARMIJO_C * gain {
                *damping = (*damping / 4.0).max(MIN_DAMPING);
                let g = ascent(&cand)?;
                return Ok(Some((cand, v, g)));
            }
            if v.is_finite() && v >= value - slack {
                let g = ascent(&cand)?;
                if norm(&g) < gn {
                    return Ok(Some((cand, v, g)));
                }
            }
        }
        *damping *= 8.0;
    }
    *damping = INITIAL_DAMPING;
    Ok(None)
}

/// `sup_p {⟨p, z⟩ − f(p)}` from the origin: damped Newton steps when a
/// Hessian is available, otherwise gradient ascent with Armijo backtracking.
pub fn legendre_transform<T: ConjugateTarget + ?Sized>(
    f: &T,
    z: &[f64],
    settings: &OptimizerSettings,
) -> Result<Conjugate> {
    settings.validate()?;
    same_dim(f.dim(), z.len())?;
    let objective = |p: &[f64]| -> Result<f64> {
        let v = dot(p, z) - f.value(p)?;
        Ok(if v.is_nan() { f64::NEG_INFINITY } else { v })
    };
    let ascent = |p: &[f64]| -> Result<Vec<f64>> {
        Ok(z.iter()
            .zip(f.gradient(p)?)
            .map(|(zi, gi)| zi - gi)
            .collect())
    };

    let mut p = vec![0.0; z.len()];
    let mut value = objective(&p)?;
    if !value.is_finite() {
        return Err(Error::InvalidValue(
            "conjugation target is not finite at the origin".into(),
        ));
    }
    let mut grad = ascent(&p)?;
    let mut step = settings.initial_step;
    let mut damping = INITIAL_DAMPING;
    let mut history = std::collections::VecDeque::with_capacity(UNBOUNDED_WINDOW + 1);

    for iteration in 0..settings.max_iterations {
        let gn = norm(&grad);
        if gn < settings.gradient_tolerance {
            return Ok(Conjugate::Attained { value, argmax: p });
        }
        history.push_back(value);
        if history.len() > UNBOUNDED_WINDOW + 1 {
            history.pop_front();
        }
        if norm(&p) > settings.divergence_threshold
            && history.len() > UNBOUNDED_WINDOW
            && value > history[0]
        {
            return Ok(Conjugate::Unbounded);
        }
        let slack = 1e-13 * value.abs().max(1.0);

        if let Some(h) = f.hessian(&p) {
            let h = h?;
            if let Some((cand, v, g)) = damped_newton(
                &objective,
                &ascent,
                &p,
                value,
                &grad,
                h,
                &mut damping,
                slack,
            )? {
                p = cand;
                value = v;
                grad = g;
                continue;
            }
        }

        let mut t = step;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let cand: Vec<f64> = p.iter().zip(&grad).map(|(a, g)| a + t * g).collect();
            let v = objective(&cand)?;
            if v.is_finite() && v >= value + ARMIJO_C * t * gn * gn {
                p = cand;
                value = v;
                grad = ascent(&p)?;
                accepted = true;
                break;
            }
            if v.is_finite() && v >= value - slack {
                // Rounding-limited regime: accept if the gradient shrinks.
                let g = ascent(&cand)?;
                if norm(&g) < gn {
                    p = cand;
                    value = v;
                    grad = g;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Inconclusive {
                best: value,
                gradient_norm: gn,
                iterations: iteration,
            });
        }
        step = 2.0 * t;
    }
    Err(Error::Inconclusive {
        best: value,
        gradient_norm: norm(&grad),
        iterations: settings.max_iterations,
    })
}

/// A point `(x, y)` at which a rate function is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateQuery {
    pub x: PrimalVector,
    pub y: f64,
}

impl RateQuery {
    pub fn new(x: Vec<f64>, y: f64) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::InvalidValue(format!("y = {y} must be finite")));
        }
        Ok(Self {
            x: PrimalVector::new(x)?,
            y,
        })
    }

    fn at_origin(&self) -> bool {
        self.y.abs() <= ORIGIN_TOL && self.x.norm() <= ORIGIN_TOL
    }
}

/// `Λ_X` as a conjugation target.
pub struct SummandCgf<'a>(pub &'a SummandModel);

impl ConjugateTarget for SummandCgf<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, p: &[f64]) -> Result<f64> {
        self.0.cgf(&DualVector::new(p.to_vec())?)
    }

    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .0
            .cgf_gradient(&DualVector::new(p.to_vec())?)?
            .into_vec())
    }

    fn hessian(&self, p: &[f64]) -> Option<Result<DMatrix<f64>>> {
        Some(DualVector::new(p.to_vec()).and_then(|t| self.0.cgf_hessian(&t)))
    }
}

/// `(θ, η) ↦ Λ_N(η + Λ_X(θ))` as a conjugation target in dimension `h + 1`.
pub struct JointCgf<'a> {
    pub summand: &'a SummandModel,
    pub counting: &'a CountingModel,
}

impl JointCgf<'_> {
    fn split(&self, p: &[f64]) -> Result<(DualVector, f64)> {
        let h = self.summand.dim();
        Ok((DualVector::new(p[..h].to_vec())?, p[h]))
    }
}

impl ConjugateTarget for JointCgf<'_> {
    fn dim(&self) -> usize {
        self.summand.dim() + 1
    }

    fn value(&self, p: &[f64]) -> Result<f64> {
        let (theta, eta) = self.split(p)?;
        joint_cgf(self.summand, self.counting, &theta, eta)
    }

    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        let (theta, eta) = self.split(p)?;
        let s = eta + self.summand.cgf(&theta)?;
        let (_, d1, _) = self.counting.cgf_n_limit_with_derivatives(s)?;
        let mut g: Vec<f64> = self
            .summand
            .cgf_gradient(&theta)?
            .coords()
            .iter()
            .map(|v| d1 * v)
            .collect();
        g.push(d1);
        Ok(g)
    }

    fn hessian(&self, p: &[f64]) -> Option<Result<DMatrix<f64>>> {
        let build = || -> Result<DMatrix<f64>> {
            let (theta, eta) = self.split(p)?;
            let h = self.summand.dim();
            let s = eta + self.summand.cgf(&theta)?;
            let (_, d1, d2) = self.counting.cgf_n_limit_with_derivatives(s)?;
            let mut w = self.summand.cgf_gradient(&theta)?.into_vec();
            w.push(1.0);
            let hx = self.summand.cgf_hessian(&theta)?;
            Ok(DMatrix::from_fn(h + 1, h + 1, |i, j| {
                let block = if i < h && j < h { hx[(i, j)] } else { 0.0 };
                d2 * w[i] * w[j] + d1 * block
            }))
        };
        Some(build())
    }
}

/// `Λ_{S,N}(θ, η) = Λ_N(η + Λ_X(θ))`.
pub fn joint_cgf(
    mx: &SummandModel,
    mn: &CountingModel,
    theta: &DualVector,
    eta: f64,
) -> Result<f64> {
    mn.cgf_n_limit(eta + mx.cgf(theta)?)
}

/// `Λ_X*(x)`, in closed form when the summand law has one.
pub fn summand_rate(mx: &SummandModel, x: &PrimalVector) -> Result<ExtendedReal> {
    summand_rate_with(mx, x, &OptimizerSettings::default())
}

pub fn summand_rate_with(
    mx: &SummandModel,
    x: &PrimalVector,
    settings: &OptimizerSettings,
) -> Result<ExtendedReal> {
    same_dim(mx.dim(), x.dim())?;
    if let Some(r) = mx.closed_form_rate(x) {
        return r;
    }
    let c = legendre_transform(&SummandCgf(mx), x.coords(), settings)?;
    Ok(match c {
        Conjugate::Attained { value, .. } => ExtendedReal::Finite(value.max(0.0)),
        Conjugate::Unbounded => ExtendedReal::PosInf,
    })
}

/// `I(x, y)` as the supremum over `(θ, η)`.
pub fn rate_ld_variational(
    mx: &SummandModel,
    mn: &CountingModel,
    q: &RateQuery,
    settings: &OptimizerSettings,
) -> Result<ExtendedReal> {
    same_dim(mx.dim(), q.x.dim())?;
    if q.at_origin() {
        // At the origin the objective is −Λ_N(η + Λ_X(θ)), whose supremum
        // over the whole line is −Λ_N(−∞); it is only approached at infinity.
        return Ok(mn.lambda_at_minus_infinity().neg());
    }
    let mut z = q.x.coords().to_vec();
    z.push(q.y);
    let c = legendre_transform(
        &JointCgf {
            summand: mx,
            counting: mn,
        },
        &z,
        settings,
    )?;
    Ok(match c {
        Conjugate::Attained { value, .. } => ExtendedReal::Finite(value.max(0.0)),
        Conjugate::Unbounded => ExtendedReal::PosInf,
    })
}

/// `I(x, y)` in explicit form: `yΛ_X*(x/y) + Λ_N*(y)` for `y > 0`,
/// `−Λ_N(−∞)` at the origin and `+inf` elsewhere.
pub fn rate_ld_explicit(
    mx: &SummandModel,
    mn: &CountingModel,
    q: &RateQuery,
) -> Result<ExtendedReal> {
    same_dim(mx.dim(), q.x.dim())?;
    if q.y > 0.0 {
        let r = summand_rate(mx, &q.x.scaled(1.0 / q.y))?.scale_positive(q.y)?;
        return r.checked_add(mn.rate_n(q.y)?);
    }
    if q.at_origin() {
        return Ok(mn.lambda_at_minus_infinity().neg());
    }
    Ok(ExtendedReal::PosInf)
}

/// `Ψ(θ, η) = d1⟨θ,Σθ⟩/2 + d2η²/2`.
pub fn psi_sn(mx: &SummandModel, mn: &CountingModel, theta: &DualVector, eta: f64) -> Result<f64> {
    let d = mn.derivs_at_zero()?;
    Ok(0.5 * d.d1 * mx.covariance().quadratic(theta)? + 0.5 * d.d2 * eta * eta)
}

fn md_derivatives(mn: &CountingModel) -> Result<(f64, f64)> {
    let d = mn.derivs_at_zero()?;
    if !(d.d2 > 0.0) {
        return Err(Error::Precondition(format!(
            "moderate deviations need Λ_N''(0) > 0, got {}",
            d.d2
        )));
    }
    Ok((d.d1, d.d2))
}

/// `J1(x, y) = ⟨x, Σ⁻¹x⟩/(2d1) + y²/(2d2)`, `+inf` off the image of Σ.
pub fn rate_md_centered_summands(
    mx: &SummandModel,
    mn: &CountingModel,
    q: &RateQuery,
) -> Result<ExtendedReal> {
    same_dim(mx.dim(), q.x.dim())?;
    let (d1, d2) = md_derivatives(mn)?;
    let count_part = q.y * q.y / (2.0 * d2);
    if d1 == 0.0 {
        return Ok(if q.x.norm() <= ORIGIN_TOL {
            ExtendedReal::Finite(count_part)
        } else {
            ExtendedReal::PosInf
        });
    }
    match solve_cov(&mx.covariance(), &q.x)? {
        CovSolve::NotInImage { .. } => Ok(ExtendedReal::PosInf),
        CovSolve::Solved(theta) => Ok(ExtendedReal::Finite(
            pair(&theta, &q.x)? / (2.0 * d1) + count_part,
        )),
    }
}

/// `J2(x, y) = J1(x − yμ_X, y)`.
pub fn rate_md_centered_sum(
    mx: &SummandModel,
    mn: &CountingModel,
    q: &RateQuery,
) -> Result<ExtendedReal> {
    let shifted = RateQuery {
        x: q.x.axpy(-q.y, &mx.mean())?,
        y: q.y,
    };
    rate_md_centered_summands(mx, mn, &shifted)
}

/// `(θ, η) ↦ Ψ(θ, η + ⟨θ, shift⟩)`.
pub struct PsiTarget {
    d1: f64,
    d2: f64,
    sigma: DMatrix<f64>,
    shift: Vec<f64>,
}

impl PsiTarget {
    pub fn new(mx: &SummandModel, mn: &CountingModel, centered_sum: bool) -> Result<Self> {
        let (d1, d2) = md_derivatives(mn)?;
        let shift = if centered_sum {
            mx.mean().into_vec()
        } else {
            vec![0.0; mx.dim()]
        };
        Ok(Self {
            d1,
            d2,
            sigma: mx.covariance().matrix().clone(),
            shift,
        })
    }

    fn parts(&self, p: &[f64]) -> (DVector<f64>, f64) {
        let h = self.shift.len();
        let theta = DVector::from_column_slice(&p[..h]);
        let e = p[h] + dot(&p[..h], &self.shift);
        (theta, e)
    }
}

impl ConjugateTarget for PsiTarget {
    fn dim(&self) -> usize {
        self.shift.len() + 1
    }

    fn value(&self, p: &[f64]) -> Result<f64> {
        let (theta, e) = self.parts(p);
        Ok(0.5 * self.d1 * theta.dot(&(&self.sigma * &theta)) + 0.5 * self.d2 * e * e)
    }

    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        let (theta, e) = self.parts(p);
        let st = &self.sigma * &theta;
        let mut g: Vec<f64> = st
            .iter()
            .zip(&self.shift)
            .map(|(s, m)| self.d1 * s + self.d2 * e * m)
            .collect();
        g.push(self.d2 * e);
        Ok(g)
    }

    fn hessian(&self, _p: &[f64]) -> Option<Result<DMatrix<f64>>> {
        let h = self.shift.len();
        let mut w = self.shift.clone();
        w.push(1.0);
        Some(Ok(DMatrix::from_fn(h + 1, h + 1, |i, j| {
            let block = if i < h && j < h {
                self.sigma[(i, j)]
            } else {
                0.0
            };
            self.d1 * block + self.d2 * w[i] * w[j]
        })))
    }
}

fn md_variational(
    mx: &SummandModel,
    mn: &CountingModel,
    q: &RateQuery,
    centered_sum: bool,
    settings: &OptimizerSettings,
) -> Result<ExtendedReal> {
    same_dim(mx.dim(), q.x.dim())?;
    let target = PsiTarget::new(mx, mn, centered_sum)?;
    let mut z = q.x.coords().to_vec();
    z.push(q.y);
    Ok(match legendre_transform(&target, &z, settings)? {
        Conjugate::Attained { value, .. } => ExtendedReal::Finite(value.max(0.0)),
        Conjugate::Unbounded => ExtendedReal::PosInf,
    })
}

/// `J1` as the conjugate of `Ψ`.
pub fn rate_md_centered_summands_variational(
    mx: &SummandModel,
    mn: &CountingModel,
    q: &RateQuery,
    settings: &OptimizerSettings,
) -> Result<ExtendedReal> {
    md_variational(mx, mn, q, false, settings)
}

/// `J2` as the conjugate of `(θ, η) ↦ Ψ(θ, η + ⟨θ, μ_X⟩)`.
pub fn rate_md_centered_sum_variational(
    mx: &SummandModel,
    mn: &CountingModel,
    q: &RateQuery,
    settings: &OptimizerSettings,
) -> Result<ExtendedReal> {
    md_variational(mx, mn, q, true, settings)
}

/// For finite-support summands with `x = Σ c_j u_j`, `Σ c_j = 0`:
/// `(1/(2d1)) Σ_{j<m} c_j (c_j/p_j − c_m/p_m)`, and `+inf` off that set.
pub fn md_quadratic_finite_support(
    mx: &SummandModel,
    mn: &CountingModel,
    x: &PrimalVector,
) -> Result<ExtendedReal> {
    let fs = mx.as_finite_support().ok_or_else(|| {
        Error::Unsupported("the finite-support quadratic needs a finite-support summand".into())
    })?;
    same_dim(fs.dim(), x.dim())?;
    let d1 = mn.derivs_at_zero()?.d1;
    if !(d1 > 0.0) {
        return Err(Error::Precondition(format!("needs Λ_N'(0) > 0, got {d1}")));
    }
    let Some(c) = fs.decompose(x)? else {
        return Ok(ExtendedReal::PosInf);
    };
    if !c.sums_to_zero() {
        return Ok(ExtendedReal::PosInf);
    }
    let p = fs.probs();
    let m = p.len();
    let last = c.0[m - 1] / p[m - 1];
    let s: f64 = (0..m - 1).map(|j| c.0[j] * (c.0[j] / p[j] - last)).sum();
    Ok(ExtendedReal::Finite(s / (2.0 * d1)))
}

/// Limits of the scaled means and covariances of `(⟨u,S⟩, ⟨v,S⟩, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitMoments {
    /// `lim E[⟨v, S_{N_n}⟩/n] = d1⟨v,μ⟩`.
    pub mean_s_dir: f64,
    /// `lim E[N_n/n] = d1`.
    pub mean_n: f64,
    /// `lim n·Cov(⟨u,S⟩/n, ⟨v,S⟩/n) = d2⟨u,μ⟩⟨v,μ⟩ + d1⟨u,Σv⟩`.
    pub cov_ss: f64,
    /// `lim n·Cov(N/n, ⟨v,S⟩/n) = d2⟨v,μ⟩`.
    pub cov_ns: f64,
    /// `lim n·Var[N_n/n] = d2`.
    pub var_n: f64,
}

pub fn analytic_limit_moments(
    mx: &SummandModel,
    mn: &CountingModel,
    u: &DualVector,
    v: &DualVector,
) -> Result<LimitMoments> {
    let d = mn.derivs_at_zero()?;
    let mu = mx.mean();
    let (um, vm) = (pair(u, &mu)?, pair(v, &mu)?);
    let usv = pair(u, &apply_cov(&mx.covariance(), v)?)?;
    Ok(LimitMoments {
        mean_s_dir: d.d1 * vm,
        mean_n: d.d1,
        cov_ss: d.d2 * um * vm + d.d1 * usv,
        cov_ns: d.d2 * vm,
        var_n: d.d2,
    })
}

/// `b1(θ) = d2⟨θ,μ⟩² + d1⟨θ,Σθ⟩`.
pub fn b1(mx: &SummandModel, mn: &CountingModel, theta: &DualVector) -> Result<f64> {
    let d = mn.derivs_at_zero()?;
    let tm = pair(theta, &mx.mean())?;
    Ok(d.d2 * tm * tm + d.d1 * mx.covariance().quadratic(theta)?)
}

/// `b2(θ) = d2⟨θ,μ⟩`.
pub fn b2(mx: &SummandModel, mn: &CountingModel, theta: &DualVector) -> Result<f64> {
    Ok(mn.derivs_at_zero()?.d2 * pair(theta, &mx.mean())?)
}

/// Exact finite-`n` counterparts of [`LimitMoments`], built from `E[N_n]` and
/// `Var[N_n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteMoments {
    /// `E[N_n]/n`.
    pub mean_n: f64,
    /// `n·Var[N_n/n] = Var[N_n]/n`.
    pub var_n: f64,
    /// `n·Cov(N/n, ⟨v,S⟩/n) = n·Var[N_n/n]⟨v,μ⟩`.
    pub cov_ns: f64,
    /// `n·Cov(⟨u,S⟩/n, ⟨v,S⟩/n) = E[N_n/n]⟨u,Σv⟩ + n·Var[N_n/n]⟨u,μ⟩⟨v,μ⟩`.
    pub cov_ss: f64,
    /// `E[⟨v,S⟩/n] = E[N_n/n]⟨v,μ⟩`.
    pub mean_s_dir: f64,
}

pub fn finite_n_moment_identities(
    mx: &SummandModel,
    mn: &CountingModel,
    n: u64,
    u: &DualVector,
    v: &DualVector,
) -> Result<FiniteMoments> {
    if let CountingModel::Renewal { .. } = mn {
        return Err(Error::Unsupported(
            "renewal counts have no exact finite-n variance".into(),
        ));
    }
    let law = mn.law_at(n)?;
    let nf = n as f64;
    let mean_n = law.mean()? / nf;
    let var_n = law.variance()? / nf;
    let mu = mx.mean();
    let (um, vm) = (pair(u, &mu)?, pair(v, &mu)?);
    let usv = pair(u, &apply_cov(&mx.covariance(), v)?)?;
    Ok(FiniteMoments {
        mean_n,
        var_n,
        cov_ns: var_n * vm,
        cov_ss: mean_n * usv + var_n * um * vm,
        mean_s_dir: mean_n * vm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm1() -> SummandModel {
        SummandModel::rademacher(0.5).unwrap()
    }

    fn poisson(l: f64) -> CountingModel {
        CountingModel::poisson(l).unwrap()
    }

    #[test]
    fn transform_examples() {
        let quad = FnTarget {
            dim: 1,
            f: |p: &[f64]| 0.5 * p[0] * p[0],
            grad: |p: &[f64]| vec![p[0]],
        };
        let c = legendre_transform(&quad, &[0.0], &OptimizerSettings::default()).unwrap();
        assert_eq!(
            c,
            Conjugate::Attained {
                value: 0.0,
                argmax: vec![0.0]
            }
        );
        let pois = FnTarget {
            dim: 1,
            f: |p: &[f64]| p[0].exp_m1(),
            grad: |p: &[f64]| vec![p[0].exp()],
        };
        let Conjugate::Attained { value, argmax } =
            legendre_transform(&pois, &[2.0], &OptimizerSettings::default()).unwrap()
        else {
            panic!("bounded")
        };
        assert!((value - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-9);
        assert!((argmax[0] - 2f64.ln()).abs() < 1e-6);
        let c = legendre_transform(&pois, &[-0.5], &OptimizerSettings::default()).unwrap();
        assert_eq!(c, Conjugate::Unbounded);
    }

    #[test]
    fn joint_cgf_examples() {
        let (mx, mn) = (pm1(), poisson(1.0));
        let zero = DualVector::zeros(1);
        assert_eq!(joint_cgf(&mx, &mn, &zero, 0.0).unwrap(), 0.0);
        let t = DualVector::new(vec![0.8]).unwrap();
        assert!((joint_cgf(&mx, &mn, &t, 0.0).unwrap() - (0.8f64.cosh() - 1.0)).abs() < 1e-14);
        assert_eq!(
            joint_cgf(&mx, &mn, &zero, 0.4).unwrap(),
            mn.cgf_n_limit(0.4).unwrap()
        );
    }

    #[test]
    fn ld_rate_examples() {
        let (mx, mn) = (pm1(), poisson(1.0));
        let s = OptimizerSettings::default();
        let at_limit = RateQuery::new(vec![0.0], 1.0).unwrap();
        assert!(
            rate_ld_variational(&mx, &mn, &at_limit, &s)
                .unwrap()
                .to_f64()
                .abs()
                < 1e-12
        );
        let q = RateQuery::new(vec![0.0], 2.0).unwrap();
        let v = rate_ld_variational(&mx, &mn, &q, &s).unwrap().to_f64();
        assert!((v - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-9, "{v}");
        let neg = RateQuery::new(vec![0.3], -1.0).unwrap();
        assert_eq!(
            rate_ld_variational(&mx, &mn, &neg, &s).unwrap(),
            ExtendedReal::PosInf
        );
        assert_eq!(
            rate_ld_explicit(&mx, &mn, &neg).unwrap(),
            ExtendedReal::PosInf
        );
    }

    #[test]
    fn explicit_rate_examples() {
        let mn = poisson(1.0);
        let mx = pm1();
        let origin = RateQuery::new(vec![0.0], 0.0).unwrap();
        assert_eq!(
            rate_ld_explicit(&mx, &mn, &origin).unwrap(),
            ExtendedReal::Finite(1.0)
        );
        let off = RateQuery::new(vec![0.2], 0.0).unwrap();
        assert_eq!(
            rate_ld_explicit(&mx, &mn, &off).unwrap(),
            ExtendedReal::PosInf
        );
        let two =
            SummandModel::finite_support(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5])
                .unwrap();
        let q = RateQuery::new(vec![1.0, 0.0], 1.0).unwrap();
        let v = rate_ld_explicit(&two, &mn, &q).unwrap().to_f64();
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn psi_examples() {
        let g = SummandModel::gaussian(vec![0.0], vec![vec![1.0]]).unwrap();
        let one = DualVector::new(vec![1.0]).unwrap();
        assert_eq!(
            psi_sn(&g, &poisson(1.0), &DualVector::zeros(1), 0.0).unwrap(),
            0.0
        );
        assert!((psi_sn(&g, &poisson(1.0), &one, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(
            (psi_sn(&g, &poisson(3.0), &DualVector::zeros(1), 2.0).unwrap() - 6.0).abs() < 1e-14
        );
    }

    #[test]
    fn md_examples() {
        let g = SummandModel::gaussian(vec![0.0], vec![vec![1.0]]).unwrap();
        let mn = poisson(1.0);
        let q = RateQuery::new(vec![1.0], 1.0).unwrap();
        assert!((rate_md_centered_summands(&g, &mn, &q).unwrap().to_f64() - 1.0).abs() < 1e-14);
        let origin = RateQuery::new(vec![0.0], 0.0).unwrap();
        assert_eq!(
            rate_md_centered_summands(&g, &mn, &origin).unwrap(),
            ExtendedReal::ZERO
        );
        let flat =
            SummandModel::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let q2 = RateQuery::new(vec![0.0, 1.0], 0.0).unwrap();
        assert_eq!(
            rate_md_centered_summands(&flat, &mn, &q2).unwrap(),
            ExtendedReal::PosInf
        );
        let shifted = SummandModel::gaussian(vec![0.3], vec![vec![1.0]]).unwrap();
        let v = rate_md_centered_sum(&shifted, &mn, &q).unwrap().to_f64();
        assert!((v - 0.745).abs() < 1e-14);
        let s = OptimizerSettings::default();
        let w = rate_md_centered_sum_variational(&shifted, &mn, &q, &s)
            .unwrap()
            .to_f64();
        assert!((v - w).abs() < 1e-9);
        let bern = CountingModel::bernoulli_constant(0.0).unwrap();
        assert!(matches!(
            rate_md_centered_summands(&g, &bern, &q),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn finite_support_quadratic_examples() {
        let mx = SummandModel::finite_support(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5])
            .unwrap();
        let mn = poisson(2.0);
        let zero = PrimalVector::zeros(2);
        assert_eq!(
            md_quadratic_finite_support(&mx, &mn, &zero).unwrap(),
            ExtendedReal::ZERO
        );
        let x = PrimalVector::new(vec![1.0, -1.0]).unwrap();
        let v = md_quadratic_finite_support(&mx, &mn, &x).unwrap().to_f64();
        assert!((v - 2.0 / 2.0).abs() < 1e-14);
        let half = PrimalVector::new(vec![0.5, 0.0]).unwrap();
        assert_eq!(
            md_quadratic_finite_support(&mx, &mn, &half).unwrap(),
            ExtendedReal::PosInf
        );
    }

    #[test]
    fn moment_examples() {
        let g = SummandModel::gaussian(vec![1.0], vec![vec![1.0]]).unwrap();
        let one = DualVector::new(vec![1.0]).unwrap();
        let m = analytic_limit_moments(&g, &poisson(1.0), &one, &one).unwrap();
        assert!((m.cov_ss - 2.0).abs() < 1e-15);
        assert!((b1(&g, &poisson(1.0), &one).unwrap() - m.cov_ss).abs() < 1e-15);
        assert!((b2(&g, &poisson(1.0), &one).unwrap() - m.cov_ns).abs() < 1e-15);
        let centered = pm1();
        let m0 = analytic_limit_moments(&centered, &poisson(2.0), &one, &one).unwrap();
        assert_eq!((m0.mean_s_dir, m0.cov_ns), (0.0, 0.0));
        let z = crate::counting::ZLaw::Finite {
            values: vec![0, 1, 3],
            probs: vec![0.2, 0.5, 0.3],
        };
        let iid = CountingModel::iid_sum(z.clone()).unwrap();
        let f = finite_n_moment_identities(&g, &iid, 17, &one, &one).unwrap();
        assert!((f.cov_ss - (z.mean() + z.variance())).abs() < 1e-12);
        let pf = finite_n_moment_identities(&g, &poisson(1.5), 9, &one, &one).unwrap();
        assert!((pf.cov_ns - 1.5).abs() < 1e-14);
    }
}
