//! Laws of the i.i.d. summands `X_1, X_2, …`.
//!
//! Every law exposes its cumulant generating function `Λ_X(θ) = log E[e^{⟨θ,X⟩}]`
//! with gradient and Hessian, the mean μ_X, the covariance operator Σ_X, a
//! sampler, and the exponentially tilted law used for importance sampling.

use nalgebra::{DMatrix, DVector, SVD};
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::dual::{
    dot, pair, same_dim, solve_cov, CovSolve, CovarianceOperator, DualVector, ExtendedReal,
    PrimalVector,
};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

/// Probabilities must sum to one within this tolerance.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Relative residual above which a point is outside the span of the atoms.
pub const SPAN_RESIDUAL_TOL: f64 = 1e-8;
/// Tolerance on atom coefficients for the simplex and the zero-sum set.
pub const COEFF_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

/// Coefficients of a point in the basis of the atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCoefficients(pub Vec<f64>);

impl SimplexCoefficients {
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Non-negative and summing to one: the point is a convex combination.
    pub fn in_simplex(&self) -> bool {
        self.0.iter().all(|&c| c >= -COEFF_TOL) && (self.sum() - 1.0).abs() <= COEFF_TOL
    }

    /// Summing to zero: the point lies in the zero-sum span of the atoms.
    pub fn sums_to_zero(&self) -> bool {
        self.sum().abs() <= COEFF_TOL
    }
}

/// A law supported on finitely many atoms `u_1, …, u_m` with masses `p_i > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSupport {
    atoms: Vec<PrimalVector>,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    independent: bool,
    mean: PrimalVector,
    cov: CovarianceOperator,
}

impl FiniteSupport {
    pub fn new(atoms: Vec<PrimalVector>, probs: Vec<f64>) -> Result<Self> {
        let m = atoms.len();
        if m == 0 {
            return Err(Error::Validation(
                "finite support needs at least one atom".into(),
            ));
        }
        if probs.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: probs.len(),
            });
        }
        let h = atoms[0].dim();
        for a in &atoms {
            same_dim(h, a.dim())?;
        }
        if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::Validation(format!(
                "atom probability {p} must be positive"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Validation(format!(
                "atom probabilities sum to {total}, not 1"
            )));
        }
        let basis = DMatrix::from_fn(h, m, |i, j| atoms[j][i]);
        let sv = SVD::new(basis, false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax.max(1.0)).count();
        let independent = rank == m;
        if m <= h && !independent {
            return Err(Error::Validation(format!(
                "the {m} atoms are linearly dependent (rank {rank})"
            )));
        }
        let mean: Vec<f64> = (0..h)
            .map(|i| atoms.iter().zip(&probs).map(|(a, p)| p * a[i]).sum())
            .collect();
        let cov = DMatrix::from_fn(h, h, |i, j| {
            atoms
                .iter()
                .zip(&probs)
                .map(|(a, p)| p * (a[i] - mean[i]) * (a[j] - mean[j]))
                .sum()
        });
        Ok(Self {
            log_probs: probs.iter().map(|p| p.ln()).collect(),
            atoms,
            probs,
            independent,
            mean: PrimalVector::new(mean)?,
            cov: CovarianceOperator::from_matrix(cov)?,
        })
    }

    pub fn atoms(&self) -> &[PrimalVector] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn has_independent_atoms(&self) -> bool {
        self.independent
    }

    /// Softmax weights of the tilted law at θ.
    fn tilt_weights(&self, theta: &DualVector) -> Result<Vec<f64>> {
        let logits = self.tilt_logits(theta)?;
        let lse = log_sum_exp(&logits);
        Ok(logits.iter().map(|l| (l - lse).exp()).collect())
    }

    fn tilt_logits(&self, theta: &DualVector) -> Result<Vec<f64>> {
        self.atoms
            .iter()
            .zip(&self.log_probs)
            .map(|(a, lp)| Ok(pair(theta, a)? + lp))
            .collect()
    }

    /// Least-squares coefficients of `x` over the atoms, `None` when `x` is
    /// outside their span.
    pub fn decompose(&self, x: &PrimalVector) -> Result<Option<SimplexCoefficients>> {
        same_dim(self.dim(), x.dim())?;
        if !self.independent {
            return Err(Error::Unsupported(
                "atom decomposition needs linearly independent atoms (m ≤ h)".into(),
            ));
        }
        let (h, m) = (self.dim(), self.atoms.len());
        let basis = DMatrix::from_fn(h, m, |i, j| self.atoms[j][i]);
        let rhs = x.to_dvector();
        let normal = basis.transpose() * &basis;
        let c = normal
            .cholesky()
            .ok_or_else(|| Error::Validation("atom Gram matrix is singular".into()))?
            .solve(&(basis.transpose() * &rhs));
        let residual = (&basis * &c - &rhs).norm();
        if residual > SPAN_RESIDUAL_TOL * rhs.norm().max(1.0) {
            return Ok(None);
        }
        Ok(Some(SimplexCoefficients(c.iter().cloned().collect())))
    }

    /// `Σ c_i log(c_i/p_i)` on the simplex (with `0 log 0 = 0`), `+∞` elsewhere.
    pub fn cramer_rate(&self, x: &PrimalVector) -> Result<ExtendedReal> {
        let Some(c) = self.decompose(x)? else {
            return Ok(ExtendedReal::PosInf);
        };
        if !c.in_simplex() {
            return Ok(ExtendedReal::PosInf);
        }
        // Each summand c ln(c/p) − c + p is non-negative; their total equals
        // the relative entropy on the simplex.
        let value: f64 =
            c.0.iter()
                .zip(&self.probs)
                .map(|(&ci, &pi)| {
                    let ci = ci.max(0.0);
                    if ci == 0.0 {
                        pi
                    } else {
                        ci * (ci / pi).ln() - ci + pi
                    }
                })
                .sum();
        Ok(ExtendedReal::Finite(value.max(0.0)))
    }
}

/// Gaussian law with mean μ and covariance Σ.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: PrimalVector,
    cov: CovarianceOperator,
    factor: DMatrix<f64>,
}

impl Gaussian {
    pub fn new(mean: PrimalVector, cov: CovarianceOperator) -> Result<Self> {
        same_dim(mean.dim(), cov.dim())?;
        let factor = cov.sqrt_factor();
        Ok(Self { mean, cov, factor })
    }

    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(
            PrimalVector::new(vec![mean])?,
            CovarianceOperator::diagonal(&[variance])?,
        )
    }

    fn draw_standard<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let h = self.mean.dim();
        let z = DVector::from_fn(h, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * z
    }

    /// Closed-form `½ ⟨x−μ, Σ⁻¹(x−μ)⟩` on `μ + Im(Σ)`, `+∞` elsewhere.
    pub fn cramer_rate(&self, x: &PrimalVector) -> Result<ExtendedReal> {
        let d = x.axpy(-1.0, &self.mean)?;
        match solve_cov(&self.cov, &d)? {
            CovSolve::Solved(u) => Ok(ExtendedReal::Finite(0.5 * pair(&u, &d)?.max(0.0))),
            CovSolve::NotInImage { .. } => Ok(ExtendedReal::PosInf),
        }
    }
}

/// Covariance kernels for grid-function summands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `σ² exp(−(s−t)²/(2ℓ²))`
    SquaredExponential { variance: f64, length_scale: f64 },
    /// `σ² min(s, t)`
    Brownian { variance: f64 },
}

impl Kernel {
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match *self {
            Kernel::SquaredExponential {
                variance,
                length_scale,
            } => variance * (-(s - t).powi(2) / (2.0 * length_scale * length_scale)).exp(),
            Kernel::Brownian { variance } => variance * s.min(t),
        }
    }

    pub fn matrix(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        grid.iter()
            .map(|&s| grid.iter().map(|&t| self.eval(s, t)).collect())
            .collect()
    }
}

/// A law over function values on a fixed grid `s_1 < … < s_h` of a compact set.
///
/// Duals are discrete signed measures with weights `w_i` acting as
/// `∫ f dv = Σ w_i f(s_i)`, so the pairing is the plain ℝ^h pairing and Σ_X
/// acts as integration against the kernel matrix `Cov(X(s_i), X(s_j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Vec<f64>,
    law: Box<SummandModel>,
}

impl GridFunction {
    pub fn new(grid: Vec<f64>, law: SummandModel) -> Result<Self> {
        if grid.is_empty() || grid.iter().any(|s| !s.is_finite()) {
            return Err(Error::Validation(
                "grid must be non-empty and finite".into(),
            ));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("grid must be strictly increasing".into()));
        }
        if matches!(law, SummandModel::GridFunction(_)) {
            return Err(Error::Validation(
                "grid law must be finite-support or Gaussian".into(),
            ));
        }
        same_dim(grid.len(), law.dim())?;
        Ok(Self {
            grid,
            law: Box::new(law),
        })
    }

    /// Gaussian process on the grid with the given mean values and kernel.
    pub fn gaussian(grid: Vec<f64>, mean: Vec<f64>, kernel: Kernel) -> Result<Self> {
        let cov = CovarianceOperator::from_rows(&kernel.matrix(&grid))?;
        let law = SummandModel::Gaussian(Gaussian::new(PrimalVector::new(mean)?, cov)?);
        Self::new(grid, law)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn law(&self) -> &SummandModel {
        &self.law
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SummandModel {
    FiniteSupport(FiniteSupport),
    Gaussian(Gaussian),
    GridFunction(GridFunction),
}

impl SummandModel {
    pub fn finite_support(atoms: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        let atoms = atoms
            .into_iter()
            .map(PrimalVector::new)
            .collect::<Result<_>>()?;
        Ok(SummandModel::FiniteSupport(FiniteSupport::new(
            atoms, probs,
        )?))
    }

    pub fn gaussian(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        Ok(SummandModel::Gaussian(Gaussian::new(
            PrimalVector::new(mean)?,
            CovarianceOperator::from_rows(&cov)?,
        )?))
    }

    /// Scalar `±1` summand with `P(+1) = p`.
    pub fn rademacher(p: f64) -> Result<Self> {
        Self::finite_support(vec![vec![1.0], vec![-1.0]], vec![p, 1.0 - p])
    }

    pub fn dim(&self) -> usize {
        match self {
            SummandModel::FiniteSupport(f) => f.dim(),
            SummandModel::Gaussian(g) => g.mean.dim(),
            SummandModel::GridFunction(g) => g.grid.len(),
        }
    }

    /// The underlying finite-support law, looking through grid wrappers.
    pub fn as_finite_support(&self) -> Option<&FiniteSupport> {
        match self {
            SummandModel::FiniteSupport(f) => Some(f),
            SummandModel::GridFunction(g) => g.law.as_finite_support(),
            SummandModel::Gaussian(_) => None,
        }
    }

    /// `Λ_X(θ)`.
    pub fn cgf(&self, theta: &DualVector) -> Result<f64> {
        same_dim(self.dim(), theta.dim())?;
        match self {
            SummandModel::FiniteSupport(f) => {
                if theta.is_zero(0.0) {
                    return Ok(0.0);
                }
                Ok(log_sum_exp(&f.tilt_logits(theta)?))
            }
            SummandModel::Gaussian(g) => Ok(pair(theta, &g.mean)? + 0.5 * g.cov.quadratic(theta)?),
            SummandModel::GridFunction(g) => g.law.cgf(theta),
        }
    }

    /// `∇Λ_X(θ)`, the mean of the tilted law.
    pub fn cgf_gradient(&self, theta: &DualVector) -> Result<PrimalVector> {
        same_dim(self.dim(), theta.dim())?;
        match self {
            SummandModel::FiniteSupport(f) => {
                let w = f.tilt_weights(theta)?;
                let h = f.dim();
                let g = (0..h)
                    .map(|i| f.atoms.iter().zip(&w).map(|(a, wi)| wi * a[i]).sum())
                    .collect();
                Ok(PrimalVector::from_unchecked(g))
            }
            SummandModel::Gaussian(g) => {
                let s = crate::dual::apply_cov(&g.cov, theta)?;
                g.mean.axpy(1.0, &s)
            }
            SummandModel::GridFunction(g) => g.law.cgf_gradient(theta),
        }
    }

    /// `∇²Λ_X(θ)`, the covariance of the tilted law.
    pub fn cgf_hessian(&self, theta: &DualVector) -> Result<DMatrix<f64>> {
        same_dim(self.dim(), theta.dim())?;
        match self {
            SummandModel::FiniteSupport(f) => {
                let w = f.tilt_weights(theta)?;
                let h = f.dim();
                let g: Vec<f64> = (0..h)
                    .map(|i| f.atoms.iter().zip(&w).map(|(a, wi)| wi * a[i]).sum())
                    .collect();
                Ok(DMatrix::from_fn(h, h, |i, j| {
                    f.atoms
                        .iter()
                        .zip(&w)
                        .map(|(a, wi)| wi * (a[i] - g[i]) * (a[j] - g[j]))
                        .sum()
                }))
            }
            SummandModel::Gaussian(g) => Ok(g.cov.matrix().clone()),
            SummandModel::GridFunction(g) => g.law.cgf_hessian(theta),
        }
    }

    /// μ_X.
    pub fn mean(&self) -> PrimalVector {
        match self {
            SummandModel::FiniteSupport(f) => f.mean.clone(),
            SummandModel::Gaussian(g) => g.mean.clone(),
            SummandModel::GridFunction(g) => g.law.mean(),
        }
    }

    /// Σ_X.
    pub fn covariance(&self) -> CovarianceOperator {
        match self {
            SummandModel::FiniteSupport(f) => f.cov.clone(),
            SummandModel::Gaussian(g) => g.cov.clone(),
            SummandModel::GridFunction(g) => g.law.covariance(),
        }
    }

    /// `count` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<PrimalVector> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> PrimalVector {
        match self {
            SummandModel::FiniteSupport(f) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, p) in f.atoms.iter().zip(&f.probs) {
                    acc += p;
                    if u < acc {
                        return a.clone();
                    }
                }
                f.atoms.last().expect("non-empty").clone()
            }
            SummandModel::Gaussian(g) => {
                let z = g.draw_standard(rng);
                PrimalVector::from_unchecked(
                    g.mean
                        .coords()
                        .iter()
                        .zip(z.iter())
                        .map(|(m, z)| m + z)
                        .collect(),
                )
            }
            SummandModel::GridFunction(g) => g.law.sample_one(rng),
        }
    }

    /// The sum of `k` i.i.d. draws, sampled directly from its exact law
    /// (multinomial atom counts, or a Gaussian with mean kμ and covariance kΣ).
    pub fn sample_sum<R: Rng + ?Sized>(&self, rng: &mut R, k: u64) -> PrimalVector {
        let h = self.dim();
        if k == 0 {
            return PrimalVector::zeros(h);
        }
        match self {
            SummandModel::FiniteSupport(f) => {
                let mut out = vec![0.0; h];
                let mut remaining = k;
                let mut mass_left = 1.0;
                let last = f.atoms.len() - 1;
                for (i, (a, &p)) in f.atoms.iter().zip(&f.probs).enumerate() {
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
                    if c > 0 {
                        for (o, ai) in out.iter_mut().zip(a.coords()) {
                            *o += c as f64 * ai;
                        }
                    }
                    remaining -= c;
                    mass_left -= p;
                }
                PrimalVector::from_unchecked(out)
            }
            SummandModel::Gaussian(g) => {
                let z = g.draw_standard(rng);
                let (kf, sk) = (k as f64, (k as f64).sqrt());
                PrimalVector::from_unchecked(
                    g.mean
                        .coords()
                        .iter()
                        .zip(z.iter())
                        .map(|(m, z)| kf * m + sk * z)
                        .collect(),
                )
            }
            SummandModel::GridFunction(g) => g.law.sample_sum(rng, k),
        }
    }

    /// The exponentially tilted law `dP_θ ∝ e^{⟨θ,x⟩} dP`.
    pub fn tilted(&self, theta: &DualVector) -> Result<SummandModel> {
        same_dim(self.dim(), theta.dim())?;
        match self {
            SummandModel::FiniteSupport(f) => {
                let mut w = f.tilt_weights(theta)?;
                // renormalize against rounding so the mass check passes
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= total);
                if w.iter().any(|&x| x <= 0.0) {
                    return Err(Error::InvalidValue(
                        "tilt too strong: an atom lost all of its mass".into(),
                    ));
                }
                Ok(SummandModel::FiniteSupport(FiniteSupport::new(
                    f.atoms.clone(),
                    w,
                )?))
            }
            SummandModel::Gaussian(g) => {
                let shift = crate::dual::apply_cov(&g.cov, theta)?;
                Ok(SummandModel::Gaussian(Gaussian::new(
                    g.mean.axpy(1.0, &shift)?,
                    g.cov.clone(),
                )?))
            }
            SummandModel::GridFunction(g) => Ok(SummandModel::GridFunction(GridFunction::new(
                g.grid.clone(),
                g.law.tilted(theta)?,
            )?)),
        }
    }

    /// Closed-form Cramér rate `Λ_X*(x)` when one is available: finite support
    /// with independent atoms, or Gaussian.
    pub fn closed_form_rate(&self, x: &PrimalVector) -> Option<Result<ExtendedReal>> {
        match self {
            SummandModel::FiniteSupport(f) if f.independent => Some(f.cramer_rate(x)),
            SummandModel::FiniteSupport(_) => None,
            SummandModel::Gaussian(g) => Some(g.cramer_rate(x)),
            SummandModel::GridFunction(g) => g.law.closed_form_rate(x),
        }
    }

    /// Range of `⟨v, X⟩` when it is bounded.
    pub fn projected_range(&self, v: &DualVector) -> Result<Option<(f64, f64)>> {
        same_dim(self.dim(), v.dim())?;
        match self {
            SummandModel::FiniteSupport(f) => {
                let vals: Vec<f64> = f
                    .atoms
                    .iter()
                    .map(|a| dot(v.coords(), a.coords()))
                    .collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                Ok(Some((lo, hi)))
            }
            SummandModel::Gaussian(g) => {
                if g.cov.quadratic(v)? <= 0.0 {
                    let m = pair(v, &g.mean)?;
                    Ok(Some((m, m)))
                } else {
                    Ok(None)
                }
            }
            SummandModel::GridFunction(g) => g.law.projected_range(v),
        }
    }
}

/// `Λ_X(θ)`.
pub fn cgf_x(model: &SummandModel, theta: &DualVector) -> Result<f64> {
    model.cgf(theta)
}

/// μ_X.
pub fn mean_x(model: &SummandModel) -> PrimalVector {
    model.mean()
}

/// Σ_X.
pub fn cov_x(model: &SummandModel) -> CovarianceOperator {
    model.covariance()
}

/// `count` i.i.d. draws.
pub fn sample_x<R: Rng + ?Sized>(
    model: &SummandModel,
    rng: &mut R,
    count: usize,
) -> Vec<PrimalVector> {
    model.sample(rng, count)
}

/// Relative-entropy rate of a finite-support law.
pub fn cramer_rate_finite_support(model: &SummandModel, x: &PrimalVector) -> Result<ExtendedReal> {
    match model.as_finite_support() {
        Some(f) => f.cramer_rate(x),
        None => Err(Error::Unsupported(
            "closed-form Cramér rate needs a finite-support summand".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dv(c: &[f64]) -> DualVector {
        DualVector::new(c.to_vec()).unwrap()
    }
    fn pv(c: &[f64]) -> PrimalVector {
        PrimalVector::new(c.to_vec()).unwrap()
    }
    fn two_atoms(p: f64) -> SummandModel {
        SummandModel::finite_support(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![p, 1.0 - p])
            .unwrap()
    }

    #[test]
    fn cgf_examples() {
        let m = two_atoms(0.5);
        assert_eq!(m.cgf(&dv(&[0.0, 0.0])).unwrap(), 0.0);
        for t in [-2.0, 0.3, 1.7] {
            assert!((m.cgf(&dv(&[t, t])).unwrap() - t).abs() < 1e-14);
        }
        let g = SummandModel::Gaussian(Gaussian::scalar(0.0, 1.0).unwrap());
        assert!((g.cgf(&dv(&[2.0])).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_cgf_matches_quadrature() {
        // log ∫ e^{θx} φ(x) dx on a wide interval
        let theta = 2.0;
        let phi = |x: f64| (theta * x - 0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let integral = crate::numeric::integrate(&phi, -20.0, 24.0, 1e-13);
        let g = SummandModel::Gaussian(Gaussian::scalar(0.0, 1.0).unwrap());
        assert!((integral.ln() - g.cgf(&dv(&[theta])).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn mean_and_covariance_examples() {
        let sym = SummandModel::rademacher(0.5).unwrap();
        assert_eq!(sym.mean(), pv(&[0.0]));
        assert!((sym.covariance().entry(0, 0) - 1.0).abs() < 1e-15);
        let m = two_atoms(0.3);
        let mu = m.mean();
        assert!((mu[0] - 0.3).abs() < 1e-15 && (mu[1] - 0.7).abs() < 1e-15);
        let g =
            SummandModel::gaussian(vec![2.0, -1.0], vec![vec![1.0, 0.2], vec![0.2, 3.0]]).unwrap();
        assert_eq!(g.mean(), pv(&[2.0, -1.0]));
        assert_eq!(g.covariance().entry(1, 1), 3.0);
    }

    #[test]
    fn grid_function_uses_kernel_matrix() {
        let grid = vec![0.25, 0.5, 1.0];
        let k = Kernel::Brownian { variance: 2.0 };
        let gf = SummandModel::GridFunction(
            GridFunction::gaussian(grid.clone(), vec![0.0; 3], k).unwrap(),
        );
        let cov = gf.covariance();
        for (i, &s) in grid.iter().enumerate() {
            for (j, &t) in grid.iter().enumerate() {
                assert_eq!(cov.entry(i, j), 2.0 * f64::min(s, t));
            }
        }
        // Σv(s_i) = Σ_j K(s_i, s_j) w_j for a discrete measure with weights w
        let w = dv(&[1.0, -0.5, 0.25]);
        let sv = crate::dual::apply_cov(&cov, &w).unwrap();
        for (i, &s) in grid.iter().enumerate() {
            let want: f64 = grid
                .iter()
                .zip(w.coords())
                .map(|(&t, wj)| k.eval(s, t) * wj)
                .sum();
            assert!((sv[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn dependent_atoms_rejected_when_m_le_h() {
        let err =
            SummandModel::finite_support(vec![vec![1.0, 1.0], vec![2.0, 2.0]], vec![0.5, 0.5]);
        assert!(matches!(err, Err(Error::Validation(_))));
        // m > h is allowed for sampling and the cgf, not for the closed-form rate
        let m = SummandModel::finite_support(
            vec![vec![0.0], vec![1.0], vec![3.0]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        assert!(m.cgf(&dv(&[0.4])).unwrap().is_finite());
        assert!(matches!(
            cramer_rate_finite_support(&m, &pv(&[1.0])),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn cramer_rate_examples() {
        let m = two_atoms(0.5);
        assert_eq!(
            cramer_rate_finite_support(&m, &m.mean()).unwrap(),
            ExtendedReal::ZERO
        );
        let v = cramer_rate_finite_support(&m, &pv(&[1.0, 0.0])).unwrap();
        assert!((v.finite().unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(
            cramer_rate_finite_support(&m, &pv(&[1.0, 1.0])).unwrap(),
            ExtendedReal::PosInf
        );
        assert_eq!(
            cramer_rate_finite_support(&m, &pv(&[1.2, -0.2])).unwrap(),
            ExtendedReal::PosInf
        );
        let g = SummandModel::Gaussian(Gaussian::scalar(0.0, 1.0).unwrap());
        assert!(matches!(
            cramer_rate_finite_support(&g, &pv(&[0.0])),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn sampling_contracts() {
        let m = two_atoms(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(m.sample(&mut rng, 0).is_empty());

        let r = 100_000;
        let draws = m.sample(&mut ChaCha8Rng::seed_from_u64(11), r);
        let again = m.sample(&mut ChaCha8Rng::seed_from_u64(11), r);
        assert_eq!(draws, again);
        let freq = draws.iter().filter(|d| d[0] == 1.0).count() as f64 / r as f64;
        let se = (0.3f64 * 0.7 / r as f64).sqrt();
        assert!((freq - 0.3).abs() < 4.0 * se, "freq {freq}");
    }

    #[test]
    fn tilted_mean_is_cgf_gradient() {
        let m = SummandModel::finite_support(
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 2.0, 0.0],
                vec![0.0, 0.0, -1.0],
            ],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        let theta = dv(&[0.3, -0.4, 0.8]);
        let tilted = m.tilted(&theta).unwrap();
        let g = m.cgf_gradient(&theta).unwrap();
        for (a, b) in tilted.mean().coords().iter().zip(g.coords()) {
            assert!((a - b).abs() < 1e-14);
        }
        let gauss =
            SummandModel::gaussian(vec![1.0, 0.0], vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let t = gauss.tilted(&dv(&[1.0, 0.0])).unwrap();
        assert_eq!(t.mean(), pv(&[3.0, 1.0]));
    }
}
