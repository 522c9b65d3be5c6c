//! Finite-dimensional dual pairs.
//!
//! The working space is ℝ^h with the Euclidean pairing. Function-space
//! summands live on a fixed grid of h points, where a dual vector holds the
//! weights of a discrete signed measure and the pairing reads
//! `⟨v, f⟩ = Σ v_i f(s_i)`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Index, Neg};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetry tolerance of a covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue tolerated in a positive semidefinite matrix.
pub const PSD_TOL: f64 = 1e-10;
/// Relative singular-value cutoff of the pseudoinverse.
pub const PINV_CUTOFF: f64 = 1e-10;
/// Residual above which a point is declared outside the image of Σ.
pub const IMAGE_RESIDUAL_TOL: f64 = 1e-8;

fn check_finite(coords: &[f64], what: &str) -> Result<()> {
    if coords.is_empty() {
        return Err(Error::InvalidValue(format!(
            "{what} must have dimension ≥ 1"
        )));
    }
    if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidValue(format!(
            "{what} has non-finite coordinate {c}"
        )));
    }
    Ok(())
}

macro_rules! vector_type {
    ($name:ident, $what:literal) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(coords: Vec<f64>) -> Result<Self> {
                check_finite(&coords, $what)?;
                Ok(Self(coords))
            }

            pub fn zeros(dim: usize) -> Self {
                Self(vec![0.0; dim.max(1)])
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn coords(&self) -> &[f64] {
                &self.0
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            pub fn norm(&self) -> f64 {
                self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
            }

            pub fn is_zero(&self, tol: f64) -> bool {
                self.0.iter().all(|c| c.abs() <= tol)
            }

            pub fn scaled(&self, a: f64) -> Self {
                Self(self.0.iter().map(|c| a * c).collect())
            }

            /// `self + a·other`.
            pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
                same_dim(self.dim(), other.dim())?;
                Ok(Self(
                    self.0
                        .iter()
                        .zip(&other.0)
                        .map(|(x, y)| x + a * y)
                        .collect(),
                ))
            }

            pub(crate) fn from_unchecked(coords: Vec<f64>) -> Self {
                Self(coords)
            }

            pub(crate) fn to_dvector(&self) -> DVector<f64> {
                DVector::from_column_slice(&self.0)
            }
        }

        impl Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                self.scaled(-1.0)
            }
        }
    };
}

vector_type!(PrimalVector, "primal vector");
vector_type!(DualVector, "dual vector");

impl DualVector {
    /// The dual vector with the same coordinates, read as a primal point.
    pub fn to_primal(&self) -> PrimalVector {
        PrimalVector(self.0.clone())
    }
}

impl PrimalVector {
    pub fn to_dual(&self) -> DualVector {
        DualVector(self.0.clone())
    }
}

pub(crate) fn same_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// The duality ⟨θ, x⟩.
pub fn pair(theta: &DualVector, x: &PrimalVector) -> Result<f64> {
    same_dim(theta.dim(), x.dim())?;
    Ok(dot(theta.coords(), x.coords()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Value in [−∞, +∞].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInf,
    NegInf,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    /// Maps ±∞ floats onto the infinite tags. NaN is rejected.
    pub fn from_f64(v: f64) -> Result<Self> {
        if v.is_nan() {
            Err(Error::InvalidValue("NaN is not an extended real".into()))
        } else if v == f64::INFINITY {
            Ok(ExtendedReal::PosInf)
        } else if v == f64::NEG_INFINITY {
            Ok(ExtendedReal::NegInf)
        } else {
            Ok(ExtendedReal::Finite(v))
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInf => f64::INFINITY,
            ExtendedReal::NegInf => f64::NEG_INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn is_pos_inf(self) -> bool {
        matches!(self, ExtendedReal::PosInf)
    }

    /// Extended addition; `+∞ + −∞` is an error rather than NaN.
    pub fn checked_add(self, other: ExtendedReal) -> Result<ExtendedReal> {
        use ExtendedReal::*;
        match (self, other) {
            (PosInf, NegInf) | (NegInf, PosInf) => Err(Error::UndefinedInfinity),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
            (Finite(a), Finite(b)) => ExtendedReal::from_f64(a + b),
        }
    }

    /// Multiplication by a strictly positive finite scalar.
    pub fn scale_positive(self, a: f64) -> Result<ExtendedReal> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "scale factor {a} must be positive and finite"
            )));
        }
        Ok(match self {
            ExtendedReal::Finite(v) => ExtendedReal::from_f64(a * v)?,
            other => other,
        })
    }

    pub fn neg(self) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(-v),
            ExtendedReal::PosInf => ExtendedReal::NegInf,
            ExtendedReal::NegInf => ExtendedReal::PosInf,
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInf => write!(f, "inf"),
            ExtendedReal::NegInf => write!(f, "-inf"),
        }
    }
}

/// Serialized as a number, or as the strings `"inf"` and `"-inf"`.
impl Serialize for ExtendedReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(*v),
            ExtendedReal::PosInf => s.serialize_str("inf"),
            ExtendedReal::NegInf => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => ExtendedReal::from_f64(v).map_err(serde::de::Error::custom),
            Raw::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(ExtendedReal::PosInf),
                "-inf" => Ok(ExtendedReal::NegInf),
                other => Err(serde::de::Error::custom(format!(
                    "not an extended real: {other}"
                ))),
            },
        }
    }
}

/// Symmetric positive semidefinite operator Σ: B* → B.
///
/// The eigendecomposition is computed once at construction and reused for
/// the pseudoinverse and for Gaussian sampling.
#[derive(Debug, Clone)]
pub struct CovarianceOperator {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl PartialEq for CovarianceOperator {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

/// Outcome of inverting Σ on a primal point.
#[derive(Debug, Clone, PartialEq)]
pub enum CovSolve {
    Solved(DualVector),
    /// The point is not in Im(Σ); carries the least-squares residual.
    NotInImage {
        residual: f64,
    },
}

impl CovarianceOperator {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let h = rows.len();
        if h == 0 {
            return Err(Error::InvalidValue(
                "covariance must be at least 1×1".into(),
            ));
        }
        for r in rows {
            same_dim(h, r.len())?;
        }
        Self::from_matrix(DMatrix::from_fn(h, h, |i, j| rows[i][j]))
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let h = matrix.nrows();
        if h == 0 || matrix.ncols() != h {
            return Err(Error::InvalidValue(
                "covariance must be square and non-empty".into(),
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(
                "covariance has non-finite entries".into(),
            ));
        }
        let scale = matrix.amax().max(1.0);
        for i in 0..h {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidValue(format!(
                        "covariance is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        if let Some(min) = eig.eigenvalues.iter().cloned().reduce(f64::min) {
            if min < -PSD_TOL * scale {
                return Err(Error::InvalidValue(format!(
                    "covariance is not positive semidefinite (eigenvalue {min})"
                )));
            }
        }
        Ok(Self {
            matrix: sym,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn identity(h: usize) -> Self {
        Self::from_matrix(DMatrix::identity(h, h)).expect("identity is a covariance")
    }

    pub fn zero(h: usize) -> Self {
        Self::from_matrix(DMatrix::zeros(h, h)).expect("zero is a covariance")
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.matrix.row(i).iter().cloned().collect())
            .collect()
    }

    /// Largest eigenvalue, clamped below at zero.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// A square root `L` with `L Lᵀ = Σ`, built from the eigendecomposition so
    /// that singular covariances are handled.
    pub fn sqrt_factor(&self) -> DMatrix<f64> {
        let roots = self.eigenvalues.map(|l| l.max(0.0).sqrt());
        &self.eigenvectors * DMatrix::from_diagonal(&roots)
    }

    /// The quadratic form ⟨θ, Σθ⟩.
    pub fn quadratic(&self, theta: &DualVector) -> Result<f64> {
        let s = apply_cov(self, theta)?;
        pair(theta, &s)
    }

    fn pinv_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let cutoff = PINV_CUTOFF * self.spectral_radius();
        let mut coeffs = self.eigenvectors.transpose() * x;
        for (c, &l) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            if l > cutoff && l > 0.0 {
                *c /= l;
            } else {
                *c = 0.0;
            }
        }
        &self.eigenvectors * coeffs
    }
}

/// Σv as a primal vector.
pub fn apply_cov(sigma: &CovarianceOperator, v: &DualVector) -> Result<PrimalVector> {
    same_dim(sigma.dim(), v.dim())?;
    let out = sigma.matrix() * v.to_dvector();
    Ok(PrimalVector::from_unchecked(out.iter().cloned().collect()))
}

/// Pseudoinverse solve of Σu = x with an image-membership test.
pub fn solve_cov(sigma: &CovarianceOperator, x: &PrimalVector) -> Result<CovSolve> {
    same_dim(sigma.dim(), x.dim())?;
    let xv = x.to_dvector();
    let u = sigma.pinv_apply(&xv);
    let residual = (sigma.matrix() * &u - &xv).norm();
    if residual > IMAGE_RESIDUAL_TOL * xv.norm().max(1.0) {
        return Ok(CovSolve::NotInImage { residual });
    }
    Ok(CovSolve::Solved(DualVector::from_unchecked(
        u.iter().cloned().collect(),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(c: &[f64]) -> DualVector {
        DualVector::new(c.to_vec()).unwrap()
    }
    fn pv(c: &[f64]) -> PrimalVector {
        PrimalVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn pair_examples() {
        assert_eq!(pair(&dv(&[0.0, 0.0]), &pv(&[3.0, 4.0])).unwrap(), 0.0);
        assert_eq!(pair(&dv(&[1.0, 0.0]), &pv(&[3.0, 4.0])).unwrap(), 3.0);
        assert_eq!(pair(&dv(&[0.5, 0.5]), &pv(&[1.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn pair_dimension_mismatch() {
        let err = pair(&dv(&[1.0]), &pv(&[1.0, 2.0])).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 1,
                got: 2
            }
        );
    }

    #[test]
    fn rejects_non_finite_coordinates() {
        assert!(PrimalVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(DualVector::new(vec![]).is_err());
    }

    #[test]
    fn apply_cov_examples() {
        let v = dv(&[1.0, 2.0]);
        assert_eq!(
            apply_cov(&CovarianceOperator::identity(2), &v).unwrap(),
            pv(&[1.0, 2.0])
        );
        assert_eq!(
            apply_cov(&CovarianceOperator::zero(2), &v).unwrap(),
            pv(&[0.0, 0.0])
        );
        let s = CovarianceOperator::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(apply_cov(&s, &dv(&[1.0, 0.0])).unwrap(), pv(&[2.0, 1.0]));
    }

    #[test]
    fn solve_cov_examples() {
        match solve_cov(&CovarianceOperator::identity(2), &pv(&[1.0, 2.0])).unwrap() {
            CovSolve::Solved(u) => assert_eq!(u, dv(&[1.0, 2.0])),
            other => panic!("{other:?}"),
        }
        let diag = CovarianceOperator::diagonal(&[1.0, 0.0]).unwrap();
        assert!(matches!(
            solve_cov(&diag, &pv(&[0.0, 1.0])).unwrap(),
            CovSolve::NotInImage { .. }
        ));
        let s = CovarianceOperator::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        match solve_cov(&s, &pv(&[2.0, 1.0])).unwrap() {
            CovSolve::Solved(u) => {
                assert!((u[0] - 1.0).abs() < 1e-12 && u[1].abs() < 1e-12, "{u:?}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn covariance_validation() {
        assert!(CovarianceOperator::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(CovarianceOperator::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(CovarianceOperator::from_rows(&[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn extended_real_arithmetic() {
        use ExtendedReal::*;
        assert_eq!(Finite(1.0).checked_add(PosInf).unwrap(), PosInf);
        assert_eq!(NegInf.checked_add(Finite(3.0)).unwrap(), NegInf);
        assert_eq!(PosInf.checked_add(NegInf), Err(Error::UndefinedInfinity));
        assert!(Finite(1e300) < PosInf);
        assert!(NegInf < Finite(-1e300));
        assert_eq!(PosInf.to_string(), "inf");
        assert!(ExtendedReal::from_f64(f64::NAN).is_err());
    }
}
