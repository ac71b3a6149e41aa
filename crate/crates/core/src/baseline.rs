//! The empirical covariance ellipsoid and deviation diagnostics.

use alloc::vec::Vec;

use crate::body::StarBody;
use crate::error::{Error, Result};
use crate::linalg::{psd_pow, quadratic_form_unchecked, sym_eig, SymMatrix, Vector};
use crate::util::{check_dim, dot};

/// `B_hat = {v : <T_hat v, v> <= 1}` with `T_hat = N^-1 sum X_i X_i^T`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmpiricalEllipsoid {
    pub covariance: SymMatrix,
    pub samples: usize,
}

fn second_moment(samples: &[Vector]) -> Result<SymMatrix> {
    let d = samples.first().ok_or(Error::Empty("samples"))?.dim();
    let mut acc = alloc::vec![0.0; d * d];
    for x in samples {
        check_dim(d, x.dim())?;
        for a in 0..d {
            let xa = x[a];
            for b in a..d {
                acc[a * d + b] += xa * x[b];
            }
        }
    }
    let inv = 1.0 / samples.len() as f64;
    Ok(SymMatrix::from_upper_fn(d, |a, b| acc[a * d + b] * inv))
}

pub fn empirical_covariance(samples: &[Vector]) -> Result<EmpiricalEllipsoid> {
    Ok(EmpiricalEllipsoid {
        covariance: second_moment(samples)?,
        samples: samples.len(),
    })
}

/// `1 / sqrt(u^T T_hat u)`, infinite on the kernel of `T_hat`.
pub fn radial_empirical(e: &EmpiricalEllipsoid, u: &[f64]) -> Result<f64> {
    e.radial(u)
}

impl StarBody for EmpiricalEllipsoid {
    fn dim(&self) -> usize {
        self.covariance.dim()
    }

    fn contains(&self, v: &[f64]) -> Result<bool> {
        check_dim(self.dim(), v.len())?;
        Ok(quadratic_form_unchecked(&self.covariance, v) <= 1.0)
    }

    fn radial(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        if u.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroDirection);
        }
        let q = quadratic_form_unchecked(&self.covariance, u);
        Ok(if q <= 0.0 { f64::INFINITY } else { 1.0 / libm::sqrt(q) })
    }
}

fn isotropize(samples: &[Vector], t: &SymMatrix) -> Result<Vec<Vector>> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let w = psd_pow(t, -0.5)?;
    samples.iter().map(|x| w.apply(x)).collect()
}

fn deviation_of(t_hat_y: &SymMatrix) -> Result<(f64, f64)> {
    let eig = sym_eig(t_hat_y)?;
    let dev = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, l| acc.max(libm::fabs(1.0 - l)));
    Ok((dev, eig.eigenvalues[0]))
}

/// `||Id - N^-1 sum Y_i Y_i^T||_{2->2}` with `Y_i = T^{-1/2} X_i`.
pub fn isotropic_deviation(samples: &[Vector], t: &SymMatrix) -> Result<f64> {
    let y = isotropize(samples, t)?;
    Ok(deviation_of(&second_moment(&y)?)?.0)
}

/// The measured deviation next to the three terms of the heavy-tail
/// operator-norm bound
/// `N^-1 max ||Y_i||^2 + (d/N)^{1-2/p} ln^4(eN/d) + (d/N)^{1-2/min(4,p)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviationDiagnostics {
    pub dim: usize,
    pub samples: usize,
    pub p: f64,
    pub operator_deviation: f64,
    pub max_norm_term: f64,
    pub moment_term: f64,
    pub truncation_term: f64,
    /// `sup_{|v|=1} N^-1 sum <Y_i, v>^2`, which always dominates `max_norm_term`.
    pub top_eigenvalue: f64,
}

impl DeviationDiagnostics {
    pub fn bound_sum(&self) -> f64 {
        self.max_norm_term + self.moment_term + self.truncation_term
    }

    /// `top_eigenvalue >= max_norm_term`, up to rounding.
    pub fn dominance_holds(&self) -> bool {
        self.top_eigenvalue >= self.max_norm_term * (1.0 - 1e-12)
    }
}

/// The moment and truncation terms for given `d`, `N`, `p`.
pub fn bound_terms(d: usize, n: usize, p: f64) -> Result<(f64, f64)> {
    if !(p > 2.0) {
        return Err(Error::invalid("p", "must exceed 2"));
    }
    if d == 0 || n == 0 {
        return Err(Error::Empty("dimension or sample count"));
    }
    let ratio = d as f64 / n as f64;
    let log = libm::log(core::f64::consts::E * n as f64 / d as f64);
    let moment = libm::pow(ratio, 1.0 - 2.0 / p) * log * log * log * log;
    let truncation = libm::pow(ratio, 1.0 - 2.0 / p.min(4.0));
    Ok((moment, truncation))
}

pub fn tikhomirov_bound_terms(samples: &[Vector], t: &SymMatrix, p: f64) -> Result<DeviationDiagnostics> {
    let d = t.dim();
    let (moment_term, truncation_term) = bound_terms(d, samples.len().max(1), p)?;
    let y = isotropize(samples, t)?;
    let n = y.len();
    let max_sq = y.iter().map(|v| dot(v, v)).fold(0.0f64, f64::max);
    let (operator_deviation, top_eigenvalue) = deviation_of(&second_moment(&y)?)?;
    Ok(DeviationDiagnostics {
        dim: d,
        samples: n,
        p,
        operator_deviation,
        max_norm_term: max_sq / n as f64,
        moment_term,
        truncation_term,
        top_eigenvalue,
    })
}
