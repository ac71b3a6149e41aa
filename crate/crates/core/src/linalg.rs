//! Dense symmetric linear algebra.
//!
//! Matrices here are small (`d` up to a few hundred), so everything is stored
//! densely in row-major order and eigenproblems are solved with cyclic Jacobi
//! rotations, which are slow asymptotically but very accurate.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::settings::NumericSettings;
use crate::util::{check_dim, dot};

/// A point or direction in `R^d`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    /// The `i`-th standard basis vector.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        crate::util::norm2(&self.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Vector(self.0.iter().map(|x| x * c).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Vector(v.to_vec())
    }
}

/// A real symmetric `d x d` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>"))]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries, checking symmetry and finiteness.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        Self::new_with(dim, data, &NumericSettings::default())
    }

    pub fn new_with(dim: usize, data: Vec<f64>, settings: &NumericSettings) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("matrix dimension"));
        }
        check_dim(dim * dim, data.len())?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                if (a - b).abs() > settings.symmetry_tol * a.abs().max(1.0) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            check_dim(dim, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    /// Builds a matrix from the upper triangle produced by `f(i, j)`, `i <= j`.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let x = f(i, j);
                data[i * dim + j] = x;
                data[j * dim + i] = x;
            }
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        Self::from_upper_fn(dim, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        libm::sqrt(dot(&self.data, &self.data))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn is_identity(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.get(i, j) == if i == j { 1.0 } else { 0.0 }))
    }

    /// `A v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vector> {
        check_dim(self.dim, v.len())?;
        Ok(Vector((0..self.dim).map(|i| dot(self.row(i), v)).collect()))
    }

    /// `A v` into a caller buffer; dimensions are not checked.
    #[inline]
    pub(crate) fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    /// `M A M` for symmetric `M`, symmetrized exactly.
    pub fn congruence(&self, m: &SymMatrix) -> Result<Self> {
        check_dim(self.dim, m.dim)?;
        let d = self.dim;
        // ma = M A
        let mut ma = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let mik = m.get(i, k);
                if mik == 0.0 {
                    continue;
                }
                let arow = self.row(k);
                for j in 0..d {
                    ma[i * d + j] += mik * arow[j];
                }
            }
        }
        Ok(Self::from_upper_fn(d, |i, j| {
            let x = dot(&ma[i * d..(i + 1) * d], m.row(j));
            let y = dot(&ma[j * d..(j + 1) * d], m.row(i));
            0.5 * (x + y)
        }))
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// `A = Q diag(eigenvalues) Q^T` with eigenvalues sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Row-major `d x d`; column `j` is the eigenvector for `eigenvalues[j]`.
    pub eigenvectors: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, j: usize) -> Vector {
        let d = self.dim();
        Vector((0..d).map(|i| self.eigenvectors[i * d + j]).collect())
    }

    /// `Q diag(f(lambda)) Q^T`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.dim();
        let q = &self.eigenvectors;
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        SymMatrix::from_upper_fn(d, |i, j| (0..d).map(|k| q[i * d + k] * mapped[k] * q[j * d + k]).sum())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map_eigenvalues(|l| l)
    }
}

/// Eigendecomposition by cyclic Jacobi rotations with default settings.
pub fn sym_eig(a: &SymMatrix) -> Result<SpectralDecomposition> {
    sym_eig_with(a, &NumericSettings::default())
}

pub fn sym_eig_with(a: &SymMatrix, settings: &NumericSettings) -> Result<SpectralDecomposition> {
    let d = a.dim;
    let mut m = a.data.clone();
    let mut q = SymMatrix::identity(d).data;

    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                s += 2.0 * m[i * d + j] * m[i * d + j];
            }
        }
        libm::sqrt(s)
    };
    let scale = a.frobenius();
    let target = settings.jacobi_tol * scale;

    let mut sweeps = 0;
    let mut residual = off(&m);
    while residual > target && residual > 0.0 {
        if sweeps == settings.jacobi_max_sweeps {
            return Err(Error::NoConvergence { sweeps, residual });
        }
        for p in 0..d {
            for r in (p + 1)..d {
                let apq = m[p * d + r];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (m[p * d + p], m[r * d + r]);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + libm::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..d {
                    let (mkp, mkq) = (m[k * d + p], m[k * d + r]);
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + r] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let (mpk, mqk) = (m[p * d + k], m[r * d + k]);
                    m[p * d + k] = c * mpk - s * mqk;
                    m[r * d + k] = s * mpk + c * mqk;
                }
                m[p * d + r] = 0.0;
                m[r * d + p] = 0.0;
                for k in 0..d {
                    let (qkp, qkq) = (q[k * d + p], q[k * d + r]);
                    q[k * d + p] = c * qkp - s * qkq;
                    q[k * d + r] = s * qkp + c * qkq;
                }
            }
        }
        sweeps += 1;
        residual = off(&m);
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[j * d + j].total_cmp(&m[i * d + i]));
    let eigenvalues = order.iter().map(|&i| m[i * d + i]).collect();
    let mut eigenvectors = vec![0.0; d * d];
    for (new, &old) in order.iter().enumerate() {
        // Sign convention: the largest-magnitude component is positive.
        let mut pivot = 0.0f64;
        for i in 0..d {
            let x = q[i * d + old];
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            eigenvectors[i * d + new] = sign * q[i * d + old];
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `A^exponent` for positive semidefinite `A`.
pub fn psd_pow(a: &SymMatrix, exponent: f64) -> Result<SymMatrix> {
    psd_pow_with(a, exponent, &NumericSettings::default())
}

pub fn psd_pow_with(a: &SymMatrix, exponent: f64, settings: &NumericSettings) -> Result<SymMatrix> {
    let eig = sym_eig_with(a, settings)?;
    let smallest = *eig.eigenvalues.last().expect("dimension >= 1");
    if smallest < -settings.psd_clamp {
        return Err(Error::NotPsd { eigenvalue: smallest });
    }
    if exponent < 0.0 && smallest <= settings.invertibility_tol {
        return Err(Error::NotInvertible { eigenvalue: smallest });
    }
    Ok(eig.map_eigenvalues(|l| {
        let l = l.max(0.0);
        if exponent == 0.0 {
            1.0
        } else if exponent == 0.5 {
            libm::sqrt(l)
        } else if exponent == -0.5 {
            1.0 / libm::sqrt(l)
        } else {
            libm::pow(l, exponent)
        }
    }))
}

/// `v^T A v`.
pub fn quadratic_form(a: &SymMatrix, v: &[f64]) -> Result<f64> {
    check_dim(a.dim, v.len())?;
    Ok(quadratic_form_unchecked(a, v))
}

#[inline]
pub(crate) fn quadratic_form_unchecked(a: &SymMatrix, v: &[f64]) -> f64 {
    (0..a.dim).map(|i| v[i] * dot(a.row(i), v)).sum()
}

/// `||A||_{2->2}` for symmetric `A`: the largest eigenvalue magnitude.
pub fn operator_norm_sym(a: &SymMatrix) -> Result<f64> {
    let eig = sym_eig(a)?;
    Ok(eig.eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_sym(d: usize, seed: u64) -> SymMatrix {
        // Small LCG so the tests do not depend on the sampler module.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let vals: Vec<f64> = (0..d * d).map(|_| next()).collect();
        SymMatrix::from_upper_fn(d, |i, j| vals[i * d + j])
    }

    fn random_psd(d: usize, seed: u64, ridge: f64) -> SymMatrix {
        let b = random_sym(d, seed);
        SymMatrix::from_upper_fn(d, |i, j| dot(b.row(i), b.row(j)) + if i == j { ridge } else { 0.0 })
    }

    fn rel_frob(a: &SymMatrix, b: &SymMatrix) -> f64 {
        a.sub(b).unwrap().frobenius() / b.frobenius().max(1e-300)
    }

    fn matmul(a: &SymMatrix, b: &SymMatrix) -> Vec<f64> {
        let d = a.dim();
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|k| a.get(i, k) * b.get(k, j)).sum();
            }
        }
        out
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        assert_eq!(
            SymMatrix::new(2, vec![1.0, 2.0, 2.1, 1.0]),
            Err(Error::NotSymmetric { row: 0, col: 1 })
        );
        assert_eq!(SymMatrix::new(1, vec![f64::NAN]), Err(Error::NonFinite));
        assert!(SymMatrix::new(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn eig_identity() {
        let e = sym_eig(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(dot(&e.eigenvector(i), &e.eigenvector(j)), expect);
            }
        }
    }

    #[test]
    fn eig_diagonal() {
        let e = sym_eig(&SymMatrix::diagonal(&[4.0, 1.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![4.0, 1.0]);
        assert_eq!(e.eigenvector(0).0, vec![1.0, 0.0]);
        assert_eq!(e.eigenvector(1).0, vec![0.0, 1.0]);
    }

    #[test]
    fn eig_two_by_two_reconstructs() {
        let a = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(rel_frob(&e.reconstruct(), &a) < 1e-12);
    }

    #[test]
    fn eig_random_orthogonality_and_reconstruction() {
        for (d, seed) in [(5, 1), (17, 2), (40, 3)] {
            let a = random_sym(d, seed);
            let e = sym_eig(&a).unwrap();
            assert!(rel_frob(&e.reconstruct(), &a) < 1e-9);
            for i in 0..d {
                for j in 0..d {
                    let qi = e.eigenvector(i);
                    let qj = e.eigenvector(j);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(&qi, &qj) - expect).abs() < 1e-10);
                }
            }
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eig_iteration_cap_reports_residual() {
        let a = random_sym(6, 9);
        let settings = NumericSettings {
            jacobi_max_sweeps: 0,
            ..Default::default()
        };
        match sym_eig_with(&a, &settings) {
            Err(Error::NoConvergence { sweeps: 0, residual }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pow_examples() {
        let id = SymMatrix::identity(3);
        assert_eq!(psd_pow(&id, -0.5).unwrap(), id);
        let d = psd_pow(&SymMatrix::diagonal(&[4.0, 1.0]), 0.5).unwrap();
        assert_eq!(d, SymMatrix::diagonal(&[2.0, 1.0]));

        let a = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let m = psd_pow(&a, 0.5).unwrap();
        let mm = matmul(&m, &m);
        for (x, y) in mm.iter().zip(a.as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn pow_errors() {
        let neg = SymMatrix::diagonal(&[1.0, -1e-6]);
        assert!(matches!(psd_pow(&neg, 0.5), Err(Error::NotPsd { .. })));
        let tiny_neg = SymMatrix::diagonal(&[1.0, -1e-10]);
        assert_eq!(psd_pow(&tiny_neg, 0.5).unwrap(), SymMatrix::diagonal(&[1.0, 0.0]));
        let singular = SymMatrix::diagonal(&[1.0, 0.0]);
        assert!(matches!(psd_pow(&singular, -0.5), Err(Error::NotInvertible { .. })));
    }

    #[test]
    fn quadratic_form_examples() {
        let v = [0.3, -1.2, 2.0];
        let q = quadratic_form(&SymMatrix::identity(3), &v).unwrap();
        assert!((q - dot(&v, &v)).abs() < 1e-15);
        let q = quadratic_form(&SymMatrix::diagonal(&[4.0, 1.0]), &[1.0, 1.0]).unwrap();
        assert_eq!(q, 5.0);
        assert!(matches!(
            quadratic_form(&SymMatrix::identity(2), &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quadratic_form_matches_double_loop() {
        let a = random_psd(5, 11, 0.1);
        let v = [0.4, -0.7, 1.3, 0.05, -2.0];
        let mut naive = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                naive += v[i] * a.get(i, j) * v[j];
            }
        }
        let q = quadratic_form(&a, &v).unwrap();
        assert!((q - naive).abs() <= 1e-12 * naive.abs());
    }

    #[test]
    fn operator_norm_examples() {
        assert_eq!(operator_norm_sym(&SymMatrix::diagonal(&[4.0, 1.0])).unwrap(), 4.0);
        let id = SymMatrix::identity(4);
        assert_eq!(operator_norm_sym(&id.sub(&id).unwrap()).unwrap(), 0.0);
        let a = random_sym(6, 5);
        let e = sym_eig(&a).unwrap();
        let oracle = e.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let got = operator_norm_sym(&a).unwrap();
        assert!((got - oracle).abs() <= 1e-8 * oracle);
        // Independent check through power iteration on A^2.
        let mut v = vec![1.0; 6];
        for _ in 0..2000 {
            let w = a.apply(&a.apply(&v).unwrap()).unwrap();
            let n = crate::util::norm2(&w);
            v = w.0.iter().map(|x| x / n).collect();
        }
        let rayleigh = dot(&v, &a.apply(&a.apply(&v).unwrap()).unwrap());
        assert!((libm::sqrt(rayleigh) - oracle).abs() <= 1e-8 * oracle);
    }

    #[test]
    fn congruence_matches_explicit_product() {
        let a = random_psd(4, 21, 0.5);
        let m = random_sym(4, 22);
        let got = a.congruence(&m).unwrap();
        let ma = matmul(&m, &a);
        let ma = SymMatrix { dim: 4, data: ma };
        let mam = matmul(&ma, &m);
        for (x, y) in got.as_slice().iter().zip(&mam) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sqrt_squares_back(d in 1usize..=64, seed in any::<u64>()) {
            let a = random_psd(d, seed, 0.0);
            let m = psd_pow(&a, 0.5).unwrap();
            let mm = SymMatrix { dim: d, data: matmul(&m, &m) };
            prop_assert!(rel_frob(&mm, &a) < 1e-9);
        }

        #[test]
        fn inverse_sqrt_whitens(d in 1usize..=24, seed in any::<u64>()) {
            let a = random_psd(d, seed, 1.0);
            let w = psd_pow(&a, -0.5).unwrap();
            let white = a.congruence(&w).unwrap();
            prop_assert!(white.sub(&SymMatrix::identity(d)).unwrap().frobenius() < 1e-8);
        }

        #[test]
        fn psd_quadratic_forms_nonnegative(d in 1usize..=12, seed in any::<u64>(),
                                           v in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let a = random_psd(d, seed, 0.0);
            prop_assert!(quadratic_form(&a, &v[..d]).unwrap() >= -1e-12);
        }

        #[test]
        fn eigenvalues_sum_to_trace(d in 1usize..=32, seed in any::<u64>()) {
            let a = random_sym(d, seed);
            let e = sym_eig(&a).unwrap();
            let sum: f64 = e.eigenvalues.iter().sum();
            prop_assert!((sum - a.trace()).abs() <= 1e-9 * a.frobenius().max(1.0));
        }
    }
}
