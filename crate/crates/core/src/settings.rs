//! Numeric tolerances shared by the linear algebra and the verifier.

/// Tolerances and iteration caps. [`NumericSettings::default`] carries the
/// values used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NumericSettings {
    /// Relative asymmetry allowed when constructing a [`SymMatrix`](crate::SymMatrix).
    pub symmetry_tol: f64,
    /// Eigenvalues in `[-psd_clamp, 0)` are clamped to zero by `psd_pow`.
    pub psd_clamp: f64,
    /// Smallest eigenvalue accepted when raising to a negative power.
    pub invertibility_tol: f64,
    /// Sweep cap for the cyclic Jacobi eigensolver.
    pub jacobi_max_sweeps: usize,
    /// Relative off-diagonal Frobenius norm at which Jacobi stops.
    pub jacobi_tol: f64,
    /// Number of sampled directions used by certification.
    pub default_directions: usize,
}

impl Default for NumericSettings {
    fn default() -> Self {
        Self {
            symmetry_tol: 1e-12,
            psd_clamp: 1e-9,
            invertibility_tol: 1e-12,
            jacobi_max_sweeps: 100,
            jacobi_tol: 1e-15,
            default_directions: 10_000,
        }
    }
}
