#![cfg_attr(not(test), no_std)]
//! Data-driven approximation of the covariance ellipsoid of a random vector.
//!
//! Given i.i.d. samples `X_1, ..., X_N` of a centred random vector `X` with
//! covariance `T`, the ellipsoid `B = {v : <Tv, v> <= 1}` is approximated by
//! star-shaped bodies built from the data alone:
//!
//! - [`slab::SlabBody`]: points lying in at least `k` of `n` slabs
//!   `{v : |<z_j, v>| <= theta}`, optionally after block averaging the samples.
//! - [`ellipsoid::EllipsoidBody`]: points whose block second moment
//!   `m^-1 sum <X_i, v>^2` stays below `1 + eta` on at least `0.9 n` blocks.
//! - [`baseline::EmpiricalEllipsoid`]: the empirical covariance ellipsoid,
//!   which fails for heavy-tailed inputs.
//!
//! Every body exposes a closed-form radial function, and [`verifier`]
//! compares radial functions against the true ellipsoid on sampled
//! directions of the `L2` unit sphere.
//!
//! The crate is `no_std` and only needs `alloc`. IO, configuration and the
//! command line live in the `covapprox` harness crate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baseline;
pub mod body;
pub mod distributions;
pub mod ellipsoid;
pub mod error;
pub mod linalg;
pub mod normal;
pub mod rng;
pub mod settings;
pub mod slab;
pub mod verifier;

pub(crate) mod util;

pub use crate::body::StarBody;
pub use crate::error::{Error, Result};
pub use crate::linalg::{SpectralDecomposition, SymMatrix, Vector};
pub use crate::rng::RngStream;
pub use crate::settings::NumericSettings;
