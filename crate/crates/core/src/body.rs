//! The interface shared by every approximating body.

use crate::error::Result;

/// A closed set that is star-shaped around the origin and centrally symmetric.
pub trait StarBody {
    fn dim(&self) -> usize;

    fn contains(&self, v: &[f64]) -> Result<bool>;

    /// `sup {t >= 0 : t u in body}` for `u != 0`; `f64::INFINITY` when the
    /// body is unbounded along `u`.
    fn radial(&self, u: &[f64]) -> Result<f64>;
}
