use crate::error::{Error, Result};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `ceil(frac * n)` where products within `1e-9` of an integer snap to it,
/// so `0.45 * 100` is 45 rather than 46. Clamped to `[1, n]`.
pub(crate) fn ceil_count(frac: f64, n: usize) -> usize {
    let x = frac * n as f64;
    let r = libm::round(x);
    let c = if libm::fabs(x - r) <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        libm::ceil(x)
    };
    (c.max(1.0) as usize).min(n)
}

/// The `k`-th smallest value (1-based) of `values`, reordering the slice.
pub(crate) fn kth_smallest(values: &mut [f64], k: usize) -> f64 {
    debug_assert!(k >= 1 && k <= values.len());
    let (_, kth, _) = values.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    *kth
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_count_snaps_to_integers() {
        assert_eq!(ceil_count(0.5 - 0.05, 100), 45);
        assert_eq!(ceil_count(1.0 - 0.2 / 4.0, 100), 95);
        assert_eq!(ceil_count(0.5 - 0.1, 10), 4);
        assert_eq!(ceil_count(0.9, 10), 9);
        assert_eq!(ceil_count(0.9, 11), 10);
        assert_eq!(ceil_count(0.0, 7), 1);
    }

    #[test]
    fn kth_smallest_matches_sort() {
        let mut v = [5.0, 1.0, 4.0, 2.0, 3.0];
        for k in 1..=5 {
            assert_eq!(kth_smallest(&mut v.clone(), k), k as f64);
        }
        assert_eq!(kth_smallest(&mut v, 1), 1.0);
    }
}
