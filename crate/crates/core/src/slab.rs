//! Slab-count bodies.
//!
//! A slab body keeps `n` directions `z_j`, a threshold `theta` and a count
//! `k`; a point `v` belongs to it when `|<z_j, v>| <= theta` for at least `k`
//! indices. The set is a union of intersections of slabs, so it is generally
//! not convex, but it is closed, centrally symmetric and star-shaped, and its
//! radial function has the closed form `theta / a_(k)(u)` where `a_(k)(u)` is
//! the `k`-th smallest of `|<z_j, u>|`.
//!
//! The constructions differ only in where `z_j`, `theta` and `k` come from:
//!
//! | mode         | directions                 | `theta`        | `k`                       |
//! |--------------|----------------------------|----------------|---------------------------|
//! | `Smoothed`   | `m`-block averages of data | `alpha + eta`  | `ceil((1/2 - eta) n)`     |
//! | `Sharp`      | given vectors              | `alpha`        | `ceil((1/2 - eta) n)`     |
//! | `Isomorphic` | given vectors              | `lambda / 2`   | `ceil((1 - delta/4) N)`   |
//! | `General`    | given vectors              | `alpha + eta`  | `ceil((beta - eta) n)`    |
//!
//! where `alpha` in the first two rows is the median of `|g|` for a standard
//! gaussian `g`.

use alloc::vec::Vec;

use crate::body::StarBody;
use crate::distributions::block_average;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::normal::gaussian_abs_median;
use crate::util::{ceil_count, check_dim, dot, kth_smallest};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "snake_case"))]
pub enum SlabMode {
    /// Block-average raw samples with block size `m`, then threshold at `alpha + eta`.
    Smoothed { m: usize, eta: f64 },
    /// Threshold exactly at `alpha`.
    Sharp { eta: f64 },
    /// Constant-factor approximation under a small-ball condition
    /// `Pr(|<X, v>| >= lambda ||v||_{L2}) >= delta`.
    Isomorphic { lambda: f64, delta: f64 },
    /// Caller-chosen `alpha`, `beta` and `eta`.
    General { alpha: f64, beta: f64, eta: f64 },
}

impl SlabMode {
    fn validate(&self) -> Result<()> {
        let in_half = |eta: f64| eta > 0.0 && eta < 0.5;
        match *self {
            SlabMode::Smoothed { m, eta } => {
                if m == 0 {
                    return Err(Error::invalid("m", "block size must be positive"));
                }
                if !in_half(eta) {
                    return Err(Error::invalid("eta", "slab bodies need 0 < eta < 1/2"));
                }
            }
            SlabMode::Sharp { eta } => {
                if !in_half(eta) {
                    return Err(Error::invalid("eta", "slab bodies need 0 < eta < 1/2"));
                }
            }
            SlabMode::Isomorphic { lambda, delta } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::invalid("lambda", "must be positive"));
                }
                if !(delta > 0.0 && delta < 4.0) {
                    return Err(Error::invalid("delta", "isomorphic mode needs 0 < delta < 4"));
                }
            }
            SlabMode::General { alpha, beta, eta } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::invalid("alpha", "must be positive"));
                }
                if !(beta > 0.0 && beta <= 1.0) {
                    return Err(Error::invalid("beta", "must lie in (0, 1]"));
                }
                if !(eta >= 0.0 && eta < beta) {
                    return Err(Error::invalid("eta", "general mode needs 0 <= eta < beta"));
                }
            }
        }
        Ok(())
    }
}

/// Points lying in at least `required` of the slabs `|<z_j, v>| <= threshold`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlabBody {
    dim: usize,
    /// Row-major `n x dim`.
    directions: Vec<f64>,
    threshold: f64,
    required: usize,
    mode: SlabMode,
    /// Samples left over by block averaging.
    dropped: usize,
}

impl SlabBody {
    /// A body from explicit parts; `mode` is recorded only as metadata.
    pub fn from_parts(directions: &[Vector], threshold: f64, required: usize, mode: SlabMode) -> Result<Self> {
        let dim = directions.first().ok_or(Error::Empty("samples"))?.dim();
        if dim == 0 {
            return Err(Error::Empty("dimension"));
        }
        let mut flat = Vec::with_capacity(directions.len() * dim);
        for z in directions {
            check_dim(dim, z.dim())?;
            if z.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            flat.extend_from_slice(z);
        }
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::invalid("threshold", "must be positive"));
        }
        if required == 0 || required > directions.len() {
            return Err(Error::invalid("required", "count must lie in [1, n]"));
        }
        Ok(Self {
            dim,
            directions: flat,
            threshold,
            required,
            mode,
            dropped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn direction(&self, j: usize) -> &[f64] {
        &self.directions[j * self.dim..(j + 1) * self.dim]
    }

    pub fn directions(&self) -> impl Iterator<Item = &[f64]> {
        self.directions.chunks_exact(self.dim)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn required(&self) -> usize {
        self.required
    }

    pub fn mode(&self) -> SlabMode {
        self.mode
    }

    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Number of slabs containing `v`.
    pub fn slab_count(&self, v: &[f64]) -> Result<usize> {
        check_dim(self.dim, v.len())?;
        Ok(self.directions().filter(|z| dot(z, v).abs() <= self.threshold).count())
    }

    /// `a_(k)(u)`, the `k`-th smallest `|<z_j, u>|`.
    pub fn kth_projection(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim, u.len())?;
        let mut a: Vec<f64> = self.directions().map(|z| dot(z, u).abs()).collect();
        Ok(kth_smallest(&mut a, self.required))
    }

    /// The same body with threshold and count replaced.
    pub fn with_threshold_and_count(&self, threshold: f64, required: usize) -> Result<Self> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::invalid("threshold", "must be positive"));
        }
        if required == 0 || required > self.len() {
            return Err(Error::invalid("required", "count must lie in [1, n]"));
        }
        Ok(Self {
            threshold,
            required,
            ..self.clone()
        })
    }
}

impl StarBody for SlabBody {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, v: &[f64]) -> Result<bool> {
        Ok(self.slab_count(v)? >= self.required)
    }

    fn radial(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim, u.len())?;
        if u.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroDirection);
        }
        let a = self.kth_projection(u)?;
        Ok(if a == 0.0 { f64::INFINITY } else { self.threshold / a })
    }
}

/// Builds a slab body. `Smoothed` block-averages `samples` with its `m`;
/// the other modes use `samples` as the slab normals directly.
pub fn build_slab_body(samples: &[Vector], mode: SlabMode) -> Result<SlabBody> {
    mode.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let alpha = gaussian_abs_median();
    let (directions, dropped, threshold, count_frac) = match mode {
        SlabMode::Smoothed { m, eta } => {
            let avg = block_average(samples, m)?;
            if avg.vectors.is_empty() {
                return Err(Error::invalid("m", "fewer samples than one block"));
            }
            (avg.vectors, avg.dropped, alpha + eta, 0.5 - eta)
        }
        SlabMode::Sharp { eta } => (samples.to_vec(), 0, alpha, 0.5 - eta),
        SlabMode::Isomorphic { lambda, delta } => (samples.to_vec(), 0, 0.5 * lambda, 1.0 - 0.25 * delta),
        SlabMode::General { alpha, beta, eta } => (samples.to_vec(), 0, alpha + eta, beta - eta),
    };
    let required = ceil_count(count_frac, directions.len());
    let mut body = SlabBody::from_parts(&directions, threshold, required, mode)?;
    body.dropped = dropped;
    Ok(body)
}

/// One first-layer unit: fires when `<v, weight> >= bias`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdUnit {
    pub weight: Vec<f64>,
    pub bias: f64,
    pub sign: i8,
}

/// Two hidden layers of hard thresholds: the second layer accepts `v` when
/// `sum_i sign_i * 1{<v, w_i> >= bias_i} >= threshold`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdNetwork {
    pub units: Vec<ThresholdUnit>,
    pub threshold: i64,
}

impl ThresholdNetwork {
    pub fn score(&self, v: &[f64]) -> Result<i64> {
        let mut s = 0i64;
        for unit in &self.units {
            check_dim(unit.weight.len(), v.len())?;
            if dot(&unit.weight, v) >= unit.bias {
                s += unit.sign as i64;
            }
        }
        Ok(s)
    }

    pub fn evaluate(&self, v: &[f64]) -> Result<bool> {
        Ok(self.score(v)? >= self.threshold)
    }
}

/// Writes the body as a threshold network using
/// `1{|t| <= theta} = 1{t >= -theta} - 1{t > theta}`.
///
/// The subtracted unit fires at `t >= next_up(theta)`, which is `t > theta`
/// exactly in floating point, so network and body agree on the boundary too.
pub fn export_threshold_network(body: &SlabBody) -> ThresholdNetwork {
    let theta = body.threshold;
    let mut units = Vec::with_capacity(2 * body.len());
    for z in body.directions() {
        units.push(ThresholdUnit {
            weight: z.to_vec(),
            bias: -theta,
            sign: 1,
        });
        units.push(ThresholdUnit {
            weight: z.to_vec(),
            bias: theta.next_up(),
            sign: -1,
        });
    }
    ThresholdNetwork {
        units,
        threshold: body.required as i64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn cube() -> SlabBody {
        let dirs = [Vector::basis(2, 0), Vector::basis(2, 1)];
        SlabBody::from_parts(
            &dirs,
            1.0,
            2,
            SlabMode::General {
                alpha: 1.0,
                beta: 1.0,
                eta: 0.0,
            },
        )
        .unwrap()
    }

    fn random_body(seed: u64, n: usize, d: usize) -> SlabBody {
        let mut rng = RngStream::new(seed, 0).rng();
        let dirs: Vec<Vector> = (0..n).map(|_| Vector((0..d).map(|_| rng.normal()).collect())).collect();
        let k = 1 + (rng.next_u64() as usize) % n;
        let theta = 0.2 + rng.uniform() * 2.0;
        SlabBody::from_parts(
            &dirs,
            theta,
            k,
            SlabMode::General {
                alpha: theta,
                beta: 1.0,
                eta: 0.0,
            },
        )
        .unwrap()
    }

    fn random_dir(rng: &mut crate::rng::StreamRng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.normal()).collect()
    }

    #[test]
    fn build_modes_arithmetic() {
        let alpha = gaussian_abs_median();
        let samples: Vec<Vector> = (0..100).map(|i| Vector(vec![1.0 + i as f64, 0.5])).collect();
        let b = build_slab_body(&samples, SlabMode::Smoothed { m: 1, eta: 0.05 }).unwrap();
        assert_eq!(b.required(), 45);
        assert!((b.threshold() - 0.7244897502).abs() < 1e-9);
        assert!((b.threshold() - (alpha + 0.05)).abs() < 1e-15);

        let iso = build_slab_body(
            &samples,
            SlabMode::Isomorphic {
                lambda: 0.5,
                delta: 0.2,
            },
        )
        .unwrap();
        assert_eq!(iso.threshold(), 0.25);
        assert_eq!(iso.required(), 95);

        let sharp = build_slab_body(&samples, SlabMode::Sharp { eta: 0.1 }).unwrap();
        assert_eq!(sharp.threshold(), alpha);
        assert_eq!(sharp.required(), 40);

        let ten = &samples[..10];
        let general = build_slab_body(
            ten,
            SlabMode::General {
                alpha: 1.0,
                beta: 0.5,
                eta: 0.1,
            },
        )
        .unwrap();
        assert_eq!(general.required(), 4);
        assert!((general.threshold() - 1.1).abs() < 1e-15);

        let smoothed = build_slab_body(&samples[..10], SlabMode::Smoothed { m: 3, eta: 0.1 }).unwrap();
        assert_eq!(smoothed.len(), 3);
        assert_eq!(smoothed.dropped(), 1);
    }

    #[test]
    fn build_rejects_bad_parameters() {
        let samples = vec![Vector(vec![1.0, 0.0]); 4];
        for mode in [
            SlabMode::Smoothed { m: 1, eta: 0.5 },
            SlabMode::Sharp { eta: 0.7 },
            SlabMode::Isomorphic {
                lambda: 0.5,
                delta: 4.0,
            },
            SlabMode::Isomorphic {
                lambda: 0.0,
                delta: 0.2,
            },
            SlabMode::Smoothed { m: 0, eta: 0.1 },
            SlabMode::Smoothed { m: 5, eta: 0.1 },
        ] {
            assert!(build_slab_body(&samples, mode).is_err(), "{mode:?}");
        }
        assert_eq!(
            build_slab_body(&[], SlabMode::Sharp { eta: 0.1 }),
            Err(Error::Empty("samples"))
        );
    }

    #[test]
    fn cube_membership() {
        let c = cube();
        assert!(c.contains(&[0.0, 0.0]).unwrap());
        assert!(c.contains(&[1.0, 1.0]).unwrap());
        assert!(!c.contains(&[1.01, 0.0]).unwrap());
        assert!(c.contains(&[1.0]).is_err());
    }

    #[test]
    fn cube_radial() {
        let c = cube();
        let diag = [core::f64::consts::FRAC_1_SQRT_2; 2];
        assert!((c.radial(&diag).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let loose = c.with_threshold_and_count(1.0, 1).unwrap();
        assert_eq!(loose.radial(&[1.0, 0.0]).unwrap(), f64::INFINITY);
        assert_eq!(c.radial(&[0.0, 0.0]), Err(Error::ZeroDirection));
    }

    #[test]
    fn radial_matches_membership_bisection() {
        for seed in 0..50 {
            let body = random_body(seed, 30, 4);
            let mut rng = RngStream::new(seed, 1).rng();
            let u = random_dir(&mut rng, 4);
            let r = body.radial(&u).unwrap();
            let t = crate::normal::bisect(
                |t| {
                    if body.contains(&u.iter().map(|x| x * t).collect::<Vec<_>>()).unwrap() {
                        0.0
                    } else {
                        1.0
                    }
                },
                0.5,
                0.0,
                1e3,
            );
            if r.is_finite() && r < 1e3 {
                assert!((t - r).abs() <= 1e-9 * r, "seed {seed}: {t} vs {r}");
            }
        }
    }

    #[test]
    fn network_has_two_units_per_slab() {
        let body = SlabBody::from_parts(&[Vector(vec![1.0, 2.0])], 0.5, 1, SlabMode::Sharp { eta: 0.1 }).unwrap();
        let net = export_threshold_network(&body);
        assert_eq!(net.units.len(), 2);
        assert_eq!(net.score(&[0.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn network_matches_membership() {
        for seed in 0..20 {
            let body = random_body(100 + seed, 25, 3);
            let net = export_threshold_network(&body);
            assert_eq!(net.score(&[0.0; 3]).unwrap(), body.len() as i64);
            let mut rng = RngStream::new(seed, 2).rng();
            for _ in 0..500 {
                let v: Vec<f64> = (0..3).map(|_| rng.normal() * 2.0).collect();
                assert_eq!(net.evaluate(&v).unwrap(), body.contains(&v).unwrap());
            }
            // Points exactly on a slab boundary.
            let z = body.direction(0).to_vec();
            let zz = dot(&z, &z);
            let v: Vec<f64> = z.iter().map(|x| x * body.threshold() / zz).collect();
            assert_eq!(net.evaluate(&v).unwrap(), body.contains(&v).unwrap());
        }
    }

    #[test]
    fn boundary_ties_count_as_inside() {
        let body = SlabBody::from_parts(&[Vector(vec![2.0])], 1.0, 1, SlabMode::Sharp { eta: 0.1 }).unwrap();
        assert!(body.contains(&[0.5]).unwrap());
        assert!(export_threshold_network(&body).evaluate(&[0.5]).unwrap());
        assert!(!body.contains(&[0.5f64.next_up()]).unwrap());
        assert!(!export_threshold_network(&body).evaluate(&[0.5f64.next_up()]).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetric_and_star_shaped(seed in any::<u64>(), t in 0.0f64..0.9999) {
            let body = random_body(seed, 20, 3);
            let mut rng = RngStream::new(seed, 3).rng();
            let u = random_dir(&mut rng, 3);
            let v: Vec<f64> = u.iter().map(|x| x * 3.0).collect();
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            prop_assert_eq!(body.contains(&v).unwrap(), body.contains(&neg).unwrap());

            let norm = crate::util::norm2(&u);
            let unit: Vec<f64> = u.iter().map(|x| x / norm).collect();
            let r = body.radial(&unit).unwrap();
            if r.is_finite() {
                let inside: Vec<f64> = unit.iter().map(|x| x * t * r).collect();
                prop_assert!(body.contains(&inside).unwrap());
                let outside: Vec<f64> = unit.iter().map(|x| x * r * (1.0 + 1e-9)).collect();
                prop_assert!(!body.contains(&outside).unwrap());
            }
        }

        #[test]
        fn kth_projection_is_homogeneous(seed in any::<u64>(), c in 0.01f64..100.0) {
            let body = random_body(seed, 20, 3);
            let mut rng = RngStream::new(seed, 4).rng();
            let u = random_dir(&mut rng, 3);
            // Powers of two scale every product exactly.
            let c2 = libm::exp2(libm::round(libm::log2(c)));
            let cu: Vec<f64> = u.iter().map(|x| x * c2).collect();
            prop_assert_eq!(body.kth_projection(&cu).unwrap(), c2 * body.kth_projection(&u).unwrap());
            let ratio = body.kth_projection(&u.iter().map(|x| x * c).collect::<Vec<_>>()).unwrap()
                / body.kth_projection(&u).unwrap();
            prop_assert!((ratio - c).abs() <= 1e-12 * c);
        }

        #[test]
        fn radial_monotone_in_threshold_and_count(seed in any::<u64>(), bump in 0.0f64..1.0) {
            let body = random_body(seed, 20, 3);
            let mut rng = RngStream::new(seed, 5).rng();
            let u = random_dir(&mut rng, 3);
            let wider = body.with_threshold_and_count(body.threshold() * (1.0 + bump), body.required()).unwrap();
            prop_assert!(wider.radial(&u).unwrap() >= body.radial(&u).unwrap());
            if body.required() > 1 {
                let looser = body.with_threshold_and_count(body.threshold(), body.required() - 1).unwrap();
                prop_assert!(looser.radial(&u).unwrap() >= body.radial(&u).unwrap());
            }
        }
    }
}
