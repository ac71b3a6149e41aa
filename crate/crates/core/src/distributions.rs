//! Seeded samplers with known covariance, and block averaging.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{psd_pow, SymMatrix, Vector};
use crate::rng::{RngStream, StreamRng};
use crate::util::check_dim;

/// A centred, unit-variance scalar law used for product coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum MarginalSpec {
    StandardGaussian,
    /// Symmetric `+-1`.
    Rademacher,
    /// `E - 1` for a standard exponential `E`.
    CenteredExponential,
    /// Student t with `p` degrees of freedom, rescaled to unit variance.
    /// Moments of order below `p` are finite.
    StudentLike {
        p: f64,
    },
}

impl MarginalSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MarginalSpec::StudentLike { p } if !(p > 2.0 && p.is_finite()) => {
                Err(Error::invalid("p", "student_like requires finite p > 2"))
            }
            _ => Ok(()),
        }
    }

    /// Every variant is normalized to variance one.
    pub fn std_dev(&self) -> f64 {
        1.0
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            MarginalSpec::StandardGaussian => rng.normal(),
            MarginalSpec::Rademacher => rng.sign(),
            MarginalSpec::CenteredExponential => rng.exponential() - 1.0,
            MarginalSpec::StudentLike { p } => {
                let chi2 = 2.0 * rng.gamma(0.5 * p);
                rng.normal() / libm::sqrt(chi2 / p) * libm::sqrt((p - 2.0) / p)
            }
        }
    }
}

/// `||<X, v>||_{L_q} <= L ||<X, v>||_{L_2}` for all `v`, when known.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormEquivalence {
    pub q: f64,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum DistributionKind {
    /// `N(0, cov)`.
    Gaussian { cov: SymMatrix },
    /// Uniform on the Euclidean unit sphere.
    UniformSphere,
    /// Heavy-tailed coordinates `z_i = eps_i * max(eta_i R, 1)` with
    /// `eta_i ~ Bernoulli(1/(u d)^2)`, Rademacher `eps_i` and `R = sqrt(u d)`.
    HeavyTailXu { u: f64 },
    /// `mixing^{1/2} xi` with i.i.d. unit-variance coordinates `xi_i`.
    MixedProduct { marginal: MarginalSpec, mixing: SymMatrix },
}

/// A random vector in `R^dim` with exactly known covariance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistributionSpec {
    pub dim: usize,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: DistributionKind,
    #[cfg_attr(feature = "serde", serde(default))]
    pub norm_equivalence: Option<NormEquivalence>,
}

impl DistributionSpec {
    pub fn gaussian(cov: SymMatrix) -> Self {
        Self {
            dim: cov.dim(),
            kind: DistributionKind::Gaussian { cov },
            norm_equivalence: None,
        }
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        Self::gaussian(SymMatrix::identity(dim))
    }

    pub fn uniform_sphere(dim: usize) -> Self {
        Self {
            dim,
            kind: DistributionKind::UniformSphere,
            norm_equivalence: None,
        }
    }

    pub fn heavy_tail_xu(dim: usize, u: f64) -> Self {
        Self {
            dim,
            kind: DistributionKind::HeavyTailXu { u },
            norm_equivalence: None,
        }
    }

    pub fn mixed_product(marginal: MarginalSpec, mixing: SymMatrix) -> Self {
        Self {
            dim: mixing.dim(),
            kind: DistributionKind::MixedProduct { marginal, mixing },
            norm_equivalence: None,
        }
    }

    pub fn with_norm_equivalence(mut self, q: f64, l: f64) -> Self {
        self.norm_equivalence = Some(NormEquivalence { q, l });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Empty("dimension"));
        }
        match &self.kind {
            DistributionKind::Gaussian { cov } => {
                check_dim(self.dim, cov.dim())?;
                psd_pow(cov, -0.5)?;
            }
            DistributionKind::UniformSphere => {}
            DistributionKind::HeavyTailXu { u } => {
                if !(u.is_finite() && *u >= 1.0 / self.dim as f64) {
                    return Err(Error::invalid("u", "heavy_tail_xu requires u >= 1/d"));
                }
            }
            DistributionKind::MixedProduct { marginal, mixing } => {
                check_dim(self.dim, mixing.dim())?;
                marginal.validate()?;
                psd_pow(mixing, 0.5)?;
            }
        }
        Ok(())
    }

    /// The exact covariance `E X X^T`.
    pub fn true_covariance(&self) -> SymMatrix {
        match &self.kind {
            DistributionKind::Gaussian { cov } => cov.clone(),
            DistributionKind::UniformSphere => SymMatrix::identity(self.dim).scaled(1.0 / self.dim as f64),
            DistributionKind::HeavyTailXu { u } => {
                let m2 = xu_second_moment(self.dim, *u);
                SymMatrix::diagonal(&vec![m2; self.dim])
            }
            DistributionKind::MixedProduct { mixing, .. } => mixing.clone(),
        }
    }

    pub fn sampler(&self) -> Result<Sampler> {
        Sampler::new(self)
    }
}

/// `E z_i^2 = R^2 / (u d)^2 + 1 - 1/(u d)^2` for the heavy-tailed coordinates.
pub fn xu_second_moment(dim: usize, u: f64) -> f64 {
    let (r, p) = xu_params(dim, u);
    r * r * p + (1.0 - p)
}

/// `E z_i^4 = R^4 / (u d)^2 + 1 - 1/(u d)^2`.
pub fn xu_fourth_moment(dim: usize, u: f64) -> f64 {
    let (r, p) = xu_params(dim, u);
    r * r * r * r * p + (1.0 - p)
}

/// `(R, Pr(eta_i = 1))`.
pub fn xu_params(dim: usize, u: f64) -> (f64, f64) {
    let ud = u * dim as f64;
    (libm::sqrt(ud), 1.0 / (ud * ud))
}

#[derive(Debug, Clone)]
enum Latent {
    Gaussian,
    Sphere,
    Xu { r: f64, p: f64 },
    Product(MarginalSpec),
}

/// A validated [`DistributionSpec`] with its linear transform precomputed.
#[derive(Debug, Clone)]
pub struct Sampler {
    dim: usize,
    latent: Latent,
    /// `cov^{1/2}` or `mixing^{1/2}`; `None` when it is the identity.
    transform: Option<SymMatrix>,
}

impl Sampler {
    pub fn new(spec: &DistributionSpec) -> Result<Self> {
        spec.validate()?;
        let sqrt_or_none = |m: &SymMatrix| -> Result<Option<SymMatrix>> {
            if m.is_identity() {
                Ok(None)
            } else {
                Ok(Some(psd_pow(m, 0.5)?))
            }
        };
        let (latent, transform) = match &spec.kind {
            DistributionKind::Gaussian { cov } => (Latent::Gaussian, sqrt_or_none(cov)?),
            DistributionKind::UniformSphere => (Latent::Sphere, None),
            DistributionKind::HeavyTailXu { u } => {
                let (r, p) = xu_params(spec.dim, *u);
                (Latent::Xu { r, p }, None)
            }
            DistributionKind::MixedProduct { marginal, mixing } => (Latent::Product(*marginal), sqrt_or_none(mixing)?),
        };
        Ok(Self {
            dim: spec.dim,
            latent,
            transform,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rademacher coordinates are drawn 64 vectors at a time, one word per
    /// coordinate, so a block Gram matrix can be formed with popcounts.
    fn packed_signs(&self) -> bool {
        matches!(self.latent, Latent::Product(MarginalSpec::Rademacher))
    }

    fn latent_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match &self.latent {
            Latent::Gaussian => out.iter_mut().for_each(|x| *x = rng.normal()),
            Latent::Sphere => {
                out.iter_mut().for_each(|x| *x = rng.normal());
                let n = crate::util::norm2(out);
                out.iter_mut().for_each(|x| *x /= n);
            }
            Latent::Xu { r, p } => {
                for x in out.iter_mut() {
                    let w = rng.next_u64();
                    let uniform = ((w & ((1 << 53) - 1)) as f64 + 0.5) / (1u64 << 53) as f64;
                    let mag = if uniform < *p { r.max(1.0) } else { 1.0 };
                    *x = if w >> 63 == 0 { mag } else { -mag };
                }
            }
            Latent::Product(m) => out.iter_mut().for_each(|x| *x = m.sample(rng)),
        }
    }

    /// Draws `count` vectors as one flat row-major `count x dim` buffer.
    pub fn sample_flat(&self, count: usize, rng: &mut StreamRng) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; count * d];
        if self.packed_signs() {
            let mut words = vec![0u64; d];
            for chunk in out.chunks_mut(64 * d) {
                words.iter_mut().for_each(|w| *w = rng.next_u64());
                for (i, row) in chunk.chunks_mut(d).enumerate() {
                    for (c, x) in row.iter_mut().enumerate() {
                        *x = if (words[c] >> i) & 1 == 0 { 1.0 } else { -1.0 };
                    }
                }
            }
        } else {
            for row in out.chunks_mut(d) {
                self.latent_into(rng, row);
            }
        }
        if let Some(a) = &self.transform {
            let mut buf = vec![0.0; d];
            for row in out.chunks_mut(d) {
                a.apply_into(row, &mut buf);
                row.copy_from_slice(&buf);
            }
        }
        out
    }

    pub fn sample_batch(&self, count: usize, rng: &mut StreamRng) -> Vec<Vector> {
        self.sample_flat(count, rng)
            .chunks(self.dim.max(1))
            .map(Vector::from)
            .collect()
    }

    /// `m^-1 sum_{i<=m} X_i X_i^T` for `m` fresh draws, consuming the stream
    /// exactly as `sample_flat(m)` would.
    pub fn block_gram(&self, m: usize, rng: &mut StreamRng) -> SymMatrix {
        let d = self.dim;
        let mut acc = vec![0.0; d * d];
        if self.packed_signs() {
            let mut words = vec![0u64; d];
            let mut counts = vec![0i64; d * d];
            let mut remaining = m;
            while remaining > 0 {
                let s = remaining.min(64);
                remaining -= s;
                words.iter_mut().for_each(|w| *w = rng.next_u64());
                let mask = if s == 64 { u64::MAX } else { (1u64 << s) - 1 };
                for a in 0..d {
                    for b in (a + 1)..d {
                        let disagree = ((words[a] ^ words[b]) & mask).count_ones() as i64;
                        counts[a * d + b] += s as i64 - 2 * disagree;
                    }
                    counts[a * d + a] += s as i64;
                }
            }
            for (x, c) in acc.iter_mut().zip(&counts) {
                *x = *c as f64;
            }
        } else {
            let mut row = vec![0.0; d];
            for _ in 0..m {
                self.latent_into(rng, &mut row);
                for a in 0..d {
                    let ra = row[a];
                    for b in a..d {
                        acc[a * d + b] += ra * row[b];
                    }
                }
            }
        }
        let inv_m = 1.0 / m as f64;
        let latent = SymMatrix::from_upper_fn(d, |a, b| acc[a * d + b] * inv_m);
        match &self.transform {
            Some(t) => latent.congruence(t).expect("dimensions agree"),
            None => latent,
        }
    }
}

/// Draws `count` i.i.d. vectors from `spec` on the given stream.
pub fn sample_batch(spec: &DistributionSpec, count: usize, stream: RngStream) -> Result<Vec<Vector>> {
    if count == 0 {
        return Err(Error::invalid("count", "must be at least 1"));
    }
    Ok(spec.sampler()?.sample_batch(count, &mut stream.rng()))
}

pub fn true_covariance(spec: &DistributionSpec) -> SymMatrix {
    spec.true_covariance()
}

/// Normalized block sums `m^{-1/2} sum_{i in I_j} X_i` over consecutive blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockAverage {
    pub vectors: Vec<Vector>,
    /// Trailing samples that did not fill a block.
    pub dropped: usize,
}

pub fn block_average(samples: &[Vector], m: usize) -> Result<BlockAverage> {
    if m == 0 {
        return Err(Error::invalid("m", "block size must be positive"));
    }
    let d = samples.first().map(|s| s.dim()).unwrap_or(0);
    for s in samples {
        check_dim(d, s.dim())?;
    }
    let scale = 1.0 / libm::sqrt(m as f64);
    let vectors = samples
        .chunks_exact(m)
        .map(|block| {
            let mut z = vec![0.0; d];
            for x in block {
                z.iter_mut().zip(x.iter()).for_each(|(a, b)| *a += b);
            }
            if m > 1 {
                z.iter_mut().for_each(|a| *a *= scale);
            }
            Vector(z)
        })
        .collect();
    Ok(BlockAverage {
        vectors,
        dropped: samples.len() % m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::quadratic_form;

    fn empirical_cov(samples: &[Vector]) -> SymMatrix {
        let d = samples[0].dim();
        let n = samples.len() as f64;
        SymMatrix::from_upper_fn(d, |a, b| samples.iter().map(|x| x[a] * x[b]).sum::<f64>() / n)
    }

    #[test]
    fn sphere_samples_have_unit_norm() {
        let xs = sample_batch(&DistributionSpec::uniform_sphere(7), 1000, RngStream::new(1, 0)).unwrap();
        for x in xs {
            assert!((x.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn xu_coordinates_take_four_values() {
        let spec = DistributionSpec::heavy_tail_xu(100, 1.0);
        let xs = sample_batch(&spec, 20_000, RngStream::new(2, 0)).unwrap();
        let mut big = 0;
        for x in &xs {
            for &z in x.iter() {
                assert!([-10.0, -1.0, 1.0, 10.0].contains(&z), "unexpected {z}");
                big += (z.abs() == 10.0) as usize;
            }
        }
        // 2e6 coordinates at rate 1e-4.
        assert!(big > 120 && big < 290, "big = {big}");
    }

    #[test]
    fn gaussian_mean_is_zero() {
        let n = 1_000_000;
        let xs = sample_batch(&DistributionSpec::standard_gaussian(4), n, RngStream::new(3, 0)).unwrap();
        for c in 0..4 {
            let mean: f64 = xs.iter().map(|x| x[c]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "coordinate {c}: {mean}");
        }
    }

    #[test]
    fn true_covariance_examples() {
        let t = SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_eq!(DistributionSpec::gaussian(t.clone()).true_covariance(), t);
        assert_eq!(
            DistributionSpec::uniform_sphere(4).true_covariance(),
            SymMatrix::identity(4).scaled(0.25)
        );
        let xu = DistributionSpec::heavy_tail_xu(100, 1.0).true_covariance();
        assert!((xu.get(0, 0) - 1.0099).abs() < 1e-12);
        assert_eq!(xu.get(0, 1), 0.0);
    }

    #[test]
    fn xu_second_moment_bounds_on_grid() {
        for d in [1usize, 2, 5, 10, 50, 100, 1000] {
            for k in 0..40 {
                let u = (1.0 / d as f64) * 1.3f64.powi(k);
                let m2 = xu_second_moment(d, u);
                assert!((1.0..=4.0).contains(&m2), "d={d} u={u} m2={m2}");
                if u >= 1.0 {
                    assert!(xu_fourth_moment(d, u) <= 2.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn xu_l4_l2_ratio_bounded() {
        let d = 50;
        let spec = DistributionSpec::heavy_tail_xu(d, 1.0);
        let xs = sample_batch(&spec, 200_000, RngStream::new(4, 0)).unwrap();
        let mut rng = RngStream::new(4, 1).rng();
        for _ in 0..5 {
            let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let (mut m2, mut m4) = (0.0, 0.0);
            for x in &xs {
                let p: f64 = x.iter().zip(&v).map(|(a, b)| a * b).sum();
                m2 += p * p;
                m4 += p * p * p * p;
            }
            let n = xs.len() as f64;
            let ratio = libm::pow(m4 / n, 0.25) / libm::sqrt(m2 / n);
            assert!(ratio < 1.5, "L4/L2 ratio {ratio}");
        }
    }

    #[test]
    fn xu_large_norm_frequency() {
        let (d, u) = (10usize, 0.5);
        let spec = DistributionSpec::heavy_tail_xu(d, u);
        let trials = 200_000;
        let xs = sample_batch(&spec, trials, RngStream::new(5, 0)).unwrap();
        let hits = xs.iter().filter(|x| x.norm() * x.norm() >= u * d as f64).count();
        let freq = hits as f64 / trials as f64;
        let bound = 1.0 / (2.0 * u * u * d as f64);
        let se = (bound * (1.0 - bound) / trials as f64).sqrt();
        assert!(freq >= bound - 3.0 * se, "freq {freq} bound {bound}");
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(DistributionSpec::heavy_tail_xu(10, 0.05).validate().is_err());
        let not_psd = SymMatrix::diagonal(&[1.0, -1.0]);
        assert!(DistributionSpec::gaussian(not_psd.clone()).validate().is_err());
        assert!(DistributionSpec::gaussian(SymMatrix::diagonal(&[1.0, 0.0]))
            .validate()
            .is_err());
        assert!(DistributionSpec::mixed_product(MarginalSpec::Rademacher, not_psd)
            .validate()
            .is_err());
        assert!(MarginalSpec::StudentLike { p: 2.0 }.validate().is_err());
        assert!(sample_batch(&DistributionSpec::standard_gaussian(2), 0, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let mix = SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let specs = [
            DistributionSpec::gaussian(mix.clone()),
            DistributionSpec::uniform_sphere(3),
            DistributionSpec::heavy_tail_xu(5, 1.0),
            DistributionSpec::mixed_product(MarginalSpec::StudentLike { p: 5.0 }, mix.clone()),
            DistributionSpec::mixed_product(MarginalSpec::Rademacher, mix),
        ];
        for spec in &specs {
            let a = sample_batch(spec, 100, RngStream::new(9, 9)).unwrap();
            let b = sample_batch(spec, 100, RngStream::new(9, 9)).unwrap();
            assert!(a
                .iter()
                .zip(&b)
                .all(|(x, y)| x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits())));
            let c = sample_batch(spec, 100, RngStream::new(9, 10)).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn marginals_are_centred_unit_variance() {
        let n = 1_000_000;
        for m in [
            MarginalSpec::StandardGaussian,
            MarginalSpec::Rademacher,
            MarginalSpec::CenteredExponential,
            MarginalSpec::StudentLike { p: 6.0 },
        ] {
            let mut rng = RngStream::new(13, 0).rng();
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let w = m.sample(&mut rng);
                s1 += w;
                s2 += w * w;
            }
            let mean = s1 / n as f64;
            let var = s2 / n as f64 - mean * mean;
            assert!(mean.abs() < 5.0 / (n as f64).sqrt(), "{m:?} mean {mean}");
            assert!((var - 1.0).abs() < 0.02, "{m:?} var {var}");
        }
    }

    #[test]
    fn mixed_product_covariance_is_mixing() {
        let mix = SymMatrix::from_rows(&[vec![2.0, 0.5, 0.0], vec![0.5, 1.0, -0.3], vec![0.0, -0.3, 0.5]]).unwrap();
        let spec = DistributionSpec::mixed_product(MarginalSpec::CenteredExponential, mix.clone());
        let xs = sample_batch(&spec, 400_000, RngStream::new(6, 0)).unwrap();
        let emp = empirical_cov(&xs);
        assert!(emp.sub(&mix).unwrap().frobenius() < 0.03);
    }

    #[test]
    fn block_gram_matches_sampled_gram() {
        let mix = SymMatrix::from_rows(&[vec![2.0, 0.3, 0.1], vec![0.3, 1.0, 0.0], vec![0.1, 0.0, 0.7]]).unwrap();
        let specs = [
            DistributionSpec::gaussian(mix.clone()),
            DistributionSpec::heavy_tail_xu(3, 1.0),
            DistributionSpec::mixed_product(MarginalSpec::Rademacher, mix),
            DistributionSpec::mixed_product(MarginalSpec::Rademacher, SymMatrix::identity(5)),
        ];
        for spec in &specs {
            let sampler = spec.sampler().unwrap();
            for m in [1usize, 63, 64, 65, 300] {
                let stream = RngStream::new(21, m as u64);
                let xs = sampler.sample_batch(m, &mut stream.rng());
                let g = sampler.block_gram(m, &mut stream.rng());
                let oracle = empirical_cov(&xs);
                let err = g.sub(&oracle).unwrap().frobenius();
                assert!(err <= 1e-12 * oracle.frobenius().max(1.0), "{spec:?} m={m} err={err}");
            }
        }
    }

    #[test]
    fn block_average_examples() {
        let xs: Vec<Vector> = (0..6).map(|i| Vector(vec![i as f64, 1.0])).collect();
        let same = block_average(&xs, 1).unwrap();
        assert_eq!(same.vectors, xs);
        assert_eq!(same.dropped, 0);

        let v = Vector(vec![0.5, -1.5]);
        let four = vec![v.clone(); 8];
        let avg = block_average(&four, 4).unwrap();
        assert_eq!(avg.vectors, vec![v.scaled(2.0), v.scaled(2.0)]);

        let partial = block_average(&xs, 4).unwrap();
        assert_eq!(partial.vectors.len(), 1);
        assert_eq!(partial.dropped, 2);
        assert!(block_average(&xs, 0).is_err());
    }

    #[test]
    fn block_average_preserves_covariance() {
        let t = SymMatrix::from_rows(&[vec![1.5, 0.4], vec![0.4, 0.8]]).unwrap();
        let spec = DistributionSpec::gaussian(t.clone());
        let m = 5;
        let blocks = 100_000;
        let xs = sample_batch(&spec, blocks * m, RngStream::new(8, 0)).unwrap();
        let z = block_average(&xs, m).unwrap().vectors;
        assert_eq!(z.len(), blocks);
        let emp = empirical_cov(&z);
        // Entry standard errors are at most sqrt(2/blocks) * max variance.
        for a in 0..2 {
            for b in 0..2 {
                assert!((emp.get(a, b) - t.get(a, b)).abs() < 5.0 * (2.0 / blocks as f64).sqrt() * 1.5);
            }
        }
        let v = [0.6, -0.8];
        assert!(quadratic_form(&emp, &v).unwrap() > 0.0);
    }
}
