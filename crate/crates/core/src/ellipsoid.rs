//! Ellipsoid-block bodies and block-size estimation.
//!
//! The samples are cut into `n` consecutive blocks of size `m`. A point `v`
//! belongs to the body when the block statistic `m^-1 sum_i <X_i, v>^2` is at
//! most `1 + eta` on at least `ceil(0.9 n)` blocks.
//!
//! Each block is kept as its normalized Gram matrix `G_j = m^-1 sum X_i X_i^T`,
//! so that `stat_j(v) = v^T G_j v`. This costs `n d^2` floats instead of
//! `n m d` and is exact for every direction.

use alloc::vec::Vec;

use crate::body::StarBody;
use crate::distributions::{DistributionSpec, Sampler};
use crate::error::{Error, Result};
use crate::linalg::{quadratic_form_unchecked, SymMatrix, Vector};
use crate::rng::{RngStream, StreamRng};
use crate::util::{ceil_count, check_dim, dot, kth_smallest};
use crate::verifier::L2SphereSampler;

/// Fraction of blocks that must satisfy the level.
pub const REQUIRED_FRACTION: f64 = 0.9;
/// Smallest block count accepted by the builders.
pub const MIN_BLOCKS: usize = 10;
/// Failure probability that defines `m0`.
pub const M0_FAILURE_LEVEL: f64 = 0.01;
/// Fewer trials cannot resolve a probability of `0.01`.
pub const M0_MIN_TRIALS: usize = 3000;

/// `m^-1 sum_i <X_i, v>^2` over one block.
pub fn block_statistic(block: &[Vector], v: &[f64]) -> Result<f64> {
    if block.is_empty() {
        return Err(Error::Empty("block"));
    }
    let mut s = 0.0;
    for x in block {
        check_dim(x.dim(), v.len())?;
        let p = dot(x, v);
        s += p * p;
    }
    Ok(s / block.len() as f64)
}

fn gram_of(block: &[Vector]) -> SymMatrix {
    let d = block[0].dim();
    let mut acc = alloc::vec![0.0; d * d];
    for x in block {
        for a in 0..d {
            for b in a..d {
                acc[a * d + b] += x[a] * x[b];
            }
        }
    }
    let inv = 1.0 / block.len() as f64;
    SymMatrix::from_upper_fn(d, |a, b| acc[a * d + b] * inv)
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < 0.25 {
        Ok(())
    } else {
        Err(Error::invalid("eta", "ellipsoid bodies need 0 < eta < 1/4"))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EllipsoidBody {
    dim: usize,
    grams: Vec<SymMatrix>,
    block_size: usize,
    level: f64,
    required: usize,
    dropped: usize,
}

impl EllipsoidBody {
    /// A body from block Gram matrices with an arbitrary level and count.
    pub fn from_grams(grams: Vec<SymMatrix>, block_size: usize, level: f64, required: usize) -> Result<Self> {
        let dim = grams.first().ok_or(Error::Empty("blocks"))?.dim();
        for g in &grams {
            check_dim(dim, g.dim())?;
        }
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::invalid("level", "must be positive"));
        }
        if required == 0 || required > grams.len() {
            return Err(Error::invalid("required", "count must lie in [1, n]"));
        }
        Ok(Self {
            dim,
            grams,
            block_size,
            level,
            required,
            dropped: 0,
        })
    }

    pub fn blocks(&self) -> usize {
        self.grams.len()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn eta(&self) -> f64 {
        self.level - 1.0
    }

    pub fn required(&self) -> usize {
        self.required
    }

    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn grams(&self) -> &[SymMatrix] {
        &self.grams
    }

    /// Block statistics of `v`, one per block.
    pub fn statistics(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, v.len())?;
        Ok(self.grams.iter().map(|g| quadratic_form_unchecked(g, v)).collect())
    }
}

impl StarBody for EllipsoidBody {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, v: &[f64]) -> Result<bool> {
        let passing = self.statistics(v)?.into_iter().filter(|&q| q <= self.level).count();
        Ok(passing >= self.required)
    }

    fn radial(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim, u.len())?;
        if u.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroDirection);
        }
        let mut q = self.statistics(u)?;
        let qk = kth_smallest(&mut q, self.required);
        Ok(if qk <= 0.0 {
            f64::INFINITY
        } else {
            libm::sqrt(self.level / qk)
        })
    }
}

/// Builds `D_eta` from raw samples in consecutive blocks of `m`.
pub fn build_ellipsoid_body(samples: &[Vector], m: usize, eta: f64) -> Result<EllipsoidBody> {
    check_eta(eta)?;
    if m == 0 {
        return Err(Error::invalid("m", "block size must be positive"));
    }
    let d = samples.first().ok_or(Error::Empty("samples"))?.dim();
    for s in samples {
        check_dim(d, s.dim())?;
    }
    let n = samples.len() / m;
    if n < MIN_BLOCKS {
        return Err(Error::invalid("samples", "need at least 10 full blocks"));
    }
    let grams: Vec<SymMatrix> = samples.chunks_exact(m).map(gram_of).collect();
    let required = ceil_count(REQUIRED_FRACTION, n);
    let mut body = EllipsoidBody::from_grams(grams, m, 1.0 + eta, required)?;
    body.dropped = samples.len() % m;
    Ok(body)
}

/// Builds `D_eta` from `n` fresh blocks of `m` draws, without materializing
/// the `n m` samples. Block `j` uses the stream derived from `j`.
pub fn build_ellipsoid_body_sampled(
    sampler: &Sampler,
    m: usize,
    n: usize,
    eta: f64,
    stream: RngStream,
) -> Result<EllipsoidBody> {
    check_eta(eta)?;
    if m == 0 {
        return Err(Error::invalid("m", "block size must be positive"));
    }
    if n < MIN_BLOCKS {
        return Err(Error::invalid("n", "need at least 10 blocks"));
    }
    let grams = (0..n)
        .map(|j| sampler.block_gram(m, &mut stream.derive(j as u64).rng()))
        .collect();
    EllipsoidBody::from_grams(grams, m, 1.0 + eta, ceil_count(REQUIRED_FRACTION, n))
}

/// Outcome of [`estimate_m0`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct M0Estimate {
    pub eta: f64,
    /// `None` when no tested candidate reached the failure level.
    pub m0: Option<usize>,
    /// `(m, worst failure probability over directions)` for every tested `m`.
    pub failure_probabilities: Vec<(usize, f64)>,
    pub trials: usize,
    pub directions: usize,
}

/// Geometric candidate grid from `start` to at most `stop`, ratio `factor`,
/// rounded and deduplicated.
pub fn geometric_candidates(start: usize, stop: usize, factor: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut x = start.max(1) as f64;
    while libm::round(x) as usize <= stop {
        let m = libm::round(x) as usize;
        if out.last() != Some(&m) {
            out.push(m);
        }
        x *= factor.max(1.0 + 1e-9);
    }
    out
}

/// Estimates `m0(eta)`: the smallest candidate `m` for which
/// `Pr(|m^-1 sum <X_i, v>^2 - 1| >= eta / 10) <= 0.01` on every sampled
/// `L2`-unit direction `v`.
///
/// Candidates are tested in order and the search stops at the first that
/// qualifies. Each trial draws one block and evaluates all directions on it.
pub fn estimate_m0(
    spec: &DistributionSpec,
    eta: f64,
    candidates: &[usize],
    trials: usize,
    directions: usize,
    stream: RngStream,
) -> Result<M0Estimate> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    if trials < M0_MIN_TRIALS {
        return Err(Error::invalid(
            "trials",
            "at least 3000 trials are needed to resolve 0.01",
        ));
    }
    if directions == 0 {
        return Err(Error::invalid("directions", "must be at least 1"));
    }
    if candidates.is_empty() {
        return Err(Error::Empty("candidates"));
    }
    if candidates.windows(2).any(|w| w[0] >= w[1]) || candidates[0] == 0 {
        return Err(Error::invalid("candidates", "must be positive and strictly ascending"));
    }
    let sampler = spec.sampler()?;
    let sphere = L2SphereSampler::new(&spec.true_covariance())?;
    let mut dir_rng = stream.derive(0).rng();
    let dirs: Vec<Vector> = (0..directions).map(|_| sphere.sample(&mut dir_rng)).collect();

    let tol = eta / 10.0;
    let mut table = Vec::new();
    let mut m0 = None;
    for (i, &m) in candidates.iter().enumerate() {
        let mut rng: StreamRng = stream.derive(1 + i as u64).rng();
        let mut failures = alloc::vec![0usize; directions];
        for _ in 0..trials {
            let g = sampler.block_gram(m, &mut rng);
            for (f, v) in failures.iter_mut().zip(&dirs) {
                if libm::fabs(quadratic_form_unchecked(&g, v) - 1.0) >= tol {
                    *f += 1;
                }
            }
        }
        let worst = failures.iter().copied().max().unwrap_or(0) as f64 / trials as f64;
        table.push((m, worst));
        if worst <= M0_FAILURE_LEVEL {
            m0 = Some(m);
            break;
        }
    }
    Ok(M0Estimate {
        eta,
        m0,
        failure_probabilities: table,
        trials,
        directions,
    })
}
