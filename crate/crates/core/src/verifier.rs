//! Certification of bodies against the true ellipsoid, plus Monte Carlo
//! checks of the marginal conditions, the Berry–Esseen gap and the
//! Rademacher bound.
//!
//! On the `L2` unit sphere `S = {u : u^T T u = 1}` the true ellipsoid has
//! radius exactly 1, so the radial function of a body evaluated on `S` is
//! already the ratio against the truth. `r_min B ⊆ K ⊆ r_max B` on the
//! sampled directions gives an `eta`-approximation with
//! `eta = max(1 / r_min - 1, 1 - 1 / r_max)`.

use alloc::vec::Vec;

use crate::distributions::{DistributionSpec, MarginalSpec};
use crate::error::{Error, Result};
use crate::linalg::{psd_pow, quadratic_form, quadratic_form_unchecked, SymMatrix, Vector};
use crate::normal;
use crate::rng::{RngStream, StreamRng};
use crate::util::{ceil_count, check_dim, dot, kth_smallest, norm2};

/// Number of extreme directions kept in a report.
pub const OFFENDERS: usize = 10;

/// Draws directions `u = T^{-1/2} w / |.|_T` with `w` uniform on the
/// Euclidean sphere.
#[derive(Debug, Clone)]
pub struct L2SphereSampler {
    cov: SymMatrix,
    inv_sqrt: SymMatrix,
}

impl L2SphereSampler {
    pub fn new(cov: &SymMatrix) -> Result<Self> {
        Ok(Self {
            cov: cov.clone(),
            inv_sqrt: psd_pow(cov, -0.5)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Vector {
        let d = self.dim();
        let mut w: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let n = norm2(&w);
        w.iter_mut().for_each(|x| *x /= n);
        let mut u = alloc::vec![0.0; d];
        self.inv_sqrt.apply_into(&w, &mut u);
        self.project(&mut u);
        Vector(u)
    }

    /// Rescales a nonzero `u` onto `S`.
    pub fn project(&self, u: &mut [f64]) {
        let s = libm::sqrt(quadratic_form_unchecked(&self.cov, u));
        u.iter_mut().for_each(|x| *x /= s);
    }
}

pub fn sample_l2_sphere_direction(t: &SymMatrix, stream: RngStream) -> Result<Vector> {
    Ok(L2SphereSampler::new(t)?.sample(&mut stream.rng()))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Offender {
    pub index: usize,
    pub ratio: f64,
    pub direction: Vector,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ApproximationReport {
    pub direction_count: usize,
    /// Smallest ratio; infinite only if every radial was infinite.
    pub min_ratio: f64,
    /// Largest finite ratio; infinite only if every radial was infinite.
    pub max_ratio: f64,
    /// `max(0, 1/min - 1, 1 - 1/max)`, infinite when any radial was infinite.
    pub implied_eta: f64,
    pub infinite_radial_count: usize,
    pub seed: u64,
    pub stream: u64,
    /// Directions with the largest `|ln ratio|`, worst first.
    pub worst: Vec<Offender>,
}

impl ApproximationReport {
    /// `lo <= min`, `max <= hi` and no infinite radials.
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.infinite_radial_count == 0 && self.min_ratio >= lo && self.max_ratio <= hi
    }

    /// `max_ratio / min_ratio`, the distortion of the body against `B`.
    pub fn spread(&self) -> f64 {
        if self.infinite_radial_count > 0 {
            f64::INFINITY
        } else {
            self.max_ratio / self.min_ratio
        }
    }
}

/// Certifies a body through its radial function on `directions` random
/// points of the `L2` sphere of `t`.
pub fn certify_approximation<F>(
    radial_fn: F,
    t: &SymMatrix,
    directions: usize,
    stream: RngStream,
) -> Result<ApproximationReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    certify_with_probes(radial_fn, t, directions, &[], stream)
}

/// As [`certify_approximation`], with extra caller-supplied directions
/// (rescaled onto `S`) checked after the random ones.
pub fn certify_with_probes<F>(
    mut radial_fn: F,
    t: &SymMatrix,
    directions: usize,
    probes: &[Vector],
    stream: RngStream,
) -> Result<ApproximationReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if directions + probes.len() == 0 {
        return Err(Error::invalid("directions", "must be at least 1"));
    }
    let sphere = L2SphereSampler::new(t)?;
    let mut rng = stream.rng();
    let mut ratios = Vec::with_capacity(directions + probes.len());
    let mut dirs = Vec::with_capacity(directions + probes.len());
    for i in 0..directions + probes.len() {
        let u = if i < directions {
            sphere.sample(&mut rng)
        } else {
            let p = &probes[i - directions];
            check_dim(sphere.dim(), p.dim())?;
            if p.iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroDirection);
            }
            let mut u = p.clone();
            sphere.project(&mut u);
            u
        };
        let r = radial_fn(&u)?;
        if !(r > 0.0) {
            return Err(Error::NonPositiveRadial(r));
        }
        ratios.push(r);
        dirs.push(u);
    }

    let infinite = ratios.iter().filter(|r| r.is_infinite()).count();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = if infinite == ratios.len() {
        f64::INFINITY
    } else {
        ratios.iter().copied().filter(|r| r.is_finite()).fold(0.0, f64::max)
    };
    let implied_eta = if infinite > 0 {
        f64::INFINITY
    } else {
        (1.0 / min_ratio - 1.0).max(1.0 - 1.0 / max_ratio).max(0.0)
    };

    let mut order: Vec<usize> = (0..ratios.len()).collect();
    let badness = |r: f64| libm::fabs(libm::log(r));
    order.sort_by(|&a, &b| badness(ratios[b]).total_cmp(&badness(ratios[a])).then(a.cmp(&b)));
    let worst = order
        .into_iter()
        .take(OFFENDERS)
        .map(|i| Offender {
            index: i,
            ratio: ratios[i],
            direction: dirs[i].clone(),
        })
        .collect();

    Ok(ApproximationReport {
        direction_count: ratios.len(),
        min_ratio,
        max_ratio,
        implied_eta,
        infinite_radial_count: infinite,
        seed: stream.seed,
        stream: stream.stream,
        worst,
    })
}

/// Parameters of [`check_marginal_conditions`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionParams {
    pub m: usize,
    pub alpha: f64,
    /// Target of `Pr(|<Z, v>| <= alpha)`.
    pub beta: f64,
    pub epsilons: Vec<f64>,
    /// When set, the report includes the scaling `rho` for this `eta`.
    pub eta: Option<f64>,
    pub directions: usize,
    pub trials: usize,
}

/// Smallest trial count accepted by [`check_marginal_conditions`].
pub const CONDITION_MIN_TRIALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntervalMass {
    pub epsilon: f64,
    /// Minimum over directions of `Pr(|<Z, v>| in [alpha - eps, alpha])`.
    /// Both signs of `<Z, v>` count, so for a standard gaussian this is
    /// `2 (Phi(alpha) - Phi(alpha - eps))`.
    pub min_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionReport {
    pub alpha: f64,
    pub beta: f64,
    pub beta_hat_min: f64,
    pub beta_hat_max: f64,
    /// `max_v |beta_hat(v) - beta|`.
    pub condition1_deviation: f64,
    /// Binomial standard error `sqrt(beta (1 - beta) / trials)`.
    pub condition1_stderr: f64,
    pub masses: Vec<IntervalMass>,
    /// `min over (v, eps)` of `mass / eps`.
    pub gamma_hat: f64,
    /// `1 + 3 eta / (alpha gamma - 3 eta)` when `eta` was given and
    /// `alpha gamma > 3 eta`.
    pub rho: Option<f64>,
    pub directions: usize,
    pub trials: usize,
}

/// Monte Carlo estimate of `Pr(|<Z, v>| <= alpha)` and of the interval masses
/// for the `m`-block average `Z`, over sampled `v` on `S`. Each trial draws one
/// `Z` and evaluates every direction on it.
pub fn check_marginal_conditions(
    spec: &DistributionSpec,
    params: &ConditionParams,
    stream: RngStream,
) -> Result<ConditionReport> {
    let ConditionParams {
        m,
        alpha,
        beta,
        ref epsilons,
        eta,
        directions,
        trials,
    } = *params;
    if trials < CONDITION_MIN_TRIALS {
        return Err(Error::invalid("trials", "at least 10^4 trials are needed"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "block size must be positive"));
    }
    if directions == 0 {
        return Err(Error::invalid("directions", "must be at least 1"));
    }
    if !(alpha > 0.0) || !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid("alpha", "need alpha > 0 and beta in [0, 1]"));
    }
    if epsilons.iter().any(|&e| !(e > 0.0 && e <= alpha)) {
        return Err(Error::invalid("epsilons", "each epsilon must lie in (0, alpha]"));
    }
    let d = spec.dim;
    let sampler = spec.sampler()?;
    let sphere = L2SphereSampler::new(&spec.true_covariance())?;
    let mut dir_rng = stream.derive(0).rng();
    let dirs: Vec<Vector> = (0..directions).map(|_| sphere.sample(&mut dir_rng)).collect();

    let mut rng = stream.derive(1).rng();
    let ne = epsilons.len();
    let mut inside = alloc::vec![0usize; directions];
    let mut band = alloc::vec![0usize; directions * ne];
    let scale = 1.0 / libm::sqrt(m as f64);
    let mut z = alloc::vec![0.0; d];
    for _ in 0..trials {
        let block = sampler.sample_flat(m, &mut rng);
        z.iter_mut().for_each(|x| *x = 0.0);
        for row in block.chunks_exact(d) {
            z.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        z.iter_mut().for_each(|x| *x *= scale);
        for (j, v) in dirs.iter().enumerate() {
            let a = libm::fabs(dot(&z, v));
            if a <= alpha {
                inside[j] += 1;
                for (e, &eps) in epsilons.iter().enumerate() {
                    if a >= alpha - eps {
                        band[j * ne + e] += 1;
                    }
                }
            }
        }
    }

    let tf = trials as f64;
    let beta_hats: Vec<f64> = inside.iter().map(|&c| c as f64 / tf).collect();
    let beta_hat_min = beta_hats.iter().copied().fold(f64::INFINITY, f64::min);
    let beta_hat_max = beta_hats.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let condition1_deviation = beta_hats.iter().map(|b| libm::fabs(b - beta)).fold(0.0, f64::max);
    let masses: Vec<IntervalMass> = epsilons
        .iter()
        .enumerate()
        .map(|(e, &epsilon)| IntervalMass {
            epsilon,
            min_mass: (0..directions).map(|j| band[j * ne + e]).min().unwrap_or(0) as f64 / tf,
        })
        .collect();
    let gamma_hat = masses
        .iter()
        .map(|m| m.min_mass / m.epsilon)
        .fold(f64::INFINITY, f64::min);
    let rho = eta.and_then(|eta| {
        let denom = alpha * gamma_hat - 3.0 * eta;
        (gamma_hat.is_finite() && denom > 0.0).then(|| 1.0 + 3.0 * eta / denom)
    });
    Ok(ConditionReport {
        alpha,
        beta,
        beta_hat_min,
        beta_hat_max,
        condition1_deviation,
        condition1_stderr: libm::sqrt(beta * (1.0 - beta) / tf),
        masses,
        gamma_hat,
        rho,
        directions,
        trials,
    })
}

/// `sup_t |F_n(t) - Phi(t)|` for the empirical distribution of `samples`.
/// Sorts the slice in place.
pub fn kolmogorov_distance_normal(samples: &mut [f64]) -> f64 {
    samples.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &y) in samples.iter().enumerate() {
        let f = normal::cdf(y);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// Smallest trial count accepted by [`estimate_psi`].
pub const PSI_MIN_TRIALS: usize = 100_000;

/// Kolmogorov distance between `Y = (sqrt(m) sigma_W)^-1 sum_{i<=m} W_i` and
/// the standard normal. `sigma_W = 1` analytically for every marginal.
pub fn estimate_psi(marginal: MarginalSpec, m: usize, trials: usize, stream: RngStream) -> Result<f64> {
    marginal.validate()?;
    if m == 0 {
        return Err(Error::invalid("m", "block size must be positive"));
    }
    if trials < PSI_MIN_TRIALS {
        return Err(Error::invalid("trials", "at least 10^5 trials are needed"));
    }
    let mut rng = stream.rng();
    let scale = 1.0 / (libm::sqrt(m as f64) * marginal.std_dev());
    let mut y: Vec<f64> = (0..trials)
        .map(|_| (0..m).map(|_| marginal.sample(&mut rng)).sum::<f64>() * scale)
        .collect();
    Ok(kolmogorov_distance_normal(&mut y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RademacherSup {
    pub mean: f64,
    pub stderr: f64,
    /// `sqrt(k d)`.
    pub bound: f64,
}

/// Smallest trial count accepted by [`rademacher_sup_estimate`].
pub const RADEMACHER_MIN_TRIALS: usize = 1000;

/// Monte Carlo mean of `sup_{v in B} |sum_{i<=k} eps_i <X_i, v>|`, which is
/// `|T^{-1/2} sum eps_i X_i|_2`.
pub fn rademacher_sup_estimate(
    spec: &DistributionSpec,
    k: usize,
    trials: usize,
    stream: RngStream,
) -> Result<RademacherSup> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if trials < RADEMACHER_MIN_TRIALS {
        return Err(Error::invalid("trials", "at least 10^3 trials are needed"));
    }
    let d = spec.dim;
    let sampler = spec.sampler()?;
    let w = psd_pow(&spec.true_covariance(), -0.5)?;
    let mut rng = stream.rng();
    let mut s = alloc::vec![0.0; d];
    let mut y = alloc::vec![0.0; d];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        let xs = sampler.sample_flat(k, &mut rng);
        s.iter_mut().for_each(|x| *x = 0.0);
        for row in xs.chunks_exact(d) {
            let e = rng.sign();
            s.iter_mut().zip(row).for_each(|(a, b)| *a += e * b);
        }
        w.apply_into(&s, &mut y);
        let n = norm2(&y);
        sum += n;
        sum_sq += n * n;
    }
    let tf = trials as f64;
    let mean = sum / tf;
    let var = ((sum_sq - tf * mean * mean) / (tf - 1.0)).max(0.0);
    Ok(RademacherSup {
        mean,
        stderr: libm::sqrt(var / tf),
        bound: libm::sqrt((k * d) as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BruteRadial {
    pub value: f64,
    /// `t_max * u` was still inside.
    pub unbounded: bool,
}

/// `sup{t in [0, t_max] : t u in K}` by bisection on a membership oracle,
/// iterated until the bracket stops shrinking.
pub fn brute_force_radial<F>(mut contains_fn: F, u: &[f64], t_max: f64) -> Result<BruteRadial>
where
    F: FnMut(&[f64]) -> Result<bool>,
{
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid("t_max", "must be positive and finite"));
    }
    let mut point = alloc::vec![0.0; u.len()];
    let mut at = |t: f64, point: &mut Vec<f64>| -> Result<bool> {
        point.iter_mut().zip(u).for_each(|(p, x)| *p = x * t);
        contains_fn(point)
    };
    if !at(0.0, &mut point)? {
        return Err(Error::OriginExcluded);
    }
    if at(t_max, &mut point)? {
        return Ok(BruteRadial {
            value: t_max,
            unbounded: true,
        });
    }
    let (mut lo, mut hi) = (0.0, t_max);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid, &mut point)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BruteRadial {
        value: lo,
        unbounded: false,
    })
}

/// Empirical `q`-quantile of `|<X, v>|` over `trials` draws.
pub fn abs_projection_quantile(
    spec: &DistributionSpec,
    v: &[f64],
    q: f64,
    trials: usize,
    stream: RngStream,
) -> Result<f64> {
    check_dim(spec.dim, v.len())?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid("q", "must lie in (0, 1)"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let sampler = spec.sampler()?;
    let mut rng = stream.rng();
    let d = spec.dim;
    let mut a = Vec::with_capacity(trials);
    // Bounded batches keep memory flat for large trial counts.
    let mut left = trials;
    while left > 0 {
        let b = left.min(4096);
        left -= b;
        let xs = sampler.sample_flat(b, &mut rng);
        a.extend(xs.chunks_exact(d).map(|x| libm::fabs(dot(x, v))));
    }
    let k = ceil_count(q, trials);
    Ok(kth_smallest(&mut a, k))
}

/// Empirical median of `|<X, v>|`.
pub fn abs_projection_median(spec: &DistributionSpec, v: &[f64], trials: usize, stream: RngStream) -> Result<f64> {
    abs_projection_quantile(spec, v, 0.5, trials, stream)
}

/// `v^T T v`, the squared `L2` norm of `v` under covariance `T`.
pub fn l2_norm_sq(t: &SymMatrix, v: &[f64]) -> Result<f64> {
    quadratic_form(t, v)
}
