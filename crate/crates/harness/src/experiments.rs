//! Named experiments.
//!
//! Each experiment resolves its parameters from the config (falling back to
//! a preset), runs sample -> build -> certify/diagnose -> aggregate, and
//! returns a [`Report`]. Repetition `j` of an experiment with master seed `s`
//! draws from `RngStream::new(s, tag).derive(j)`, so every number in a
//! report is a function of the config alone.

use covapprox_core::baseline::{empirical_covariance, EmpiricalEllipsoid};
use covapprox_core::distributions::{DistributionSpec, MarginalSpec};
use covapprox_core::ellipsoid::{build_ellipsoid_body_sampled, estimate_m0, geometric_candidates, M0Estimate};
use covapprox_core::normal::gaussian_abs_median;
use covapprox_core::slab::{build_slab_body, SlabMode};
use covapprox_core::verifier::{
    abs_projection_median, certify_approximation, certify_with_probes, estimate_psi, rademacher_sup_estimate,
    ApproximationReport,
};
use covapprox_core::{RngStream, StarBody, SymMatrix, Vector};

use crate::config::{DistributionConfig, DistributionName, ExperimentConfig};
use crate::error::HarnessError;
use crate::report::{Cell, Report};

type Runner = fn(&ExperimentConfig) -> Result<Report, HarnessError>;

pub struct Experiment {
    pub name: &'static str,
    pub summary: &'static str,
    run: Runner,
}

pub const EXPERIMENTS: &[Experiment] = &[
    Experiment {
        name: "slab_gaussian",
        summary: "smoothed slab body on gaussian data, n = 2 d eta^-2 ln(2/eta)",
        run: slab_gaussian,
    },
    Experiment {
        name: "zigzag_sphere",
        summary: "zig-zag body for the uniform sphere against the Euclidean ball",
        run: zigzag_sphere,
    },
    Experiment {
        name: "slab_sharp",
        summary: "slab body with threshold exactly alpha",
        run: slab_sharp,
    },
    Experiment {
        name: "isomorphic_smallball",
        summary: "slab body from the small-ball condition, constant-factor approximation",
        run: isomorphic_smallball,
    },
    Experiment {
        name: "ellipsoid_l4",
        summary: "ellipsoid-block body with m = m0(eta) under L4-L2 equivalence",
        run: ellipsoid_l4,
    },
    Experiment {
        name: "m0_sweep",
        summary: "estimated m0(eta) across a list of eta",
        run: m0_sweep,
    },
    Experiment {
        name: "baseline_failure",
        summary: "heavy-tailed X_u: empirical ellipsoid fails while the isomorphic slab body holds",
        run: baseline_failure,
    },
    Experiment {
        name: "psi_decay",
        summary: "Berry-Esseen gap of block averages as m grows",
        run: psi_decay,
    },
    Experiment {
        name: "rademacher_bound",
        summary: "E sup_B |sum eps_i <X_i, v>| against sqrt(k d)",
        run: rademacher_bound,
    },
    Experiment {
        name: "sample_size_sweep",
        summary: "slab body quality for N ~ d eta^-2 log(2/eta) versus d eta^-4 log(2/eta)",
        run: sample_size_sweep,
    },
];

pub fn names() -> Vec<&'static str> {
    EXPERIMENTS.iter().map(|e| e.name).collect()
}

pub fn run_experiment(name: &str, config: &ExperimentConfig) -> Result<Report, HarnessError> {
    let exp = EXPERIMENTS.iter().find(|e| e.name == name).ok_or_else(|| {
        HarnessError::Config(format!(
            "unknown experiment `{name}`; registered: {}",
            names().join(", ")
        ))
    })?;
    log::info!("running {name}");
    (exp.run)(config)
}

fn tag_of(name: &str) -> u64 {
    EXPERIMENTS
        .iter()
        .position(|e| e.name == name)
        .map_or(u64::MAX, |i| 1000 + i as u64)
}

/// `ceil(factor * d * eta^-power * ln(2 / eta))`.
pub fn sample_rule(d: usize, eta: f64, power: i32, factor: f64) -> usize {
    (factor * d as f64 * eta.powi(-power) * (2.0 / eta).ln()).ceil() as usize
}

/// Passing repetitions needed out of `seeds`: nine in ten, rounded up.
pub fn required_passes(seeds: usize) -> usize {
    (9 * seeds).div_ceil(10)
}

fn slab_eta(eta: f64) -> Result<f64, HarnessError> {
    if eta > 0.0 && eta < 0.5 {
        Ok(eta)
    } else {
        Err(HarnessError::config(
            "eta",
            format!("slab experiments need 0 < eta < 1/2, got {eta}"),
        ))
    }
}

fn ellipsoid_eta(eta: f64) -> Result<f64, HarnessError> {
    if eta > 0.0 && eta < 0.25 {
        Ok(eta)
    } else {
        Err(HarnessError::config(
            "eta",
            format!("ellipsoid experiments need 0 < eta < 1/4, got {eta}"),
        ))
    }
}

fn positive(field: &str, v: usize) -> Result<usize, HarnessError> {
    if v == 0 {
        Err(HarnessError::config(field, "must be at least 1"))
    } else {
        Ok(v)
    }
}

fn spec_of(c: &ExperimentConfig, default: DistributionConfig, d: usize) -> Result<DistributionSpec, HarnessError> {
    c.distribution.clone().unwrap_or(default).to_spec(d)
}

fn report_ratio_cells(rep: &ApproximationReport, lo: f64, hi: f64) -> Vec<Cell> {
    vec![
        rep.min_ratio.into(),
        rep.max_ratio.into(),
        rep.implied_eta.into(),
        rep.infinite_radial_count.into(),
        rep.within(lo, hi).into(),
    ]
}

const RATIO_COLUMNS: [&str; 5] = ["min_ratio", "max_ratio", "implied_eta", "infinite", "within"];

fn summarize_ratios(report: &mut Report, reps: &[ApproximationReport], lo: f64, hi: f64) {
    let passes = reps.iter().filter(|r| r.within(lo, hi)).count();
    let need = required_passes(reps.len());
    let mean = |f: fn(&ApproximationReport) -> f64| reps.iter().map(f).sum::<f64>() / reps.len() as f64;
    report
        .set("lower_threshold", lo)
        .set("upper_threshold", hi)
        .set("pass_count", passes)
        .set("required_passes", need)
        .set("mean_min_ratio", mean(|r| r.min_ratio))
        .set("mean_max_ratio", mean(|r| r.max_ratio))
        .set(
            "worst_min_ratio",
            reps.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min),
        )
        .set("worst_max_ratio", reps.iter().map(|r| r.max_ratio).fold(0.0, f64::max))
        .set(
            "infinite_total",
            reps.iter().map(|r| r.infinite_radial_count).sum::<usize>(),
        );
    report.passed = Some(passes >= need);
}

/// One slab-body experiment: the pieces that differ between variants.
struct SlabRun {
    name: &'static str,
    spec: DistributionSpec,
    mode: SlabMode,
    samples: usize,
    /// Covariance whose `L2` sphere is certified against.
    reference: SymMatrix,
    directions: usize,
    seeds: usize,
    lo: f64,
    hi: f64,
    seed: u64,
    /// Thresholds are informational only.
    assert: bool,
}

fn run_slab(run: SlabRun, report: &mut Report) -> Result<(), HarnessError> {
    let root = RngStream::new(run.seed, tag_of(run.name));
    let sampler = run.spec.sampler()?;
    let mut reps = Vec::with_capacity(run.seeds);
    for j in 0..run.seeds {
        let stream = root.derive(j as u64);
        let samples = sampler.sample_batch(run.samples, &mut stream.derive(0).rng());
        let body = build_slab_body(&samples, run.mode)?;
        let rep = certify_approximation(|u| body.radial(u), &run.reference, run.directions, stream.derive(1))?;
        log::info!(
            "{} seed {j}: min {:.4} max {:.4}",
            run.name,
            rep.min_ratio,
            rep.max_ratio
        );
        let mut row: Vec<Cell> = vec![
            j.into(),
            body.len().into(),
            body.required().into(),
            body.threshold().into(),
            body.dropped().into(),
        ];
        row.extend(report_ratio_cells(&rep, run.lo, run.hi));
        report.push_row(row);
        reps.push(rep);
    }
    summarize_ratios(report, &reps, run.lo, run.hi);
    if !run.assert {
        report.set("within_thresholds", report.passed.unwrap_or(false));
        report.passed = None;
    }
    Ok(())
}

fn slab_columns() -> Vec<&'static str> {
    let mut c = vec!["seed", "n", "k", "theta", "dropped"];
    c.extend(RATIO_COLUMNS);
    c
}

fn slab_gaussian(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let d = positive("d", c.d.unwrap_or(16))?;
    let eta = slab_eta(c.eta.unwrap_or(0.1))?;
    let m = positive("m", c.m.unwrap_or(1))?;
    let samples = positive("samples", c.samples.unwrap_or(m * sample_rule(d, eta, 2, 2.0)))?;
    let spec = spec_of(c, DistributionConfig::gaussian(), d)?;
    let directions = positive("directions", c.directions.unwrap_or(10_000))?;
    let seeds = positive("seeds", c.seeds.unwrap_or(20))?;
    let mut report = Report::new("slab_gaussian", c.seed(), &slab_columns());
    report
        .param("d", d)
        .param("eta", eta)
        .param("m", m)
        .param("samples", samples)
        .param("directions", directions)
        .param("seeds", seeds)
        .param("alpha", gaussian_abs_median());
    run_slab(
        SlabRun {
            name: "slab_gaussian",
            reference: spec.true_covariance(),
            spec,
            mode: SlabMode::Smoothed { m, eta },
            samples,
            directions,
            seeds,
            lo: 0.95,
            hi: 1.5,
            seed: c.seed(),
            assert: true,
        },
        &mut report,
    )?;
    Ok(report)
}

fn slab_sharp(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let d = positive("d", c.d.unwrap_or(16))?;
    let eta = slab_eta(c.eta.unwrap_or(0.1))?;
    let samples = positive("samples", c.samples.unwrap_or(sample_rule(d, eta, 2, 2.0)))?;
    let spec = spec_of(c, DistributionConfig::gaussian(), d)?;
    let directions = positive("directions", c.directions.unwrap_or(10_000))?;
    let seeds = positive("seeds", c.seeds.unwrap_or(20))?;
    let mut report = Report::new("slab_sharp", c.seed(), &slab_columns());
    report
        .param("d", d)
        .param("eta", eta)
        .param("samples", samples)
        .param("directions", directions)
        .param("seeds", seeds)
        .param("alpha", gaussian_abs_median());
    run_slab(
        SlabRun {
            name: "slab_sharp",
            reference: spec.true_covariance(),
            spec,
            mode: SlabMode::Sharp { eta },
            samples,
            directions,
            seeds,
            lo: 0.95,
            hi: 1.5,
            seed: c.seed(),
            assert: true,
        },
        &mut report,
    )?;
    Ok(report)
}

fn zigzag_sphere(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let d = positive("d", c.d.unwrap_or(20))?;
    let eta = slab_eta(c.eta.unwrap_or(0.2))?;
    let samples = positive("samples", c.samples.unwrap_or(sample_rule(d, eta, 2, 2.0)))?;
    let spec = spec_of(c, DistributionConfig::named(DistributionName::UniformSphere), d)?;
    let directions = positive("directions", c.directions.unwrap_or(10_000))?;
    let seeds = positive("seeds", c.seeds.unwrap_or(20))?;
    let trials = positive("trials", c.trials.unwrap_or(1_000_000))?;
    let alpha = match c.alpha {
        Some(a) => a,
        None => {
            let e1 = Vector::basis(d, 0);
            abs_projection_median(
                &spec,
                &e1,
                trials,
                RngStream::new(c.seed(), tag_of("zigzag_sphere")).derive(u64::MAX),
            )?
        }
    };
    let mut report = Report::new("zigzag_sphere", c.seed(), &slab_columns());
    report
        .param("d", d)
        .param("eta", eta)
        .param("samples", samples)
        .param("directions", directions)
        .param("seeds", seeds)
        .param("alpha_trials", trials)
        .param("alpha", alpha)
        .param("reference", "identity");
    run_slab(
        SlabRun {
            name: "zigzag_sphere",
            spec,
            mode: SlabMode::General {
                alpha,
                beta: 0.5,
                eta: 0.0,
            },
            samples,
            reference: SymMatrix::identity(d),
            directions,
            seeds,
            lo: 0.9,
            hi: 1.6,
            seed: c.seed(),
            assert: true,
        },
        &mut report,
    )?;
    Ok(report)
}

fn isomorphic_smallball(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let d = positive("d", c.d.unwrap_or(20))?;
    let samples = positive("samples", c.samples.unwrap_or(2000))?;
    let lambda = c.lambda.unwrap_or(0.8);
    let delta = c.small_ball_delta.unwrap_or(0.4);
    let spec = spec_of(c, DistributionConfig::xu(1.0), d)?;
    let directions = positive("directions", c.directions.unwrap_or(2000))?;
    let seeds = positive("seeds", c.seeds.unwrap_or(5))?;
    let mode = SlabMode::Isomorphic { lambda, delta };
    let mut report = Report::new("isomorphic_smallball", c.seed(), &slab_columns());
    report
        .param("d", d)
        .param("samples", samples)
        .param("lambda", lambda)
        .param("small_ball_delta", delta)
        .param("directions", directions)
        .param("seeds", seeds);
    run_slab(
        SlabRun {
            name: "isomorphic_smallball",
            reference: spec.true_covariance(),
            spec,
            mode,
            samples,
            directions,
            seeds,
            lo: 0.0,
            hi: f64::INFINITY,
            seed: c.seed(),
            assert: false,
        },
        &mut report,
    )?;
    let spreads: Vec<f64> = report
        .column("max_ratio")
        .unwrap()
        .iter()
        .zip(report.column("min_ratio").unwrap())
        .filter_map(|(hi, lo)| Some(hi.as_f64()? / lo.as_f64()?))
        .collect();
    report.set("worst_spread", spreads.iter().copied().fold(0.0, f64::max));
    Ok(report)
}

/// Default block-size grid: ratio `2^(1/4)` from 16 to `2^20`.
pub fn default_candidates() -> Vec<usize> {
    geometric_candidates(16, 1 << 20, 2f64.powf(0.25))
}

/// Worst-over-directions sample size used by `estimate_m0`.
pub const M0_DIRECTIONS: usize = 64;

fn m0_for(
    c: &ExperimentConfig,
    spec: &DistributionSpec,
    eta: f64,
    stream: RngStream,
) -> Result<M0Estimate, HarnessError> {
    let candidates = c.candidates.clone().unwrap_or_else(default_candidates);
    let trials = c.trials.unwrap_or(3000);
    Ok(estimate_m0(spec, eta, &candidates, trials, M0_DIRECTIONS, stream)?)
}

fn ellipsoid_l4(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let d = positive("d", c.d.unwrap_or(16))?;
    let eta = ellipsoid_eta(c.eta.unwrap_or(0.2))?;
    let spec = spec_of(c, DistributionConfig::product(MarginalSpec::Rademacher), d)?;
    let directions = positive("directions", c.directions.unwrap_or(2000))?;
    let seeds = positive("seeds", c.seeds.unwrap_or(20))?;
    let root = RngStream::new(c.seed(), tag_of("ellipsoid_l4"));
    let mut report = Report::new(
        "ellipsoid_l4",
        c.seed(),
        &[
            "seed",
            "m",
            "n",
            "k",
            "min_ratio",
            "max_ratio",
            "implied_eta",
            "infinite",
            "within",
        ],
    );
    let m = match c.m {
        Some(m) => {
            report.param("m_source", "config");
            positive("m", m)?
        }
        None => {
            let est = m0_for(c, &spec, eta, root.derive(u64::MAX))?;
            report
                .param("m_source", "estimate_m0")
                .set("m0_candidates_tested", est.failure_probabilities.len());
            if let Some(&(_, p)) = est.failure_probabilities.last() {
                report.set("m0_failure_probability", p);
            }
            est.m0
                .ok_or_else(|| HarnessError::config("candidates", "no candidate reached failure probability 0.01"))?
        }
    };
    let n = positive(
        "blocks",
        c.blocks
            .unwrap_or((4.0 * d as f64 * (m as f64 / eta).ln()).ceil() as usize),
    )?;
    let (lo, hi) = (0.95, 1.0 + 5.0 * eta);
    report
        .param("d", d)
        .param("eta", eta)
        .param("m", m)
        .param("blocks", n)
        .param("directions", directions)
        .param("seeds", seeds);
    let sampler = spec.sampler()?;
    let reference = spec.true_covariance();
    let mut reps = Vec::with_capacity(seeds);
    for j in 0..seeds {
        let stream = root.derive(j as u64);
        let body = build_ellipsoid_body_sampled(&sampler, m, n, eta, stream.derive(0))?;
        let rep = certify_approximation(|u| body.radial(u), &reference, directions, stream.derive(1))?;
        log::info!(
            "ellipsoid_l4 seed {j}: min {:.4} max {:.4}",
            rep.min_ratio,
            rep.max_ratio
        );
        let mut row: Vec<Cell> = vec![j.into(), m.into(), n.into(), body.required().into()];
        row.extend(report_ratio_cells(&rep, lo, hi));
        report.push_row(row);
        reps.push(rep);
    }
    summarize_ratios(&mut report, &reps, lo, hi);
    Ok(report)
}

fn m0_sweep(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let d = positive("d", c.d.unwrap_or(16))?;
    let etas = c.etas.clone().unwrap_or(vec![0.4, 0.2, 0.1]);
    if etas.is_empty() || etas.iter().any(|e| e.is_nan() || *e <= 0.0) {
        return Err(HarnessError::config("etas", "need a nonempty list of positive values"));
    }
    let spec = spec_of(c, DistributionConfig::product(MarginalSpec::Rademacher), d)?;
    let root = RngStream::new(c.seed(), tag_of("m0_sweep"));
    let mut report = Report::new("m0_sweep", c.seed(), &["eta", "m", "failure_probability", "is_m0"]);
    report
        .param("d", d)
        .param("etas", format!("{etas:?}"))
        .param("trials", c.trials.unwrap_or(3000))
        .param("m0_directions", M0_DIRECTIONS);
    let mut found = Vec::new();
    for (i, &eta) in etas.iter().enumerate() {
        let est = m0_for(c, &spec, eta, root.derive(i as u64))?;
        log::info!("m0_sweep eta {eta}: m0 = {:?}", est.m0);
        for &(m, p) in &est.failure_probabilities {
            report.push_row(vec![eta.into(), m.into(), p.into(), (est.m0 == Some(m)).into()]);
        }
        report.set(&format!("m0_eta_{eta}"), est.m0);
        found.push(est.m0);
    }
    // m0 ~ eta^-2, so halving eta should multiply m0 by about 4.
    let mut ok = found.iter().all(Option::is_some);
    for (w, e) in found.windows(2).zip(etas.windows(2)) {
        if let (Some(a), Some(b)) = (w[0], w[1]) {
            let ratio = b as f64 / a as f64;
            report.set(&format!("m0_ratio_{}_to_{}", e[0], e[1]), ratio);
            if (e[1] * 2.0 - e[0]).abs() < 1e-12 {
                ok &= ratio <= 5.0;
            }
        }
    }
    report.passed = Some(ok);
    Ok(report)
}

fn baseline_failure(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let d = positive("d", c.d.unwrap_or(200))?;
    let n = positive("samples", c.samples.unwrap_or(400))?;
    let delta = c.delta.unwrap_or(0.1);
    if !(delta > 0.0 && delta < 0.5) {
        return Err(HarnessError::config("delta", "need 0 < delta < 1/2"));
    }
    let u = (n as f64 / (4.0 * d as f64 * delta)).sqrt();
    let spec = match &c.distribution {
        Some(dc) => dc.to_spec(d)?,
        None => DistributionConfig::xu(u).to_spec(d)?,
    };
    let trials = positive("trials", c.trials.unwrap_or(500))?;
    let directions = positive("directions", c.directions.unwrap_or(1000))?;
    let lambda = c.lambda.unwrap_or(0.8);
    let sb_delta = c.small_ball_delta.unwrap_or(0.4);
    let event_level = (d as f64 / (4.0 * delta * n as f64)).sqrt();
    let mut report = Report::new(
        "baseline_failure",
        c.seed(),
        &[
            "trial",
            "max_norm_term",
            "heavy",
            "empirical_min",
            "empirical_max",
            "empirical_spread",
            "slab_min",
            "slab_max",
            "slab_spread",
            "slab_infinite",
        ],
    );
    report
        .param("d", d)
        .param("samples", n)
        .param("delta", delta)
        .param("u", u)
        .param("trials", trials)
        .param("directions", directions)
        .param("lambda", lambda)
        .param("small_ball_delta", sb_delta)
        .param("event_level", event_level);

    let sampler = spec.sampler()?;
    let reference = spec.true_covariance();
    let root = RngStream::new(c.seed(), tag_of("baseline_failure"));
    let (mut heavy_count, mut emp_spread_min, mut slab_spread_max, mut slab_inf) =
        (0usize, f64::INFINITY, 0.0f64, 0usize);
    for t in 0..trials {
        let stream = root.derive(t as u64);
        let xs = sampler.sample_batch(n, &mut stream.derive(0).rng());
        let max_sq = xs
            .iter()
            .map(|x| x.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max);
        let term = max_sq / n as f64;
        let heavy = term >= event_level;
        if !heavy {
            report.push_row(vec![
                t.into(),
                term.into(),
                false.into(),
                Cell::Null,
                Cell::Null,
                Cell::Null,
                Cell::Null,
                Cell::Null,
                Cell::Null,
                Cell::Null,
            ]);
            continue;
        }
        heavy_count += 1;
        let empirical: EmpiricalEllipsoid = empirical_covariance(&xs)?;
        let slab = build_slab_body(
            &xs,
            SlabMode::Isomorphic {
                lambda,
                delta: sb_delta,
            },
        )?;
        // The heavy samples point where the empirical ellipsoid is most
        // distorted; check them alongside the random directions.
        let probes: Vec<Vector> = xs
            .iter()
            .filter(|x| x.iter().map(|v| v * v).sum::<f64>() / n as f64 >= event_level)
            .cloned()
            .collect();
        let dirs = stream.derive(1);
        let e = certify_with_probes(|u| empirical.radial(u), &reference, directions, &probes, dirs)?;
        let s = certify_with_probes(|u| slab.radial(u), &reference, directions, &probes, dirs)?;
        log::info!(
            "baseline_failure trial {t}: empirical spread {:.3}, slab spread {:.3}",
            e.spread(),
            s.spread()
        );
        emp_spread_min = emp_spread_min.min(e.spread());
        slab_spread_max = slab_spread_max.max(s.spread());
        slab_inf += s.infinite_radial_count;
        report.push_row(vec![
            t.into(),
            term.into(),
            true.into(),
            e.min_ratio.into(),
            e.max_ratio.into(),
            e.spread().into(),
            s.min_ratio.into(),
            s.max_ratio.into(),
            s.spread().into(),
            s.infinite_radial_count.into(),
        ]);
    }
    let freq = heavy_count as f64 / trials as f64;
    let freq_level = delta - 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
    report
        .set("heavy_count", heavy_count)
        .set("heavy_frequency", freq)
        .set("frequency_threshold", freq_level)
        .set("spread_threshold", 1.5)
        .set(
            "empirical_spread_min",
            if heavy_count > 0 {
                Cell::from(emp_spread_min)
            } else {
                Cell::Null
            },
        )
        .set(
            "slab_spread_max",
            if heavy_count > 0 {
                Cell::from(slab_spread_max)
            } else {
                Cell::Null
            },
        )
        .set("slab_infinite_total", slab_inf);
    report.passed =
        Some(freq >= freq_level && heavy_count > 0 && emp_spread_min >= 1.5 && slab_spread_max <= 1.5 && slab_inf == 0);
    Ok(report)
}

fn psi_decay(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let marginal = match &c.distribution {
        Some(DistributionConfig { marginal: Some(m), .. }) => *m,
        Some(_) => return Err(HarnessError::config("distribution", "psi_decay reads only `marginal`")),
        None => MarginalSpec::CenteredExponential,
    };
    let sizes = c.block_sizes.clone().unwrap_or(vec![1, 4, 16, 64]);
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(HarnessError::config(
            "block_sizes",
            "need a nonempty list of positive sizes",
        ));
    }
    let trials = c.trials.unwrap_or(1_000_000);
    let root = RngStream::new(c.seed(), tag_of("psi_decay"));
    let mut report = Report::new("psi_decay", c.seed(), &["m", "psi", "ratio_to_previous"]);
    report
        .param("marginal", format!("{marginal:?}"))
        .param("block_sizes", format!("{sizes:?}"))
        .param("trials", trials);
    let mut psis = Vec::new();
    for (i, &m) in sizes.iter().enumerate() {
        let psi = estimate_psi(marginal, m, trials, root.derive(i as u64))?;
        log::info!("psi_decay m {m}: {psi:.5}");
        let ratio = psis.last().map(|&(_, p): &(usize, f64)| psi / p);
        report.push_row(vec![m.into(), psi.into(), ratio.into()]);
        psis.push((m, psi));
    }
    // The gap decays like m^-1/2: quadrupling m from 4 on should at least
    // cut it by a quarter.
    let mut ok = true;
    for w in psis.windows(2) {
        let ((m0, p0), (m1, p1)) = (w[0], w[1]);
        if m0 >= 4 && m1 == 4 * m0 {
            ok &= p1 <= 0.75 * p0;
        }
    }
    let rad = estimate_psi(MarginalSpec::Rademacher, 1, trials, root.derive(u64::MAX))?;
    let rad_exact = covapprox_core::normal::cdf(1.0) - 0.5;
    report
        .set("rademacher_m1_psi", rad)
        .set("rademacher_m1_exact", rad_exact);
    ok &= (rad - 0.3413).abs() <= 0.01;
    report.passed = Some(ok);
    Ok(report)
}

fn rademacher_bound(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let pairs = c.pairs.clone().unwrap_or(vec![[1, 1], [5, 5], [10, 20], [50, 50]]);
    let trials = c.trials.unwrap_or(2000);
    let root = RngStream::new(c.seed(), tag_of("rademacher_bound"));
    let mut report = Report::new(
        "rademacher_bound",
        c.seed(),
        &["distribution", "k", "d", "mean", "stderr", "bound", "limit", "ok"],
    );
    report.param("pairs", format!("{pairs:?}")).param("trials", trials);
    let configs: Vec<(&str, DistributionConfig)> = match &c.distribution {
        Some(dc) => vec![("config", dc.clone())],
        None => vec![
            ("gaussian", DistributionConfig::gaussian()),
            ("heavy_tail_xu", DistributionConfig::xu(1.0)),
        ],
    };
    let mut ok = true;
    for (label, dc) in &configs {
        for (i, &[k, d]) in pairs.iter().enumerate() {
            let spec = dc.to_spec(positive("d", d)?)?;
            let r = rademacher_sup_estimate(&spec, positive("k", k)?, trials, root.derive(i as u64))?;
            let limit = r.bound * (1.0 + 3.0 * r.stderr);
            ok &= r.mean <= limit;
            report.push_row(vec![
                (*label).into(),
                k.into(),
                d.into(),
                r.mean.into(),
                r.stderr.into(),
                r.bound.into(),
                limit.into(),
                (r.mean <= limit).into(),
            ]);
        }
    }
    report.passed = Some(ok);
    Ok(report)
}

fn sample_size_sweep(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let d = positive("d", c.d.unwrap_or(8))?;
    let etas = c.etas.clone().unwrap_or(vec![0.4, 0.3, 0.2]);
    for &e in &etas {
        slab_eta(e)?;
    }
    let spec = spec_of(c, DistributionConfig::gaussian(), d)?;
    let directions = positive("directions", c.directions.unwrap_or(2000))?;
    let seeds = positive("seeds", c.seeds.unwrap_or(3))?;
    let root = RngStream::new(c.seed(), tag_of("sample_size_sweep"));
    let sampler = spec.sampler()?;
    let reference = spec.true_covariance();
    let mut report = Report::new(
        "sample_size_sweep",
        c.seed(),
        &[
            "eta",
            "regime",
            "seed",
            "samples",
            "min_ratio",
            "max_ratio",
            "implied_eta",
        ],
    );
    report
        .param("d", d)
        .param("etas", format!("{etas:?}"))
        .param("directions", directions)
        .param("seeds", seeds);
    for (i, &eta) in etas.iter().enumerate() {
        for (regime, power) in [("eta^-2", 2), ("eta^-4", 4)] {
            let n = sample_rule(d, eta, power, 1.0);
            let mut implied = Vec::new();
            for j in 0..seeds {
                let stream = root.derive(i as u64).derive(power as u64).derive(j as u64);
                let xs = sampler.sample_batch(n, &mut stream.derive(0).rng());
                let body = build_slab_body(&xs, SlabMode::Smoothed { m: 1, eta })?;
                let rep = certify_approximation(|u| body.radial(u), &reference, directions, stream.derive(1))?;
                implied.push(rep.implied_eta);
                report.push_row(vec![
                    eta.into(),
                    regime.into(),
                    j.into(),
                    n.into(),
                    rep.min_ratio.into(),
                    rep.max_ratio.into(),
                    rep.implied_eta.into(),
                ]);
            }
            let mean = implied.iter().sum::<f64>() / implied.len() as f64;
            report.set(&format!("mean_implied_eta_{eta}_{regime}"), mean);
        }
    }
    Ok(report)
}
