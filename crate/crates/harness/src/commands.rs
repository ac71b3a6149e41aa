//! The non-experiment subcommands: `build`, `certify`, `estimate-m0` and
//! `baseline`.

use covapprox_core::baseline::{empirical_covariance, tikhomirov_bound_terms, EmpiricalEllipsoid};
use covapprox_core::ellipsoid::{build_ellipsoid_body, EllipsoidBody};
use covapprox_core::slab::{build_slab_body, export_threshold_network, SlabBody, SlabMode};
use covapprox_core::verifier::certify_approximation;
use covapprox_core::{RngStream, StarBody, Vector};
use serde::Serialize;

use crate::config::{BodyKind, DistributionConfig, ExperimentConfig};
use crate::error::HarnessError;
use crate::experiments::{default_candidates, sample_rule, M0_DIRECTIONS};
use crate::report::{Cell, Report};

const BUILD_TAG: u64 = 1;
const CERTIFY_TAG: u64 = 2;
const M0_TAG: u64 = 3;
const BASELINE_TAG: u64 = 4;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum BuiltBody {
    Slab(SlabBody),
    Ellipsoid(EllipsoidBody),
    Empirical(EmpiricalEllipsoid),
}

impl BuiltBody {
    pub fn radial(&self, u: &[f64]) -> covapprox_core::Result<f64> {
        match self {
            BuiltBody::Slab(b) => b.radial(u),
            BuiltBody::Ellipsoid(b) => b.radial(u),
            BuiltBody::Empirical(b) => b.radial(u),
        }
    }
}

/// Resolved inputs of `build`: body, the samples' distribution and counts.
pub struct Built {
    pub body: BuiltBody,
    pub spec: covapprox_core::distributions::DistributionSpec,
    pub samples: usize,
}

fn eta_or(c: &ExperimentConfig, default: f64) -> f64 {
    c.eta.unwrap_or(default)
}

/// Draws samples per the config and constructs the requested body.
pub fn build(c: &ExperimentConfig) -> Result<Built, HarnessError> {
    let d = c.d.unwrap_or(8);
    let spec = c
        .distribution
        .clone()
        .unwrap_or_else(DistributionConfig::gaussian)
        .to_spec(d)?;
    let kind = c.mode.unwrap_or(BodyKind::Smoothed);
    let m = c.m.unwrap_or(1);
    let slab_mode = match kind {
        BodyKind::Smoothed => Some(SlabMode::Smoothed { m, eta: eta_or(c, 0.1) }),
        BodyKind::Sharp => Some(SlabMode::Sharp { eta: eta_or(c, 0.1) }),
        BodyKind::Isomorphic => Some(SlabMode::Isomorphic {
            lambda: c.lambda.unwrap_or(0.8),
            delta: c.small_ball_delta.unwrap_or(0.4),
        }),
        BodyKind::General => Some(SlabMode::General {
            alpha: c
                .alpha
                .ok_or_else(|| HarnessError::config("alpha", "required for general slab bodies"))?,
            beta: c.beta.unwrap_or(0.5),
            eta: eta_or(c, 0.0),
        }),
        BodyKind::Ellipsoid | BodyKind::Empirical => None,
    };
    if kind == BodyKind::Ellipsoid {
        let eta = eta_or(c, 0.2);
        if !(eta > 0.0 && eta < 0.25) {
            return Err(HarnessError::config("eta", "ellipsoid bodies need 0 < eta < 1/4"));
        }
        if c.m.is_none() {
            return Err(HarnessError::config(
                "m",
                "required for ellipsoid bodies (see `estimate-m0`)",
            ));
        }
    }
    let samples = match (c.samples, kind) {
        (Some(n), _) => n,
        (None, BodyKind::Ellipsoid) => {
            let blocks = c
                .blocks
                .unwrap_or((4.0 * d as f64 * (m as f64 / eta_or(c, 0.2)).ln()).ceil() as usize);
            blocks * m
        }
        (None, _) => {
            let eta = eta_or(c, 0.1);
            if !(eta > 0.0 && eta < 0.5) {
                return Err(HarnessError::config("eta", "slab bodies need 0 < eta < 1/2"));
            }
            m * sample_rule(d, eta, 2, 2.0)
        }
    };
    let sampler = spec.sampler()?;
    let xs: Vec<Vector> = sampler.sample_batch(samples, &mut RngStream::new(c.seed(), BUILD_TAG).rng());
    let body = match (slab_mode, kind) {
        (Some(mode), _) => BuiltBody::Slab(build_slab_body(&xs, mode)?),
        (None, BodyKind::Ellipsoid) => BuiltBody::Ellipsoid(build_ellipsoid_body(&xs, m, eta_or(c, 0.2))?),
        _ => BuiltBody::Empirical(empirical_covariance(&xs)?),
    };
    Ok(Built { body, spec, samples })
}

/// JSON for `build`, optionally with the threshold network of a slab body.
pub fn build_json(built: &Built, network: bool) -> Result<String, HarnessError> {
    let mut value = serde_json::to_value(&built.body).map_err(|e| HarnessError::Serialize(e.to_string()))?;
    if network {
        match &built.body {
            BuiltBody::Slab(b) => {
                value["network"] = serde_json::to_value(export_threshold_network(b))
                    .map_err(|e| HarnessError::Serialize(e.to_string()))?;
            }
            _ => {
                return Err(HarnessError::config(
                    "mode",
                    "threshold networks exist only for slab bodies",
                ))
            }
        }
    }
    let mut s = serde_json::to_string_pretty(&value).map_err(|e| HarnessError::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Builds a body and certifies it against the true covariance.
pub fn certify(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let built = build(c)?;
    let directions = c.directions.unwrap_or(2000);
    let rep = certify_approximation(
        |u| built.body.radial(u),
        &built.spec.true_covariance(),
        directions,
        RngStream::new(c.seed(), CERTIFY_TAG),
    )?;
    let mut report = Report::new("certify", c.seed(), &["index", "ratio"]);
    report
        .param("d", built.spec.dim)
        .param("samples", built.samples)
        .param("directions", directions)
        .param(
            "mode",
            format!("{:?}", c.mode.unwrap_or(BodyKind::Smoothed)).to_lowercase(),
        );
    for o in &rep.worst {
        report.push_row(vec![o.index.into(), o.ratio.into()]);
    }
    report
        .set("min_ratio", rep.min_ratio)
        .set("max_ratio", rep.max_ratio)
        .set("implied_eta", rep.implied_eta)
        .set("infinite_radial_count", rep.infinite_radial_count);
    Ok(report)
}

pub fn estimate_m0(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let d = c.d.unwrap_or(16);
    let eta = c.eta.unwrap_or(0.2);
    let spec = c
        .distribution
        .clone()
        .unwrap_or_else(|| DistributionConfig::product(covapprox_core::distributions::MarginalSpec::Rademacher))
        .to_spec(d)?;
    let candidates = c.candidates.clone().unwrap_or_else(default_candidates);
    let trials = c.trials.unwrap_or(3000);
    let est = covapprox_core::ellipsoid::estimate_m0(
        &spec,
        eta,
        &candidates,
        trials,
        M0_DIRECTIONS,
        RngStream::new(c.seed(), M0_TAG),
    )?;
    let mut report = Report::new("estimate_m0", c.seed(), &["m", "failure_probability"]);
    report
        .param("d", d)
        .param("eta", eta)
        .param("trials", trials)
        .param("m0_directions", M0_DIRECTIONS);
    for &(m, p) in &est.failure_probabilities {
        report.push_row(vec![m.into(), p.into()]);
    }
    report.set("m0", est.m0);
    Ok(report)
}

/// Deviation diagnostics of the empirical covariance, one row per seed.
pub fn baseline(c: &ExperimentConfig) -> Result<Report, HarnessError> {
    let d = c.d.unwrap_or(16);
    let n = c.samples.unwrap_or(40 * d);
    let p = c.p.unwrap_or(8.0);
    let seeds = c.seeds.unwrap_or(1);
    let spec = c
        .distribution
        .clone()
        .unwrap_or_else(DistributionConfig::gaussian)
        .to_spec(d)?;
    let sampler = spec.sampler()?;
    let t = spec.true_covariance();
    let mut report = Report::new(
        "baseline",
        c.seed(),
        &[
            "seed",
            "d",
            "N",
            "p",
            "deviation",
            "max_norm_term",
            "moment_term",
            "truncation_term",
            "top_eigenvalue",
            "dominance",
        ],
    );
    report
        .param("d", d)
        .param("samples", n)
        .param("p", p)
        .param("seeds", seeds);
    let root = RngStream::new(c.seed(), BASELINE_TAG);
    for j in 0..seeds {
        let xs = sampler.sample_batch(n, &mut root.derive(j as u64).rng());
        let g = tikhomirov_bound_terms(&xs, &t, p)?;
        let row: Vec<Cell> = vec![
            j.into(),
            d.into(),
            n.into(),
            p.into(),
            g.operator_deviation.into(),
            g.max_norm_term.into(),
            g.moment_term.into(),
            g.truncation_term.into(),
            g.top_eigenvalue.into(),
            g.dominance_holds().into(),
        ];
        report.push_row(row);
    }
    Ok(report)
}
