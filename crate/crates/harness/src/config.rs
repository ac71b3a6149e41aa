//! Experiment configuration files.
//!
//! A config is one flat TOML table. Every key is optional; each experiment
//! fills the gaps from its preset, and command-line flags override the file.
//! Unknown keys are rejected.
//!
//! ```toml
//! experiment = "slab_gaussian"
//! seed = 7
//! d = 16
//! eta = 0.1
//! directions = 10000
//!
//! [distribution]
//! kind = "mixed_product"
//! marginal = { kind = "rademacher" }
//! ```

use std::path::{Path, PathBuf};

use covapprox_core::distributions::{DistributionSpec, MarginalSpec, NormEquivalence};
use covapprox_core::SymMatrix;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Which body `build` and `certify` construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Smoothed,
    Sharp,
    Isomorphic,
    General,
    Ellipsoid,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionName {
    Gaussian,
    UniformSphere,
    HeavyTailXu,
    MixedProduct,
}

/// `cov` and `mixing` default to the identity of dimension `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionConfig {
    pub kind: DistributionName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal: Option<MarginalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_equivalence: Option<NormEquivalence>,
}

impl DistributionConfig {
    pub fn gaussian() -> Self {
        Self::named(DistributionName::Gaussian)
    }

    pub fn named(kind: DistributionName) -> Self {
        Self {
            kind,
            cov: None,
            u: None,
            marginal: None,
            mixing: None,
            norm_equivalence: None,
        }
    }

    pub fn product(marginal: MarginalSpec) -> Self {
        Self {
            marginal: Some(marginal),
            ..Self::named(DistributionName::MixedProduct)
        }
    }

    pub fn xu(u: f64) -> Self {
        Self {
            u: Some(u),
            ..Self::named(DistributionName::HeavyTailXu)
        }
    }

    /// The spec in dimension `d`; explicit matrices must agree with `d`.
    pub fn to_spec(&self, d: usize) -> Result<DistributionSpec, HarnessError> {
        if d == 0 {
            return Err(HarnessError::config("d", "dimension must be at least 1"));
        }
        let matrix = |rows: &Option<Vec<Vec<f64>>>, field: &str| -> Result<SymMatrix, HarnessError> {
            match rows {
                None => Ok(SymMatrix::identity(d)),
                Some(r) => {
                    let m = SymMatrix::from_rows(r).map_err(|e| HarnessError::config(field, e.to_string()))?;
                    if m.dim() != d {
                        return Err(HarnessError::config(
                            field,
                            format!("matrix is {0}x{0} but d = {d}", m.dim()),
                        ));
                    }
                    Ok(m)
                }
            }
        };
        let spec = match self.kind {
            DistributionName::Gaussian => DistributionSpec::gaussian(matrix(&self.cov, "distribution.cov")?),
            DistributionName::UniformSphere => DistributionSpec::uniform_sphere(d),
            DistributionName::HeavyTailXu => {
                let u = self
                    .u
                    .ok_or_else(|| HarnessError::config("distribution.u", "required for heavy_tail_xu"))?;
                DistributionSpec::heavy_tail_xu(d, u)
            }
            DistributionName::MixedProduct => {
                let marginal = self
                    .marginal
                    .ok_or_else(|| HarnessError::config("distribution.marginal", "required for mixed_product"))?;
                DistributionSpec::mixed_product(marginal, matrix(&self.mixing, "distribution.mixing")?)
            }
        };
        let spec = match self.norm_equivalence {
            Some(ne) => spec.with_norm_equivalence(ne.q, ne.l),
            None => spec,
        };
        spec.validate()
            .map_err(|e| HarnessError::config("distribution", e.to_string()))?;
        Ok(spec)
    }
}

/// All keys an experiment may read. Which ones matter depends on the
/// experiment; see the presets in `experiments`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of independent repetitions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Raw sample count `N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Block count `n` for ellipsoid bodies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Small-ball mass for isomorphic slab bodies; `delta` is the
    /// heavy-tail event probability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub small_ball_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<BodyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Block sizes to test when estimating `m0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<usize>>,
    /// Block sizes for the Berry–Esseen sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_sizes: Option<Vec<usize>>,
    /// `(k, d)` pairs for the Rademacher bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}
