//! Versioned JSON experiment configuration.

use std::path::PathBuf;

use picnn::network::ArchSpec;
use picnn::problems::problem_library;
use picnn::trainer::TrainConfig;
use picnn::{Activation, Error, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Smooth2d,
    /// `smoothness_r` for every entry of `r_values`.
    Smoothness,
    DimSmooth,
    DimStructured,
    /// Any library problem named by `problem`, over `dims` and `r_values`.
    Custom,
}

/// Architecture without the input dimension, which each problem supplies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub conv_layers: usize,
    pub kernel_size: usize,
    pub channels: usize,
    pub fc_widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub sup_budget: Option<f64>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        let a = ArchSpec::default_for_dim(3);
        Self {
            conv_layers: a.conv_layers,
            kernel_size: a.kernel_size,
            channels: a.channels,
            fc_widths: a.fc_widths,
            activations: a.activations,
            sup_budget: a.sup_budget,
        }
    }
}

impl ArchConfig {
    pub fn for_dim(&self, d: usize) -> ArchSpec {
        ArchSpec {
            d,
            conv_layers: self.conv_layers,
            kernel_size: self.kernel_size,
            channels: self.channels,
            fc_widths: self.fc_widths.clone(),
            activations: self.activations.clone(),
            sup_budget: self.sup_budget,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    /// Library name, read only by `custom`.
    pub problem: Option<String>,
    pub dims: Vec<usize>,
    pub r_values: Vec<u32>,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    /// Seed of the shared test set.
    pub test_seed: u64,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: ExperimentKind::Smooth2d,
            problem: None,
            dims: vec![3],
            r_values: vec![3, 5, 7],
            sizes: vec![128, 256, 512, 1024, 2048, 4096, 8192],
            replicates: 5,
            test_seed: 20_240_101,
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            output_dir: PathBuf::from("picnn-out"),
        }
    }
}

/// One problem instance the config expands to.
#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    pub family: String,
    pub d: usize,
    pub r: u32,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn variants(&self) -> Result<Vec<Variant>> {
        let v = |family: &str, d: usize, r: u32| Variant {
            family: family.into(),
            d,
            r,
        };
        Ok(match self.experiment {
            ExperimentKind::Smooth2d => vec![v("smooth2d", 3, 0)],
            ExperimentKind::Smoothness => self
                .r_values
                .iter()
                .map(|&r| v("smoothness_r", 3, r))
                .collect(),
            ExperimentKind::DimSmooth => self.dims.iter().map(|&d| v("dim_smooth", d, 0)).collect(),
            ExperimentKind::DimStructured => self
                .dims
                .iter()
                .map(|&d| v("dim_structured", d, 0))
                .collect(),
            ExperimentKind::Custom => {
                let name = self.problem.as_deref().ok_or_else(|| {
                    Error::invalid("problem", "custom experiments name a problem")
                })?;
                let rs = if self.r_values.is_empty() {
                    vec![0]
                } else {
                    self.r_values.clone()
                };
                self.dims
                    .iter()
                    .flat_map(|&d| rs.iter().map(move |&r| v(name, d, r)))
                    .collect()
            }
        })
    }

    /// Checks every field, including that each variant names a valid problem
    /// whose dimension the architecture accepts.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::invalid("sizes", "need at least one positive size"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", "must be at least 1"));
        }
        self.train.validate()?;
        let variants = self.variants()?;
        if variants.is_empty() {
            return Err(Error::invalid(
                "dims",
                "the experiment expands to no problems",
            ));
        }
        for v in &variants {
            let p = problem_library(&v.family, v.d, v.r)?;
            self.arch.for_dim(p.d).validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_experiment_setting() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.arch.for_dim(3), ArchSpec::default_for_dim(3));
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn validation_names_the_field() {
        let c = ExperimentConfig {
            experiment: ExperimentKind::Smoothness,
            r_values: vec![2],
            ..Default::default()
        };
        match c.validate() {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "r"),
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schema_version": 2}"#).is_err());
    }
}
