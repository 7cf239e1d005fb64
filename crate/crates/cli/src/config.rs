//! Training configuration files.

use serde::{Deserialize, Serialize};

use socs_core::region::{quad_tree, random_binary_tree, RegionGraph};
use socs_core::tensorized::{InputFamily, LayerSpec, Model, ModelClass};
use socs_core::training::TrainConfig;
use socs_core::Variable;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionGraphKind {
    RandomBinaryTree,
    QuadTree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionGraphConfig {
    #[serde(rename = "type")]
    pub kind: RegionGraphKind,
    #[serde(default)]
    pub seed: u64,
    /// `[height, width]` or `[height, width, channels]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_shape: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayersConfig {
    pub sum_units: usize,
    pub input_units: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub region_graph: RegionGraphConfig,
    pub layers: LayersConfig,
    pub model_class: String,
    #[serde(default = "default_family")]
    pub input_family: InputFamily,
    /// Seed of the parameter initialization.
    #[serde(default)]
    pub init_seed: u64,
    /// Variable table; inferred from the training data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<Vec<Variable>>,
    pub train: TrainConfig,
    /// When present, one run per rate; the best validation run is kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate_sweep: Option<Vec<f64>>,
}

fn default_family() -> InputFamily {
    InputFamily::Auto
}

impl Config {
    /// Parses and checks a config, naming the offending key on failure.
    pub fn from_json_str(s: &str) -> CliResult<Config> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::usage(format!("config {path}: {}", e.inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_class(&self) -> CliResult<ModelClass> {
        ModelClass::parse(&self.model_class).map_err(|e| CliError::usage(format!("config model_class: {e}")))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.model_class()?;
        self.train.validate().map_err(|e| CliError::usage(format!("config train: {e}")))?;
        if self.layers.sum_units == 0 || self.layers.input_units == 0 {
            return Err(CliError::usage("config layers: sum_units and input_units must be positive"));
        }
        if let Some(rates) = &self.learning_rate_sweep {
            if rates.is_empty() || rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(CliError::usage("config learning_rate_sweep: need finite non-negative rates"));
            }
        }
        match (&self.region_graph.kind, &self.region_graph.image_shape) {
            (RegionGraphKind::QuadTree, None) => {
                Err(CliError::usage("config region_graph.image_shape: required for quad_tree"))
            }
            (RegionGraphKind::QuadTree, Some(s)) if !(s.len() == 2 || s.len() == 3) => {
                Err(CliError::usage("config region_graph.image_shape: expected [h, w] or [h, w, c]"))
            }
            _ => Ok(()),
        }
    }

    pub fn region_graph(&self, num_vars: usize) -> CliResult<RegionGraph> {
        let g = match self.region_graph.kind {
            RegionGraphKind::RandomBinaryTree => random_binary_tree(num_vars, self.region_graph.seed)?,
            RegionGraphKind::QuadTree => {
                let s = self.region_graph.image_shape.as_deref().unwrap_or_default();
                let (h, w, c) = (s[0], s[1], s.get(2).copied().unwrap_or(1));
                let g = quad_tree(h, w, c)?;
                if g.num_vars != num_vars {
                    return Err(CliError::usage(format!(
                        "config region_graph.image_shape: covers {} variables but the data has {num_vars}",
                        g.num_vars
                    )));
                }
                g
            }
        };
        Ok(g)
    }

    pub fn layer_spec(&self) -> CliResult<LayerSpec> {
        Ok(LayerSpec {
            sum_units: self.layers.sum_units,
            input_units: self.layers.input_units,
            model_class: self.model_class()?,
            input_family: self.input_family,
            seed: self.init_seed,
        })
    }

    pub fn build_model(&self, variables: Vec<Variable>) -> CliResult<Model> {
        let g = self.region_graph(variables.len())?;
        Ok(Model::build(variables, g, self.layer_spec()?)?)
    }
}
