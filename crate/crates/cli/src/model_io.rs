//! Versioned model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use socs_core::region::RegionGraph;
use socs_core::tensorized::{LayerSpec, Model};
use socs_core::Variable;

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub variables: Vec<Variable>,
    pub region_graph: RegionGraph,
    pub spec: LayerSpec,
    pub params: Vec<f64>,
}

impl ModelFile {
    pub fn from_model(m: &Model) -> ModelFile {
        ModelFile {
            format_version: FORMAT_VERSION,
            variables: m.variables.clone(),
            region_graph: m.region_graph.clone(),
            spec: m.spec.clone(),
            params: m.params().to_vec(),
        }
    }

    pub fn from_json_str(s: &str) -> CliResult<ModelFile> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        match v.get("format_version").and_then(|x| x.as_u64()) {
            Some(n) if n == FORMAT_VERSION as u64 => {}
            Some(n) => return Err(CliError::usage(format!("model format_version {n} is not supported"))),
            None => return Err(CliError::usage("model file has no format_version")),
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files always serialize")
    }

    /// Rebuilds the model; the architecture is regenerated from its seeds and
    /// the stored parameters are loaded on top.
    pub fn to_model(&self) -> CliResult<Model> {
        socs_core::variable::validate_variables(&self.variables)?;
        let mut m = Model::build(self.variables.clone(), self.region_graph.clone(), self.spec.clone())?;
        m.set_params(&self.params).map_err(|e| CliError::usage(format!("model params: {e}")))?;
        Ok(m)
    }
}

pub fn load_model(path: &Path) -> CliResult<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    ModelFile::from_json_str(&text).and_then(|f| f.to_model()).map_err(|e| e.context(&path.display().to_string()))
}

pub fn save_model(m: &Model, path: &Path) -> CliResult<()> {
    std::fs::write(path, ModelFile::from_model(m).to_json_string())
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}
