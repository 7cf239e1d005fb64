use std::collections::HashMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Circuit, CircuitBuilder, Field, UnitKind};
use crate::error::{Error, Result};
use crate::input::InputFunction;
use crate::variable::{validate_variables, Variable};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitJson {
    pub field: Field,
    pub variables: Vec<Variable>,
    pub units: Vec<UnitJson>,
    pub output: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitJson {
    pub id: u64,
    pub kind: UnitKindTag,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty", with = "crate::cjson::vec")]
    pub weights: Vec<C64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<InputFunction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKindTag {
    Input,
    Sum,
    Product,
}

impl Circuit {
    pub fn to_json(&self) -> CircuitJson {
        let units = self
            .units()
            .iter()
            .enumerate()
            .map(|(id, u)| match &u.kind {
                UnitKind::Input { var, function } => UnitJson {
                    id: id as u64,
                    kind: UnitKindTag::Input,
                    inputs: vec![],
                    weights: vec![],
                    var: Some(*var),
                    function: Some(function.clone()),
                },
                UnitKind::Sum { inputs, weights } => UnitJson {
                    id: id as u64,
                    kind: UnitKindTag::Sum,
                    inputs: inputs.iter().map(|&i| i as u64).collect(),
                    weights: weights.clone(),
                    var: None,
                    function: None,
                },
                UnitKind::Product { inputs } => UnitJson {
                    id: id as u64,
                    kind: UnitKindTag::Product,
                    inputs: inputs.iter().map(|&i| i as u64).collect(),
                    weights: vec![],
                    var: None,
                    function: None,
                },
            })
            .collect();
        CircuitJson {
            field: self.field(),
            variables: self.variables().to_vec(),
            units,
            output: self.output() as u64,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("circuit serialization")
    }

    pub fn from_json(j: &CircuitJson) -> Result<Circuit> {
        validate_variables(&j.variables)?;
        let mut b = CircuitBuilder::new(j.variables.clone());
        let mut ids: HashMap<u64, usize> = HashMap::new();
        let lookup = |ids: &HashMap<u64, usize>, i: &u64| {
            ids.get(i)
                .copied()
                .ok_or_else(|| Error::Schema(format!("unit {i} referenced before definition")))
        };
        for u in &j.units {
            if ids.contains_key(&u.id) {
                return Err(Error::Schema(format!("duplicate unit id {}", u.id)));
            }
            let schema = |e: Error| Error::Schema(format!("unit {}: {e}", u.id));
            let new_id = match u.kind {
                UnitKindTag::Input => {
                    if !u.inputs.is_empty() || !u.weights.is_empty() {
                        return Err(Error::Schema(format!("input unit {} has inputs", u.id)));
                    }
                    let (var, f) = match (&u.var, &u.function) {
                        (Some(v), Some(f)) => (*v, f.clone()),
                        _ => {
                            return Err(Error::Schema(format!(
                                "input unit {} needs var and function",
                                u.id
                            )))
                        }
                    };
                    b.input(var, f).map_err(schema)?
                }
                UnitKindTag::Sum => {
                    let inputs =
                        u.inputs.iter().map(|i| lookup(&ids, i)).collect::<Result<Vec<_>>>()?;
                    b.sum(inputs, u.weights.clone()).map_err(schema)?
                }
                UnitKindTag::Product => {
                    if !u.weights.is_empty() || u.function.is_some() {
                        return Err(Error::Schema(format!("product unit {} has weights", u.id)));
                    }
                    let inputs =
                        u.inputs.iter().map(|i| lookup(&ids, i)).collect::<Result<Vec<_>>>()?;
                    b.product(&inputs).map_err(schema)?
                }
            };
            ids.insert(u.id, new_id);
        }
        let out = lookup(&ids, &j.output)?;
        let c = b.finish(out)?;
        if j.field == Field::Real && c.field() == Field::Complex {
            return Err(Error::Schema("field is real but the circuit has complex values".into()));
        }
        if j.field == Field::Complex && c.field() == Field::Real {
            let mut b = CircuitBuilder::with_variables(c.variables_arc().clone());
            b.set_field(Field::Complex);
            let root = b.import(&c)?;
            return b.finish(root);
        }
        Ok(c)
    }

    pub fn from_json_str(s: &str) -> Result<Circuit> {
        let j: CircuitJson =
            serde_json::from_str(s).map_err(|e| Error::Schema(format!("circuit JSON: {e}")))?;
        Circuit::from_json(&j)
    }
}
