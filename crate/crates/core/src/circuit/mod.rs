//! Circuit representation: a DAG of input, sum and product units over a shared
//! variable table. Circuits are immutable once built; [`CircuitBuilder`] is the
//! only way to create one.

mod json;
mod structure;

use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use json::{CircuitJson, UnitJson};
pub use structure::{
    check_compatible, check_monotone, check_smooth_decomposable, recompute_scopes,
    require_smooth_decomposable, structured_decomposable, CompatReport, StructReport, Violation,
};

use crate::error::{Error, Result};
use crate::input::InputFunction;
use crate::logc::LogC;
use crate::params::{ParamStore, UnitTie};
use crate::scope::Scope;
use crate::variable::Variable;

pub type UnitId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn join(self, other: Field) -> Field {
        if self == Field::Complex || other == Field::Complex {
            Field::Complex
        } else {
            Field::Real
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum UnitKind {
    Input { var: usize, function: InputFunction },
    Sum { inputs: Vec<UnitId>, weights: Vec<C64> },
    /// Always exactly two inputs; wider products are binarized on construction.
    Product { inputs: [UnitId; 2] },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Unit {
    pub kind: UnitKind,
    pub scope: Scope,
}

impl Unit {
    pub fn inputs(&self) -> &[UnitId] {
        match &self.kind {
            UnitKind::Input { .. } => &[],
            UnitKind::Sum { inputs, .. } => inputs,
            UnitKind::Product { inputs } => inputs,
        }
    }
}

#[derive(Debug)]
pub struct Circuit {
    variables: Arc<Vec<Variable>>,
    units: Vec<Unit>,
    ties: Vec<Option<UnitTie>>,
    output: UnitId,
    field: Field,
    monotone: OnceLock<bool>,
    log_weights: OnceLock<Vec<Vec<LogC>>>,
}

impl Clone for Circuit {
    fn clone(&self) -> Circuit {
        Circuit {
            variables: self.variables.clone(),
            units: self.units.clone(),
            ties: self.ties.clone(),
            output: self.output,
            field: self.field,
            monotone: self.monotone.clone(),
            log_weights: OnceLock::new(),
        }
    }
}

impl Circuit {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variables_arc(&self) -> &Arc<Vec<Variable>> {
        &self.variables
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit(&self, id: UnitId) -> &Unit {
        &self.units[id]
    }

    pub fn output(&self) -> UnitId {
        self.output
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn scope(&self) -> &Scope {
        &self.units[self.output].scope
    }

    pub fn num_units(&self) -> usize {
        self.units.len()
    }

    /// Number of edges, the size measure used throughout.
    pub fn size(&self) -> usize {
        self.units.iter().map(|u| u.inputs().len()).sum()
    }

    pub fn tie(&self, id: UnitId) -> Option<&UnitTie> {
        self.ties[id].as_ref()
    }

    pub fn has_ties(&self) -> bool {
        self.ties.iter().any(|t| t.is_some())
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Per-unit sum weights in log form, computed once.
    pub fn log_weights(&self) -> &[Vec<LogC>] {
        self.log_weights.get_or_init(|| {
            self.units
                .iter()
                .map(|u| match &u.kind {
                    UnitKind::Sum { weights, .. } => {
                        weights.iter().map(|w| LogC::from_complex(*w)).collect()
                    }
                    _ => Vec::new(),
                })
                .collect()
        })
    }

    pub(crate) fn cached_monotone(&self) -> &OnceLock<bool> {
        &self.monotone
    }

    /// Same circuit with weights and leaves recomputed from tied parameters.
    pub fn rebind(&self, store: &ParamStore) -> Circuit {
        let mut units = self.units.clone();
        for (u, tie) in units.iter_mut().zip(&self.ties) {
            match (&mut u.kind, tie) {
                (UnitKind::Sum { weights, .. }, Some(UnitTie::Weights(ts))) => {
                    for (w, t) in weights.iter_mut().zip(ts) {
                        if let Some(t) = t {
                            *w = store.tie_value(t);
                        }
                    }
                }
                (UnitKind::Input { function, .. }, Some(UnitTie::Leaf(ts))) => {
                    let mut factors = function.factors().to_vec();
                    for (f, t) in factors.iter_mut().zip(ts) {
                        if let Some(r) = t {
                            *f = store.leaf_value(*r);
                        }
                    }
                    *function = if factors.len() == 1 {
                        factors.pop().unwrap()
                    } else {
                        InputFunction::Product { factors }
                    };
                }
                _ => {}
            }
        }
        Circuit {
            variables: self.variables.clone(),
            units,
            ties: self.ties.clone(),
            output: self.output,
            field: self.field,
            monotone: OnceLock::new(),
            log_weights: OnceLock::new(),
        }
    }

    /// Copy of the circuit without parameter ties.
    pub fn untied(&self) -> Circuit {
        let mut c = self.clone();
        c.ties = vec![None; c.units.len()];
        c
    }
}

/// Incremental construction of a [`Circuit`]. Units are appended in
/// topological order, so unit ids of the finished circuit are a valid
/// evaluation order.
#[derive(Clone, Debug)]
pub struct CircuitBuilder {
    variables: Arc<Vec<Variable>>,
    units: Vec<Unit>,
    ties: Vec<Option<UnitTie>>,
    field: Option<Field>,
}

impl CircuitBuilder {
    pub fn new(variables: Vec<Variable>) -> CircuitBuilder {
        CircuitBuilder::with_variables(Arc::new(variables))
    }

    pub fn with_variables(variables: Arc<Vec<Variable>>) -> CircuitBuilder {
        CircuitBuilder { variables, units: Vec::new(), ties: Vec::new(), field: None }
    }

    pub fn variables(&self) -> &Arc<Vec<Variable>> {
        &self.variables
    }

    pub fn set_field(&mut self, field: Field) {
        self.field = Some(field);
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn scope(&self, id: UnitId) -> &Scope {
        &self.units[id].scope
    }

    pub fn unit(&self, id: UnitId) -> &Unit {
        &self.units[id]
    }

    fn check_id(&self, id: UnitId) -> Result<()> {
        if id >= self.units.len() {
            return Err(Error::Structure(format!("unit {id} referenced before definition")));
        }
        Ok(())
    }

    pub fn input(&mut self, var: usize, function: InputFunction) -> Result<UnitId> {
        self.input_tied(var, function, None)
    }

    pub fn input_tied(
        &mut self,
        var: usize,
        function: InputFunction,
        tie: Option<UnitTie>,
    ) -> Result<UnitId> {
        let v = self
            .variables
            .get(var)
            .ok_or_else(|| Error::Structure(format!("variable index {var} out of range")))?;
        function.validate(&v.domain)?;
        if let Some(UnitTie::Leaf(ts)) = &tie {
            if ts.len() != function.factors().len() {
                return Err(Error::Structure("leaf tie does not match factor count".into()));
            }
        }
        self.units.push(Unit { kind: UnitKind::Input { var, function }, scope: Scope::singleton(var) });
        self.ties.push(tie);
        Ok(self.units.len() - 1)
    }

    pub fn sum(&mut self, inputs: Vec<UnitId>, weights: Vec<C64>) -> Result<UnitId> {
        self.sum_tied(inputs, weights, None)
    }

    pub fn sum_real(&mut self, inputs: Vec<UnitId>, weights: &[f64]) -> Result<UnitId> {
        self.sum(inputs, weights.iter().map(|&w| C64::new(w, 0.0)).collect())
    }

    pub fn sum_tied(
        &mut self,
        inputs: Vec<UnitId>,
        weights: Vec<C64>,
        tie: Option<UnitTie>,
    ) -> Result<UnitId> {
        if inputs.is_empty() {
            return Err(Error::Structure("sum unit without inputs".into()));
        }
        if inputs.len() != weights.len() {
            return Err(Error::Structure(format!(
                "sum unit has {} inputs but {} weights",
                inputs.len(),
                weights.len()
            )));
        }
        if let Some(UnitTie::Weights(ts)) = &tie {
            if ts.len() != inputs.len() {
                return Err(Error::Structure("weight tie does not match fan-in".into()));
            }
        }
        if weights.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(Error::Structure("non-finite sum weight".into()));
        }
        let mut scope = Scope::empty();
        for &i in &inputs {
            self.check_id(i)?;
            scope = scope.union(&self.units[i].scope);
        }
        self.units.push(Unit { kind: UnitKind::Sum { inputs, weights }, scope });
        self.ties.push(tie);
        Ok(self.units.len() - 1)
    }

    /// Product over `inputs`, binarized as a left fold. A single input is
    /// returned unchanged.
    pub fn product(&mut self, inputs: &[UnitId]) -> Result<UnitId> {
        let (&first, rest) = inputs
            .split_first()
            .ok_or_else(|| Error::Structure("product unit without inputs".into()))?;
        self.check_id(first)?;
        let mut acc = first;
        for &i in rest {
            self.check_id(i)?;
            let scope = self.units[acc].scope.union(&self.units[i].scope);
            self.units.push(Unit { kind: UnitKind::Product { inputs: [acc, i] }, scope });
            self.ties.push(None);
            acc = self.units.len() - 1;
        }
        Ok(acc)
    }

    /// Copies every unit of `c` (which must share this builder's variable
    /// table) and returns the id of its output.
    pub fn import(&mut self, c: &Circuit) -> Result<UnitId> {
        Ok(self.import_map(c)?[c.output()])
    }

    pub fn import_map(&mut self, c: &Circuit) -> Result<Vec<UnitId>> {
        if c.variables() != &self.variables[..] {
            return Err(Error::Scope("circuits use different variable tables".into()));
        }
        let base = self.units.len();
        for (u, t) in c.units.iter().zip(&c.ties) {
            let kind = match &u.kind {
                UnitKind::Input { .. } => u.kind.clone(),
                UnitKind::Sum { inputs, weights } => UnitKind::Sum {
                    inputs: inputs.iter().map(|i| i + base).collect(),
                    weights: weights.clone(),
                },
                UnitKind::Product { inputs } => {
                    UnitKind::Product { inputs: [inputs[0] + base, inputs[1] + base] }
                }
            };
            self.units.push(Unit { kind, scope: u.scope.clone() });
            self.ties.push(t.clone());
        }
        self.field = Some(self.field.unwrap_or(Field::Real).join(c.field()));
        Ok((0..c.units.len()).map(|i| i + base).collect())
    }

    /// Finishes the circuit rooted at `output`, dropping unreachable units.
    pub fn finish(self, output: UnitId) -> Result<Circuit> {
        self.check_id(output)?;
        let n = self.units.len();
        let mut reach = vec![false; n];
        reach[output] = true;
        for id in (0..n).rev() {
            if reach[id] {
                for &i in self.units[id].inputs() {
                    reach[i] = true;
                }
            }
        }
        let mut remap = vec![usize::MAX; n];
        let mut units = Vec::new();
        let mut ties = Vec::new();
        for (id, (u, t)) in self.units.into_iter().zip(self.ties).enumerate() {
            if !reach[id] {
                continue;
            }
            let kind = match u.kind {
                UnitKind::Sum { inputs, weights } => {
                    UnitKind::Sum { inputs: inputs.iter().map(|&i| remap[i]).collect(), weights }
                }
                UnitKind::Product { inputs } => {
                    UnitKind::Product { inputs: [remap[inputs[0]], remap[inputs[1]]] }
                }
                k => k,
            };
            remap[id] = units.len();
            units.push(Unit { kind, scope: u.scope });
            ties.push(t);
        }
        let inferred = if units.iter().any(|u| match &u.kind {
            UnitKind::Sum { weights, .. } => weights.iter().any(|w| w.im != 0.0),
            UnitKind::Input { function, .. } => !function.is_real(),
            _ => false,
        }) {
            Field::Complex
        } else {
            Field::Real
        };
        let field = match self.field {
            Some(f) => f.join(inferred),
            None => inferred,
        };
        Ok(Circuit {
            variables: self.variables,
            units,
            ties,
            output: remap[output],
            field,
            monotone: OnceLock::new(),
            log_weights: OnceLock::new(),
        })
    }
}
