//! Tensorized circuits on region graphs with CP-style layers, and the model
//! classes built from them.
//!
//! Every internal region holds `K_S` product units; product `k` multiplies the
//! `k`-th sum unit over the left child's outputs with the `k`-th sum unit over
//! the right child's outputs. Leaf regions hold `K_I` input units, each a
//! product of one trainable leaf per variable of the region.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitBuilder, Field, UnitId};
use crate::compose::{multiply, socs_sum, square};
use crate::error::{Error, Result};
use crate::eval::Evidence;
use crate::logc::{LogC, LseAcc};
use crate::params::{LeafKind, ParamRef, ParamStore, UnitTie, WeightKind, WeightTie};
use crate::region::{RegionGraph, RegionNode};
use crate::tape::{seed_log_partition, seed_neg_log, seed_neg_log_modulus_sq, EvalTape};
use crate::variable::{Domain, Variable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelClass {
    Monotone,
    SquaredReal,
    SquaredComplex,
    /// Sum of `r` squared circuits sharing one region graph.
    Socs { r: usize, complex: bool },
    /// Monotone circuit times a sum of `r` squares.
    Musocs { r: usize, complex: bool },
}

impl ModelClass {
    pub fn name(&self) -> String {
        match self {
            ModelClass::Monotone => "monotone".into(),
            ModelClass::SquaredReal => "squared_real".into(),
            ModelClass::SquaredComplex => "squared_complex".into(),
            ModelClass::Socs { r, complex } => {
                format!("socs_{}({r})", if *complex { "complex" } else { "real" })
            }
            ModelClass::Musocs { r, complex } => {
                format!("musocs_{}({r})", if *complex { "complex" } else { "real" })
            }
        }
    }

    /// Inverse of [`ModelClass::name`].
    pub fn parse(s: &str) -> Result<ModelClass> {
        let bad = || Error::InvalidArgument(format!("unknown model_class {s:?}"));
        match s {
            "monotone" => return Ok(ModelClass::Monotone),
            "squared_real" => return Ok(ModelClass::SquaredReal),
            "squared_complex" => return Ok(ModelClass::SquaredComplex),
            _ => {}
        }
        let (head, rest) = s.split_once('(').ok_or_else(bad)?;
        let r: usize = rest.strip_suffix(')').and_then(|n| n.parse().ok()).ok_or_else(bad)?;
        if r == 0 {
            return Err(bad());
        }
        match head {
            "socs_real" => Ok(ModelClass::Socs { r, complex: false }),
            "socs_complex" => Ok(ModelClass::Socs { r, complex: true }),
            "musocs_real" => Ok(ModelClass::Musocs { r, complex: false }),
            "musocs_complex" => Ok(ModelClass::Musocs { r, complex: true }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFamily {
    /// Categorical for monotone factors, embeddings for squared ones on finite
    /// variables; Gaussian on continuous variables.
    Auto,
    Categorical,
    Gaussian,
    Embedding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub sum_units: usize,
    pub input_units: usize,
    pub model_class: ModelClass,
    pub input_family: InputFamily,
    pub seed: u64,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sum_units == 0 || self.input_units == 0 {
            return Err(Error::InvalidArgument("sum_units and input_units must be positive".into()));
        }
        match self.model_class {
            ModelClass::Socs { r, .. } | ModelClass::Musocs { r, .. } if r == 0 => {
                Err(Error::InvalidArgument("number of squares must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

struct Builder<'a> {
    vars: &'a [Variable],
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
    spec: &'a LayerSpec,
}

impl Builder<'_> {
    fn weight(&mut self, kind: WeightKind, fan_in: usize) -> (C64, usize) {
        let init = match kind {
            WeightKind::Log => C64::new(Normal::new(0.0, 0.1).unwrap().sample(&mut self.rng), 0.0),
            WeightKind::Real => {
                let n = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).unwrap();
                C64::new(n.sample(&mut self.rng), 0.0)
            }
            WeightKind::Complex => {
                let n = Normal::new(0.0, 1.0 / (2.0 * fan_in as f64).sqrt()).unwrap();
                C64::new(n.sample(&mut self.rng), n.sample(&mut self.rng))
            }
        };
        let id = self.store.add_weight(kind, init);
        (self.store.weight(id), id)
    }

    fn leaf_kind(&self, domain: &Domain, weights: WeightKind) -> Result<LeafKind> {
        let fam = self.spec.input_family;
        match (domain.size(), fam) {
            (None, InputFamily::Auto | InputFamily::Gaussian) => {
                if domain != &Domain::Real {
                    return Err(Error::InvalidArgument("Gaussian leaves need an unbounded real variable".into()));
                }
                Ok(LeafKind::Gaussian)
            }
            (None, _) => Err(Error::InvalidArgument(format!("{fam:?} leaves need a finite variable"))),
            (Some(_), InputFamily::Gaussian) => {
                Err(Error::InvalidArgument("Gaussian leaves need a continuous variable".into()))
            }
            (Some(v), InputFamily::Categorical) => Ok(LeafKind::Categorical(v)),
            (Some(v), InputFamily::Auto | InputFamily::Embedding) => match weights {
                WeightKind::Log if fam == InputFamily::Auto => Ok(LeafKind::Categorical(v)),
                WeightKind::Log => {
                    Err(Error::InvalidArgument("embedding leaves cannot be used in a monotone circuit".into()))
                }
                WeightKind::Real => Ok(LeafKind::RealEmbedding(v)),
                WeightKind::Complex => Ok(LeafKind::ComplexEmbedding(v)),
            },
        }
    }

    fn leaf(&mut self, kind: LeafKind) -> usize {
        let init: Vec<f64> = match kind {
            LeafKind::Gaussian => {
                vec![Normal::new(0.0, 1.0).unwrap().sample(&mut self.rng), 0.0]
            }
            LeafKind::Categorical(v) => {
                let n = Normal::new(0.0, 0.1).unwrap();
                (0..v).map(|_| n.sample(&mut self.rng)).collect()
            }
            LeafKind::RealEmbedding(v) => {
                let n = Normal::new(0.0, 1.0).unwrap();
                (0..v).map(|_| n.sample(&mut self.rng)).collect()
            }
            LeafKind::ComplexEmbedding(v) => {
                let n = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
                (0..2 * v).map(|_| n.sample(&mut self.rng)).collect()
            }
        };
        self.store.add_leaf(kind, &init)
    }

    fn tied_sum(&mut self, b: &mut CircuitBuilder, inputs: Vec<UnitId>, kind: WeightKind) -> Result<UnitId> {
        let fan_in = inputs.len();
        let mut ws = Vec::with_capacity(fan_in);
        let mut ts = Vec::with_capacity(fan_in);
        for _ in 0..fan_in {
            let (w, id) = self.weight(kind, fan_in);
            ws.push(w);
            ts.push(Some(WeightTie { coef: C64::new(1.0, 0.0), factors: vec![ParamRef { id, conj: false }] }));
        }
        b.sum_tied(inputs, ws, Some(UnitTie::Weights(ts)))
    }

    fn region(&mut self, b: &mut CircuitBuilder, node: &RegionNode, kind: WeightKind) -> Result<Vec<UnitId>> {
        let ks = self.spec.sum_units;
        match node {
            RegionNode::Leaf { vars } => {
                let mut out = Vec::with_capacity(self.spec.input_units);
                for _ in 0..self.spec.input_units {
                    let mut units = Vec::with_capacity(vars.len());
                    for &v in vars {
                        let lk = self.leaf_kind(&self.vars[v].domain, kind)?;
                        let id = self.leaf(lk);
                        let f = self.store.leaf_function(id);
                        let tie = UnitTie::Leaf(vec![Some(ParamRef { id, conj: false })]);
                        units.push(b.input_tied(v, f, Some(tie))?);
                    }
                    out.push(b.product(&units)?);
                }
                Ok(out)
            }
            RegionNode::Split { left, right } => {
                let l = self.region(b, left, kind)?;
                let r = self.region(b, right, kind)?;
                let mut out = Vec::with_capacity(ks);
                for _ in 0..ks {
                    let sl = self.tied_sum(b, l.clone(), kind)?;
                    let sr = self.tied_sum(b, r.clone(), kind)?;
                    out.push(b.product(&[sl, sr])?);
                }
                Ok(out)
            }
        }
    }

    fn component(&mut self, rg: &RegionGraph, kind: WeightKind) -> Result<Circuit> {
        let mut b = CircuitBuilder::new(self.vars.to_vec());
        if kind == WeightKind::Complex {
            b.set_field(Field::Complex);
        }
        let outs = self.region(&mut b, &rg.root, kind)?;
        let root = self.tied_sum(&mut b, outs, kind)?;
        b.finish(root)
    }
}

/// A trainable model: parameters, the circuits evaluated per sample, and the
/// materialized circuit whose integral is the partition function.
#[derive(Clone, Debug)]
pub struct Model {
    pub variables: Vec<Variable>,
    pub region_graph: RegionGraph,
    pub spec: LayerSpec,
    pub store: ParamStore,
    components: Vec<Circuit>,
    normalizer: Circuit,
}

const CHUNK: usize = 64;

/// Phase allowed on `Z` before it counts as not positive.
const Z_PHASE_TOL: f64 = 1e-6;

fn check_partition(z: LogC) -> Result<()> {
    if z.is_zero() || !z.log_mag.is_finite() {
        return Err(Error::Numerical("partition function is zero or not finite".into()));
    }
    if z.arg.abs() > Z_PHASE_TOL {
        return Err(Error::Numerical(format!("partition function is not a positive real (phase {})", z.arg)));
    }
    Ok(())
}

impl Model {
    pub fn build(variables: Vec<Variable>, region_graph: RegionGraph, spec: LayerSpec) -> Result<Model> {
        spec.validate()?;
        region_graph.validate()?;
        if region_graph.num_vars != variables.len() {
            return Err(Error::InvalidArgument(format!(
                "region graph covers {} variables but the model has {}",
                region_graph.num_vars,
                variables.len()
            )));
        }
        let mut store = ParamStore::new();
        let mut bld = Builder {
            vars: &variables,
            store: &mut store,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec: &spec,
        };
        let sq_kind = |complex: bool| if complex { WeightKind::Complex } else { WeightKind::Real };
        let (components, normalizer) = match spec.model_class {
            ModelClass::Monotone => {
                let c = bld.component(&region_graph, WeightKind::Log)?;
                (vec![c.clone()], c)
            }
            ModelClass::SquaredReal | ModelClass::SquaredComplex => {
                let kind = sq_kind(spec.model_class == ModelClass::SquaredComplex);
                let c = bld.component(&region_graph, kind)?;
                let n = square(&c)?;
                (vec![c], n)
            }
            ModelClass::Socs { r, complex } => {
                let cs = (0..r)
                    .map(|_| bld.component(&region_graph, sq_kind(complex)))
                    .collect::<Result<Vec<_>>>()?;
                let s = socs_sum(cs.clone(), None)?;
                (cs, s.circuit().clone())
            }
            ModelClass::Musocs { r, complex } => {
                let mono = bld.component(&region_graph, WeightKind::Log)?;
                let cs = (0..r)
                    .map(|_| bld.component(&region_graph, sq_kind(complex)))
                    .collect::<Result<Vec<_>>>()?;
                let s = socs_sum(cs.clone(), None)?;
                let n = multiply(&mono, s.circuit())?;
                let mut all = vec![mono];
                all.extend(cs);
                (all, n)
            }
        };
        Ok(Model { variables, region_graph, spec, store, components, normalizer })
    }

    pub fn num_params(&self) -> usize {
        self.store.len()
    }

    pub fn components(&self) -> &[Circuit] {
        &self.components
    }

    /// Circuit computing the unnormalized density in materialized form.
    pub fn circuit(&self) -> &Circuit {
        &self.normalizer
    }

    pub fn params(&self) -> &[f64] {
        &self.store.values
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.store.len() {
            return Err(Error::Schema(format!(
                "expected {} parameters, got {}",
                self.store.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        self.store.values.copy_from_slice(values);
        self.refresh();
        Ok(())
    }

    fn refresh(&mut self) {
        self.components = self.components.iter().map(|c| c.rebind(&self.store)).collect();
        self.normalizer = self.normalizer.rebind(&self.store);
    }

    /// `log c(x)` of the unnormalized model, computed factor-wise.
    pub fn log_unnormalized(&self, x: &[f64]) -> Result<f64> {
        let tapes = self.sample_tapes(x)?;
        self.combine(&tapes).map(|(v, _)| v)
    }

    pub fn log_partition(&self) -> Result<f64> {
        let z = EvalTape::forward(&self.normalizer, &vec![None; self.variables.len()])?;
        let v = z.output(&self.normalizer);
        check_partition(v)?;
        Ok(v.log_mag)
    }

    pub fn log_likelihood(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_unnormalized(x)? - self.log_partition()?)
    }

    /// Log of the marginal density of the observed variables, normalized.
    pub fn log_marginal(&self, e: &Evidence) -> Result<f64> {
        let v = crate::eval::marginalize_log(&self.normalizer, e)?;
        Ok(v.log_mag - self.log_partition()?)
    }

    fn check_sample(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.variables.len() {
            return Err(Error::Domain("sample width does not match the variables".into()));
        }
        for (v, &xi) in self.variables.iter().zip(x) {
            v.domain.check_value(xi)?;
        }
        Ok(())
    }

    fn sample_tapes(&self, x: &[f64]) -> Result<Vec<EvalTape>> {
        self.check_sample(x)?;
        let e: Vec<Option<f64>> = x.iter().map(|&v| Some(v)).collect();
        self.components.iter().map(|c| EvalTape::forward(c, &e)).collect()
    }

    /// Log value and, per component, the output adjoint of `-log c(x)`.
    fn combine(&self, tapes: &[EvalTape]) -> Result<(f64, Vec<LogC>)> {
        let outs: Vec<LogC> = tapes.iter().zip(&self.components).map(|(t, c)| t.output(c)).collect();
        let squares = |vals: &[LogC]| -> Result<(f64, Vec<LogC>)> {
            let mut acc = LseAcc::default();
            for v in vals {
                acc.push(LogC::new(2.0 * v.log_mag, 0.0));
            }
            let s = acc.finish();
            if s.is_zero() {
                return Err(Error::Numerical("sum of squares is zero".into()));
            }
            // d(-log S)/dc_i = -2 c_i / S
            let seeds = vals
                .iter()
                .map(|v| {
                    if v.is_zero() {
                        LogC::ZERO
                    } else {
                        LogC::new(2f64.ln() + v.log_mag - s.log_mag, v.arg + std::f64::consts::PI)
                    }
                })
                .collect();
            Ok((s.log_mag, seeds))
        };
        match self.spec.model_class {
            ModelClass::Monotone => Ok((outs[0].log_mag, vec![seed_neg_log(outs[0])?])),
            ModelClass::SquaredReal | ModelClass::SquaredComplex => {
                Ok((2.0 * outs[0].log_mag, vec![seed_neg_log_modulus_sq(outs[0], 1.0)?]))
            }
            ModelClass::Socs { .. } => squares(&outs),
            ModelClass::Musocs { .. } => {
                let (s, mut seeds) = squares(&outs[1..])?;
                seeds.insert(0, seed_neg_log(outs[0])?);
                Ok((outs[0].log_mag + s, seeds))
            }
        }
    }

    /// `L = |B| log Z - sum_x log c(x)` and its gradient.
    pub fn nll_and_grad(&self, batch: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        let n = self.store.len();
        let parts: Vec<Result<(f64, Vec<f64>)>> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = vec![0.0; n];
                let mut loss = 0.0;
                for x in chunk {
                    let tapes = self.sample_tapes(x)?;
                    let (lv, seeds) = self.combine(&tapes)?;
                    loss -= lv;
                    for ((t, c), s) in tapes.iter().zip(&self.components).zip(seeds) {
                        t.backward(c, &self.store, s, &mut g)?;
                    }
                }
                Ok((loss, g))
            })
            .collect();
        let mut grad = vec![0.0; n];
        let mut loss = 0.0;
        for p in parts {
            let (l, g) = p?;
            loss += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        let zt = EvalTape::forward(&self.normalizer, &vec![None; self.variables.len()])?;
        let z = zt.output(&self.normalizer);
        let bsz = batch.len() as f64;
        check_partition(z)?;
        loss += bsz * z.log_mag;
        zt.backward(&self.normalizer, &self.store, seed_log_partition(z, bsz)?, &mut grad)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical("non-finite loss or gradient".into()));
        }
        Ok((loss, grad))
    }

    /// `log Z` and the normalized log-likelihood of every row of `data`.
    pub fn log_likelihoods(&self, data: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        let log_z = self.log_partition()?;
        let parts: Vec<Result<Vec<f64>>> = data
            .par_chunks(CHUNK)
            .map(|chunk| chunk.iter().map(|x| Ok(self.log_unnormalized(x)? - log_z)).collect())
            .collect();
        let mut out = Vec::with_capacity(data.len());
        for p in parts {
            out.extend(p?);
        }
        Ok((log_z, out))
    }

    /// Mean negative log-likelihood over `data`.
    pub fn mean_nll(&self, data: &[Vec<f64>]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        let log_z = self.log_partition()?;
        let parts: Vec<Result<f64>> = data
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut s = 0.0;
                for x in chunk {
                    s += self.log_unnormalized(x)?;
                }
                Ok(s)
            })
            .collect();
        let mut total = 0.0;
        for p in parts {
            total += p?;
        }
        Ok(log_z - total / data.len() as f64)
    }
}
