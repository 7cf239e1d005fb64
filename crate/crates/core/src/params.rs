//! Flat trainable parameter storage and the ties that bind circuit weights and
//! leaves to it.
//!
//! A sum edge may be tied to a product of weight parameters (possibly
//! conjugated) times a constant; an input unit may be tied factor-by-factor to
//! leaf parameters. Multiplying or conjugating circuits transforms the ties, so
//! squared and product circuits stay differentiable with respect to the
//! parameters of the circuits they were built from.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::input::InputFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// Stored as a log-weight; the weight is `exp(p)`.
    Log,
    Real,
    /// Two slots, real then imaginary part.
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    /// Slots `[mean, log_std]`.
    Gaussian,
    /// One log-probability slot per value.
    Categorical(usize),
    RealEmbedding(usize),
    /// Real and imaginary slot per value, interleaved.
    ComplexEmbedding(usize),
}

impl LeafKind {
    pub fn width(&self) -> usize {
        match self {
            LeafKind::Gaussian => 2,
            LeafKind::Categorical(v) | LeafKind::RealEmbedding(v) => *v,
            LeafKind::ComplexEmbedding(v) => 2 * v,
        }
    }
}

impl WeightKind {
    pub fn width(&self) -> usize {
        match self {
            WeightKind::Complex => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamRef {
    pub id: usize,
    pub conj: bool,
}

/// Sum-edge weight `coef * prod_k (w_k or conj(w_k))`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTie {
    pub coef: C64,
    pub factors: Vec<ParamRef>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum UnitTie {
    /// One entry per sum edge.
    Weights(Vec<Option<WeightTie>>),
    /// One entry per factor of the unit's input function.
    Leaf(Vec<Option<ParamRef>>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub values: Vec<f64>,
    weights: Vec<(WeightKind, usize)>,
    leaves: Vec<(LeafKind, usize)>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_weights(&self) -> usize {
        self.weights.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// `init` is the stored value: the log-weight for [`WeightKind::Log`].
    pub fn add_weight(&mut self, kind: WeightKind, init: C64) -> usize {
        let off = self.values.len();
        match kind {
            WeightKind::Complex => {
                self.values.push(init.re);
                self.values.push(init.im);
            }
            _ => self.values.push(init.re),
        }
        self.weights.push((kind, off));
        self.weights.len() - 1
    }

    pub fn add_leaf(&mut self, kind: LeafKind, init: &[f64]) -> usize {
        assert_eq!(init.len(), kind.width(), "leaf initializer width");
        let off = self.values.len();
        self.values.extend_from_slice(init);
        self.leaves.push((kind, off));
        self.leaves.len() - 1
    }

    pub fn weight_kind(&self, id: usize) -> (WeightKind, usize) {
        self.weights[id]
    }

    pub fn leaf_kind(&self, id: usize) -> (LeafKind, usize) {
        self.leaves[id]
    }

    pub fn weight(&self, id: usize) -> C64 {
        let (kind, off) = self.weights[id];
        let v = &self.values;
        match kind {
            WeightKind::Log => C64::new(v[off].exp(), 0.0),
            WeightKind::Real => C64::new(v[off], 0.0),
            WeightKind::Complex => C64::new(v[off], v[off + 1]),
        }
    }

    pub fn leaf_function(&self, id: usize) -> InputFunction {
        let (kind, off) = self.leaves[id];
        let v = &self.values;
        match kind {
            LeafKind::Gaussian => InputFunction::Gaussian { mean: v[off], log_std: v[off + 1] },
            LeafKind::Categorical(k) => {
                InputFunction::Categorical { probs: v[off..off + k].iter().map(|x| x.exp()).collect() }
            }
            LeafKind::RealEmbedding(k) => InputFunction::embedding_real(&v[off..off + k]),
            LeafKind::ComplexEmbedding(k) => InputFunction::Embedding {
                entries: (0..k).map(|j| C64::new(v[off + 2 * j], v[off + 2 * j + 1])).collect(),
            },
        }
    }

    pub fn tie_value(&self, tie: &WeightTie) -> C64 {
        tie.factors.iter().fold(tie.coef, |acc, r| {
            let w = self.weight(r.id);
            acc * if r.conj { w.conj() } else { w }
        })
    }

    pub fn leaf_value(&self, r: ParamRef) -> InputFunction {
        let f = self.leaf_function(r.id);
        if r.conj {
            f.conj()
        } else {
            f
        }
    }

    /// Adds the gradient of a real loss with respect to weight `id` given the
    /// conjugate-Wirtinger adjoint `g = dL/dRe(w) + i dL/dIm(w)`.
    pub fn accumulate_weight_grad(&self, id: usize, g: C64, grad: &mut [f64]) {
        let (kind, off) = self.weights[id];
        match kind {
            WeightKind::Log => grad[off] += g.re * self.values[off].exp(),
            WeightKind::Real => grad[off] += g.re,
            WeightKind::Complex => {
                grad[off] += g.re;
                grad[off + 1] += g.im;
            }
        }
    }

    /// Human-readable label of every parameter slot.
    pub fn slot_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.values.len()];
        for (i, (kind, off)) in self.weights.iter().enumerate() {
            match kind {
                WeightKind::Log => names[*off] = format!("w{i}.log"),
                WeightKind::Real => names[*off] = format!("w{i}"),
                WeightKind::Complex => {
                    names[*off] = format!("w{i}.re");
                    names[*off + 1] = format!("w{i}.im");
                }
            }
        }
        for (i, (kind, off)) in self.leaves.iter().enumerate() {
            for j in 0..kind.width() {
                names[off + j] = format!("leaf{i}[{j}]");
            }
        }
        names
    }
}
