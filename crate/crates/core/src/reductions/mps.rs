//! Matrix product states as structured circuits.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::circuit::{Circuit, CircuitBuilder, Field};
use crate::compose::square;
use crate::error::{Error, Result};
use crate::input::InputFunction;
use crate::variable::{Domain, Variable};

/// One core tensor: `v x r` at the ends, `v x r x r` in the middle.
#[derive(Clone, Debug, PartialEq)]
pub enum Core {
    Matrix(Vec<Vec<C64>>),
    Tensor(Vec<Vec<Vec<C64>>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMps", into = "RawMps")]
pub struct Mps {
    pub field: Field,
    pub d: usize,
    pub v: usize,
    pub r: usize,
    pub tensors: Vec<Core>,
}

/// Wire form; entries are numbers or `[re, im]` pairs, so the nesting depth
/// alone cannot tell a real tensor from a complex matrix and each core is
/// decoded by its position.
#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMps {
    field: Field,
    d: usize,
    v: usize,
    r: usize,
    tensors: Vec<Value>,
}

fn entry(v: &Value) -> std::result::Result<C64, String> {
    crate::cjson::from_value(v).ok_or_else(|| format!("bad entry {v}"))
}

fn array(v: &Value) -> std::result::Result<&Vec<Value>, String> {
    v.as_array().ok_or_else(|| "expected an array".to_string())
}

fn matrix(v: &Value) -> std::result::Result<Vec<Vec<C64>>, String> {
    array(v)?.iter().map(|row| array(row)?.iter().map(entry).collect()).collect()
}

impl TryFrom<RawMps> for Mps {
    type Error = String;

    fn try_from(raw: RawMps) -> std::result::Result<Mps, String> {
        let d = raw.tensors.len();
        let tensors = raw
            .tensors
            .iter()
            .enumerate()
            .map(|(j, t)| {
                if j == 0 || j + 1 == d {
                    matrix(t).map(Core::Matrix)
                } else {
                    array(t)?.iter().map(matrix).collect::<std::result::Result<_, _>>().map(Core::Tensor)
                }
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Mps { field: raw.field, d: raw.d, v: raw.v, r: raw.r, tensors })
    }
}

impl From<Mps> for RawMps {
    fn from(m: Mps) -> RawMps {
        let mat = |m: &Vec<Vec<C64>>| -> Value {
            Value::Array(m.iter().map(|row| Value::Array(row.iter().map(|&z| crate::cjson::to_value(z)).collect())).collect())
        };
        let tensors = m
            .tensors
            .iter()
            .map(|t| match t {
                Core::Matrix(x) => mat(x),
                Core::Tensor(x) => Value::Array(x.iter().map(mat).collect()),
            })
            .collect();
        RawMps { field: m.field, d: m.d, v: m.v, r: m.r, tensors }
    }
}

impl Mps {
    pub fn from_json_str(s: &str) -> Result<Mps> {
        let m: Mps = serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let shape = |m: &str| Err(Error::Schema(format!("shape error: {m}")));
        if self.d < 2 || self.v == 0 || self.r == 0 {
            return shape("need d >= 2, v >= 1, r >= 1");
        }
        if self.v > Domain::MAX_CATEGORIES {
            return shape("domain too large");
        }
        if self.tensors.len() != self.d {
            return shape("one tensor per variable");
        }
        for (j, t) in self.tensors.iter().enumerate() {
            let end = j == 0 || j == self.d - 1;
            let entries: Vec<&C64> = match (t, end) {
                (Core::Matrix(m), true) => {
                    if m.len() != self.v || m.iter().any(|row| row.len() != self.r) {
                        return shape(&format!("tensor {} is not v x r", j + 1));
                    }
                    m.iter().flatten().collect()
                }
                (Core::Tensor(t), false) => {
                    if t.len() != self.v
                        || t.iter().any(|m| m.len() != self.r || m.iter().any(|row| row.len() != self.r))
                    {
                        return shape(&format!("tensor {} is not v x r x r", j + 1));
                    }
                    t.iter().flatten().flatten().collect()
                }
                _ => return shape(&format!("tensor {} has the wrong order", j + 1)),
            };
            if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return shape("non-finite entry");
            }
            if self.field == Field::Real && entries.iter().any(|z| z.im != 0.0) {
                return shape("complex entry in a real MPS");
            }
        }
        Ok(())
    }

    fn end(&self, j: usize) -> &Vec<Vec<C64>> {
        match &self.tensors[j] {
            Core::Matrix(m) => m,
            Core::Tensor(_) => unreachable!("validated"),
        }
    }

    fn middle(&self, j: usize) -> &Vec<Vec<Vec<C64>>> {
        match &self.tensors[j] {
            Core::Tensor(t) => t,
            Core::Matrix(_) => unreachable!("validated"),
        }
    }

    pub fn variables(&self) -> Vec<Variable> {
        (1..=self.d).map(|i| Variable::new(format!("X{i}"), Domain::Categorical(self.v))).collect()
    }

    /// `psi(x)` by left-to-right vector-matrix products.
    pub fn contract(&self, x: &[usize]) -> C64 {
        let mut vec: Vec<C64> = self.end(0)[x[0]].clone();
        for j in 1..self.d - 1 {
            let m = &self.middle(j)[x[j]];
            vec = (0..self.r).map(|k| (0..self.r).map(|i| vec[i] * m[i][k]).sum()).collect();
        }
        let last = &self.end(self.d - 1)[x[self.d - 1]];
        vec.iter().zip(last).map(|(a, b)| a * b).sum()
    }
}

/// Chain-structured circuit computing the contraction; each product
/// conditions one variable and multiplies the rest of the chain.
pub fn mps_to_circuit(m: &Mps) -> Result<Circuit> {
    m.validate()?;
    let mut b = CircuitBuilder::new(m.variables());
    b.set_field(m.field);
    let column = |rows: &[Vec<C64>], k: usize| -> Vec<C64> { rows.iter().map(|row| row[k]).collect() };
    let d = m.d;
    let last = m.end(d - 1);
    let mut right = (0..m.r)
        .map(|i| b.input(d - 1, InputFunction::Embedding { entries: column(last, i) }))
        .collect::<Result<Vec<_>>>()?;
    let ones = vec![C64::new(1.0, 0.0); m.r];
    for j in (1..d - 1).rev() {
        let t = m.middle(j);
        let mut next = Vec::with_capacity(m.r);
        for i in 0..m.r {
            let mut prods = Vec::with_capacity(m.r);
            for (k, &rk) in right.iter().enumerate() {
                let entries: Vec<C64> = t.iter().map(|mat| mat[i][k]).collect();
                let leaf = b.input(j, InputFunction::Embedding { entries })?;
                prods.push(b.product(&[leaf, rk])?);
            }
            next.push(b.sum(prods, ones.clone())?);
        }
        right = next;
    }
    let first = m.end(0);
    let mut prods = Vec::with_capacity(m.r);
    for (i, &ri) in right.iter().enumerate() {
        let leaf = b.input(0, InputFunction::Embedding { entries: column(first, i) })?;
        prods.push(b.product(&[leaf, ri])?);
    }
    let root = b.sum(prods, ones)?;
    b.finish(root)
}

/// `|psi(x)|^2` as a squared circuit.
pub fn born(m: &Mps) -> Result<Circuit> {
    square(&mps_to_circuit(m)?)
}
