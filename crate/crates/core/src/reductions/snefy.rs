//! Squared neural families with factorized base measure and sufficient
//! statistics, rewritten as sums of compatible squares.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitBuilder};
use crate::compose::multiply;
use crate::constructions::{Monomial, PolyBuilder};
use crate::error::{Error, Result};
use crate::input::InputFunction;
use crate::region::RegionNode;
use crate::variable::{validate_variables, Variable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Exp,
    Cos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum BaseMeasure {
    Gaussian { mean: f64, std: f64 },
    /// Nonnegative weights over a finite domain.
    Table { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum Statistic {
    /// `[x]` for degree 1, `[x, x^2]` for degree 2.
    Polynomial { degree: usize },
    /// One row of statistics per value of a finite variable.
    Table { values: Vec<Vec<f64>> },
}

impl Statistic {
    pub fn width(&self) -> usize {
        match self {
            Statistic::Polynomial { degree } => *degree,
            Statistic::Table { values } => values.first().map_or(0, |r| r.len()),
        }
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        match self {
            Statistic::Polynomial { degree } => (1..=*degree as i32).map(|k| x.powi(k)).collect(),
            Statistic::Table { values } => values[x as usize].clone(),
        }
    }
}

/// `f(x) = mu(x) sum_k (sum_j v[k][j] sigma(w[j] . t(x) + b[j]))^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnefySpec {
    pub sigma: Activation,
    pub variables: Vec<Variable>,
    pub base: Vec<BaseMeasure>,
    pub stats: Vec<Statistic>,
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl SnefySpec {
    pub fn from_json_str(s: &str) -> Result<SnefySpec> {
        let spec: SnefySpec = serde_json::from_str(s).map_err(|e| Error::Schema(format!("SNEFY JSON: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Schema(m));
        validate_variables(&self.variables)?;
        let d = self.variables.len();
        if d == 0 || self.base.len() != d || self.stats.len() != d {
            return bad("one base measure and one statistic per variable".into());
        }
        for (u, var) in self.variables.iter().enumerate() {
            let size = var.domain.size();
            match (&self.base[u], size) {
                (BaseMeasure::Gaussian { mean, std }, None) => {
                    if !mean.is_finite() || !(*std > 0.0) || !std.is_finite() {
                        return bad(format!("bad gaussian base measure for {}", var.name));
                    }
                }
                (BaseMeasure::Table { values }, Some(n)) => {
                    if values.len() != n || values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                        return bad(format!("base table for {} must hold {n} nonnegative values", var.name));
                    }
                }
                _ => return bad(format!("base measure does not fit the domain of {}", var.name)),
            }
            match (&self.stats[u], size) {
                (Statistic::Polynomial { degree }, None) if (1..=2).contains(degree) => {}
                (Statistic::Table { values }, Some(n)) => {
                    let cu = values.first().map_or(0, |r| r.len());
                    if values.len() != n || cu == 0 || values.iter().any(|r| r.len() != cu || r.iter().any(|v| !v.is_finite())) {
                        return bad(format!("statistic table for {} must be {n} rows of equal width", var.name));
                    }
                }
                _ => return bad(format!("statistic does not fit the domain of {}", var.name)),
            }
        }
        let s = self.b.len();
        let c: usize = self.stats.iter().map(|t| t.width()).sum();
        if s == 0 || self.v.is_empty() || self.v.iter().any(|r| r.len() != s) {
            return bad(format!("v must be R x {s} with R >= 1"));
        }
        if self.w.len() != s || self.w.iter().any(|r| r.len() != c) {
            return bad(format!("w must be {s} x {c}"));
        }
        if self.v.iter().chain(&self.w).flatten().chain(&self.b).any(|x| !x.is_finite()) {
            return bad("non-finite network parameter".into());
        }
        Ok(())
    }

    fn offsets(&self) -> Vec<usize> {
        let mut o = vec![0];
        for t in &self.stats {
            o.push(o.last().unwrap() + t.width());
        }
        o
    }

    fn base_value(&self, u: usize, x: f64) -> f64 {
        match &self.base[u] {
            BaseMeasure::Gaussian { mean, std } => InputFunction::gaussian(*mean, *std).eval(x).re,
            BaseMeasure::Table { values } => values[x as usize],
        }
    }

    /// The unnormalized density by the network formula.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let off = self.offsets();
        let t: Vec<f64> = self.stats.iter().zip(x).flat_map(|(s, &xi)| s.eval(xi)).collect();
        debug_assert_eq!(t.len(), off[self.stats.len()]);
        let mu: f64 = (0..x.len()).map(|u| self.base_value(u, x[u])).product();
        let hidden: Vec<f64> = self
            .w
            .iter()
            .zip(&self.b)
            .map(|(wj, bj)| {
                let z = wj.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() + bj;
                match self.sigma {
                    Activation::Exp => z.exp(),
                    Activation::Cos => z.cos(),
                }
            })
            .collect();
        let sq: f64 = self.v.iter().map(|vk| vk.iter().zip(&hidden).map(|(a, h)| a * h).sum::<f64>().powi(2)).sum();
        mu * sq
    }

    /// `sqrt(mu_u(x)) exp(phase * w_j^(u) . t_u(x))` as a leaf over variable `u`.
    fn leaf(&self, u: usize, j: usize, phase: C64) -> Result<InputFunction> {
        let off = self.offsets();
        let wu = &self.w[j][off[u]..off[u + 1]];
        match (&self.base[u], &self.stats[u]) {
            (BaseMeasure::Gaussian { mean, std }, Statistic::Polynomial { .. }) => {
                let (q, l, c) = InputFunction::gaussian(*mean, *std).log_quadratic_coeffs().expect("gaussian");
                let w1 = wu[0];
                let w2 = wu.get(1).copied().unwrap_or(0.0);
                Ok(InputFunction::LogQuadratic { quad: 0.5 * q + phase * w2, lin: 0.5 * l + phase * w1, constant: 0.5 * c })
            }
            (BaseMeasure::Table { values }, Statistic::Table { values: t }) => {
                let entries = values
                    .iter()
                    .zip(t)
                    .map(|(m, row)| {
                        let z: f64 = row.iter().zip(wu).map(|(a, b)| a * b).sum();
                        m.sqrt() * (phase * z).exp()
                    })
                    .collect();
                Ok(InputFunction::Embedding { entries })
            }
            _ => Err(Error::Schema("base measure and statistic disagree on the domain".into())),
        }
    }

    fn monomial(&self, j: usize, phase: C64) -> Result<Monomial> {
        (0..self.variables.len()).map(|u| Ok((u, self.leaf(u, j, phase)?))).collect()
    }
}

/// The `R` square roots: fully factorized products mixed by one sum each.
pub fn snefy_components(s: &SnefySpec) -> Result<Vec<Circuit>> {
    s.validate()?;
    let ids: Vec<usize> = (0..s.variables.len()).collect();
    let vt = RegionNode::balanced(&ids);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(s.v.len());
    for vk in &s.v {
        let mut terms = Vec::new();
        for (j, (&vkj, &bj)) in vk.iter().zip(&s.b).enumerate() {
            match s.sigma {
                Activation::Exp => terms.push((C64::new(vkj * bj.exp(), 0.0), s.monomial(j, one)?)),
                Activation::Cos => {
                    terms.push((0.5 * vkj * (i * bj).exp(), s.monomial(j, i)?));
                    terms.push((0.5 * vkj * (-i * bj).exp(), s.monomial(j, -i)?));
                }
            }
        }
        let mut pb = PolyBuilder::new(s.variables.clone(), vt.clone());
        let root = pb.polynomial_complex_at(&vt, &terms)?;
        out.push(pb.finish(root)?);
    }
    Ok(out)
}

/// Sum over `k` of `c_k * c_k`. The cos components are complex-valued but
/// compute real functions, so they are squared without conjugation.
pub fn snefy_to_socs(s: &SnefySpec) -> Result<Circuit> {
    let comps = snefy_components(s)?;
    let mut b = CircuitBuilder::new(s.variables.clone());
    let mut roots = Vec::with_capacity(comps.len());
    for c in &comps {
        roots.push(b.import(&multiply(c, c)?)?);
    }
    let n = roots.len();
    let root = b.sum(roots, vec![C64::new(1.0, 0.0); n])?;
    b.finish(root)
}
