//! Quadratic forms `c(x)^T A c(x)` over compatible circuits and their
//! rewriting as sums of compatible squares.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitBuilder, CircuitJson, Field};
use crate::compose::{socs_sum, Socs};
use crate::error::{Error, Result};
use crate::eval::evaluate;

use super::hypercomplex::complex_decompose;

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const EIGEN_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct PsdModel {
    pub components: Vec<Circuit>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PsdJson {
    components: Vec<CircuitJson>,
    matrix: Vec<Vec<f64>>,
}

impl PsdModel {
    pub fn new(components: Vec<Circuit>, matrix: Vec<Vec<f64>>) -> Result<PsdModel> {
        let p = PsdModel { components, matrix };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.components.len();
        if r == 0 {
            return Err(Error::InvalidArgument("no components".into()));
        }
        if self.matrix.len() != r || self.matrix.iter().any(|row| row.len() != r) {
            return Err(Error::Schema(format!("matrix must be {r} x {r}")));
        }
        if self.matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Schema("non-finite matrix entry".into()));
        }
        for i in 0..r {
            for j in 0..i {
                if (self.matrix[i][j] - self.matrix[j][i]).abs() > SYMMETRY_TOL {
                    return Err(Error::NotPsd(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        if self.components.iter().any(|c| c.field() != Field::Real) {
            return Err(Error::Field("components must be real".into()));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<PsdModel> {
        let j: PsdJson = serde_json::from_str(s).map_err(|e| Error::Schema(format!("PSD JSON: {e}")))?;
        let components = j.components.iter().map(Circuit::from_json).collect::<Result<Vec<_>>>()?;
        PsdModel::new(components, j.matrix)
    }

    pub fn to_json_string(&self) -> String {
        let j = PsdJson { components: self.components.iter().map(|c| c.to_json()).collect(), matrix: self.matrix.clone() };
        serde_json::to_string_pretty(&j).expect("PSD serialization")
    }

    /// `c(x)^T A c(x)` evaluated directly.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let c = self.components.iter().map(|c| Ok(evaluate(c, x)?.re)).collect::<Result<Vec<f64>>>()?;
        let mut s = 0.0;
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                s += c[i] * a * c[j];
            }
        }
        Ok(s)
    }
}

/// `sum_i (sqrt(l_i) w_i^T c(x))^2` over the eigenpairs with `l_i > 0`.
/// Eigenvalues in `[-EIGEN_TOL, EIGEN_TOL]` are treated as zero.
pub fn psd_to_socs(p: &PsdModel) -> Result<Socs> {
    p.validate()?;
    let r = p.components.len();
    let a = DMatrix::from_fn(r, r, |i, j| 0.5 * (p.matrix[i][j] + p.matrix[j][i]));
    let eig = SymmetricEigen::new(a);
    let vars = p.components[0].variables_arc().clone();
    let mut comps = Vec::new();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l < -EIGEN_TOL {
            return Err(Error::NotPsd(format!("eigenvalue {l}")));
        }
        if l <= EIGEN_TOL {
            continue;
        }
        let w: Vec<C64> = eig.eigenvectors.column(k).iter().map(|&v| C64::new(l.sqrt() * v, 0.0)).collect();
        let mut b = CircuitBuilder::with_variables(vars.clone());
        let roots = p.components.iter().map(|c| b.import(c)).collect::<Result<Vec<_>>>()?;
        let root = b.sum(roots, w)?;
        comps.push(b.finish(root)?);
    }
    if comps.is_empty() {
        return Err(Error::NotPsd("matrix is zero".into()));
    }
    socs_sum(comps, None)
}

/// Stacks the components of a sum of squares with a diagonal matrix of its
/// coefficients. Complex components contribute their real and imaginary parts.
pub fn socs_to_psd(s: &Socs) -> Result<PsdModel> {
    let mut components = Vec::new();
    let mut diag = Vec::new();
    for (c, &l) in s.components().iter().zip(s.coefficients()) {
        match c.field() {
            Field::Real => {
                components.push(c.clone());
                diag.push(l);
            }
            Field::Complex => {
                for part in complex_decompose(c)? {
                    components.push(part);
                    diag.push(l);
                }
            }
        }
    }
    let r = components.len();
    let matrix = (0..r).map(|i| (0..r).map(|j| if i == j { diag[i] } else { 0.0 }).collect()).collect();
    PsdModel::new(components, matrix)
}
