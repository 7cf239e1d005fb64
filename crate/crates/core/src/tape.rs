//! Reverse-mode gradients through log-complex forward passes.
//!
//! Adjoints follow the conjugate-Wirtinger convention: for a real loss `L` and
//! a complex unit value `z = x + iy`, the adjoint is `dL/dx + i dL/dy`. For a
//! holomorphic step `w = f(z)` this gives `adj(z) = conj(f'(z)) adj(w)`.
//! Adjoints are carried in [`LogC`] form so that tiny forward values paired
//! with huge adjoints never overflow.

use num_complex::Complex64 as C64;

use crate::circuit::{Circuit, UnitKind};
use crate::error::{Error, Result};
use crate::eval::{forward_all, Evidence, LogComplex};
use crate::input::InputFunction;
use crate::logc::{LogC, LseAcc};
use crate::params::{LeafKind, ParamRef, ParamStore, UnitTie};

/// Per-unit forward values of one pass, kept for the reverse sweep.
#[derive(Clone, Debug)]
pub struct EvalTape {
    pub values: Vec<LogC>,
    evidence: Vec<Option<f64>>,
}

impl EvalTape {
    pub fn forward(c: &Circuit, e: &Evidence) -> Result<EvalTape> {
        Ok(EvalTape { values: forward_all::<LogComplex>(c, e)?, evidence: e.to_vec() })
    }

    pub fn output(&self, c: &Circuit) -> LogC {
        self.values[c.output()]
    }

    /// Accumulates `dL/dtheta` into `grad` given the output adjoint `seed`.
    pub fn backward(&self, c: &Circuit, store: &ParamStore, seed: LogC, grad: &mut [f64]) -> Result<()> {
        let n = c.num_units();
        let mut adj = vec![LseAcc::default(); n];
        adj[c.output()].push(seed);
        let lw = c.log_weights();
        for id in (0..n).rev() {
            let a = adj[id].finish();
            if a.is_zero() {
                continue;
            }
            if !a.is_finite() {
                return Err(Error::Numerical(format!("non-finite adjoint at unit {id}")));
            }
            match &c.unit(id).kind {
                UnitKind::Sum { inputs, .. } => {
                    let ties = match c.tie(id) {
                        Some(UnitTie::Weights(ts)) => Some(ts),
                        _ => None,
                    };
                    for (j, &ch) in inputs.iter().enumerate() {
                        adj[ch].push(lw[id][j].conj().mul(a));
                        if let Some(Some(t)) = ties.map(|ts| &ts[j]) {
                            let g_site = self.values[ch].conj().mul(a).to_complex();
                            distribute_weight(store, &t.coef, &t.factors, g_site, grad);
                        }
                    }
                }
                UnitKind::Product { inputs } => {
                    let (l, r) = (inputs[0], inputs[1]);
                    adj[l].push(self.values[r].conj().mul(a));
                    adj[r].push(self.values[l].conj().mul(a));
                }
                UnitKind::Input { var, function } => {
                    if let Some(UnitTie::Leaf(ts)) = c.tie(id) {
                        let domain = &c.variables()[*var].domain;
                        match self.evidence[*var] {
                            Some(x) => leaf_point(store, function, ts, x, a, grad),
                            None => match domain.size() {
                                Some(v) => {
                                    for x in 0..v {
                                        leaf_point(store, function, ts, x as f64, a, grad);
                                    }
                                }
                                None => leaf_exponential_integral(store, function, ts, a, grad)?,
                            },
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Site `w = coef * prod_k f_k` with `f_k = w_id` or `conj(w_id)`.
fn distribute_weight(store: &ParamStore, coef: &C64, factors: &[ParamRef], g_site: C64, grad: &mut [f64]) {
    let vals: Vec<C64> = factors
        .iter()
        .map(|r| {
            let w = store.weight(r.id);
            if r.conj {
                w.conj()
            } else {
                w
            }
        })
        .collect();
    for (k, r) in factors.iter().enumerate() {
        let mut rest = *coef;
        for (l, v) in vals.iter().enumerate() {
            if l != k {
                rest *= v;
            }
        }
        let g_f = rest.conj() * g_site;
        let g_w = if r.conj { g_f.conj() } else { g_f };
        store.accumulate_weight_grad(r.id, g_w, grad);
    }
}

/// Gradient of a leaf evaluated (or summed) at the finite point `x`.
fn leaf_point(
    store: &ParamStore,
    function: &InputFunction,
    ties: &[Option<ParamRef>],
    x: f64,
    a: LogC,
    grad: &mut [f64],
) {
    let factors = function.factors();
    let vals: Vec<LogC> = factors.iter().map(|f| f.log_eval(x)).collect();
    for (k, t) in ties.iter().enumerate() {
        let Some(r) = t else { continue };
        let mut rest = LogC::ONE;
        for (l, v) in vals.iter().enumerate() {
            if l != k {
                rest = rest.mul(*v);
            }
        }
        let g_f = rest.conj().mul(a);
        let g_p = if r.conj { g_f.conj() } else { g_f };
        leaf_param_grad(store, r.id, x, g_p, grad);
    }
}

/// `g` is the adjoint of the leaf parameter function's value at `x`.
fn leaf_param_grad(store: &ParamStore, id: usize, x: f64, g: LogC, grad: &mut [f64]) {
    let (kind, off) = store.leaf_kind(id);
    let v = &store.values;
    match kind {
        LeafKind::Gaussian => {
            let (mu, s) = (v[off], v[off + 1]);
            let f = InputFunction::Gaussian { mean: mu, log_std: s }.log_eval(x);
            let t = g.mul(f).to_complex().re;
            let z = (x - mu) * (-s).exp();
            grad[off] += t * z * (-s).exp();
            grad[off + 1] += t * (z * z - 1.0);
        }
        LeafKind::Categorical(_) => {
            let xi = x as usize;
            let f = LogC::new(v[off + xi], 0.0);
            grad[off + xi] += g.mul(f).to_complex().re;
        }
        LeafKind::RealEmbedding(_) => {
            grad[off + x as usize] += g.to_complex().re;
        }
        LeafKind::ComplexEmbedding(_) => {
            let gc = g.to_complex();
            let xi = x as usize;
            grad[off + 2 * xi] += gc.re;
            grad[off + 2 * xi + 1] += gc.im;
        }
    }
}

/// Gradient of `F = ∫ prod_k f_k` over the real line for Gaussian factors.
fn leaf_exponential_integral(
    store: &ParamStore,
    function: &InputFunction,
    ties: &[Option<ParamRef>],
    a: LogC,
    grad: &mut [f64],
) -> Result<()> {
    let (q, l, c) = function
        .log_quadratic_coeffs()
        .ok_or_else(|| Error::UnsupportedPair("trainable leaf without closed-form integral".into()))?;
    let big_f = crate::input::log_quadratic_integral(q, l, c)?;
    let dq = -1.0 / (2.0 * q) + l * l / (4.0 * q * q);
    let dl = -l / (2.0 * q);
    // dL/dtheta = Re(conj(a) * F * dW/dtheta)
    let h = a.conj().mul(big_f).to_complex();
    for t in ties.iter().flatten() {
        let (kind, off) = store.leaf_kind(t.id);
        if kind != LeafKind::Gaussian {
            return Err(Error::UnsupportedPair(format!("{kind:?} leaf over a real variable")));
        }
        let (mu, s) = (store.values[off], store.values[off + 1]);
        let aa = (-2.0 * s).exp();
        let dw_dmu = dl * aa - mu * aa;
        let dw_ds = dq * aa - dl * (2.0 * mu * aa) + (-1.0 + mu * mu * aa);
        grad[off] += (h * dw_dmu).re;
        grad[off + 1] += (h * dw_ds).re;
    }
    Ok(())
}

/// Adjoint of `-log c` at output value `v` (for positive real `c`).
pub fn seed_neg_log(v: LogC) -> Result<LogC> {
    if v.is_zero() {
        return Err(Error::Numerical("log of zero output".into()));
    }
    Ok(LogC::new(-v.log_mag, v.arg + std::f64::consts::PI))
}

/// Adjoint of `-scale * log|c|^2` i.e. `-2 scale c / |c|^2`.
pub fn seed_neg_log_modulus_sq(v: LogC, scale: f64) -> Result<LogC> {
    if v.is_zero() {
        return Err(Error::Numerical("log of zero output".into()));
    }
    Ok(LogC::new((2.0 * scale).ln() - v.log_mag, v.arg + std::f64::consts::PI))
}

/// Adjoint of `scale * log|Z|`.
pub fn seed_log_partition(z: LogC, scale: f64) -> Result<LogC> {
    if z.is_zero() {
        return Err(Error::Numerical("partition function is zero".into()));
    }
    Ok(LogC::new(scale.ln() - z.log_mag, z.arg))
}
