//! Forward evaluation in the linear, log-sign and log-complex semirings, and
//! marginalization by leaf integration.

use num_complex::Complex64 as C64;

use crate::circuit::{require_smooth_decomposable, Circuit, Field, UnitKind};
use crate::error::{Error, Result};
use crate::input::InputFunction;
use crate::logc::{LogC, LseAcc};
use crate::variable::Domain;

pub trait Semiring {
    type V: Copy;

    fn leaf(f: &InputFunction, x: f64) -> Self::V;
    fn leaf_integral(f: &InputFunction, domain: &Domain) -> Result<Self::V>;
    fn weighted_sum(weights: &[C64], log_weights: &[LogC], values: &[Self::V]) -> Self::V;
    fn mul(a: Self::V, b: Self::V) -> Self::V;
    fn to_complex(v: Self::V) -> C64;
}

/// Plain complex arithmetic.
pub struct Linear;

/// `(log|x|, sign)` pairs for real circuits.
pub struct LogSign;

/// Polar log form, see [`LogC`].
pub struct LogComplex;

impl Semiring for Linear {
    type V = C64;

    fn leaf(f: &InputFunction, x: f64) -> C64 {
        f.eval(x)
    }

    fn leaf_integral(f: &InputFunction, domain: &Domain) -> Result<C64> {
        f.integrate(domain)
    }

    fn weighted_sum(weights: &[C64], _: &[LogC], values: &[C64]) -> C64 {
        weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    fn mul(a: C64, b: C64) -> C64 {
        a * b
    }

    fn to_complex(v: C64) -> C64 {
        v
    }
}

fn log_sign_of(l: LogC) -> (f64, f64) {
    if l.is_zero() {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (l.log_mag, if l.arg.abs() < 1.0 { 1.0 } else { -1.0 })
    }
}

impl Semiring for LogSign {
    type V = (f64, f64);

    fn leaf(f: &InputFunction, x: f64) -> (f64, f64) {
        log_sign_of(f.log_eval(x))
    }

    fn leaf_integral(f: &InputFunction, domain: &Domain) -> Result<(f64, f64)> {
        Ok(log_sign_of(f.log_integrate(domain)?))
    }

    fn weighted_sum(weights: &[C64], _: &[LogC], values: &[(f64, f64)]) -> (f64, f64) {
        let mut shift = f64::NEG_INFINITY;
        for (w, v) in weights.iter().zip(values) {
            if w.re != 0.0 && v.1 != 0.0 {
                shift = shift.max(w.re.abs().ln() + v.0);
            }
        }
        if shift == f64::NEG_INFINITY {
            return (f64::NEG_INFINITY, 0.0);
        }
        let mut s = 0.0;
        let mut mass = 0.0;
        for (w, v) in weights.iter().zip(values) {
            if w.re != 0.0 && v.1 != 0.0 {
                let t = (w.re.abs().ln() + v.0 - shift).exp();
                s += w.re.signum() * v.1 * t;
                mass += t;
            }
        }
        if s.abs() <= 2.0 * f64::EPSILON * mass {
            return (f64::NEG_INFINITY, 0.0);
        }
        (shift + s.abs().ln(), s.signum())
    }

    fn mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        if a.1 == 0.0 || b.1 == 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (a.0 + b.0, a.1 * b.1)
        }
    }

    fn to_complex(v: (f64, f64)) -> C64 {
        if v.1 == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            C64::new(v.1 * v.0.exp(), 0.0)
        }
    }
}

impl Semiring for LogComplex {
    type V = LogC;

    fn leaf(f: &InputFunction, x: f64) -> LogC {
        f.log_eval(x)
    }

    fn leaf_integral(f: &InputFunction, domain: &Domain) -> Result<LogC> {
        f.log_integrate(domain)
    }

    fn weighted_sum(_: &[C64], log_weights: &[LogC], values: &[LogC]) -> LogC {
        let mut acc = LseAcc::default();
        for (w, v) in log_weights.iter().zip(values) {
            acc.push(w.mul(*v));
        }
        acc.finish()
    }

    fn mul(a: LogC, b: LogC) -> LogC {
        a.mul(b)
    }

    fn to_complex(v: LogC) -> C64 {
        v.to_complex()
    }
}

/// Evaluation mode selector for the dynamic entry points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Linear,
    LogSign,
    LogComplex,
}

/// Per-variable evidence: `Some(x)` fixes the value, `None` integrates it out.
pub type Evidence = [Option<f64>];

fn check_assignment(c: &Circuit, x: &[f64]) -> Result<()> {
    if x.len() != c.variables().len() {
        return Err(Error::Domain(format!(
            "assignment has {} values for {} variables",
            x.len(),
            c.variables().len()
        )));
    }
    for v in c.scope().iter() {
        c.variables()[v].domain.check_value(x[v])?;
    }
    Ok(())
}

fn check_evidence(c: &Circuit, e: &Evidence) -> Result<()> {
    if e.len() != c.variables().len() {
        return Err(Error::Domain(format!(
            "evidence has {} entries for {} variables",
            e.len(),
            c.variables().len()
        )));
    }
    for v in c.scope().iter() {
        if let Some(x) = e[v] {
            c.variables()[v].domain.check_value(x)?;
        }
    }
    Ok(())
}

/// Values of every unit in topological order.
pub fn forward_all<S: Semiring>(c: &Circuit, e: &Evidence) -> Result<Vec<S::V>> {
    let lw = c.log_weights();
    let mut vals: Vec<S::V> = Vec::with_capacity(c.num_units());
    let mut buf: Vec<S::V> = Vec::new();
    for (id, u) in c.units().iter().enumerate() {
        let v = match &u.kind {
            UnitKind::Input { var, function } => match e[*var] {
                Some(x) => S::leaf(function, x),
                None => S::leaf_integral(function, &c.variables()[*var].domain)?,
            },
            UnitKind::Sum { inputs, weights } => {
                buf.clear();
                buf.extend(inputs.iter().map(|&i| vals[i]));
                S::weighted_sum(weights, &lw[id], &buf)
            }
            UnitKind::Product { inputs } => S::mul(vals[inputs[0]], vals[inputs[1]]),
        };
        vals.push(v);
    }
    Ok(vals)
}

pub fn evaluate_in<S: Semiring>(c: &Circuit, x: &[f64]) -> Result<S::V> {
    check_assignment(c, x)?;
    let e: Vec<Option<f64>> = x.iter().map(|&v| Some(v)).collect();
    Ok(forward_all::<S>(c, &e)?[c.output()])
}

/// `c(x)` in linear arithmetic.
pub fn evaluate(c: &Circuit, x: &[f64]) -> Result<C64> {
    evaluate_in::<Linear>(c, x)
}

/// `log c(x)` in the log-complex semiring.
pub fn evaluate_log(c: &Circuit, x: &[f64]) -> Result<LogC> {
    evaluate_in::<LogComplex>(c, x)
}

/// `(log|c(x)|, sign c(x))` for real circuits.
pub fn evaluate_log_sign(c: &Circuit, x: &[f64]) -> Result<(f64, f64)> {
    if c.field() != Field::Real {
        return Err(Error::Field("log-sign evaluation needs a real circuit".into()));
    }
    evaluate_in::<LogSign>(c, x)
}

/// Evaluates in the requested mode and returns the linear value.
pub fn evaluate_mode(c: &Circuit, x: &[f64], mode: Mode) -> Result<C64> {
    Ok(match mode {
        Mode::Linear => evaluate(c, x)?,
        Mode::LogSign => LogSign::to_complex(evaluate_log_sign(c, x)?),
        Mode::LogComplex => evaluate_log(c, x)?.to_complex(),
    })
}

/// `∫ c(y, z) dz` where `z` are the variables left as `None` in `e`.
pub fn marginalize_log(c: &Circuit, e: &Evidence) -> Result<LogC> {
    require_smooth_decomposable(c)?;
    check_evidence(c, e)?;
    Ok(forward_all::<LogComplex>(c, e)?[c.output()])
}

pub fn marginalize(c: &Circuit, e: &Evidence) -> Result<C64> {
    Ok(marginalize_log(c, e)?.to_complex())
}

pub fn log_partition_function(c: &Circuit) -> Result<LogC> {
    marginalize_log(c, &vec![None; c.variables().len()])
}

pub fn partition_function(c: &Circuit) -> Result<C64> {
    Ok(log_partition_function(c)?.to_complex())
}
