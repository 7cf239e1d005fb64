//! Univariate input functions, their pointwise products and closed-form integrals.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logc::LogC;
use crate::variable::Domain;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputFunction {
    /// `1[X = value]`.
    Indicator { value: usize },
    Categorical { probs: Vec<f64> },
    Gaussian { mean: f64, log_std: f64 },
    /// One entry per value of a finite variable.
    Embedding {
        #[serde(with = "crate::cjson::vec")]
        entries: Vec<C64>,
    },
    /// `sum_k coefficients[k] * x^k`; integrable only over an `Interval` domain.
    Polynomial { coefficients: Vec<f64> },
    /// `exp(quad * x^2 + lin * x + constant)`.
    LogQuadratic {
        #[serde(with = "crate::cjson")]
        quad: C64,
        #[serde(with = "crate::cjson")]
        lin: C64,
        #[serde(with = "crate::cjson")]
        constant: C64,
    },
    /// Pointwise product of functions of the same variable.
    Product { factors: Vec<InputFunction> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Finite,
    Exponential,
    Polynomial,
}

impl InputFunction {
    pub fn indicator(value: usize) -> InputFunction {
        InputFunction::Indicator { value }
    }

    pub fn gaussian(mean: f64, std: f64) -> InputFunction {
        InputFunction::Gaussian { mean, log_std: std.ln() }
    }

    pub fn embedding_real(entries: &[f64]) -> InputFunction {
        InputFunction::Embedding { entries: entries.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn polynomial(coefficients: &[f64]) -> InputFunction {
        InputFunction::Polynomial { coefficients: coefficients.to_vec() }
    }

    /// Constant one on the given domain.
    pub fn one(domain: &Domain) -> InputFunction {
        match domain.size() {
            Some(v) => InputFunction::embedding_real(&vec![1.0; v]),
            None => InputFunction::polynomial(&[1.0]),
        }
    }

    pub fn factors(&self) -> &[InputFunction] {
        match self {
            InputFunction::Product { factors } => factors,
            other => std::slice::from_ref(other),
        }
    }

    /// Pointwise product, flattening nested products.
    pub fn product(f: &InputFunction, g: &InputFunction) -> InputFunction {
        let mut factors = f.factors().to_vec();
        factors.extend_from_slice(g.factors());
        InputFunction::Product { factors }
    }

    pub fn family(&self) -> Result<Family> {
        Ok(match self {
            InputFunction::Indicator { .. }
            | InputFunction::Categorical { .. }
            | InputFunction::Embedding { .. } => Family::Finite,
            InputFunction::Gaussian { .. } | InputFunction::LogQuadratic { .. } => Family::Exponential,
            InputFunction::Polynomial { .. } => Family::Polynomial,
            InputFunction::Product { factors } => {
                let first = factors
                    .first()
                    .ok_or_else(|| Error::Structure("empty input-function product".into()))?
                    .family()?;
                for f in &factors[1..] {
                    if f.family()? != first {
                        return Err(Error::UnsupportedPair(format!(
                            "{:?} x {:?}",
                            first,
                            f.family()?
                        )));
                    }
                }
                first
            }
        })
    }

    /// Whether `f * g` stays in a family with closed-form integrals.
    pub fn product_supported(f: &InputFunction, g: &InputFunction) -> Result<()> {
        let (a, b) = (f.family()?, g.family()?);
        if a == b {
            Ok(())
        } else {
            Err(Error::UnsupportedPair(format!("{a:?} x {b:?}")))
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let size = domain.size();
        let need_finite = |what: &str| {
            size.ok_or_else(|| Error::Domain(format!("{what} needs a finite variable")))
        };
        match self {
            InputFunction::Indicator { value } => {
                let v = need_finite("indicator")?;
                if *value >= v {
                    return Err(Error::Domain(format!("indicator value {value} outside domain")));
                }
            }
            InputFunction::Categorical { probs } => {
                let v = need_finite("categorical")?;
                if probs.len() != v || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::Domain("categorical probabilities malformed".into()));
                }
            }
            InputFunction::Embedding { entries } => {
                let v = need_finite("embedding")?;
                if entries.len() != v || entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
                {
                    return Err(Error::Domain("embedding length does not match domain".into()));
                }
            }
            InputFunction::Gaussian { mean, log_std } => {
                if size.is_some() || !mean.is_finite() || !log_std.is_finite() {
                    return Err(Error::Domain("gaussian needs a continuous variable".into()));
                }
            }
            InputFunction::LogQuadratic { quad, lin, constant } => {
                if size.is_some() {
                    return Err(Error::Domain("log-quadratic needs a continuous variable".into()));
                }
                if [quad, lin, constant].iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Domain("non-finite log-quadratic coefficient".into()));
                }
            }
            InputFunction::Polynomial { coefficients } => {
                if size.is_some() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Domain("polynomial needs a continuous variable".into()));
                }
            }
            InputFunction::Product { factors } => {
                for f in factors {
                    f.validate(domain)?;
                }
                self.family()?;
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> C64 {
        match self {
            InputFunction::Product { factors } => {
                factors.iter().fold(C64::new(1.0, 0.0), |acc, f| acc * f.eval(x))
            }
            InputFunction::Indicator { value } => {
                if x == *value as f64 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            InputFunction::Categorical { probs } => C64::new(probs[x as usize], 0.0),
            InputFunction::Embedding { entries } => entries[x as usize],
            InputFunction::Polynomial { coefficients } => {
                C64::new(coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c), 0.0)
            }
            _ => self.log_eval(x).to_complex(),
        }
    }

    pub fn log_eval(&self, x: f64) -> LogC {
        match self {
            InputFunction::Product { factors } => {
                factors.iter().fold(LogC::ONE, |acc, f| acc.mul(f.log_eval(x)))
            }
            InputFunction::Gaussian { mean, log_std } => {
                let z = (x - mean) * (-log_std).exp();
                LogC::new(-0.5 * LN_2PI - log_std - 0.5 * z * z, 0.0)
            }
            InputFunction::LogQuadratic { quad, lin, constant } => {
                let w = quad * x * x + lin * x + constant;
                LogC::new(w.re, w.im)
            }
            _ => LogC::from_complex(self.eval(x)),
        }
    }

    pub fn conj(&self) -> InputFunction {
        match self {
            InputFunction::Embedding { entries } => {
                InputFunction::Embedding { entries: entries.iter().map(|z| z.conj()).collect() }
            }
            InputFunction::LogQuadratic { quad, lin, constant } => InputFunction::LogQuadratic {
                quad: quad.conj(),
                lin: lin.conj(),
                constant: constant.conj(),
            },
            InputFunction::Product { factors } => {
                InputFunction::Product { factors: factors.iter().map(|f| f.conj()).collect() }
            }
            other => other.clone(),
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            InputFunction::Embedding { entries } => entries.iter().all(|z| z.im == 0.0),
            InputFunction::LogQuadratic { quad, lin, constant } => {
                quad.im == 0.0 && lin.im == 0.0 && constant.im == 0.0
            }
            InputFunction::Product { factors } => factors.iter().all(|f| f.is_real()),
            _ => true,
        }
    }

    /// Nonnegative variants: indicators, categoricals, Gaussians, nonnegative
    /// real embeddings, real log-quadratics and products of these.
    pub fn is_nonnegative(&self) -> bool {
        match self {
            InputFunction::Indicator { .. }
            | InputFunction::Categorical { .. }
            | InputFunction::Gaussian { .. } => true,
            InputFunction::Embedding { entries } => entries.iter().all(|z| z.im == 0.0 && z.re >= 0.0),
            InputFunction::LogQuadratic { .. } => self.is_real(),
            InputFunction::Polynomial { .. } => false,
            InputFunction::Product { factors } => factors.iter().all(|f| f.is_nonnegative()),
        }
    }

    /// `log f(x) = quad x^2 + lin x + constant` for exponential-family factors.
    pub fn log_quadratic_coeffs(&self) -> Option<(C64, C64, C64)> {
        match self {
            InputFunction::Gaussian { mean, log_std } => {
                let a = (-2.0 * log_std).exp();
                Some((
                    C64::new(-0.5 * a, 0.0),
                    C64::new(mean * a, 0.0),
                    C64::new(-0.5 * LN_2PI - log_std - 0.5 * mean * mean * a, 0.0),
                ))
            }
            InputFunction::LogQuadratic { quad, lin, constant } => Some((*quad, *lin, *constant)),
            InputFunction::Product { factors } => {
                let mut acc = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                for f in factors {
                    let (q, l, c) = f.log_quadratic_coeffs()?;
                    acc = (acc.0 + q, acc.1 + l, acc.2 + c);
                }
                Some(acc)
            }
            _ => None,
        }
    }

    /// Integral over the whole domain (a sum for finite variables).
    pub fn integrate(&self, domain: &Domain) -> Result<C64> {
        match self.family()? {
            Family::Finite => {
                let v = domain
                    .size()
                    .ok_or_else(|| Error::Domain("finite input over a continuous variable".into()))?;
                Ok((0..v).map(|k| self.eval(k as f64)).sum())
            }
            Family::Exponential => Ok(self.log_integrate(domain)?.to_complex()),
            Family::Polynomial => {
                let (lo, hi) = match domain {
                    Domain::Interval(lo, hi) => (*lo, *hi),
                    _ => {
                        return Err(Error::UnsupportedPair(
                            "polynomial integral needs a bounded interval".into(),
                        ))
                    }
                };
                let coeffs = self.polynomial_coeffs();
                let mut s = 0.0;
                for (k, a) in coeffs.iter().enumerate() {
                    let p = (k + 1) as i32;
                    s += a * (hi.powi(p) - lo.powi(p)) / p as f64;
                }
                Ok(C64::new(s, 0.0))
            }
        }
    }

    /// [`InputFunction::integrate`] in log form; exponential-family integrals
    /// never leave log space.
    pub fn log_integrate(&self, domain: &Domain) -> Result<LogC> {
        if self.family()? != Family::Exponential {
            return Ok(LogC::from_complex(self.integrate(domain)?));
        }
        if domain != &Domain::Real {
            return Err(Error::UnsupportedPair(
                "exponential-family integral needs the real line".into(),
            ));
        }
        if let InputFunction::Gaussian { .. } = self {
            return Ok(LogC::ONE);
        }
        let (q, l, c) = self.log_quadratic_coeffs().unwrap();
        log_quadratic_integral(q, l, c)
    }

    fn polynomial_coeffs(&self) -> Vec<f64> {
        match self {
            InputFunction::Polynomial { coefficients } => coefficients.clone(),
            InputFunction::Product { factors } => {
                let mut acc = vec![1.0];
                for f in factors {
                    let p = f.polynomial_coeffs();
                    let mut out = vec![0.0; acc.len() + p.len() - 1];
                    for (i, a) in acc.iter().enumerate() {
                        for (j, b) in p.iter().enumerate() {
                            out[i + j] += a * b;
                        }
                    }
                    acc = out;
                }
                acc
            }
            _ => unreachable!("not a polynomial"),
        }
    }

    pub fn product_integral(f: &InputFunction, g: &InputFunction, domain: &Domain) -> Result<C64> {
        InputFunction::product_supported(f, g)?;
        InputFunction::product(f, g).integrate(domain)
    }
}

/// `log ∫ exp(q x^2 + l x + c) dx` over the real line; requires `Re q < 0`.
pub fn log_quadratic_integral(q: C64, l: C64, c: C64) -> Result<LogC> {
    if !(q.re < 0.0) {
        return Err(Error::Numerical(format!("log-quadratic with Re(quad) = {} is not integrable", q.re)));
    }
    let w = 0.5 * PI.ln() - 0.5 * (-q).ln() + c - l * l / (4.0 * q);
    Ok(LogC::new(w.re, w.im))
}
