use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Boolean,
    Categorical(usize),
    Real,
    Interval(f64, f64),
}

impl Domain {
    /// Number of values for finite domains.
    pub fn size(&self) -> Option<usize> {
        match self {
            Domain::Boolean => Some(2),
            Domain::Categorical(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.size().is_some()
    }

    /// Largest categorical domain accepted from external input.
    pub const MAX_CATEGORIES: usize = 1 << 20;

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Categorical(v) if *v == 0 || *v > Domain::MAX_CATEGORIES => {
                Err(Error::Schema(format!("categorical domain size {v} out of range")))
            }
            Domain::Interval(lo, hi) if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(Error::Schema(format!("invalid interval [{lo}, {hi}]")))
            }
            _ => Ok(()),
        }
    }

    pub fn check_value(&self, x: f64) -> Result<()> {
        match self {
            Domain::Boolean | Domain::Categorical(_) => {
                let v = self.size().unwrap();
                if x.fract() != 0.0 || x < 0.0 || x >= v as f64 {
                    return Err(Error::Domain(format!("value {x} outside {{0..{}}}", v - 1)));
                }
            }
            Domain::Real => {
                if !x.is_finite() {
                    return Err(Error::Domain(format!("non-finite value {x}")));
                }
            }
            Domain::Interval(lo, hi) => {
                if !(x >= *lo && x <= *hi) {
                    return Err(Error::Domain(format!("value {x} outside [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub domain: Domain,
}

impl Variable {
    pub fn new(name: impl Into<String>, domain: Domain) -> Variable {
        Variable { name: name.into(), domain }
    }
}

/// Checks domains and that names are unique and non-empty.
pub fn validate_variables(vars: &[Variable]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for v in vars {
        v.domain.validate()?;
        if v.name.is_empty() || !seen.insert(v.name.as_str()) {
            return Err(Error::Schema(format!("duplicate or empty variable name {:?}", v.name)));
        }
    }
    Ok(())
}

/// Variables named `X1..Xn` sharing one domain.
pub fn numbered(n: usize, domain: Domain) -> Vec<Variable> {
    (1..=n).map(|i| Variable::new(format!("X{i}"), domain.clone())).collect()
}
