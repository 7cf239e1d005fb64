//! `NAME=value,...` evidence strings.

use socs_core::Variable;

use crate::error::{CliError, CliResult};

/// Evidence vector over `variables`; unassigned variables are marginalized.
pub fn parse_assignment(s: &str, variables: &[Variable]) -> CliResult<Vec<Option<f64>>> {
    let mut e = vec![None; variables.len()];
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("assignment {part:?}: expected NAME=value")))?;
        let (name, value) = (name.trim(), value.trim());
        let idx = variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| CliError::usage(format!("assignment: unknown variable {name:?}")))?;
        if e[idx].is_some() {
            return Err(CliError::usage(format!("assignment: variable {name:?} assigned twice")));
        }
        let x: f64 = value
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| CliError::usage(format!("assignment {name}: not a finite number: {value:?}")))?;
        variables[idx].domain.check_value(x).map_err(|err| CliError::usage(format!("assignment {name}: {err}")))?;
        e[idx] = Some(x);
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use socs_core::Domain;

    fn vars() -> Vec<Variable> {
        vec![Variable::new("X1", Domain::Boolean), Variable::new("X2", Domain::Real)]
    }

    #[test]
    fn parses_partial_assignments() {
        assert_eq!(parse_assignment("", &vars()).unwrap(), vec![None, None]);
        assert_eq!(parse_assignment("X2=0.5", &vars()).unwrap(), vec![None, Some(0.5)]);
        assert_eq!(parse_assignment(" X1 = 1 , X2=-3", &vars()).unwrap(), vec![Some(1.0), Some(-3.0)]);
    }

    #[test]
    fn rejects_bad_assignments() {
        for bad in ["X3=1", "X1", "X1=2", "X1=1,X1=0", "X2=inf", "X2=abc"] {
            assert_eq!(parse_assignment(bad, &vars()).unwrap_err().code, 2, "{bad}");
        }
    }
}
