//! Header-bearing CSV ingestion bound to a variable table by column name.

use std::path::Path;

use socs_core::tensorized::InputFamily;
use socs_core::training::{Dataset, Split};
use socs_core::{Domain, Variable};

use crate::error::{CliError, CliResult};

/// Raw table: header and numeric rows in file column order.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_csv(text: &str) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::usage(format!("csv header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().any(String::is_empty) {
        return Err(CliError::usage("csv header: empty column name"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::usage(format!("csv row {}: {e}", i + 1)))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::usage(format!("csv row {}, column {}: not a finite number: {s:?}", i + 1, header[j])))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_csv(path: &Path) -> CliResult<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    parse_csv(&text).map_err(|e| e.context(&path.display().to_string()))
}

impl Table {
    /// Rows reordered to `variables`, with domains checked.
    pub fn bind(&self, variables: &[Variable], split: Split) -> CliResult<Dataset> {
        let mut cols = Vec::with_capacity(variables.len());
        for v in variables {
            let hits: Vec<usize> = self.header.iter().enumerate().filter(|(_, h)| **h == v.name).map(|(i, _)| i).collect();
            match hits.as_slice() {
                [i] => cols.push(*i),
                [] => return Err(CliError::usage(format!("csv: missing column for variable {}", v.name))),
                _ => return Err(CliError::usage(format!("csv: duplicate column {}", v.name))),
            }
        }
        if let Some(extra) = self.header.iter().find(|h| !variables.iter().any(|v| &v.name == *h)) {
            return Err(CliError::usage(format!("csv: column {extra} is not a model variable")));
        }
        let rows = self.rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        Ok(Dataset::new(variables, rows, split)?)
    }

    /// Variable table guessed from the data: columns of non-negative integers
    /// become Boolean or categorical unless Gaussian leaves were requested;
    /// everything else is real.
    pub fn infer_variables(&self, family: InputFamily) -> Vec<Variable> {
        self.header
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let integral = self.rows.iter().all(|r| r[j] >= 0.0 && r[j].fract() == 0.0);
                let max = self.rows.iter().map(|r| r[j]).fold(0.0, f64::max);
                let domain = if family == InputFamily::Gaussian || !integral || max >= Domain::MAX_CATEGORIES as f64 {
                    Domain::Real
                } else if max <= 1.0 {
                    Domain::Boolean
                } else {
                    Domain::Categorical(max as usize + 1)
                };
                Variable::new(name.clone(), domain)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_binds_by_name() {
        let t = parse_csv("B, A\n1, 0.5\n0, -2\n").unwrap();
        assert_eq!(t.header, vec!["B", "A"]);
        let vars = vec![Variable::new("A", Domain::Real), Variable::new("B", Domain::Boolean)];
        let d = t.bind(&vars, Split::Train).unwrap();
        assert_eq!(d.rows, vec![vec![0.5, 1.0], vec![-2.0, 0.0]]);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(parse_csv("A,B\n1\n").is_err());
        assert!(parse_csv("A,B\n1,x\n").is_err());
        assert!(parse_csv("A,B\n1,nan\n").is_err());
        let t = parse_csv("A,B\n1,3\n").unwrap();
        let vars = vec![Variable::new("A", Domain::Boolean), Variable::new("B", Domain::Boolean)];
        let e = t.bind(&vars, Split::Train).unwrap_err();
        assert_eq!(e.code, 2);
        let vars = vec![Variable::new("A", Domain::Boolean)];
        assert!(t.bind(&vars, Split::Train).is_err());
        let vars = vec![Variable::new("A", Domain::Boolean), Variable::new("C", Domain::Boolean)];
        assert!(t.bind(&vars, Split::Train).is_err());
    }

    #[test]
    fn infers_domains() {
        let t = parse_csv("a,b,c\n0,2,0.5\n1,0,1\n").unwrap();
        let v = t.infer_variables(InputFamily::Auto);
        assert_eq!(v[0].domain, Domain::Boolean);
        assert_eq!(v[1].domain, Domain::Categorical(3));
        assert_eq!(v[2].domain, Domain::Real);
        assert!(t.infer_variables(InputFamily::Gaussian).iter().all(|v| v.domain == Domain::Real));
    }
}
