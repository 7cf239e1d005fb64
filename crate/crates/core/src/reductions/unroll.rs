//! Expansion of a monotone circuit with indicator leaves into one square per
//! induced sub-circuit.

use std::collections::BTreeMap;

use crate::circuit::{check_monotone, require_smooth_decomposable, Circuit, UnitKind};
use crate::compose::{socs_sum, Socs};
use crate::constructions::{Monomial, PolyBuilder};
use crate::error::{Error, Result};
use crate::input::InputFunction;
use crate::region::RegionNode;

pub const DEFAULT_UNROLL_CAP: usize = 4096;

/// Product of a sub-circuit's weights and the indicator values it selects.
type Term = (f64, BTreeMap<usize, usize>);

fn cap_error(cap: usize) -> Error {
    Error::BudgetExceeded(format!("more than {cap} induced sub-circuits"))
}

/// Terms of every induced sub-circuit, deepest units first. Identical
/// assignments are merged by adding their weights.
fn expand(c: &Circuit, cap: usize) -> Result<Vec<Term>> {
    let mut terms: Vec<Vec<Term>> = Vec::with_capacity(c.num_units());
    for u in c.units() {
        let t = match &u.kind {
            UnitKind::Input { var, function } => match function {
                InputFunction::Indicator { value } => vec![(1.0, BTreeMap::from([(*var, *value)]))],
                _ => return Err(Error::UnsupportedPair("unrolling needs indicator leaves".into())),
            },
            UnitKind::Sum { inputs, weights } => {
                let mut merged: BTreeMap<Vec<(usize, usize)>, f64> = BTreeMap::new();
                let mut raw = 0usize;
                for (&i, w) in inputs.iter().zip(weights) {
                    if w.re == 0.0 {
                        continue;
                    }
                    raw += terms[i].len();
                    if raw > cap {
                        return Err(cap_error(cap));
                    }
                    for (th, a) in &terms[i] {
                        *merged.entry(a.iter().map(|(k, v)| (*k, *v)).collect()).or_default() += w.re * th;
                    }
                }
                merged.into_iter().map(|(a, th)| (th, a.into_iter().collect())).collect()
            }
            UnitKind::Product { inputs } => {
                let (l, r) = (&terms[inputs[0]], &terms[inputs[1]]);
                if l.len().saturating_mul(r.len()) > cap {
                    return Err(cap_error(cap));
                }
                let mut out = Vec::with_capacity(l.len() * r.len());
                for (a, ma) in l {
                    for (b, mb) in r {
                        let mut m = ma.clone();
                        m.extend(mb.iter().map(|(k, v)| (*k, *v)));
                        out.push((a * b, m));
                    }
                }
                out
            }
        };
        terms.push(t);
    }
    Ok(terms.swap_remove(c.output()))
}

/// Sum of squares `(sqrt(theta) prod_v 1[X_v = a_v])^2`, one per distinct
/// induced sub-circuit, equal to `c` everywhere.
pub fn unroll_to_sos(c: &Circuit, cap: usize) -> Result<Socs> {
    if !check_monotone(c)? {
        return Err(Error::Structure("unrolling needs a monotone circuit".into()));
    }
    require_smooth_decomposable(c)?;
    let terms: Vec<Term> = expand(c, cap)?.into_iter().filter(|t| t.0 > 0.0).collect();
    if terms.is_empty() {
        return Err(Error::Structure("circuit computes the zero function".into()));
    }
    let vt = RegionNode::balanced(&c.scope().to_vec());
    let mut comps = Vec::with_capacity(terms.len());
    for (th, a) in terms {
        let mut pb = PolyBuilder::new(c.variables().to_vec(), vt.clone());
        let m: Monomial = a.into_iter().map(|(v, x)| (v, InputFunction::indicator(x))).collect();
        let root = pb.polynomial(&[(th.sqrt(), m)])?;
        comps.push(pb.finish(root)?);
    }
    socs_sum(comps, None)
}
