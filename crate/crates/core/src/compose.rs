//! Product algebra over compatible circuits: multiplication, conjugation,
//! squaring, sums of compatible squares, products with monotone circuits, and
//! conditioning on evidence.

use std::collections::HashMap;

use num_complex::Complex64 as C64;

use crate::circuit::{
    check_compatible, check_monotone, require_smooth_decomposable, Circuit, CircuitBuilder, Field,
    UnitId, UnitKind,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_log, Evidence};
use crate::input::InputFunction;
use crate::logc::{LogC, LseAcc};
use crate::params::{ParamRef, UnitTie, WeightTie};

fn weight_tie(c: &Circuit, unit: UnitId, edge: usize) -> Option<&WeightTie> {
    match c.tie(unit) {
        Some(UnitTie::Weights(ts)) => ts[edge].as_ref(),
        _ => None,
    }
}

fn leaf_ties(c: &Circuit, unit: UnitId, n_factors: usize) -> Vec<Option<ParamRef>> {
    match c.tie(unit) {
        Some(UnitTie::Leaf(ts)) => ts.clone(),
        _ => vec![None; n_factors],
    }
}

fn combine_ties(a: Option<&WeightTie>, wa: C64, b: Option<&WeightTie>, wb: C64) -> Option<WeightTie> {
    if a.is_none() && b.is_none() {
        return None;
    }
    let (ca, fa) = a.map_or((wa, vec![]), |t| (t.coef, t.factors.clone()));
    let (cb, fb) = b.map_or((wb, vec![]), |t| (t.coef, t.factors.clone()));
    let mut factors = fa;
    factors.extend(fb);
    Some(WeightTie { coef: ca * cb, factors })
}

struct Multiplier<'a> {
    c1: &'a Circuit,
    c2: &'a Circuit,
    b: CircuitBuilder,
    memo: HashMap<(UnitId, UnitId), UnitId>,
    copy1: Vec<Option<UnitId>>,
    copy2: Vec<Option<UnitId>>,
}

/// Copies the sub-circuit rooted at `id` into the builder, sharing units
/// already copied.
fn copy_sub(c: &Circuit, id: UnitId, b: &mut CircuitBuilder, map: &mut [Option<UnitId>]) -> Result<UnitId> {
    if let Some(n) = map[id] {
        return Ok(n);
    }
    let u = c.unit(id);
    let n = match &u.kind {
        UnitKind::Input { var, function } => {
            b.input_tied(*var, function.clone(), c.tie(id).cloned())?
        }
        UnitKind::Sum { inputs, weights } => {
            let ins = inputs.iter().map(|&i| copy_sub(c, i, b, map)).collect::<Result<Vec<_>>>()?;
            b.sum_tied(ins, weights.clone(), c.tie(id).cloned())?
        }
        UnitKind::Product { inputs } => {
            let l = copy_sub(c, inputs[0], b, map)?;
            let r = copy_sub(c, inputs[1], b, map)?;
            b.product(&[l, r])?
        }
    };
    map[id] = Some(n);
    Ok(n)
}

impl<'a> Multiplier<'a> {
    fn factor_list(c: &Circuit, id: UnitId) -> Vec<UnitId> {
        match &c.unit(id).kind {
            UnitKind::Product { inputs } => inputs.to_vec(),
            _ => vec![id],
        }
    }

    fn mul(&mut self, n: UnitId, m: UnitId) -> Result<UnitId> {
        if let Some(&r) = self.memo.get(&(n, m)) {
            return Ok(r);
        }
        let (c1, c2) = (self.c1, self.c2);
        let (un, um) = (c1.unit(n), c2.unit(m));
        let r = if un.scope.is_disjoint(&um.scope) {
            let a = copy_sub(c1, n, &mut self.b, &mut self.copy1)?;
            let bb = copy_sub(c2, m, &mut self.b, &mut self.copy2)?;
            self.b.product(&[a, bb])?
        } else {
            match (&un.kind, &um.kind) {
                (UnitKind::Input { var, function: f }, UnitKind::Input { function: g, .. }) => {
                    InputFunction::product_supported(f, g).map_err(|e| Error::Incompatible {
                        witness: format!("leaves over {}: {e}", c1.variables()[*var].name),
                    })?;
                    let mut ties = leaf_ties(c1, n, f.factors().len());
                    ties.extend(leaf_ties(c2, m, g.factors().len()));
                    let tie = if ties.iter().any(|t| t.is_some()) { Some(UnitTie::Leaf(ties)) } else { None };
                    self.b.input_tied(*var, InputFunction::product(f, g), tie)?
                }
                (UnitKind::Sum { inputs: ni, weights: nw }, UnitKind::Sum { inputs: mi, weights: mw }) => {
                    let mut ins = Vec::with_capacity(ni.len() * mi.len());
                    let mut ws = Vec::with_capacity(ins.capacity());
                    let mut ts = Vec::with_capacity(ins.capacity());
                    for (i, (&a, &wa)) in ni.iter().zip(nw).enumerate() {
                        for (j, (&bb, &wb)) in mi.iter().zip(mw).enumerate() {
                            ins.push(self.mul(a, bb)?);
                            ws.push(wa * wb);
                            ts.push(combine_ties(weight_tie(c1, n, i), wa, weight_tie(c2, m, j), wb));
                        }
                    }
                    self.sum(ins, ws, ts)?
                }
                (UnitKind::Sum { inputs, weights }, _) => {
                    let mut ins = Vec::with_capacity(inputs.len());
                    let mut ts = Vec::with_capacity(inputs.len());
                    for (i, &a) in inputs.iter().enumerate() {
                        ins.push(self.mul(a, m)?);
                        ts.push(weight_tie(c1, n, i).cloned());
                    }
                    self.sum(ins, weights.clone(), ts)?
                }
                (_, UnitKind::Sum { inputs, weights }) => {
                    let mut ins = Vec::with_capacity(inputs.len());
                    let mut ts = Vec::with_capacity(inputs.len());
                    for (j, &bb) in inputs.iter().enumerate() {
                        ins.push(self.mul(n, bb)?);
                        ts.push(weight_tie(c2, m, j).cloned());
                    }
                    self.sum(ins, weights.clone(), ts)?
                }
                _ => self.mul_factors(n, m)?,
            }
        };
        self.memo.insert((n, m), r);
        Ok(r)
    }

    fn sum(&mut self, ins: Vec<UnitId>, ws: Vec<C64>, ts: Vec<Option<WeightTie>>) -> Result<UnitId> {
        let tie = if ts.iter().any(|t| t.is_some()) { Some(UnitTie::Weights(ts)) } else { None };
        self.b.sum_tied(ins, ws, tie)
    }

    /// Products (or a product and an input): children are paired by
    /// overlapping scope; a child overlapping both children of the other side
    /// means the two scope splits disagree.
    fn mul_factors(&mut self, n: UnitId, m: UnitId) -> Result<UnitId> {
        let (c1, c2) = (self.c1, self.c2);
        let fa = Multiplier::factor_list(c1, n);
        let fb = Multiplier::factor_list(c2, m);
        let overlaps = |x: UnitId, y: UnitId| !c1.unit(x).scope.is_disjoint(&c2.unit(y).scope);
        let mut partner_a = vec![None; fa.len()];
        let mut partner_b = vec![None; fb.len()];
        for (i, &x) in fa.iter().enumerate() {
            for (j, &y) in fb.iter().enumerate() {
                if overlaps(x, y) {
                    if partner_a[i].is_some() || partner_b[j].is_some() {
                        return Err(Error::Incompatible {
                            witness: format!(
                                "scope {:?} split as {:?} and {:?}",
                                c1.unit(n).scope.union(&c2.unit(m).scope),
                                fa.iter().map(|&u| c1.unit(u).scope.clone()).collect::<Vec<_>>(),
                                fb.iter().map(|&u| c2.unit(u).scope.clone()).collect::<Vec<_>>()
                            ),
                        });
                    }
                    partner_a[i] = Some(j);
                    partner_b[j] = Some(i);
                }
            }
        }
        let mut parts = Vec::new();
        for (i, &x) in fa.iter().enumerate() {
            match partner_a[i] {
                Some(j) => parts.push(self.mul(x, fb[j])?),
                None => parts.push(copy_sub(c1, x, &mut self.b, &mut self.copy1)?),
            }
        }
        for (j, &y) in fb.iter().enumerate() {
            if partner_b[j].is_none() {
                parts.push(copy_sub(c2, y, &mut self.b, &mut self.copy2)?);
            }
        }
        self.b.product(&parts)
    }
}

/// Circuit computing `c1(x) * c2(x)`, with each pair of units expanded once.
pub fn multiply(c1: &Circuit, c2: &Circuit) -> Result<Circuit> {
    let report = check_compatible(c1, c2)?;
    if let Some(w) = report.witnesses.first() {
        return Err(Error::Incompatible { witness: w.clone() });
    }
    let mut b = CircuitBuilder::with_variables(c1.variables_arc().clone());
    b.set_field(c1.field().join(c2.field()));
    let mut m = Multiplier {
        c1,
        c2,
        b,
        memo: HashMap::new(),
        copy1: vec![None; c1.num_units()],
        copy2: vec![None; c2.num_units()],
    };
    let root = m.mul(c1.output(), c2.output())?;
    m.b.finish(root)
}

/// Complex conjugate of every weight and leaf.
pub fn conjugate(c: &Circuit) -> Circuit {
    let mut b = CircuitBuilder::with_variables(c.variables_arc().clone());
    b.set_field(c.field());
    for (id, u) in c.units().iter().enumerate() {
        let tie = c.tie(id).map(|t| match t {
            UnitTie::Weights(ts) => UnitTie::Weights(
                ts.iter()
                    .map(|t| {
                        t.as_ref().map(|t| WeightTie {
                            coef: t.coef.conj(),
                            factors: t
                                .factors
                                .iter()
                                .map(|r| ParamRef { id: r.id, conj: !r.conj })
                                .collect(),
                        })
                    })
                    .collect(),
            ),
            UnitTie::Leaf(ts) => UnitTie::Leaf(
                ts.iter().map(|t| t.map(|r| ParamRef { id: r.id, conj: !r.conj })).collect(),
            ),
        });
        let r = match &u.kind {
            UnitKind::Input { var, function } => b.input_tied(*var, function.conj(), tie),
            UnitKind::Sum { inputs, weights } => {
                b.sum_tied(inputs.clone(), weights.iter().map(|w| w.conj()).collect(), tie)
            }
            UnitKind::Product { inputs } => b.product(inputs),
        };
        r.expect("conjugate preserves validity");
    }
    b.finish(c.output()).expect("conjugate preserves validity")
}

/// `c(x)^2` for real circuits and `|c(x)|^2` for complex ones.
pub fn square(c: &Circuit) -> Result<Circuit> {
    match c.field() {
        Field::Real => multiply(c, c),
        Field::Complex => multiply(&conjugate(c), c),
    }
}

/// `sum_i coefficients[i] * |c_i(x)|^2` over mutually compatible circuits.
#[derive(Clone, Debug)]
pub struct Socs {
    components: Vec<Circuit>,
    coefficients: Vec<f64>,
    circuit: Circuit,
}

impl Socs {
    pub fn components(&self) -> &[Circuit] {
        &self.components
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn num_squares(&self) -> usize {
        self.components.len()
    }

    /// The materialized sum of squared circuits.
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    /// `log sum_i lambda_i |c_i(x)|^2`, evaluated component-wise.
    pub fn log_eval(&self, x: &[f64]) -> Result<f64> {
        let mut acc = LseAcc::default();
        for (c, &l) in self.components.iter().zip(&self.coefficients) {
            let v = evaluate_log(c, x)?;
            acc.push(LogC::new(l.ln() + 2.0 * v.log_mag, 0.0));
        }
        Ok(acc.finish().log_mag)
    }

    /// Conditions every component; the result is again a sum of squares.
    pub fn condition(&self, e: &Evidence) -> Result<Socs> {
        let comps = self.components.iter().map(|c| condition(c, e)).collect::<Result<Vec<_>>>()?;
        socs_sum(comps, Some(self.coefficients.clone()))
    }
}

/// Sum of compatible squares. Coefficients default to one and must be positive.
pub fn socs_sum(components: Vec<Circuit>, coefficients: Option<Vec<f64>>) -> Result<Socs> {
    if components.is_empty() {
        return Err(Error::InvalidArgument("no components".into()));
    }
    let coefficients = coefficients.unwrap_or_else(|| vec![1.0; components.len()]);
    if coefficients.len() != components.len() || coefficients.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidArgument("coefficients must be positive, one per component".into()));
    }
    for (i, a) in components.iter().enumerate() {
        for (j, b) in components.iter().enumerate().skip(i) {
            let r = check_compatible(a, b)?;
            if let Some(w) = r.witnesses.first() {
                return Err(Error::Incompatible { witness: format!("components {i} and {j}: {w}") });
            }
        }
        if a.scope() != components[0].scope() {
            return Err(Error::Scope(format!("component {i} has a different scope")));
        }
    }
    let mut b = CircuitBuilder::with_variables(components[0].variables_arc().clone());
    let mut roots = Vec::new();
    for c in &components {
        roots.push(b.import(&square(c)?)?);
    }
    let root = b.sum(roots, coefficients.iter().map(|&l| C64::new(l, 0.0)).collect())?;
    let circuit = b.finish(root)?;
    Ok(Socs { components, coefficients, circuit })
}

/// Product of a monotone circuit with a sum of compatible squares.
#[derive(Clone, Debug)]
pub struct Musocs {
    mono: Circuit,
    socs: Socs,
    circuit: Circuit,
}

impl Musocs {
    pub fn mono(&self) -> &Circuit {
        &self.mono
    }

    pub fn socs(&self) -> &Socs {
        &self.socs
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    /// `log mono(x) + log sum_i lambda_i |c_i(x)|^2`.
    pub fn log_eval(&self, x: &[f64]) -> Result<f64> {
        Ok(evaluate_log(&self.mono, x)?.log_mag + self.socs.log_eval(x)?)
    }
}

pub fn musocs(mono: &Circuit, socs: &Socs) -> Result<Musocs> {
    if !check_monotone(mono)? {
        return Err(Error::InvalidArgument("first factor must be monotone".into()));
    }
    let circuit = multiply(mono, socs.circuit())?;
    Ok(Musocs { mono: mono.clone(), socs: socs.clone(), circuit })
}

#[derive(Clone, Copy)]
enum Cond {
    Const(C64),
    Unit(UnitId),
}

/// Circuit over the unobserved variables computing `c(x_obs, .)`.
pub fn condition(c: &Circuit, e: &Evidence) -> Result<Circuit> {
    require_smooth_decomposable(c)?;
    if e.len() != c.variables().len() {
        return Err(Error::Domain("evidence length does not match the variable table".into()));
    }
    for v in c.scope().iter() {
        if let Some(x) = e[v] {
            c.variables()[v].domain.check_value(x)?;
        }
    }
    let mut b = CircuitBuilder::with_variables(c.variables_arc().clone());
    b.set_field(c.field());
    let mut out: Vec<Cond> = Vec::with_capacity(c.num_units());
    for (id, u) in c.units().iter().enumerate() {
        let r = match &u.kind {
            UnitKind::Input { var, function } => match e[*var] {
                Some(x) => Cond::Const(function.eval(x)),
                None => Cond::Unit(b.input_tied(*var, function.clone(), c.tie(id).cloned())?),
            },
            UnitKind::Sum { inputs, weights } => {
                if inputs.iter().all(|&i| matches!(out[i], Cond::Const(_))) {
                    let mut s = C64::new(0.0, 0.0);
                    for (&i, w) in inputs.iter().zip(weights) {
                        if let Cond::Const(k) = out[i] {
                            s += w * k;
                        }
                    }
                    Cond::Const(s)
                } else {
                    let ins = inputs
                        .iter()
                        .map(|&i| match out[i] {
                            Cond::Unit(n) => Ok(n),
                            Cond::Const(_) => Err(Error::Structure("mixed sum after conditioning".into())),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Cond::Unit(b.sum_tied(ins, weights.clone(), c.tie(id).cloned())?)
                }
            }
            UnitKind::Product { inputs } => match (out[inputs[0]], out[inputs[1]]) {
                (Cond::Const(a), Cond::Const(k)) => Cond::Const(a * k),
                (Cond::Unit(n), Cond::Const(k)) | (Cond::Const(k), Cond::Unit(n)) => {
                    Cond::Unit(b.sum(vec![n], vec![k])?)
                }
                (Cond::Unit(l), Cond::Unit(r)) => Cond::Unit(b.product(&[l, r])?),
            },
        };
        out.push(r);
    }
    match out[c.output()] {
        Cond::Unit(root) => b.finish(root),
        Cond::Const(_) => Err(Error::Scope(
            "evidence covers the whole scope; evaluate the circuit instead".into(),
        )),
    }
}
