//! Circuits over Cayley-Dickson algebras and their decomposition into real
//! circuits, one per basis element.
//!
//! An element of the algebra of dimension `2^w` is stored as its `2^w` real
//! coordinates. The first half holds the coordinates of `x1` and the second
//! half those of `x2` in `x = x1 + x2 * iota_w`. With this ordering the complex
//! numbers are `[re, im]` and the quaternions `[1, i, j, k]`.

use num_complex::Complex64 as C64;

use crate::circuit::{Circuit, CircuitBuilder, UnitId, UnitKind};
use crate::error::{Error, Result};
use crate::input::InputFunction;
use crate::variable::Variable;

#[derive(Clone, Debug, PartialEq)]
pub struct Hyper(pub Vec<f64>);

impl Hyper {
    pub fn zero(dim: usize) -> Hyper {
        Hyper(vec![0.0; dim])
    }

    pub fn real(x: f64, dim: usize) -> Hyper {
        let mut v = vec![0.0; dim];
        v[0] = x;
        Hyper(v)
    }

    pub fn from_complex(z: C64) -> Hyper {
        Hyper(vec![z.re, z.im])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn halves(&self) -> (Hyper, Hyper) {
        let h = self.0.len() / 2;
        (Hyper(self.0[..h].to_vec()), Hyper(self.0[h..].to_vec()))
    }

    pub fn join(a: &Hyper, b: &Hyper) -> Hyper {
        let mut v = a.0.clone();
        v.extend_from_slice(&b.0);
        Hyper(v)
    }

    pub fn conj(&self) -> Hyper {
        if self.dim() == 1 {
            return self.clone();
        }
        let (a, b) = self.halves();
        Hyper::join(&a.conj(), &b.neg())
    }

    pub fn neg(&self) -> Hyper {
        Hyper(self.0.iter().map(|x| -x).collect())
    }

    pub fn add(&self, o: &Hyper) -> Hyper {
        Hyper(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Hyper) -> Hyper {
        self.add(&o.neg())
    }

    /// `(x1, x2)(y1, y2) = (x1 y1 - y2^† x2, y2 x1 + x2 y1^†)`.
    pub fn mul(&self, o: &Hyper) -> Hyper {
        if self.dim() == 1 {
            return Hyper(vec![self.0[0] * o.0[0]]);
        }
        let (x1, x2) = self.halves();
        let (y1, y2) = o.halves();
        let a = x1.mul(&y1).sub(&y2.conj().mul(&x2));
        let b = y2.mul(&x1).add(&x2.mul(&y1.conj()));
        Hyper::join(&a, &b)
    }

    /// `x^† x`, the sum of squared coordinates.
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

/// Which side of the input a sum weight multiplies from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HyperUnit {
    /// Table of values over a finite domain.
    Input { var: usize, table: Vec<Hyper> },
    /// `sum_k w_k c_k` or `c_k w_k` per edge, following each edge's side.
    Sum { inputs: Vec<UnitId>, weights: Vec<(Hyper, Side)> },
    /// `c_l * c_r` in that order.
    Product { inputs: [UnitId; 2] },
}

/// Circuit with values in the algebra of dimension `2^omega`.
#[derive(Clone, Debug)]
pub struct HyperCircuit {
    pub omega: u32,
    pub variables: Vec<Variable>,
    pub units: Vec<HyperUnit>,
    pub output: UnitId,
}

impl HyperCircuit {
    pub fn dim(&self) -> usize {
        1 << self.omega
    }

    /// Checks domains, ids and coordinate counts.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        let bad = |m: &str| Err(Error::Structure(m.into()));
        for (id, u) in self.units.iter().enumerate() {
            match u {
                HyperUnit::Input { var, table } => {
                    let v = self.variables.get(*var).ok_or_else(|| Error::Structure("variable out of range".into()))?;
                    if v.domain.size() != Some(table.len()) {
                        return bad("input table does not match a finite domain");
                    }
                    if table.iter().any(|h| h.dim() != dim) {
                        return bad("input value of the wrong dimension");
                    }
                }
                HyperUnit::Sum { inputs, weights } => {
                    if inputs.is_empty() || inputs.len() != weights.len() {
                        return bad("sum fan-in does not match its weights");
                    }
                    if inputs.iter().any(|&i| i >= id) || weights.iter().any(|w| w.0.dim() != dim) {
                        return bad("sum refers forward or has a weight of the wrong dimension");
                    }
                }
                HyperUnit::Product { inputs } => {
                    if inputs.iter().any(|&i| i >= id) {
                        return bad("product refers forward");
                    }
                }
            }
        }
        if self.output >= self.units.len() {
            return bad("output out of range");
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Vec<Hyper> {
        let mut vals: Vec<Hyper> = Vec::with_capacity(self.units.len());
        for u in &self.units {
            let v = match u {
                HyperUnit::Input { var, table } => table[x[*var] as usize].clone(),
                HyperUnit::Sum { inputs, weights } => {
                    let mut acc = Hyper::zero(self.dim());
                    for (&i, (w, side)) in inputs.iter().zip(weights) {
                        let t = match side {
                            Side::Left => w.mul(&vals[i]),
                            Side::Right => vals[i].mul(w),
                        };
                        acc = acc.add(&t);
                    }
                    acc
                }
                HyperUnit::Product { inputs } => vals[inputs[0]].mul(&vals[inputs[1]]),
            };
            vals.push(v);
        }
        vals
    }

    pub fn eval_output(&self, x: &[f64]) -> Hyper {
        self.eval(x).swap_remove(self.output)
    }

    /// Views a real or complex circuit with finite-domain leaves as a circuit
    /// over the reals (`omega = 0`) or the complex numbers (`omega = 1`).
    pub fn from_circuit(c: &Circuit, omega: u32) -> Result<HyperCircuit> {
        if omega > 1 {
            return Err(Error::InvalidArgument("circuits embed into omega 0 or 1 only".into()));
        }
        if omega == 0 && c.field() != crate::circuit::Field::Real {
            return Err(Error::Field("complex circuit in the real algebra".into()));
        }
        let to_h = |z: C64| if omega == 0 { Hyper(vec![z.re]) } else { Hyper::from_complex(z) };
        let mut units = Vec::with_capacity(c.num_units());
        for u in c.units() {
            units.push(match &u.kind {
                UnitKind::Input { var, function } => {
                    let size = c.variables()[*var]
                        .domain
                        .size()
                        .ok_or_else(|| Error::Domain("hypercomplex leaves need finite variables".into()))?;
                    HyperUnit::Input { var: *var, table: (0..size).map(|x| to_h(function.eval(x as f64))).collect() }
                }
                UnitKind::Sum { inputs, weights } => HyperUnit::Sum {
                    inputs: inputs.clone(),
                    weights: weights.iter().map(|&w| (to_h(w), Side::Left)).collect(),
                },
                UnitKind::Product { inputs } => HyperUnit::Product { inputs: *inputs },
            });
        }
        Ok(HyperCircuit { omega, variables: c.variables().to_vec(), units, output: c.output() })
    }

    /// Copy without the units that do not feed the output.
    pub fn pruned(&self) -> HyperCircuit {
        let n = self.units.len();
        let mut live = vec![false; n];
        live[self.output] = true;
        for id in (0..n).rev() {
            if !live[id] {
                continue;
            }
            match &self.units[id] {
                HyperUnit::Input { .. } => {}
                HyperUnit::Sum { inputs, .. } => inputs.iter().for_each(|&i| live[i] = true),
                HyperUnit::Product { inputs } => inputs.iter().for_each(|&i| live[i] = true),
            }
        }
        let mut map = vec![usize::MAX; n];
        let mut units = Vec::new();
        for (id, u) in self.units.iter().enumerate() {
            if !live[id] {
                continue;
            }
            map[id] = units.len();
            units.push(match u {
                HyperUnit::Input { .. } => u.clone(),
                HyperUnit::Sum { inputs, weights } => {
                    HyperUnit::Sum { inputs: inputs.iter().map(|&i| map[i]).collect(), weights: weights.clone() }
                }
                HyperUnit::Product { inputs } => HyperUnit::Product { inputs: [map[inputs[0]], map[inputs[1]]] },
            });
        }
        HyperCircuit { omega: self.omega, variables: self.variables.clone(), units, output: map[self.output] }
    }

    /// The real circuit of an `omega = 0` circuit.
    fn to_real_circuit(&self) -> Result<Circuit> {
        debug_assert_eq!(self.omega, 0);
        let mut b = CircuitBuilder::new(self.variables.clone());
        let mut ids = Vec::with_capacity(self.units.len());
        for u in &self.units {
            ids.push(match u {
                HyperUnit::Input { var, table } => {
                    let entries: Vec<f64> = table.iter().map(|h| h.0[0]).collect();
                    b.input(*var, InputFunction::embedding_real(&entries))?
                }
                HyperUnit::Sum { inputs, weights } => {
                    let w: Vec<f64> = weights.iter().map(|(h, _)| h.0[0]).collect();
                    b.sum_real(inputs.iter().map(|&i| ids[i]).collect(), &w)?
                }
                HyperUnit::Product { inputs } => b.product(&[ids[inputs[0]], ids[inputs[1]]])?,
            });
        }
        b.finish(ids[self.output])
    }
}

/// Units of the halved circuit for one unit `n`: `n1, n2, n1^†, n2^†`, where
/// `†` is the conjugate of the smaller algebra.
#[derive(Clone, Copy)]
struct Quad {
    a: UnitId,
    b: UnitId,
    ac: UnitId,
    bc: UnitId,
}

struct Halver {
    units: Vec<HyperUnit>,
    half: usize,
}

impl Halver {
    fn push(&mut self, u: HyperUnit) -> UnitId {
        self.units.push(u);
        self.units.len() - 1
    }

    fn prod(&mut self, l: UnitId, r: UnitId) -> UnitId {
        self.push(HyperUnit::Product { inputs: [l, r] })
    }

    /// `p - q` or `p + q` with unit weights.
    fn combine(&mut self, p: UnitId, q: UnitId, sign: f64) -> UnitId {
        let w = vec![(Hyper::real(1.0, self.half), Side::Left), (Hyper::real(sign, self.half), Side::Left)];
        self.push(HyperUnit::Sum { inputs: vec![p, q], weights: w })
    }
}

/// One Cayley-Dickson step: a circuit over dimension `2^w` becomes one over
/// `2^(w-1)` that holds units for both halves of every unit.
fn halve(c: &HyperCircuit) -> (HyperCircuit, Quad) {
    let half = c.dim() / 2;
    let mut h = Halver { units: Vec::new(), half };
    let mut q: Vec<Quad> = Vec::with_capacity(c.units.len());
    for u in &c.units {
        let quad = match u {
            HyperUnit::Input { var, table } => {
                let (t1, t2): (Vec<Hyper>, Vec<Hyper>) = table.iter().map(|x| x.halves()).unzip();
                let conj = |t: &[Hyper]| t.iter().map(|x| x.conj()).collect::<Vec<_>>();
                let (c1, c2) = (conj(&t1), conj(&t2));
                Quad {
                    a: h.push(HyperUnit::Input { var: *var, table: t1 }),
                    b: h.push(HyperUnit::Input { var: *var, table: t2 }),
                    ac: h.push(HyperUnit::Input { var: *var, table: c1 }),
                    bc: h.push(HyperUnit::Input { var: *var, table: c2 }),
                }
            }
            HyperUnit::Product { inputs } => {
                let (r, s) = (q[inputs[0]], q[inputs[1]]);
                // n1 = r1 s1 - s2^† r2,   n2 = s2 r1 + r2 s1^†
                // n1^† = s1^† r1^† - r2^† s2,   n2^† = r1^† s2^† + s1 r2^†
                let p = [
                    h.prod(r.a, s.a),
                    h.prod(s.bc, r.b),
                    h.prod(s.b, r.a),
                    h.prod(r.b, s.ac),
                    h.prod(s.ac, r.ac),
                    h.prod(r.bc, s.b),
                    h.prod(r.ac, s.bc),
                    h.prod(s.a, r.bc),
                ];
                Quad {
                    a: h.combine(p[0], p[1], -1.0),
                    b: h.combine(p[2], p[3], 1.0),
                    ac: h.combine(p[4], p[5], -1.0),
                    bc: h.combine(p[6], p[7], 1.0),
                }
            }
            HyperUnit::Sum { inputs, weights } => {
                let mut terms: [Vec<(UnitId, Hyper, Side)>; 4] = Default::default();
                for (&i, (w, side)) in inputs.iter().zip(weights) {
                    let m = q[i];
                    let (w1, w2) = w.halves();
                    let (w1c, w2c) = (w1.conj(), w2.conj());
                    let l = Side::Left;
                    let r = Side::Right;
                    match side {
                        // w m = (w1 m1 - m2^† w2, m2 w1 + w2 m1^†)
                        Side::Left => {
                            terms[0].push((m.a, w1.clone(), l));
                            terms[0].push((m.bc, w2.neg(), r));
                            terms[1].push((m.b, w1.clone(), r));
                            terms[1].push((m.ac, w2.clone(), l));
                            terms[2].push((m.ac, w1c.clone(), r));
                            terms[2].push((m.b, w2c.neg(), l));
                            terms[3].push((m.bc, w1c, l));
                            terms[3].push((m.a, w2c, r));
                        }
                        // m w = (m1 w1 - w2^† m2, w2 m1 + m2 w1^†)
                        Side::Right => {
                            terms[0].push((m.a, w1.clone(), r));
                            terms[0].push((m.b, w2c.neg(), l));
                            terms[1].push((m.a, w2.clone(), l));
                            terms[1].push((m.b, w1c.clone(), r));
                            terms[2].push((m.ac, w1c, l));
                            terms[2].push((m.bc, w2.neg(), r));
                            terms[3].push((m.ac, w2c, r));
                            terms[3].push((m.bc, w1, l));
                        }
                    }
                }
                let mut out = [0; 4];
                for (k, t) in terms.into_iter().enumerate() {
                    let inputs = t.iter().map(|x| x.0).collect();
                    let weights = t.into_iter().map(|x| (x.1, x.2)).collect();
                    out[k] = h.push(HyperUnit::Sum { inputs, weights });
                }
                Quad { a: out[0], b: out[1], ac: out[2], bc: out[3] }
            }
        };
        q.push(quad);
    }
    let root = q[c.output];
    (HyperCircuit { omega: c.omega - 1, variables: c.variables.clone(), units: h.units, output: root.a }, root)
}

fn decompose_into(c: &HyperCircuit, out: &mut Vec<Circuit>) -> Result<()> {
    if c.omega == 0 {
        out.push(c.to_real_circuit()?);
        return Ok(());
    }
    let (mut h, root) = halve(c);
    h.output = root.a;
    decompose_into(&h.pruned(), out)?;
    h.output = root.b;
    decompose_into(&h.pruned(), out)
}

/// Real circuits `c_1..c_{2^omega}` with `c(x) = sum_i e_i c_i(x)`; their
/// squares sum to `c(x)^† c(x)`.
pub fn hypercomplex_decompose(c: &HyperCircuit) -> Result<Vec<Circuit>> {
    c.validate()?;
    let mut out = Vec::with_capacity(c.dim());
    decompose_into(c, &mut out)?;
    Ok(out)
}

/// Decomposes a complex circuit into its real and imaginary parts.
pub fn complex_decompose(c: &Circuit) -> Result<Vec<Circuit>> {
    hypercomplex_decompose(&HyperCircuit::from_circuit(c, 1)?)
}
