//! Explicit circuits for the separating function families over graphs,
//! together with their closed-form evaluators.
//!
//! Every hand-built circuit is a sum of monomials whose products follow one
//! fixed vtree. Variables missing from a monomial are covered by constant-one
//! leaves so that the result is smooth, and all circuits built on the same
//! vtree are mutually compatible.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitBuilder, UnitId};
use crate::compose::{socs_sum, Socs};
use crate::error::{Error, Result};
use crate::input::InputFunction;
use crate::region::RegionNode;
use crate::variable::{Domain, Variable};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub vertices: usize,
    pub edges: Vec<[usize; 2]>,
}

impl GraphSpec {
    pub fn new(vertices: usize, edges: Vec<[usize; 2]>) -> Result<GraphSpec> {
        let g = GraphSpec { vertices, edges };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices == 0 {
            return Err(Error::Schema("graph needs at least one vertex".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &[u, v] in &self.edges {
            if u >= self.vertices || v >= self.vertices {
                return Err(Error::Schema(format!("edge ({u}, {v}) names a missing vertex")));
            }
            if u == v {
                return Err(Error::Schema(format!("self-loop at vertex {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::Schema(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<GraphSpec> {
        let g: GraphSpec = serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn single_edge() -> GraphSpec {
        GraphSpec { vertices: 2, edges: vec![[0, 1]] }
    }

    pub fn path(n: usize) -> GraphSpec {
        GraphSpec { vertices: n, edges: (1..n).map(|i| [i - 1, i]).collect() }
    }

    pub fn complete(n: usize) -> GraphSpec {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push([u, v]);
            }
        }
        GraphSpec { vertices: n, edges }
    }

    /// `sum_{uv in E} x_u x_v` over the first `vertices` entries of `x`.
    fn edge_sum(&self, x: &[f64]) -> f64 {
        self.edges.iter().map(|&[u, v]| x[u] * x[v]).sum()
    }
}

/// Factors of one monomial: variable index to univariate function.
pub type Monomial = BTreeMap<usize, InputFunction>;

/// Builds sums of monomials whose products all follow `vtree`.
pub struct PolyBuilder {
    b: CircuitBuilder,
    vtree: RegionNode,
    ones: HashMap<Vec<usize>, UnitId>,
}

impl PolyBuilder {
    pub fn new(variables: Vec<Variable>, vtree: RegionNode) -> PolyBuilder {
        PolyBuilder { b: CircuitBuilder::new(variables), vtree, ones: HashMap::new() }
    }

    pub fn vtree(&self) -> &RegionNode {
        &self.vtree
    }

    /// Product over the region `node` (a subtree of the vtree).
    pub fn monomial_at(&mut self, node: &RegionNode, m: &Monomial) -> Result<UnitId> {
        build_monomial(&mut self.b, &mut self.ones, node, m)
    }

    pub fn monomial(&mut self, m: &Monomial) -> Result<UnitId> {
        let vt = self.vtree.clone();
        self.monomial_at(&vt, m)
    }

    /// `sum_t coef_t * m_t` over the region `node`.
    pub fn polynomial_at(&mut self, node: &RegionNode, terms: &[(f64, Monomial)]) -> Result<UnitId> {
        let mut units = Vec::with_capacity(terms.len());
        for (_, m) in terms {
            units.push(self.monomial_at(node, m)?);
        }
        self.b.sum_real(units, &terms.iter().map(|t| t.0).collect::<Vec<_>>())
    }

    /// Like [`PolyBuilder::polynomial_at`] with complex coefficients.
    pub fn polynomial_complex_at(&mut self, node: &RegionNode, terms: &[(C64, Monomial)]) -> Result<UnitId> {
        let mut units = Vec::with_capacity(terms.len());
        for (_, m) in terms {
            units.push(self.monomial_at(node, m)?);
        }
        self.b.sum(units, terms.iter().map(|t| t.0).collect())
    }

    pub fn polynomial(&mut self, terms: &[(f64, Monomial)]) -> Result<UnitId> {
        let vt = self.vtree.clone();
        self.polynomial_at(&vt, terms)
    }

    pub fn builder(&mut self) -> &mut CircuitBuilder {
        &mut self.b
    }

    pub fn finish(self, root: UnitId) -> Result<Circuit> {
        self.b.finish(root)
    }
}

fn build_monomial(
    b: &mut CircuitBuilder,
    ones: &mut HashMap<Vec<usize>, UnitId>,
    node: &RegionNode,
    m: &Monomial,
) -> Result<UnitId> {
    let vars = node.vars();
    let constant = vars.iter().all(|v| !m.contains_key(v));
    if constant {
        if let Some(&u) = ones.get(&vars) {
            return Ok(u);
        }
    }
    let u = match node {
        RegionNode::Leaf { vars } => {
            let mut leaves = Vec::with_capacity(vars.len());
            for &v in vars {
                let f = match m.get(&v) {
                    Some(f) => f.clone(),
                    None => InputFunction::one(&b.variables()[v].domain),
                };
                leaves.push(b.input(v, f)?);
            }
            b.product(&leaves)?
        }
        RegionNode::Split { left, right } => {
            let l = build_monomial(b, ones, left, m)?;
            let r = build_monomial(b, ones, right, m)?;
            b.product(&[l, r])?
        }
    };
    if constant {
        ones.insert(vars, u);
    }
    Ok(u)
}

fn on(var: usize) -> (usize, InputFunction) {
    (var, InputFunction::indicator(1))
}

fn boolean_vars(names: impl IntoIterator<Item = String>) -> Vec<Variable> {
    names.into_iter().map(|n| Variable::new(n, Domain::Boolean)).collect()
}

fn vertex_names(n: usize) -> impl Iterator<Item = String> {
    (1..=n).map(|i| format!("X{i}"))
}

fn pair_names(n: usize) -> impl Iterator<Item = String> {
    (1..=n).flat_map(move |i| (1..=n).map(move |j| format!("X{i}_{j}")))
}

/// `1 - sum_{uv} x_u x_v` as a polynomial, with every monomial multiplied by `extra`.
fn udisj_terms(g: &GraphSpec, extra: &Monomial) -> Vec<(f64, Monomial)> {
    let mut terms = vec![(1.0, extra.clone())];
    for &[u, v] in &g.edges {
        let mut m = extra.clone();
        m.extend([on(u), on(v)]);
        terms.push((-1.0, m));
    }
    terms
}

/// `(1 - sum_{uv in E} x_u x_v)^2`.
pub fn eval_fudisj(g: &GraphSpec, x: &[f64]) -> f64 {
    (1.0 - g.edge_sum(x)).powi(2)
}

/// The unsquared circuit `1 - sum_{uv in E} X_u X_v` over `X1..Xn`.
pub fn fudisj_root(g: &GraphSpec) -> Result<Circuit> {
    g.validate()?;
    let vars = boolean_vars(vertex_names(g.vertices));
    let ids: Vec<usize> = (0..g.vertices).collect();
    let mut pb = PolyBuilder::new(vars, RegionNode::balanced(&ids));
    let root = pb.polynomial(&udisj_terms(g, &Monomial::new()))?;
    pb.finish(root)
}

/// Squared circuit computing [`eval_fudisj`].
pub fn build_fudisj(g: &GraphSpec) -> Result<Circuit> {
    crate::compose::square(&fudisj_root(g)?)
}

/// Index of `X_{i,j}` (both 1-based) in the sum-function variable layout
/// `X_1..X_k, X_{1,1}, X_{1,2}, .., X_{k,k}`.
pub fn fsum_pair_index(k: usize, i: usize, j: usize) -> usize {
    k + (i - 1) * k + (j - 1)
}

/// `sum_i x_i sum_j 2^(j-1) x_{i,j}` in the layout of [`fsum_pair_index`].
pub fn eval_fsum(k: usize, x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 1..=k {
        let inner: f64 = (1..=k).map(|j| 2f64.powi(j as i32 - 1) * x[fsum_pair_index(k, i, j)]).sum();
        s += x[i - 1] * inner;
    }
    s
}

fn fsum_setup(k: usize) -> Result<(Vec<Variable>, RegionNode)> {
    if k == 0 {
        return Err(Error::InvalidArgument("sum function needs k >= 1".into()));
    }
    let vars = boolean_vars(vertex_names(k).chain(pair_names(k)));
    let first: Vec<usize> = (0..k).collect();
    let second: Vec<usize> = (k..k + k * k).collect();
    let vt = RegionNode::split(RegionNode::balanced(&first), RegionNode::balanced(&second));
    Ok((vars, vt))
}

/// Monotone structured circuit for the sum function: a root sum over
/// `1[X_i] * (sum_j 2^(j-1) 1[X_{i,j}])`, smoothed by constant-one leaves.
pub fn build_fsum(k: usize) -> Result<Circuit> {
    let (vars, vt) = fsum_setup(k)?;
    let RegionNode::Split { left, right } = vt.clone() else { unreachable!() };
    let mut pb = PolyBuilder::new(vars, vt);
    let mut rows = Vec::with_capacity(k);
    for i in 1..=k {
        let a = pb.monomial_at(&left, &Monomial::from([on(i - 1)]))?;
        let terms: Vec<(f64, Monomial)> = (1..=k)
            .map(|j| (2f64.powi(j as i32 - 1), Monomial::from([on(fsum_pair_index(k, i, j))])))
            .collect();
        let bsum = pb.polynomial_at(&right, &terms)?;
        rows.push(pb.builder().product(&[a, bsum])?);
    }
    let root = pb.builder().sum_real(rows, &vec![1.0; k])?;
    pb.finish(root)
}

/// Sum of `k^2` compatible squares `2^(j-1) (X_i X_{i,j})^2`. The powers of two
/// sit in the mixture coefficients so that every output is an exact integer.
pub fn build_fsum_socs(k: usize) -> Result<Socs> {
    let (vars, vt) = fsum_setup(k)?;
    let mut comps = Vec::with_capacity(k * k);
    let mut coefs = Vec::with_capacity(k * k);
    for i in 1..=k {
        for j in 1..=k {
            let mut pb = PolyBuilder::new(vars.clone(), vt.clone());
            let m = Monomial::from([on(i - 1), on(fsum_pair_index(k, i, j))]);
            let root = pb.polynomial(&[(1.0, m)])?;
            comps.push(pb.finish(root)?);
            coefs.push(2f64.powi(j as i32 - 1));
        }
    }
    socs_sum(comps, Some(coefs))
}

/// Variable layout `X'` (n), `X''` (n^2, row-major), `Z1`, `Z2`.
fn fups_layout(n: usize) -> (usize, usize) {
    (n + n * n, n + n * n + 1)
}

/// `Z1 (1 - sum x_u x_v)^2 + Z2 sum_v x_v sum_j 2^(j-1) x_{v,j}`.
pub fn eval_fups(g: &GraphSpec, x: &[f64]) -> f64 {
    let n = g.vertices;
    let (z1, z2) = fups_layout(n);
    x[z1] * eval_fudisj(g, x) + x[z2] * eval_fsum(n, &x[..n + n * n])
}

/// Sum of `|V|^2 + 1` compatible squares computing [`eval_fups`].
pub fn build_fups(g: &GraphSpec) -> Result<Socs> {
    g.validate()?;
    let n = g.vertices;
    let (z1, z2) = fups_layout(n);
    let vars = boolean_vars(
        vertex_names(n).chain(pair_names(n)).chain(["Z1".to_string(), "Z2".to_string()]),
    );
    let ids: Vec<usize> = (0..vars.len()).collect();
    let vt = RegionNode::balanced(&ids);
    let mut comps = Vec::with_capacity(n * n + 1);
    let mut coefs = vec![1.0];
    let mut pb = PolyBuilder::new(vars.clone(), vt.clone());
    let root = pb.polynomial(&udisj_terms(g, &Monomial::from([on(z1)])))?;
    comps.push(pb.finish(root)?);
    for v in 1..=n {
        for j in 1..=n {
            let mut pb = PolyBuilder::new(vars.clone(), vt.clone());
            let m = Monomial::from([on(z2), on(v - 1), on(fsum_pair_index(n, v, j))]);
            let root = pb.polynomial(&[(1.0, m)])?;
            comps.push(pb.finish(root)?);
            coefs.push(2f64.powi(j as i32 - 1));
        }
    }
    socs_sum(comps, Some(coefs))
}

/// `(1 - s)^2 (1 + s)` with `s = sum_{uv in E} x_u x_v`.
pub fn eval_futq(g: &GraphSpec, x: &[f64]) -> f64 {
    let s = g.edge_sum(x);
    (1.0 - s).powi(2) * (1.0 + s)
}

/// Sum of `|E| + 1` compatible squares computing [`eval_futq`]: the first
/// square is `1 - s`, the others are `x_u x_v (1 - s)` per edge.
pub fn build_futq(g: &GraphSpec) -> Result<Socs> {
    g.validate()?;
    let vars = boolean_vars(vertex_names(g.vertices));
    let ids: Vec<usize> = (0..g.vertices).collect();
    let vt = RegionNode::balanced(&ids);
    let mut comps = Vec::with_capacity(g.edges.len() + 1);
    let mut pb = PolyBuilder::new(vars.clone(), vt.clone());
    let root = pb.polynomial(&udisj_terms(g, &Monomial::new()))?;
    comps.push(pb.finish(root)?);
    for &[u, v] in &g.edges {
        let mut pb = PolyBuilder::new(vars.clone(), vt.clone());
        let root = pb.polynomial(&udisj_terms(g, &Monomial::from([on(u), on(v)])))?;
        comps.push(pb.finish(root)?);
    }
    socs_sum(comps, None)
}

/// `1 + x1^4 x2^2 + x1^2 x2^4 - 3 x1^2 x2^2`.
pub fn eval_motzkin(x1: f64, x2: f64) -> f64 {
    1.0 + x1.powi(4) * x2.powi(2) + x1.powi(2) * x2.powi(4) - 3.0 * x1.powi(2) * x2.powi(2)
}

/// Motzkin polynomial plus `sum_i y_i^2`, on the layout `X1, X2, Y1..Yd`.
pub fn eval_motzkin_family(x: &[f64]) -> f64 {
    eval_motzkin(x[0], x[1]) + x[2..].iter().map(|y| y * y).sum::<f64>()
}

fn monomial_power(k: usize) -> InputFunction {
    let mut c = vec![0.0; k + 1];
    c[k] = 1.0;
    InputFunction::polynomial(&c)
}

/// Structured circuit with polynomial leaves and signed weights computing
/// [`eval_motzkin_family`] over `d + 2` real variables.
pub fn build_motzkin_family(d: usize) -> Result<Circuit> {
    let vars: Vec<Variable> = ["X1".to_string(), "X2".to_string()]
        .into_iter()
        .chain((1..=d).map(|i| format!("Y{i}")))
        .map(|n| Variable::new(n, Domain::Real))
        .collect();
    let ids: Vec<usize> = (0..vars.len()).collect();
    let mut pb = PolyBuilder::new(vars, RegionNode::balanced(&ids));
    let mono = |a: usize, b: usize| Monomial::from([(0, monomial_power(a)), (1, monomial_power(b))]);
    let mut terms = vec![(1.0, Monomial::new()), (1.0, mono(4, 2)), (1.0, mono(2, 4)), (-3.0, mono(2, 2))];
    for i in 0..d {
        terms.push((1.0, Monomial::from([(2 + i, monomial_power(2))])));
    }
    let root = pb.polynomial(&terms)?;
    pb.finish(root)
}

/// Sum function specialised by permutations over a bipartition `(y, z)` of
/// `X1..Xn`: `X_{i,j} = 1` iff `j` is the 1-based position of `X_i` under
/// its side's permutation. `pi_y[k]` is the position of `y[k]`; `None`
/// means identity order. The result is a circuit over `X'` only.
pub fn binary_sum(
    n: usize,
    y: &[usize],
    z: &[usize],
    pi_y: Option<&[usize]>,
    pi_z: Option<&[usize]>,
) -> Result<Circuit> {
    let mut all: Vec<usize> = y.iter().chain(z).copied().collect();
    all.sort_unstable();
    if all != (0..n).collect::<Vec<_>>() {
        return Err(Error::InvalidArgument("(y, z) must partition X1..Xn".into()));
    }
    let check_perm = |side: &[usize], pi: Option<&[usize]>| -> Result<Vec<usize>> {
        let p: Vec<usize> = pi.map_or_else(|| (1..=side.len()).collect(), |p| p.to_vec());
        let mut s = p.clone();
        s.sort_unstable();
        if s != (1..=side.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument("not a permutation of 1..len".into()));
        }
        Ok(p)
    };
    let py = check_perm(y, pi_y)?;
    let pz = check_perm(z, pi_z)?;
    let c = build_fsum(n)?;
    let mut e: Vec<Option<f64>> = vec![None; n];
    e.extend(std::iter::repeat_n(Some(0.0), n * n));
    for (side, perm) in [(y, &py), (z, &pz)] {
        for (&xi, &pos) in side.iter().zip(perm.iter()) {
            e[fsum_pair_index(n, xi + 1, pos)] = Some(1.0);
        }
    }
    crate::compose::condition(&c, &e)
}

/// Whether `v` is an integer-valued complex number within rounding.
pub fn is_integral(v: C64) -> bool {
    v.im.abs() < 1e-9 && (v.re - v.re.round()).abs() < 1e-9
}
