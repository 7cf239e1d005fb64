//! Brute-force references: exhaustive tables, value matrices, prime matrices,
//! square-root rank by sign search, finite differences, and random structured
//! circuits for property tests.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::circuit::{Circuit, CircuitBuilder, UnitId};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::input::InputFunction;
use crate::region::RegionNode;
use crate::variable::Variable;

/// Hard cap on exhaustively enumerated assignments.
pub const MAX_ASSIGNMENTS: usize = 1 << 24;

/// Hard cap on matrix entries for the sign search in [`sqrank_bruteforce`].
pub const MAX_SQRANK_ENTRIES: usize = 16;

pub const RANK_TOL: f64 = 1e-9;

/// Mixed-radix enumeration of finite variables; the first variable varies fastest.
#[derive(Clone, Debug)]
pub struct Assignments {
    radices: Vec<usize>,
    total: usize,
}

impl Assignments {
    pub fn new(variables: &[Variable]) -> Result<Assignments> {
        let mut radices = Vec::with_capacity(variables.len());
        let mut total: usize = 1;
        for v in variables {
            let r = v
                .domain
                .size()
                .ok_or_else(|| Error::Domain(format!("variable {} is not finite", v.name)))?;
            radices.push(r);
            total = total
                .checked_mul(r)
                .filter(|&t| t <= MAX_ASSIGNMENTS)
                .ok_or_else(|| Error::BudgetExceeded(format!("more than {MAX_ASSIGNMENTS} assignments")))?;
        }
        Ok(Assignments { radices, total })
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn decode(&self, mut index: usize) -> Vec<f64> {
        self.radices
            .iter()
            .map(|&r| {
                let d = index % r;
                index /= r;
                d as f64
            })
            .collect()
    }
}

/// `c(x)` for every assignment of the variable table, indexed as in [`Assignments`].
pub fn brute_force_table(c: &Circuit) -> Result<Vec<C64>> {
    let a = Assignments::new(c.variables())?;
    (0..a.len()).into_par_iter().map(|i| evaluate(c, &a.decode(i))).collect()
}

/// Like [`brute_force_table`] but only over the circuit's scope; the other
/// variables are fixed to zero. Returns the scope variables and the table.
pub fn scope_table(c: &Circuit) -> Result<(Vec<usize>, Vec<C64>)> {
    let vars = c.scope().to_vec();
    let sub: Vec<Variable> = vars.iter().map(|&v| c.variables()[v].clone()).collect();
    let a = Assignments::new(&sub)?;
    let n = c.variables().len();
    let table = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let mut x = vec![0.0; n];
            for (&v, val) in vars.iter().zip(a.decode(i)) {
                x[v] = val;
            }
            evaluate(c, &x)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((vars, table))
}

/// Dense value matrix of a Boolean function under the bipartition `(y, z)`.
/// Row bit `k` is the value of `y[k]`, column bit `k` the value of `z[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueMatrix {
    pub y: Vec<usize>,
    pub z: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ValueMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    /// Builds the matrix from any function of a full assignment vector of
    /// length `n`; variables outside `y` and `z` stay at zero.
    pub fn from_fn<F>(n: usize, y: &[usize], z: &[usize], f: F) -> Result<ValueMatrix>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        if y.len() + z.len() > 24 {
            return Err(Error::BudgetExceeded("value matrix over more than 24 variables".into()));
        }
        let mut seen = vec![false; n];
        for &v in y.iter().chain(z) {
            if v >= n || seen[v] {
                return Err(Error::InvalidArgument("bipartition is not a set of distinct variables".into()));
            }
            seen[v] = true;
        }
        let (rows, cols) = (1usize << y.len(), 1usize << z.len());
        let data = (0..rows * cols)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / cols, idx % cols);
                let mut x = vec![0.0; n];
                for (k, &v) in y.iter().enumerate() {
                    x[v] = ((i >> k) & 1) as f64;
                }
                for (k, &v) in z.iter().enumerate() {
                    x[v] = ((j >> k) & 1) as f64;
                }
                f(&x)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ValueMatrix { y: y.to_vec(), z: z.to_vec(), rows, cols, data })
    }
}

/// Value matrix of a real circuit whose scope is exactly `y ∪ z`.
pub fn value_matrix(c: &Circuit, y: &[usize], z: &[usize]) -> Result<ValueMatrix> {
    let mut all: Vec<usize> = y.iter().chain(z).copied().collect();
    all.sort_unstable();
    if all != c.scope().to_vec() {
        return Err(Error::Scope("bipartition does not cover the circuit scope".into()));
    }
    for &v in &all {
        if c.variables()[v].domain.size() != Some(2) {
            return Err(Error::Domain(format!("variable {} is not Boolean", c.variables()[v].name)));
        }
    }
    ValueMatrix::from_fn(c.variables().len(), y, z, |x| {
        let v = evaluate(c, x)?;
        if v.im.abs() > 1e-12 * v.re.abs().max(1.0) {
            return Err(Error::Field("value matrix of a complex-valued function".into()));
        }
        Ok(v.re)
    })
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// The first `q` integers `n >= 1` such that `2n - 1` is prime.
pub fn prime_indices(q: usize) -> Vec<u64> {
    (1u64..).filter(|&n| is_prime(2 * n - 1)).take(q).collect()
}

/// `K[i][j] = n_i + n_j - 1` over [`prime_indices`].
pub fn prime_matrix(q: usize) -> Vec<Vec<f64>> {
    let n = prime_indices(q);
    n.iter().map(|&a| n.iter().map(|&b| (a + b - 1) as f64).collect()).collect()
}

/// Rank by Gaussian elimination with partial pivoting; pivots below `tol`
/// times the largest entry count as zero.
pub fn rank(m: &[Vec<f64>], tol: f64) -> usize {
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let (p, pv) = (r..rows)
            .map(|i| (i, a[i][col].abs()))
            .fold((r, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pv <= tol * scale {
            continue;
        }
        a.swap(r, p);
        for i in r + 1..rows {
            let f = a[i][col] / a[r][col];
            if f != 0.0 {
                for j in col..cols {
                    a[i][j] -= f * a[r][j];
                }
            }
        }
        r += 1;
    }
    r
}

/// Minimum rank over every element-wise signed square root of a nonnegative matrix.
pub fn sqrank_bruteforce(m: &[Vec<f64>]) -> Result<usize> {
    let entries: usize = m.iter().map(|r| r.len()).sum();
    if entries > MAX_SQRANK_ENTRIES {
        return Err(Error::BudgetExceeded(format!(
            "sign search over {entries} entries (cap {MAX_SQRANK_ENTRIES})"
        )));
    }
    if m.iter().flatten().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument("square-root rank needs a nonnegative matrix".into()));
    }
    let root: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v.sqrt()).collect()).collect();
    let nz: Vec<(usize, usize)> = root
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, _)| (i, j)))
        .collect();
    if nz.is_empty() {
        return Ok(0);
    }
    // Flipping every sign preserves rank, so the first nonzero entry stays positive.
    let best = (0u32..1 << (nz.len() - 1))
        .into_par_iter()
        .map(|mask| {
            let mut s = root.clone();
            for (k, &(i, j)) in nz.iter().enumerate().skip(1) {
                if mask >> (k - 1) & 1 == 1 {
                    s[i][j] = -s[i][j];
                }
            }
            rank(&s, RANK_TOL)
        })
        .min()
        .unwrap_or(0);
    Ok(best)
}

/// Central finite differences of `f` at `theta`.
pub fn finite_difference<F: Fn(&[f64]) -> f64>(f: F, theta: &[f64], h: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            t[i] = theta[i] + h;
            let up = f(&t);
            t[i] = theta[i] - h;
            let down = f(&t);
            t[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Leaf style for [`random_circuit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomLeaves {
    Indicator,
    Embedding,
}

#[derive(Clone, Copy, Debug)]
pub struct RandomCircuitSpec {
    pub complex: bool,
    /// Allow negative real weights and entries.
    pub signed: bool,
    pub leaves: RandomLeaves,
    pub max_units: usize,
}

impl Default for RandomCircuitSpec {
    fn default() -> Self {
        RandomCircuitSpec { complex: false, signed: true, leaves: RandomLeaves::Embedding, max_units: 2 }
    }
}

fn rand_value<R: Rng>(rng: &mut R, spec: &RandomCircuitSpec) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let re = if spec.signed || spec.complex { re } else { re.abs() + 0.1 };
    let im = if spec.complex { StandardNormal.sample(rng) } else { 0.0 };
    C64::new(re, im)
}

fn random_units<R: Rng>(
    b: &mut CircuitBuilder,
    node: &RegionNode,
    spec: &RandomCircuitSpec,
    rng: &mut R,
) -> Result<Vec<UnitId>> {
    let k = rng.random_range(1..=spec.max_units.max(1));
    match node {
        RegionNode::Leaf { vars } => {
            let mut per_var = Vec::new();
            for &v in vars {
                let size = b.variables()[v]
                    .domain
                    .size()
                    .ok_or_else(|| Error::Domain("random circuits need finite variables".into()))?;
                let mut leaves = Vec::new();
                match spec.leaves {
                    RandomLeaves::Indicator => {
                        for val in 0..size {
                            leaves.push(b.input(v, InputFunction::indicator(val))?);
                        }
                    }
                    RandomLeaves::Embedding => {
                        for _ in 0..k {
                            let entries: Vec<C64> = (0..size).map(|_| rand_value(rng, spec)).collect();
                            leaves.push(b.input(v, InputFunction::Embedding { entries })?);
                        }
                    }
                }
                per_var.push(leaves);
            }
            let mut out = Vec::new();
            for _ in 0..k {
                let mut factors = Vec::new();
                for leaves in &per_var {
                    let unit = if leaves.len() > 1 || rng.random_bool(0.5) {
                        let w = (0..leaves.len()).map(|_| rand_value(rng, spec)).collect();
                        b.sum(leaves.clone(), w)?
                    } else {
                        leaves[0]
                    };
                    factors.push(unit);
                }
                out.push(b.product(&factors)?);
            }
            Ok(out)
        }
        RegionNode::Split { left, right } => {
            let l = random_units(b, left, spec, rng)?;
            let r = random_units(b, right, spec, rng)?;
            let mut prods = Vec::new();
            for &a in &l {
                for &c in &r {
                    prods.push(b.product(&[a, c])?);
                }
            }
            let mut out = Vec::new();
            for _ in 0..k {
                if prods.len() == 1 && rng.random_bool(0.3) {
                    out.push(prods[0]);
                } else {
                    let w = (0..prods.len()).map(|_| rand_value(rng, spec)).collect();
                    out.push(b.sum(prods.clone(), w)?);
                }
            }
            Ok(out)
        }
    }
}

/// Random smooth circuit whose products follow `vtree`. Two circuits drawn
/// over the same vtree and variable table are compatible.
pub fn random_circuit<R: Rng>(
    variables: &[Variable],
    vtree: &RegionNode,
    spec: &RandomCircuitSpec,
    rng: &mut R,
) -> Result<Circuit> {
    let mut b = CircuitBuilder::new(variables.to_vec());
    let roots = random_units(&mut b, vtree, spec, rng)?;
    let w = (0..roots.len()).map(|_| rand_value(rng, spec)).collect();
    let root = if roots.len() == 1 { roots[0] } else { b.sum(roots, w)? };
    b.finish(root)
}
