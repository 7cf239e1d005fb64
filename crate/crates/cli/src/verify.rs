//! Property suites checked against brute-force oracles.
//!
//! Every case draws from its own random stream derived from the run seed, so a
//! failing case can be replayed alone from the options stored in its replay
//! file.

use std::collections::{BTreeMap, BTreeSet};

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use socs_core::circuit::{check_compatible, check_smooth_decomposable, structured_decomposable};
use socs_core::compose::{condition, conjugate, multiply, socs_sum, square};
use socs_core::constructions::*;
use socs_core::eval::{evaluate, evaluate_mode, marginalize, partition_function, Mode};
use socs_core::logc::{logsumexp_complex, LogC};
use socs_core::oracle::{
    brute_force_table, finite_difference, prime_matrix, random_circuit, sqrank_bruteforce, value_matrix, Assignments,
    RandomCircuitSpec, RandomLeaves,
};
use socs_core::reductions::*;
use socs_core::region::{random_binary_tree, RegionNode};
use socs_core::tensorized::{InputFamily, LayerSpec, Model, ModelClass};
use socs_core::variable::{numbered, Domain};
use socs_core::{Circuit, Error, InputFunction, Variable, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Structural,
    Multiply,
    Semiring,
    Gradients,
    Separations,
    Reductions,
    All,
}

impl Suite {
    const CONCRETE: [Suite; 6] =
        [Suite::Structural, Suite::Multiply, Suite::Semiring, Suite::Gradients, Suite::Separations, Suite::Reductions];

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => Suite::CONCRETE.to_vec(),
            s => vec![s],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOptions {
    pub suite: Suite,
    pub max_vars: usize,
    pub seed: u64,
    /// Corrupts every product built by the multiply suite.
    #[serde(default)]
    pub inject_fault: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseOutcome {
    pub suite: Suite,
    pub case: String,
    pub checks: usize,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Everything needed to rerun one failing case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Replay {
    pub options: VerifyOptions,
    pub case: String,
    pub failure: String,
    /// Inputs of the failing check, e.g. circuits in their JSON form.
    pub artifacts: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub suite: Suite,
    pub seed: u64,
    pub max_vars: usize,
    pub passed: bool,
    pub checks: usize,
    pub cases: Vec<CaseOutcome>,
    #[serde(skip)]
    pub replay: Option<Replay>,
}

struct Case {
    checks: usize,
    failure: Option<String>,
    artifacts: BTreeMap<String, Value>,
    fault: bool,
    max_vars: usize,
}

impl Case {
    /// Counts one check; the first failure is kept along with `artifacts`.
    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String, artifacts: impl FnOnce() -> Vec<(&'static str, Value)>) {
        self.checks += 1;
        if !ok && self.failure.is_none() {
            self.failure = Some(detail());
            self.artifacts = artifacts().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        }
    }

    fn expect(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.check(ok, detail, Vec::new);
    }

    fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

type CaseFn = fn(&mut Case, &mut ChaCha8Rng) -> socs_core::Result<()>;

fn cases(suite: Suite) -> Vec<(&'static str, CaseFn)> {
    match suite {
        Suite::Structural => vec![
            ("flags_and_round_trip", structural_flags as CaseFn),
            ("compatibility_matches_vtrees", structural_compatibility),
            ("violations_are_reported", structural_violations),
            ("conditioning_closure", structural_conditioning),
        ],
        Suite::Multiply => vec![
            ("random_pairs", multiply_pairs as CaseFn),
            ("square_is_modulus", multiply_square),
            ("conjugate", multiply_conjugate),
            ("incompatible_pairs_rejected", multiply_incompatible),
        ],
        Suite::Semiring => vec![
            ("log_modes_agree", semiring_modes as CaseFn),
            ("marginals_match_enumeration", semiring_marginals),
            ("logsumexp_scaling", semiring_logsumexp),
        ],
        Suite::Gradients => vec![("finite_differences", gradients_fd as CaseFn)],
        Suite::Separations => vec![
            ("fudisj", sep_fudisj as CaseFn),
            ("fsum", sep_fsum),
            ("fups", sep_fups),
            ("futq", sep_futq),
            ("motzkin", sep_motzkin),
            ("binary_sum_value_matrix", sep_binary_sum),
            ("prime_matrix", sep_prime),
        ],
        Suite::Reductions => vec![
            ("born_machine", red_born as CaseFn),
            ("complex_decomposition", red_complex),
            ("psd_round_trip", red_psd),
            ("snefy", red_snefy),
            ("unroll", red_unroll),
        ],
        Suite::All => Vec::new(),
    }
}

fn case_rng(seed: u64, suite: Suite, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((suite as u64) << 32) | index as u64);
    rng
}

fn run_case(opts: &VerifyOptions, suite: Suite, index: usize, name: &str, f: CaseFn) -> (CaseOutcome, Option<Replay>) {
    let mut case =
        Case { checks: 0, failure: None, artifacts: BTreeMap::new(), fault: opts.inject_fault, max_vars: opts.max_vars };
    let mut rng = case_rng(opts.seed, suite, index);
    if let Err(e) = f(&mut case, &mut rng) {
        case.expect(false, || format!("error: {e}"));
    }
    let replay = case.failure.as_ref().map(|failure| Replay {
        options: VerifyOptions { suite, ..opts.clone() },
        case: name.to_string(),
        failure: failure.clone(),
        artifacts: case.artifacts.clone(),
    });
    let outcome =
        CaseOutcome { suite, case: name.to_string(), checks: case.checks, passed: case.failure.is_none(), failure: case.failure };
    (outcome, replay)
}

pub fn run(opts: &VerifyOptions) -> Report {
    let mut outcomes = Vec::new();
    let mut replay = None;
    for suite in opts.suite.members() {
        for (i, (name, f)) in cases(suite).into_iter().enumerate() {
            let (o, r) = run_case(opts, suite, i, name, f);
            if replay.is_none() {
                replay = r;
            }
            outcomes.push(o);
        }
    }
    report(opts, outcomes, replay)
}

/// Reruns the single case named in `r`.
pub fn rerun(r: &Replay) -> Result<Report, String> {
    let (i, (name, f)) = cases(r.options.suite)
        .into_iter()
        .enumerate()
        .find(|(_, (n, _))| *n == r.case)
        .ok_or_else(|| format!("no case {:?} in suite {:?}", r.case, r.options.suite))?;
    let (o, rep) = run_case(&r.options, r.options.suite, i, name, f);
    Ok(report(&r.options, vec![o], rep))
}

fn report(opts: &VerifyOptions, cases: Vec<CaseOutcome>, replay: Option<Replay>) -> Report {
    Report {
        suite: opts.suite,
        seed: opts.seed,
        max_vars: opts.max_vars,
        passed: cases.iter().all(|c| c.passed),
        checks: cases.iter().map(|c| c.checks).sum(),
        cases,
        replay,
    }
}

// ---------------------------------------------------------------- helpers

fn close(a: C64, b: C64, rel: f64, floor: f64) -> bool {
    (a - b).norm() <= rel * a.norm().max(b.norm()).max(floor)
}

fn cjson(c: &Circuit) -> Value {
    serde_json::to_value(c.to_json()).unwrap_or(Value::Null)
}

fn random_spec(rng: &mut ChaCha8Rng, complex: Option<bool>) -> RandomCircuitSpec {
    RandomCircuitSpec {
        complex: complex.unwrap_or_else(|| rng.random_bool(0.5)),
        signed: true,
        leaves: if rng.random_bool(0.5) { RandomLeaves::Indicator } else { RandomLeaves::Embedding },
        max_units: rng.random_range(1..=3),
    }
}

fn random_vtree(rng: &mut ChaCha8Rng, n: usize) -> socs_core::Result<RegionNode> {
    Ok(random_binary_tree(n, rng.random())?.root)
}

/// Independent compatibility oracle on vtrees: every scope shared by both
/// trees must be split into the same unordered pair.
fn vtree_splits(node: &RegionNode, out: &mut BTreeMap<BTreeSet<usize>, BTreeSet<BTreeSet<usize>>>) {
    if let RegionNode::Split { left, right } = node {
        let (l, r): (BTreeSet<usize>, BTreeSet<usize>) = (left.vars().into_iter().collect(), right.vars().into_iter().collect());
        out.insert(l.union(&r).copied().collect(), [l, r].into_iter().collect());
        vtree_splits(left, out);
        vtree_splits(right, out);
    }
}

fn vtrees_agree(a: &RegionNode, b: &RegionNode) -> bool {
    let (mut sa, mut sb) = (BTreeMap::new(), BTreeMap::new());
    vtree_splits(a, &mut sa);
    vtree_splits(b, &mut sb);
    sa.iter().all(|(k, v)| sb.get(k).is_none_or(|w| v == w))
}

fn max_norm(t: &[C64]) -> f64 {
    t.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Scales the first sum weight so that the circuit is wrong but well formed.
fn corrupt(c: &Circuit) -> socs_core::Result<Circuit> {
    let mut j = c.to_json();
    if let Some(u) = j.units.iter_mut().find(|u| !u.weights.is_empty()) {
        u.weights[0] = u.weights[0] * 1.5 + C64::new(0.5, 0.0);
    }
    Circuit::from_json(&j)
}

// ---------------------------------------------------------------- structural

fn structural_flags(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for _ in 0..30 {
        let n = rng.random_range(1..=case.max_vars.clamp(1, 8));
        let vars = numbered(n, Domain::Boolean);
        let spec = random_spec(rng, None);
        let c = random_circuit(&vars, &random_vtree(rng, n)?, &spec, rng)?;
        let r = check_smooth_decomposable(&c);
        case.check(r.smooth && r.decomposable, || format!("flags {r:?}"), || vec![("circuit", cjson(&c))]);
        case.check(structured_decomposable(&c)?, || "not structured".into(), || vec![("circuit", cjson(&c))]);
        let text = c.to_json_string();
        let back = Circuit::from_json_str(&text)?;
        case.expect(back.to_json_string() == text, || "JSON round trip changed the text".into());
        case.expect(brute_force_table(&back)? == brute_force_table(&c)?, || "JSON round trip changed values".into());
    }
    Ok(())
}

fn structural_compatibility(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for _ in 0..40 {
        let n = rng.random_range(2..=case.max_vars.clamp(2, 8));
        let vars = numbered(n, Domain::Boolean);
        let v1 = random_vtree(rng, n)?;
        let v2 = if rng.random_bool(0.3) { v1.clone() } else { random_vtree(rng, n)? };
        let c1 = random_circuit(&vars, &v1, &random_spec(rng, None), rng)?;
        let c2 = random_circuit(&vars, &v2, &random_spec(rng, None), rng)?;
        let want = vtrees_agree(&v1, &v2);
        let got = check_compatible(&c1, &c2)?;
        case.check(
            got.compatible == want,
            || format!("compatibility {} but vtrees agree = {want}: {:?}", got.compatible, got.witnesses),
            || vec![("c1", cjson(&c1)), ("c2", cjson(&c2))],
        );
    }
    Ok(())
}

fn structural_violations(case: &mut Case, _rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    let vars = numbered(2, Domain::Boolean);
    let mut b = socs_core::CircuitBuilder::new(vars.clone());
    let a = b.input(0, InputFunction::indicator(1))?;
    let c = b.input(1, InputFunction::indicator(1))?;
    let s = b.sum_real(vec![a, c], &[1.0, 1.0])?;
    let r = check_smooth_decomposable(&b.finish(s)?);
    case.expect(!r.smooth && r.decomposable, || format!("non-smooth sum reported as {r:?}"));
    let mut b = socs_core::CircuitBuilder::new(vars);
    let a = b.input(0, InputFunction::indicator(1))?;
    let c = b.input(0, InputFunction::indicator(0))?;
    let p = b.product(&[a, c])?;
    let circuit = b.finish(p)?;
    let r = check_smooth_decomposable(&circuit);
    case.expect(r.smooth && !r.decomposable, || format!("overlapping product reported as {r:?}"));
    case.expect(check_compatible(&circuit, &circuit).is_err(), || "compatibility accepted a non-decomposable circuit".into());
    Ok(())
}

fn structural_conditioning(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for _ in 0..20 {
        let n = rng.random_range(2..=case.max_vars.clamp(2, 8));
        let vars = numbered(n, Domain::Boolean);
        let vt = random_vtree(rng, n)?;
        let c1 = random_circuit(&vars, &vt, &random_spec(rng, None), rng)?;
        let c2 = random_circuit(&vars, &vt, &random_spec(rng, None), rng)?;
        let mut e: Vec<Option<f64>> = (0..n).map(|_| rng.random_bool(0.4).then(|| rng.random_range(0..2) as f64)).collect();
        if e.iter().all(Option::is_some) {
            e[0] = None;
        }
        let (d1, d2) = (condition(&c1, &e)?, condition(&c2, &e)?);
        case.expect(check_compatible(&d1, &d2)?.compatible, || "conditioned circuits are not compatible".into());
        let a = Assignments::new(&vars)?;
        let scale = max_norm(&brute_force_table(&c1)?);
        for i in 0..a.len() {
            let mut x = a.decode(i);
            for (xi, ei) in x.iter_mut().zip(&e) {
                if let Some(v) = ei {
                    *xi = *v;
                }
            }
            let (want, got) = (evaluate(&c1, &x)?, evaluate(&d1, &x)?);
            case.check(
                close(got, want, 1e-12, 1e-6 * scale),
                || format!("conditioned value {got} vs {want} at {x:?}"),
                || vec![("circuit", cjson(&c1)), ("evidence", json!(e))],
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- multiply

fn multiply_pairs(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for _ in 0..30 {
        let n = rng.random_range(1..=case.max_vars.clamp(1, 16));
        let vars = numbered(n, Domain::Boolean);
        let vt = random_vtree(rng, n)?;
        let c1 = random_circuit(&vars, &vt, &random_spec(rng, None), rng)?;
        let c2 = random_circuit(&vars, &vt, &random_spec(rng, None), rng)?;
        let mut p = multiply(&c1, &c2)?;
        if case.fault {
            p = corrupt(&p)?;
        }
        case.check(
            p.size() <= c1.size().max(1) * c2.size().max(1),
            || format!("product size {} exceeds {} * {}", p.size(), c1.size(), c2.size()),
            || vec![("c1", cjson(&c1)), ("c2", cjson(&c2))],
        );
        let (t1, t2, tp) = (brute_force_table(&c1)?, brute_force_table(&c2)?, brute_force_table(&p)?);
        let want: Vec<C64> = t1.iter().zip(&t2).map(|(a, b)| a * b).collect();
        let floor = 1e-4 * max_norm(&want);
        for (i, (g, w)) in tp.iter().zip(&want).enumerate() {
            case.check(
                close(*g, *w, 1e-10, floor),
                || format!("assignment {i}: product {g} vs {w}"),
                || vec![("c1", cjson(&c1)), ("c2", cjson(&c2)), ("assignment", json!(i))],
            );
            if case.failed() {
                return Ok(());
            }
        }
    }
    Ok(())
}

fn multiply_square(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for _ in 0..20 {
        let n = rng.random_range(1..=case.max_vars.clamp(1, 10));
        let vars = numbered(n, Domain::Boolean);
        let c = random_circuit(&vars, &random_vtree(rng, n)?, &random_spec(rng, Some(true)), rng)?;
        let sq = square(&c)?;
        let (t, ts) = (brute_force_table(&c)?, brute_force_table(&sq)?);
        let want: Vec<f64> = t.iter().map(|z| z.norm_sqr()).collect();
        let floor = 1e-4 * want.iter().fold(0.0, |a: f64, b| a.max(*b));
        for (g, w) in ts.iter().zip(&want) {
            case.check(close(*g, C64::new(*w, 0.0), 1e-10, floor), || format!("square {g} vs {w}"), || {
                vec![("circuit", cjson(&c))]
            });
        }
        let z = partition_function(&sq)?;
        let zsum: f64 = want.iter().sum();
        case.check(close(z, C64::new(zsum, 0.0), 1e-9, 0.0), || format!("Z {z} vs {zsum}"), || {
            vec![("circuit", cjson(&c))]
        });
    }
    Ok(())
}

fn multiply_conjugate(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for _ in 0..10 {
        let n = rng.random_range(1..=case.max_vars.clamp(1, 8));
        let vars = numbered(n, Domain::Boolean);
        let c = random_circuit(&vars, &random_vtree(rng, n)?, &random_spec(rng, Some(true)), rng)?;
        let cc = conjugate(&c);
        for (a, b) in brute_force_table(&c)?.iter().zip(brute_force_table(&cc)?) {
            case.expect(a.conj() == b, || format!("conjugate {b} vs {a}"));
        }
    }
    Ok(())
}

fn multiply_incompatible(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    let mut tried = 0;
    while tried < 10 {
        let n = rng.random_range(3..=case.max_vars.clamp(3, 8));
        let vars = numbered(n, Domain::Boolean);
        let (v1, v2) = (random_vtree(rng, n)?, random_vtree(rng, n)?);
        if vtrees_agree(&v1, &v2) {
            continue;
        }
        tried += 1;
        let spec = RandomCircuitSpec { max_units: 1, ..random_spec(rng, None) };
        let c1 = random_circuit(&vars, &v1, &spec, rng)?;
        let c2 = random_circuit(&vars, &v2, &spec, rng)?;
        let r = multiply(&c1, &c2);
        case.check(matches!(r, Err(Error::Incompatible { .. })), || format!("expected Incompatible, got {r:?}"), || {
            vec![("c1", cjson(&c1)), ("c2", cjson(&c2))]
        });
    }
    Ok(())
}

// ---------------------------------------------------------------- semiring

fn semiring_modes(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for _ in 0..20 {
        let n = rng.random_range(1..=case.max_vars.clamp(1, 8));
        let vars = numbered(n, Domain::Boolean);
        let complex = rng.random_bool(0.5);
        let c = random_circuit(&vars, &random_vtree(rng, n)?, &random_spec(rng, Some(complex)), rng)?;
        let a = Assignments::new(&vars)?;
        let table = brute_force_table(&c)?;
        let floor = 1e-4 * max_norm(&table);
        for i in 0..a.len() {
            let x = a.decode(i);
            let lin = evaluate_mode(&c, &x, Mode::Linear)?;
            let lc = evaluate_mode(&c, &x, Mode::LogComplex)?;
            case.check(close(lc, lin, 1e-10, floor), || format!("log-complex {lc} vs linear {lin}"), || {
                vec![("circuit", cjson(&c)), ("assignment", json!(x))]
            });
            if !complex {
                let ls = evaluate_mode(&c, &x, Mode::LogSign)?;
                case.check(close(ls, lin, 1e-10, floor), || format!("log-sign {ls} vs linear {lin}"), || {
                    vec![("circuit", cjson(&c)), ("assignment", json!(x))]
                });
            }
        }
    }
    Ok(())
}

fn semiring_marginals(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for _ in 0..20 {
        let n = rng.random_range(1..=case.max_vars.clamp(1, 8));
        let vars = numbered(n, Domain::Boolean);
        let c = random_circuit(&vars, &random_vtree(rng, n)?, &random_spec(rng, None), rng)?;
        let e: Vec<Option<f64>> = (0..n).map(|_| rng.random_bool(0.5).then(|| rng.random_range(0..2) as f64)).collect();
        let a = Assignments::new(&vars)?;
        let mut want = C64::new(0.0, 0.0);
        let mut scale = 0.0;
        for i in 0..a.len() {
            let x = a.decode(i);
            if x.iter().zip(&e).all(|(xi, ei)| ei.is_none_or(|v| v == *xi)) {
                let v = evaluate(&c, &x)?;
                want += v;
                scale += v.norm();
            }
        }
        let got = marginalize(&c, &e)?;
        case.check(close(got, want, 1e-10, 1e-4 * scale), || format!("marginal {got} vs {want}"), || {
            vec![("circuit", cjson(&c)), ("evidence", json!(e))]
        });
    }
    Ok(())
}

fn semiring_logsumexp(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for _ in 0..50 {
        let len = rng.random_range(1..200);
        let terms: Vec<LogC> =
            (0..len).map(|_| LogC::new(rng.random_range(-460.0..460.0), rng.random_range(-3.2..3.2))).collect();
        let s = logsumexp_complex(&terms);
        case.expect(!s.log_mag.is_nan() && !s.arg.is_nan(), || "NaN from logsumexp".into());
        let shift = rng.random_range(-300.0..300.0);
        let shifted: Vec<LogC> = terms.iter().map(|t| LogC::new(t.log_mag + shift, t.arg)).collect();
        let s2 = logsumexp_complex(&shifted);
        if !s.is_zero() {
            case.expect((s2.log_mag - s.log_mag - shift).abs() < 1e-9 * (1.0 + s.log_mag.abs()), || {
                format!("shift changed the result: {s:?} then {s2:?}")
            });
        }
        // Moderate magnitudes can be summed directly.
        let small: Vec<LogC> = terms.iter().map(|t| LogC::new(t.log_mag / 100.0, t.arg)).collect();
        let direct: C64 = small.iter().map(|t| t.to_complex()).sum();
        let bound: f64 = small.iter().map(|t| t.log_mag.exp()).sum();
        let got = logsumexp_complex(&small).to_complex();
        case.expect((got - direct).norm() <= 1e-12 * bound, || format!("logsumexp {got} vs direct {direct}"));
    }
    Ok(())
}

// ---------------------------------------------------------------- gradients

fn gradients_fd(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    let n = case.max_vars.clamp(2, 4);
    let vars = numbered(n, Domain::Categorical(3));
    let classes = [
        ModelClass::Monotone,
        ModelClass::SquaredReal,
        ModelClass::SquaredComplex,
        ModelClass::Socs { r: 4, complex: false },
        ModelClass::Musocs { r: 1, complex: true },
    ];
    let batch: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random_range(0..3) as f64).collect()).collect();
    for class in classes {
        let spec = LayerSpec { sum_units: 2, input_units: 2, model_class: class, input_family: InputFamily::Auto, seed: rng.random() };
        let m = Model::build(vars.clone(), random_binary_tree(n, rng.random())?, spec)?;
        let (_, grad) = m.nll_and_grad(&batch)?;
        let loss = |theta: &[f64]| {
            let mut mm = m.clone();
            mm.set_params(theta).and_then(|_| mm.nll_and_grad(&batch)).map_or(f64::NAN, |r| r.0)
        };
        let fd = finite_difference(loss, m.params(), 1e-5);
        for (i, (a, b)) in grad.iter().zip(&fd).enumerate() {
            case.expect((a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1e-2), || {
                format!("{}: parameter {i}: tape {a} vs finite difference {b}", class.name())
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- separations

fn exhaust_exact(case: &mut Case, c: &Circuit, f: impl Fn(&[f64]) -> f64, what: &str) -> socs_core::Result<()> {
    let a = Assignments::new(c.variables())?;
    for i in 0..a.len() {
        let x = a.decode(i);
        let got = evaluate(c, &x)?;
        let want = f(&x);
        case.expect(is_integral(got) && got.re.round() == want, || format!("{what} at {x:?}: {got} vs {want}"));
        if case.failed() {
            break;
        }
    }
    Ok(())
}

fn graphs_upto(n: usize) -> Vec<GraphSpec> {
    let mut out = vec![GraphSpec::single_edge()];
    for k in 3..=n {
        out.push(GraphSpec::path(k));
        out.push(GraphSpec::complete(k));
    }
    out
}

fn sep_fudisj(case: &mut Case, _rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for g in graphs_upto(4) {
        let c = build_fudisj(&g)?;
        exhaust_exact(case, &c, |x| eval_fudisj(&g, x), "fudisj")?;
    }
    let c = build_fudisj(&GraphSpec::single_edge())?;
    let m = value_matrix(&c, &[0], &[1])?;
    case.expect(m.to_rows() == vec![vec![1.0, 1.0], vec![1.0, 0.0]], || format!("single-edge value matrix {:?}", m.to_rows()));
    Ok(())
}

fn sep_fsum(case: &mut Case, _rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for k in 1..=3 {
        exhaust_exact(case, &build_fsum(k)?, |x| eval_fsum(k, x), "fsum")?;
        let s = build_fsum_socs(k)?;
        case.expect(s.num_squares() == k * k, || format!("fsum({k}) has {} squares", s.num_squares()));
        exhaust_exact(case, s.circuit(), |x| eval_fsum(k, x), "fsum as squares")?;
    }
    Ok(())
}

fn sep_fups(case: &mut Case, _rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for g in graphs_upto(3) {
        let n = g.vertices;
        let s = build_fups(&g)?;
        case.expect(s.num_squares() == n * n + 1, || format!("fups has {} squares", s.num_squares()));
        exhaust_exact(case, s.circuit(), |x| eval_fups(&g, x), "fups")?;
        let (z1, z2) = (n + n * n, n + n * n + 1);
        for (a, b) in [(1.0, 0.0), (0.0, 1.0)] {
            let mut e = vec![None; n + n * n + 2];
            e[z1] = Some(a);
            e[z2] = Some(b);
            let sl = condition(s.circuit(), &e)?;
            let sub = Assignments::new(&sl.variables()[..n + n * n])?;
            for i in 0..sub.len() {
                let mut x = sub.decode(i);
                let want = if a == 1.0 { eval_fudisj(&g, &x[..n]) } else { eval_fsum(n, &x) };
                x.extend([a, b]);
                let got = evaluate(&sl, &x)?;
                case.expect(is_integral(got) && got.re.round() == want, || format!("fups slice ({a}, {b}) at {x:?}: {got} vs {want}"));
            }
        }
    }
    Ok(())
}

fn sep_futq(case: &mut Case, _rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for g in graphs_upto(4) {
        let s = build_futq(&g)?;
        case.expect(s.num_squares() == g.edges.len() + 1, || format!("futq has {} squares", s.num_squares()));
        exhaust_exact(case, s.circuit(), |x| eval_futq(&g, x), "futq")?;
    }
    Ok(())
}

fn sep_motzkin(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    case.expect(eval_motzkin(1.0, 1.0) == 0.0 && eval_motzkin(2.0, 1.0) == 9.0, || "Motzkin anchor values".into());
    for d in 0..3 {
        let c = build_motzkin_family(d)?;
        case.expect(structured_decomposable(&c)?, || "Motzkin circuit is not structured".into());
        for _ in 0..50 {
            let x: Vec<f64> = (0..d + 2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (got, want) = (evaluate(&c, &x)?.re, eval_motzkin_family(&x));
            case.expect((got - want).abs() <= 1e-10 * want.abs().max(1.0), || format!("Motzkin at {x:?}: {got} vs {want}"));
        }
    }
    Ok(())
}

fn sep_binary_sum(case: &mut Case, _rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    let c = binary_sum(5, &[0, 1, 2], &[3, 4], None, None)?;
    let m = value_matrix(&c, &[0, 1, 2], &[3, 4])?;
    let want: Vec<Vec<f64>> = (0..8).map(|i| (0..4).map(|j| (i + j) as f64).collect()).collect();
    case.expect(m.to_rows() == want, || format!("binary sum value matrix {:?}", m.to_rows()));
    Ok(())
}

fn sep_prime(case: &mut Case, _rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    let p = prime_matrix(3);
    case.expect(p == vec![vec![3.0, 4.0, 5.0], vec![4.0, 5.0, 6.0], vec![5.0, 6.0, 7.0]], || format!("prime matrix {p:?}"));
    let r = sqrank_bruteforce(&p)?;
    case.expect(r == 3, || format!("square-root rank {r}"));
    Ok(())
}

// ---------------------------------------------------------------- reductions

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub(crate) fn random_mps(rng: &mut ChaCha8Rng, d: usize, v: usize, r: usize) -> Mps {
    let z = |rng: &mut ChaCha8Rng| C64::new(normal(rng), normal(rng));
    let tensors = (0..d)
        .map(|j| {
            if j == 0 || j == d - 1 {
                Core::Matrix((0..v).map(|_| (0..r).map(|_| z(rng)).collect()).collect())
            } else {
                Core::Tensor((0..v).map(|_| (0..r).map(|_| (0..r).map(|_| z(rng)).collect()).collect()).collect())
            }
        })
        .collect();
    Mps { field: socs_core::Field::Complex, d, v, r, tensors }
}

fn red_born(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    let d = case.max_vars.clamp(2, 5);
    let m = random_mps(rng, d, 2, 3);
    let b = born(&m)?;
    let a = Assignments::new(&m.variables())?;
    for i in 0..a.len() {
        let x = a.decode(i);
        let xi: Vec<usize> = x.iter().map(|&v| v as usize).collect();
        let want = m.contract(&xi).norm_sqr();
        let got = evaluate(&b, &x)?;
        case.check(close(got, C64::new(want, 0.0), 1e-9, 0.0), || format!("Born machine at {x:?}: {got} vs {want}"), || {
            vec![("mps", serde_json::to_value(&m).unwrap_or(Value::Null))]
        });
    }
    Ok(())
}

fn red_complex(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for _ in 0..10 {
        let n = rng.random_range(1..=case.max_vars.clamp(1, 8));
        let vars = numbered(n, Domain::Boolean);
        let c = random_circuit(&vars, &random_vtree(rng, n)?, &random_spec(rng, Some(true)), rng)?;
        let parts = complex_decompose(&c)?;
        case.expect(parts.len() == 2, || format!("{} parts", parts.len()));
        case.expect(check_compatible(&parts[0], &parts[1])?.compatible, || "parts are not compatible".into());
        let s = socs_sum(parts, None)?;
        let (ts, tq) = (brute_force_table(s.circuit())?, brute_force_table(&square(&c)?)?);
        let floor = 1e-4 * max_norm(&tq);
        for (a, b) in ts.iter().zip(&tq) {
            case.check(close(*a, *b, 1e-10, floor), || format!("sum of squares {a} vs square {b}"), || {
                vec![("circuit", cjson(&c))]
            });
        }
    }
    Ok(())
}

fn red_psd(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    let n = case.max_vars.clamp(2, 6);
    let vars = numbered(n, Domain::Boolean);
    let vt = random_vtree(rng, n)?;
    let spec = RandomCircuitSpec { complex: false, ..random_spec(rng, Some(false)) };
    let comps = (0..3).map(|_| random_circuit(&vars, &vt, &spec, rng)).collect::<socs_core::Result<Vec<_>>>()?;
    // A = B B^T for a random B.
    let bm: Vec<Vec<f64>> = (0..3).map(|_| (0..2).map(|_| normal(rng)).collect()).collect();
    let a: Vec<Vec<f64>> =
        (0..3).map(|i| (0..3).map(|j| (0..2).map(|k| bm[i][k] * bm[j][k]).sum()).collect()).collect();
    let p = PsdModel::new(comps, a)?;
    let s = psd_to_socs(&p)?;
    case.expect(s.num_squares() <= 2, || format!("rank-2 matrix gave {} squares", s.num_squares()));
    let back = socs_to_psd(&s)?;
    let table = Assignments::new(&vars)?;
    for i in 0..table.len() {
        let x = table.decode(i);
        let want = p.eval(&x)?;
        let (got, again) = (evaluate(s.circuit(), &x)?.re, back.eval(&x)?);
        case.expect((got - want).abs() <= 1e-9 * want.abs().max(1e-3), || format!("PSD to squares {got} vs {want}"));
        case.expect((again - got).abs() <= 1e-9 * got.abs().max(1e-3), || format!("squares to PSD {again} vs {got}"));
    }
    Ok(())
}

pub(crate) fn snefy_fixture(rng: &mut ChaCha8Rng, sigma: Activation) -> SnefySpec {
    let variables = vec![Variable::new("U", Domain::Real), Variable::new("B", Domain::Categorical(3))];
    SnefySpec {
        sigma,
        variables,
        base: vec![BaseMeasure::Gaussian { mean: 0.3, std: 1.2 }, BaseMeasure::Table { values: vec![0.2, 0.5, 0.3] }],
        stats: vec![
            Statistic::Polynomial { degree: 2 },
            Statistic::Table { values: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]] },
        ],
        v: (0..2).map(|_| (0..4).map(|_| normal(rng)).collect()).collect(),
        w: (0..4).map(|_| vec![0.5 * normal(rng), 0.05 * normal(rng), 0.5 * normal(rng), 0.5 * normal(rng)]).collect(),
        b: (0..4).map(|_| 0.5 * normal(rng)).collect(),
    }
}

fn red_snefy(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for sigma in [Activation::Exp, Activation::Cos] {
        let s = snefy_fixture(rng, sigma);
        let c = snefy_to_socs(&s)?;
        for _ in 0..1000 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(0..3) as f64];
            let (got, want) = (evaluate(&c, &x)?, s.eval(&x));
            case.check(close(got, C64::new(want, 0.0), 1e-6, 0.0), || format!("{sigma:?} at {x:?}: {got} vs {want}"), || {
                vec![("snefy", serde_json::to_value(&s).unwrap_or(Value::Null))]
            });
        }
    }
    Ok(())
}

fn red_unroll(case: &mut Case, rng: &mut ChaCha8Rng) -> socs_core::Result<()> {
    for _ in 0..5 {
        let n = rng.random_range(1..=case.max_vars.clamp(1, 6));
        let vars = numbered(n, Domain::Boolean);
        let spec = RandomCircuitSpec { complex: false, signed: false, leaves: RandomLeaves::Indicator, max_units: 2 };
        let c = random_circuit(&vars, &random_vtree(rng, n)?, &spec, rng)?;
        let s = unroll_to_sos(&c, DEFAULT_UNROLL_CAP)?;
        let (ts, tc) = (brute_force_table(s.circuit())?, brute_force_table(&c)?);
        for (a, b) in ts.iter().zip(&tc) {
            case.check(close(*a, *b, 1e-10, 0.0), || format!("unrolled {a} vs {b}"), || vec![("circuit", cjson(&c))]);
        }
    }
    Ok(())
}
