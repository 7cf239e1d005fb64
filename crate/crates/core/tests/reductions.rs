use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use socs_core::circuit::{check_compatible, structured_decomposable, CircuitBuilder, Field};
use socs_core::compose::{socs_sum, square};
use socs_core::eval::{evaluate, partition_function};
use socs_core::oracle::{random_circuit, Assignments, RandomCircuitSpec, RandomLeaves};
use socs_core::reductions::*;
use socs_core::region::{random_binary_tree, RegionNode};
use socs_core::variable::{numbered, Domain, Variable};
use socs_core::{Error, InputFunction};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_mps(rng: &mut ChaCha8Rng, d: usize, v: usize, r: usize, complex: bool) -> Mps {
    let z = |rng: &mut ChaCha8Rng| C64::new(normal(rng), if complex { normal(rng) } else { 0.0 });
    let mut tensors = Vec::new();
    for j in 0..d {
        if j == 0 || j == d - 1 {
            tensors.push(Core::Matrix((0..v).map(|_| (0..r).map(|_| z(rng)).collect()).collect()));
        } else {
            tensors.push(Core::Tensor(
                (0..v).map(|_| (0..r).map(|_| (0..r).map(|_| z(rng)).collect()).collect()).collect(),
            ));
        }
    }
    Mps { field: if complex { Field::Complex } else { Field::Real }, d, v, r, tensors }
}

#[test]
fn mps_rank_one_example() {
    let m = Mps::from_json_str(
        r#"{"field": "real", "d": 2, "v": 2, "r": 1, "tensors": [[[1], [2]], [[3], [4]]]}"#,
    )
    .unwrap();
    let c = mps_to_circuit(&m).unwrap();
    assert_eq!(evaluate(&c, &[0.0, 0.0]).unwrap().re, 3.0);
    assert_eq!(evaluate(&c, &[1.0, 1.0]).unwrap().re, 8.0);
    assert_eq!(m.contract(&[1, 0]), C64::new(6.0, 0.0));
}

#[test]
fn mps_json_round_trip_and_shape_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = random_mps(&mut rng, 4, 3, 2, true);
    let s = serde_json::to_string(&m).unwrap();
    assert_eq!(Mps::from_json_str(&s).unwrap(), m);
    let bad = r#"{"field": "real", "d": 2, "v": 2, "r": 2, "tensors": [[[1, 2], [3]], [[3, 1], [4, 1]]]}"#;
    assert!(matches!(Mps::from_json_str(bad), Err(Error::Schema(_))));
    let bad = r#"{"field": "real", "d": 3, "v": 2, "r": 1, "tensors": [[[1], [2]], [[3], [4]]]}"#;
    assert!(Mps::from_json_str(bad).is_err());
}

#[test]
fn born_machine_matches_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = random_mps(&mut rng, 5, 2, 3, true);
    let c = mps_to_circuit(&m).unwrap();
    assert!(structured_decomposable(&c).unwrap());
    let b = born(&m).unwrap();
    let a = Assignments::new(&m.variables()).unwrap();
    let mut z = 0.0;
    for i in 0..a.len() {
        let x = a.decode(i);
        let xi: Vec<usize> = x.iter().map(|&v| v as usize).collect();
        let want = m.contract(&xi).norm_sqr();
        z += want;
        let got = evaluate(&b, &x).unwrap();
        assert!(close(got.re, want, 1e-9) && got.im.abs() < 1e-9 * want.max(1.0));
    }
    assert!(close(partition_function(&b).unwrap().re, z, 1e-9));
}

#[test]
fn rank_one_complex_mps_factorizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = random_mps(&mut rng, 3, 3, 1, true);
    let b = born(&m).unwrap();
    let x = [2.0, 0.0, 1.0];
    let cores: Vec<C64> = vec![
        match &m.tensors[0] { Core::Matrix(t) => t[2][0], _ => unreachable!() },
        match &m.tensors[1] { Core::Tensor(t) => t[0][0][0], _ => unreachable!() },
        match &m.tensors[2] { Core::Matrix(t) => t[1][0], _ => unreachable!() },
    ];
    let want: f64 = cores.iter().map(|z| z.norm_sqr()).product();
    assert!(close(evaluate(&b, &x).unwrap().re, want, 1e-12));
}

fn hyper(rng: &mut ChaCha8Rng, dim: usize) -> Hyper {
    Hyper((0..dim).map(|_| normal(rng)).collect())
}

#[test]
fn cayley_dickson_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for omega in 0..4 {
        let dim = 1 << omega;
        for _ in 0..20 {
            let (x, y) = (hyper(&mut rng, dim), hyper(&mut rng, dim));
            let lhs = x.mul(&y).conj();
            let rhs = y.conj().mul(&x.conj());
            for (a, b) in lhs.0.iter().zip(&rhs.0) {
                assert!((a - b).abs() < 1e-12);
            }
            let n = x.conj().mul(&x);
            assert!((n.0[0] - x.norm_sqr()).abs() < 1e-12);
            assert!(n.0[1..].iter().all(|v| v.abs() < 1e-12));
        }
    }
    // Quaternions: i j = k, j i = -k.
    let e = |k: usize| {
        let mut v = vec![0.0; 4];
        v[k] = 1.0;
        Hyper(v)
    };
    assert_eq!(e(1).mul(&e(2)), e(3));
    assert_eq!(e(2).mul(&e(1)), e(3).neg());
    // Complex numbers: the usual product.
    let p = Hyper(vec![1.0, 2.0]).mul(&Hyper(vec![3.0, -1.0]));
    assert_eq!(p, Hyper(vec![5.0, 5.0]));
}

#[test]
fn decompose_base_cases() {
    let vars = numbered(1, Domain::Boolean);
    let mut b = CircuitBuilder::new(vars.clone());
    let one = b.input(0, InputFunction::one(&Domain::Boolean)).unwrap();
    let s = b.sum(vec![one], vec![C64::new(1.0, 1.0)]).unwrap();
    let c = b.finish(s).unwrap();
    let parts = complex_decompose(&c).unwrap();
    assert_eq!(parts.len(), 2);
    for x in [0.0, 1.0] {
        assert_eq!(evaluate(&parts[0], &[x]).unwrap().re, 1.0);
        assert_eq!(evaluate(&parts[1], &[x]).unwrap().re, 1.0);
    }
    let sq = socs_sum(parts, None).unwrap();
    assert_eq!(evaluate(sq.circuit(), &[0.0]).unwrap().re, 2.0);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let vt = random_binary_tree(3, 0).unwrap().root;
    let real = random_circuit(&numbered(3, Domain::Boolean), &vt, &RandomCircuitSpec::default(), &mut rng).unwrap();
    let h = HyperCircuit::from_circuit(&real, 0).unwrap();
    let parts = hypercomplex_decompose(&h).unwrap();
    assert_eq!(parts.len(), 1);
    for i in 0..8 {
        let x = Assignments::new(real.variables()).unwrap().decode(i);
        assert!(close(evaluate(&parts[0], &x).unwrap().re, evaluate(&real, &x).unwrap().re, 1e-12));
    }
}

#[test]
fn complex_square_is_sum_of_compatible_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let vars = numbered(6, Domain::Boolean);
    for trial in 0..10 {
        let vt = random_binary_tree(6, trial).unwrap().root;
        let leaves = if trial % 2 == 0 { RandomLeaves::Embedding } else { RandomLeaves::Indicator };
        let spec = RandomCircuitSpec { complex: true, leaves, ..Default::default() };
        let c = random_circuit(&vars, &vt, &spec, &mut rng).unwrap();
        let parts = complex_decompose(&c).unwrap();
        for p in &parts {
            for q in &parts {
                assert!(check_compatible(p, q).unwrap().compatible);
            }
        }
        let sos = socs_sum(parts, None).unwrap();
        let sq = square(&c).unwrap();
        let a = Assignments::new(&vars).unwrap();
        for i in 0..a.len() {
            let x = a.decode(i);
            let want = evaluate(&c, &x).unwrap().norm_sqr();
            assert!(close(evaluate(sos.circuit(), &x).unwrap().re, want, 1e-10));
            assert!(close(evaluate(&sq, &x).unwrap().re, want, 1e-10));
        }
    }
}

/// Random quaternion and octonion circuits over a vtree, mixing weight sides.
fn random_hyper(rng: &mut ChaCha8Rng, omega: u32, vars: &[Variable], vt: &RegionNode) -> HyperCircuit {
    fn go(rng: &mut ChaCha8Rng, dim: usize, node: &RegionNode, units: &mut Vec<HyperUnit>) -> Vec<usize> {
        let k = 2;
        match node {
            RegionNode::Leaf { vars } => {
                assert_eq!(vars.len(), 1);
                (0..k)
                    .map(|_| {
                        units.push(HyperUnit::Input { var: vars[0], table: vec![hyper(rng, dim), hyper(rng, dim)] });
                        units.len() - 1
                    })
                    .collect()
            }
            RegionNode::Split { left, right } => {
                let l = go(rng, dim, left, units);
                let r = go(rng, dim, right, units);
                let mut prods = Vec::new();
                for &a in &l {
                    for &b in &r {
                        units.push(HyperUnit::Product { inputs: if rng.random_bool(0.5) { [a, b] } else { [b, a] } });
                        prods.push(units.len() - 1);
                    }
                }
                (0..k)
                    .map(|_| {
                        let weights = prods
                            .iter()
                            .map(|_| (hyper(rng, dim), if rng.random_bool(0.5) { Side::Left } else { Side::Right }))
                            .collect();
                        units.push(HyperUnit::Sum { inputs: prods.clone(), weights });
                        units.len() - 1
                    })
                    .collect()
            }
        }
    }
    let mut units = Vec::new();
    let outs = go(rng, 1 << omega, vt, &mut units);
    HyperCircuit { omega, variables: vars.to_vec(), units, output: outs[0] }
}

#[test]
fn quaternion_and_octonion_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let vars = numbered(4, Domain::Boolean);
    for omega in [2u32, 3] {
        for seed in 0..2 {
            let vt = random_binary_tree(4, seed).unwrap().root;
            let h = random_hyper(&mut rng, omega, &vars, &vt);
            let parts = hypercomplex_decompose(&h).unwrap();
            assert_eq!(parts.len(), 1 << omega);
            for p in &parts {
                assert!(check_compatible(p, &parts[0]).unwrap().compatible);
            }
            let sos = if omega == 2 { Some(socs_sum(parts.clone(), None).unwrap()) } else { None };
            let a = Assignments::new(&vars).unwrap();
            for i in 0..a.len() {
                let x = a.decode(i);
                let want = h.eval_output(&x);
                let mut sq = 0.0;
                for (k, p) in parts.iter().enumerate() {
                    let got = evaluate(p, &x).unwrap().re;
                    assert!((got - want.0[k]).abs() < 1e-9 * want.norm_sqr().sqrt().max(1.0), "omega {omega} part {k}");
                    sq += got * got;
                }
                assert!(close(sq, want.norm_sqr(), 1e-9));
                if let Some(s) = &sos {
                    assert!(close(evaluate(s.circuit(), &x).unwrap().re, want.norm_sqr(), 1e-9));
                }
            }
        }
    }
}

fn indicator_pair(vars: &[Variable], w: [f64; 2]) -> socs_core::Circuit {
    let mut b = CircuitBuilder::new(vars.to_vec());
    let a0 = b.input(0, InputFunction::indicator(0)).unwrap();
    let a1 = b.input(0, InputFunction::indicator(1)).unwrap();
    let s = b.sum_real(vec![a0, a1], &w).unwrap();
    b.finish(s).unwrap()
}

#[test]
fn psd_examples() {
    let vars = numbered(1, Domain::Boolean);
    let c1 = indicator_pair(&vars, [1.0, 2.0]);
    let c2 = indicator_pair(&vars, [-1.0, 3.0]);
    let p = PsdModel::new(vec![c1.clone(), c2.clone()], vec![vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
    let s = psd_to_socs(&p).unwrap();
    assert_eq!(s.num_squares(), 2);
    for x in [0.0, 1.0] {
        let v1 = evaluate(&c1, &[x]).unwrap().re;
        let v2 = evaluate(&c2, &[x]).unwrap().re;
        let want = (2.0 * v1).powi(2) + (3.0 * v2).powi(2);
        assert!(close(evaluate(s.circuit(), &[x]).unwrap().re, want, 1e-12));
    }
    let p = PsdModel::new(vec![c1.clone(), c2.clone()], vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let s = psd_to_socs(&p).unwrap();
    assert_eq!(s.num_squares(), 1);
    for x in [0.0, 1.0] {
        let want = p.eval(&[x]).unwrap();
        let sum = evaluate(&c1, &[x]).unwrap().re + evaluate(&c2, &[x]).unwrap().re;
        assert!(close(want, sum * sum, 1e-12));
        assert!(close(evaluate(s.circuit(), &[x]).unwrap().re, want, 1e-12));
    }
    let bad = PsdModel::new(vec![c1.clone(), c2.clone()], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    assert!(matches!(psd_to_socs(&bad), Err(Error::NotPsd(_))));
    assert!(matches!(
        PsdModel::new(vec![c1, c2], vec![vec![1.0, 0.5], vec![0.0, 1.0]]),
        Err(Error::NotPsd(_))
    ));
}

#[test]
fn psd_round_trip_is_pointwise_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let vars = numbered(4, Domain::Boolean);
    let vt = random_binary_tree(4, 3).unwrap().root;
    let comps: Vec<_> = (0..3)
        .map(|_| random_circuit(&vars, &vt, &RandomCircuitSpec::default(), &mut rng).unwrap())
        .collect();
    let s = socs_sum(comps, Some(vec![1.0, 2.0, 0.5])).unwrap();
    let p = socs_to_psd(&s).unwrap();
    let back = psd_to_socs(&p).unwrap();
    let a = Assignments::new(&vars).unwrap();
    for i in 0..a.len() {
        let x = a.decode(i);
        let want = evaluate(s.circuit(), &x).unwrap().re;
        assert!(close(p.eval(&x).unwrap(), want, 1e-12));
        assert!(close(evaluate(back.circuit(), &x).unwrap().re, want, 1e-10));
    }
    let text = p.to_json_string();
    let p2 = PsdModel::from_json_str(&text).unwrap();
    assert_eq!(p2.matrix, p.matrix);
}

fn snefy_fixture(rng: &mut ChaCha8Rng, sigma: Activation, r: usize, s: usize) -> SnefySpec {
    let variables = vec![Variable::new("U", Domain::Real), Variable::new("B", Domain::Categorical(3))];
    let base = vec![
        BaseMeasure::Gaussian { mean: 0.3, std: 1.2 },
        BaseMeasure::Table { values: vec![0.2, 0.5, 0.3] },
    ];
    let stats = vec![
        Statistic::Polynomial { degree: 2 },
        Statistic::Table { values: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]] },
    ];
    let mut g = |scale: f64| scale * normal(rng);
    SnefySpec {
        sigma,
        variables,
        base,
        stats,
        v: (0..r).map(|_| (0..s).map(|_| g(1.0)).collect()).collect(),
        // Keep the x^2 weight small so every product of leaves stays integrable.
        w: (0..s).map(|_| vec![g(0.5), g(0.05), g(0.5), g(0.5)]).collect(),
        b: (0..s).map(|_| g(0.5)).collect(),
    }
}

#[test]
fn snefy_trivial_cases() {
    let variables = vec![Variable::new("U", Domain::Real)];
    let spec = SnefySpec {
        sigma: Activation::Exp,
        variables,
        base: vec![BaseMeasure::Gaussian { mean: 0.0, std: 1.0 }],
        stats: vec![Statistic::Polynomial { degree: 1 }],
        v: vec![vec![1.0]],
        w: vec![vec![0.0]],
        b: vec![0.0],
    };
    let c = snefy_to_socs(&spec).unwrap();
    for x in [-1.0, 0.0, 2.5] {
        let mu = InputFunction::gaussian(0.0, 1.0).eval(x).re;
        assert!(close(evaluate(&c, &[x]).unwrap().re, mu, 1e-12));
    }
    let mut spec = spec;
    spec.sigma = Activation::Cos;
    spec.v = vec![vec![0.5, 1.5]];
    spec.w = vec![vec![0.0], vec![0.0]];
    spec.b = vec![0.0, 0.0];
    let c = snefy_to_socs(&spec).unwrap();
    let mu = InputFunction::gaussian(0.0, 1.0).eval(0.7).re;
    assert!(close(evaluate(&c, &[0.7]).unwrap().re, mu * 4.0, 1e-12));
}

#[test]
fn snefy_matches_network_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for sigma in [Activation::Exp, Activation::Cos] {
        let spec = snefy_fixture(&mut rng, sigma, 2, 4);
        let c = snefy_to_socs(&spec).unwrap();
        for _ in 0..1000 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(0..3) as f64];
            let want = spec.eval(&x);
            let got = evaluate(&c, &x).unwrap();
            assert!(close(got.re, want, 1e-6), "{sigma:?} at {x:?}: {got} vs {want}");
            assert!(got.im.abs() <= 1e-6 * want.abs().max(1e-12));
        }
        let z = partition_function(&c).unwrap();
        assert!(z.re > 0.0 && z.im.abs() < 1e-9 * z.re);
    }
    let text = serde_json::to_string(&snefy_fixture(&mut rng, Activation::Exp, 1, 2)).unwrap();
    assert!(SnefySpec::from_json_str(&text).is_ok());
    assert!(SnefySpec::from_json_str(&text.replace("\"exp\"", "\"tanh\"")).is_err());
}

#[test]
fn unroll_examples() {
    let vars = numbered(1, Domain::Boolean);
    let c = indicator_pair(&vars, [0.5, 0.5]);
    let s = unroll_to_sos(&c, DEFAULT_UNROLL_CAP).unwrap();
    assert_eq!(s.num_squares(), 2);
    for x in [0.0, 1.0] {
        assert!(close(evaluate(s.circuit(), &[x]).unwrap().re, 0.5, 1e-15));
    }
    // Deterministic chain: one induced sub-circuit.
    let vars = numbered(3, Domain::Boolean);
    let mut b = CircuitBuilder::new(vars.clone());
    let l: Vec<_> = (0..3).map(|v| b.input(v, InputFunction::indicator(1)).unwrap()).collect();
    let p = b.product(&l).unwrap();
    let root = b.sum_real(vec![p], &[2.0]).unwrap();
    let c = b.finish(root).unwrap();
    let s = unroll_to_sos(&c, DEFAULT_UNROLL_CAP).unwrap();
    assert_eq!(s.num_squares(), 1);
    assert!(close(evaluate(s.circuit(), &[1.0, 1.0, 1.0]).unwrap().re, 2.0, 1e-15));
}

#[test]
fn unroll_random_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vars = numbered(6, Domain::Boolean);
    let spec = RandomCircuitSpec { complex: false, signed: false, leaves: RandomLeaves::Indicator, max_units: 2 };
    let c = random_circuit(&vars, &random_binary_tree(6, 4).unwrap().root, &spec, &mut rng).unwrap();
    let s = unroll_to_sos(&c, DEFAULT_UNROLL_CAP).unwrap();
    assert!(s.num_squares() <= 64);
    let a = Assignments::new(&vars).unwrap();
    for i in 0..a.len() {
        let x = a.decode(i);
        assert!(close(evaluate(s.circuit(), &x).unwrap().re, evaluate(&c, &x).unwrap().re, 1e-10));
    }
    assert!(matches!(unroll_to_sos(&c, 3), Err(Error::BudgetExceeded(_))));
}
