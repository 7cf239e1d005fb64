use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use socs_core::compose::{condition, multiply, square};
use socs_core::eval::{evaluate, evaluate_mode, marginalize, Mode};
use socs_core::logc::{logsumexp_complex, LogC};
use socs_core::oracle::{brute_force_table, random_circuit, Assignments, RandomCircuitSpec, RandomLeaves};
use socs_core::region::random_binary_tree;
use socs_core::variable::numbered;
use socs_core::{Circuit, Domain, C64};

fn circuit_pair(n: usize, seed: u64, complex: bool) -> (Circuit, Circuit) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = numbered(n, Domain::Boolean);
    let vt = random_binary_tree(n, seed).unwrap().root;
    let spec = RandomCircuitSpec { complex, signed: true, leaves: RandomLeaves::Embedding, max_units: 2 };
    let a = random_circuit(&vars, &vt, &spec, &mut rng).unwrap();
    let b = random_circuit(&vars, &vt, &spec, &mut rng).unwrap();
    (a, b)
}

fn close(a: C64, b: C64, scale: f64) -> bool {
    (a - b).norm() <= 1e-10 * a.norm().max(b.norm()).max(scale)
}

fn max_norm(t: &[C64]) -> f64 {
    t.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

const SHIFT: i64 = 1200;

fn to_fixed(x: f64) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let b = x.to_bits();
    let exp = ((b >> 52) & 0x7ff) as i64;
    let frac = b & ((1u64 << 52) - 1);
    let (mant, e2) = if exp == 0 { (frac, -1074) } else { (frac | (1 << 52), exp - 1075) };
    let m = BigInt::from(mant) << ((e2 + SHIFT) as usize);
    if x < 0.0 {
        -m
    } else {
        m
    }
}

fn from_fixed(m: &BigInt) -> f64 {
    let drop = m.bits().saturating_sub(62);
    let p = drop as i32 - SHIFT as i32;
    let v = (m.abs() >> drop as usize).to_f64().unwrap() * 2f64.powi(p / 2) * 2f64.powi(p - p / 2);
    if m.is_negative() {
        -v
    } else {
        v
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn product_is_pointwise(n in 1usize..7, seed in any::<u64>(), complex in any::<bool>()) {
        let (a, b) = circuit_pair(n, seed, complex);
        let p = multiply(&a, &b).unwrap();
        let (ta, tb, tp) = (brute_force_table(&a).unwrap(), brute_force_table(&b).unwrap(), brute_force_table(&p).unwrap());
        let want: Vec<C64> = ta.iter().zip(&tb).map(|(x, y)| x * y).collect();
        let scale = 1e-6 * max_norm(&want);
        for (g, w) in tp.iter().zip(&want) {
            prop_assert!(close(*g, *w, scale), "{} vs {}", g, w);
        }
    }

    #[test]
    fn square_is_nonnegative_and_log_modes_agree(n in 1usize..7, seed in any::<u64>()) {
        let (a, _) = circuit_pair(n, seed, true);
        let sq = square(&a).unwrap();
        let all = Assignments::new(sq.variables()).unwrap();
        let scale = 1e-6 * max_norm(&brute_force_table(&sq).unwrap());
        for i in 0..all.len() {
            let x = all.decode(i);
            let lin = evaluate(&sq, &x).unwrap();
            prop_assert!(lin.re >= -scale && lin.im.abs() <= 1e-10 * lin.re.abs().max(scale));
            let lc = evaluate_mode(&sq, &x, Mode::LogComplex).unwrap();
            prop_assert!(close(lc, lin, scale));
        }
    }

    #[test]
    fn conditioning_preserves_values(n in 2usize..7, seed in any::<u64>(), mask in any::<u32>(), vals in any::<u32>()) {
        let (a, _) = circuit_pair(n, seed, false);
        let mut e: Vec<Option<f64>> = (0..n).map(|k| (mask >> k & 1 == 1).then(|| (vals >> k & 1) as f64)).collect();
        if e.iter().all(Option::is_some) {
            e[0] = None;
        }
        let c = condition(&a, &e).unwrap();
        let scale = 1e-6 * max_norm(&brute_force_table(&a).unwrap());
        let all = Assignments::new(a.variables()).unwrap();
        for i in 0..all.len() {
            let mut x = all.decode(i);
            for (xi, ei) in x.iter_mut().zip(&e) {
                if let Some(v) = ei {
                    *xi = *v;
                }
            }
            prop_assert!(close(evaluate(&c, &x).unwrap(), evaluate(&a, &x).unwrap(), scale));
        }
        prop_assert!(close(marginalize(&c, &e).unwrap(), marginalize(&a, &e).unwrap(), scale));
    }

    #[test]
    fn logsumexp_matches_exact_sum(
        terms in prop::collection::vec((-400.0f64..400.0, -3.2f64..3.2), 1..300)
    ) {
        let logs: Vec<LogC> = terms.iter().map(|&(m, a)| LogC::from_complex(LogC::new(m, a).to_complex())).collect();
        let (mut re, mut im) = (BigInt::zero(), BigInt::zero());
        let mut abs_sum = 0.0;
        for t in &logs {
            let z = t.to_complex();
            re += to_fixed(z.re);
            im += to_fixed(z.im);
            abs_sum += z.norm();
        }
        let want = C64::new(from_fixed(&re), from_fixed(&im));
        let got = logsumexp_complex(&logs).to_complex();
        prop_assert!((got - want).norm() <= 1e-12 * abs_sum, "{} vs {}", got, want);
    }
}
