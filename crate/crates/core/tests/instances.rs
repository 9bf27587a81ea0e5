use conecoord_core::instances::{
    ensvm_block_update, ensvm_block_update_with, gen_ensvm, preset, EnsvmInstance, SocSaddle,
    SyntheticSaddle, UpdateForm, PRESETS,
};
use conecoord_core::rng::Rng;
use proptest::prelude::*;

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-11 {
        let x1 = hi - r * (hi - lo);
        let x2 = lo + r * (hi - lo);
        if f(x1) <= f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    0.5 * (lo + hi)
}

fn block_gradient(inst: &EnsvmInstance, u: &[f64], col: usize) -> f64 {
    (0..inst.m)
        .map(|r| {
            let res: f64 = (0..inst.n).map(|c| inst.a[[r, c]] * u[c]).sum::<f64>() - inst.b[r];
            inst.a[[r, col]] * res
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn closed_form_minimizes_block_subproblem(
        seed in any::<u64>(),
        lambda in 0.0f64..1.0,
        q in 0.0f64..5.0,
        eps in 1e-3f64..0.5,
        block in 0usize..3,
    ) {
        let inst = gen_ensvm(6, 12, 3, lambda, seed).unwrap().with_blocks(3).unwrap();
        let mut rng = Rng::seed_from_u64(seed ^ 1);
        let u = rng.normal_vec(12);
        let x = ensvm_block_update(&inst, &u, block, q, eps).unwrap();
        for (j, col) in inst.layout().range(block).enumerate() {
            let g = block_gradient(&inst, &u, col);
            let f = |t: f64| {
                g * t + q * (lambda * t.abs() + (1.0 - lambda) * t * t) + (t - u[col]).powi(2) / (2.0 * eps)
            };
            let bound = u[col].abs() + eps * (g.abs() + q) + 1.0;
            let best = golden_section(f, -bound, bound);
            prop_assert!((x[j] - best).abs() <= 1e-6);
        }
    }

    #[test]
    fn generator_plants_a_feasible_zero_loss_point(seed in any::<u64>(), s in 1usize..10) {
        let inst = gen_ensvm(7, 10, s.min(10), 0.4, seed).unwrap();
        prop_assert!(inst.theta(&inst.u_true).abs() <= 1e-12);
        prop_assert!(inst.objective(&inst.u_true) <= 1e-24);
        prop_assert_eq!(inst.u_true.iter().filter(|v| **v != 0.0).count(), s.min(10));
    }

    #[test]
    fn synthetic_saddle_satisfies_kkt(seed in any::<u64>(), dim in 1usize..20) {
        let s = SyntheticSaddle::generate(dim, seed).unwrap();
        prop_assert!(s.kkt_residual() <= 1e-10);
        prop_assert!(s.p_star > 0.0);
    }
}

#[test]
fn printed_sign_fails_the_oracle() {
    let inst = gen_ensvm(6, 12, 3, 0.4, 5).unwrap().with_blocks(2).unwrap();
    let mut rng = Rng::seed_from_u64(3);
    let u = rng.normal_vec(12);
    let x = ensvm_block_update_with(&inst, &u, 0, 0.5, 0.1, UpdateForm::AscentSign).unwrap();
    let mut worst = 0.0f64;
    for (j, col) in inst.layout().range(0).enumerate() {
        let g = block_gradient(&inst, &u, col);
        let f = |t: f64| g * t + 0.5 * (0.4 * t.abs() + 0.6 * t * t) + (t - u[col]).powi(2) / 0.2;
        worst = worst.max((x[j] - golden_section(f, -50.0, 50.0)).abs());
    }
    assert!(worst > 1e-6);
}

#[test]
fn scalar_block_examples() {
    // r = 0.5 with threshold 0.2 gives 0.3; |r| below the threshold gives 0.
    use conecoord_core::instances::ensvm_closed_form;
    // With λ = 1 the denominator is 1 and the threshold is ελq.
    let x = ensvm_closed_form(1.0, &[0.5], &[0.0], 2.0, 0.1, UpdateForm::Descent);
    assert!((x[0] - 0.3).abs() < 1e-15);
    let x = ensvm_closed_form(1.0, &[-0.1], &[0.0], 2.0, 0.1, UpdateForm::Descent);
    assert_eq!(x[0], 0.0);
}

#[test]
fn full_support_pure_l1_delta() {
    let inst = gen_ensvm(4, 6, 6, 1.0, 9).unwrap();
    let l1: f64 = inst.u_true.iter().map(|v| v.abs()).sum();
    assert!((inst.delta - l1).abs() <= 1e-15);
}

#[test]
fn json_file_reproduces_the_instance() {
    let inst = gen_ensvm(5, 15, 3, 0.4, 77)
        .unwrap()
        .with_blocks(3)
        .unwrap();
    let text = inst.to_json();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["m"], 5);
    assert_eq!(value["a"].as_array().unwrap().len(), 75);
    assert_eq!(value["a"][16].as_f64().unwrap(), inst.a[[1, 1]]);
    assert_eq!(EnsvmInstance::from_json(&text).unwrap(), inst);
    let mut broken = value.clone();
    broken["extra"] = serde_json::json!(1);
    assert!(EnsvmInstance::from_json(&broken.to_string()).is_err());
}

#[test]
fn presets_use_the_text_dimensions() {
    let p = preset("ensvm-fig1-text").unwrap();
    assert_eq!((p.m, p.n, p.s), (200, 2000, 10));
    assert_eq!(p.blocks, &[5, 10, 50, 100]);
    let p = preset("ensvm-fig2-text").unwrap();
    assert_eq!((p.m, p.n, p.s), (500, 5000, 25));
    let p = preset("ensvm-desk").unwrap();
    assert_eq!(
        (p.m, p.n, p.s, p.lambda, p.blocks[0]),
        (50, 200, 5, 0.4, 10)
    );
    assert!(PRESETS.iter().all(|p| p.s <= p.n));
    assert!(preset("missing").is_none());
}

#[test]
fn uneven_blocks_put_the_remainder_last() {
    let inst = gen_ensvm(3, 10, 2, 0.4, 1).unwrap().with_blocks(3).unwrap();
    assert_eq!(inst.layout().range(0), 0..3);
    assert_eq!(inst.layout().range(2), 6..10);
}

#[test]
fn hand_solved_saddle() {
    let s = SyntheticSaddle::new(vec![2.0], vec![1.0], 1.0).unwrap();
    assert_eq!(s.u_star, vec![1.0]);
    assert_eq!(s.p_star, 1.0);
    assert_eq!(s.kkt_residual(), 0.0);
}

#[test]
fn soc_saddle_pair_is_complementary() {
    for seed in 0..20 {
        let s = SocSaddle::generate(6, seed).unwrap();
        let u = &s.u_star;
        let p = &s.p_star;
        let tail = |v: &[f64]| v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(u[0] >= tail(u) - 1e-12);
        assert!(p[0] >= tail(p) - 1e-12);
        let inner: f64 = u.iter().zip(p).map(|(a, b)| a * b).sum();
        assert!(inner.abs() <= 1e-12);
        // Stationarity of ½‖u − a‖² − ⟨p, u⟩.
        for ((ui, ai), pi) in u.iter().zip(&s.a).zip(p) {
            assert!((ui - ai - pi).abs() <= 1e-12);
        }
    }
}
