use conecoord_core::instances::{gen_ensvm, SyntheticSaddle};
use conecoord_core::model::max_step_bound;
use conecoord_core::solver::{
    spdc_block_update, spdc_dual_update, AverageStart, SolverState, StopRule, TracePoint,
};
use conecoord_core::{
    run_appal, run_spdc, AugLagParams, BlockModel, Cone, DualBall, SolverConfig, StepSchedule,
};
use proptest::prelude::*;

fn orthant_params(mu: f64) -> AugLagParams {
    AugLagParams::new(1.0, Cone::orthant(1).unwrap(), DualBall::new(mu).unwrap()).unwrap()
}

fn schedule_for<M: BlockModel>(model: &M, offset: f64) -> StepSchedule {
    let cap = max_step_bound(&model.step_constants(), 1.0).unwrap();
    StepSchedule::power_law_scaled(0.6, offset, 0.5, cap).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn block_update_touches_only_its_block(seed in any::<u64>(), blocks in 1usize..6, pick in 0usize..6) {
        let s = SyntheticSaddle::generate(12, seed).unwrap();
        let mut spec = s.problem_spec(blocks).unwrap();
        let par = orthant_params(10.0);
        let mut rng = conecoord_core::rng::Rng::seed_from_u64(seed);
        let state = SolverState::new(&spec, &par, rng.normal_vec(12), vec![0.5], seed).unwrap();
        let block = pick % blocks;
        let next = spdc_block_update(&mut spec, &par, &state, block, 0.05).unwrap();
        for i in 0..blocks {
            if i != block {
                prop_assert_eq!(next.block(i), state.u.block(i));
            }
        }
    }

    #[test]
    fn dual_iterates_stay_in_cone_and_ball(seed in any::<u64>(), mu in 0.1f64..3.0) {
        let s = SyntheticSaddle::generate(6, seed).unwrap();
        let mut spec = s.problem_spec(3).unwrap();
        let par = orthant_params(mu);
        let schedule = schedule_for(&spec, 5.0);
        let config = SolverConfig {
            iterations: 300,
            seed,
            keep_history: true,
            ..Default::default()
        };
        let out = run_spdc(&mut spec, &par, &schedule, &config).unwrap();
        for p in &out.trace.history.unwrap().duals {
            prop_assert!(p[0] >= -1e-12);
            prop_assert!(p[0].abs() <= mu + 1e-12);
        }
    }

    #[test]
    fn single_block_matches_full_update(seed in any::<u64>(), dim in 1usize..8) {
        let s = SyntheticSaddle::generate(dim, seed).unwrap();
        let mut a = s.problem_spec(1).unwrap();
        let mut b = a.clone();
        let par = orthant_params(1e8);
        let schedule = schedule_for(&a, 3.0);
        let config = SolverConfig { iterations: 200, seed, keep_history: true, ..Default::default() };
        let x = run_spdc(&mut a, &par, &schedule, &config).unwrap();
        let y = run_appal(&mut b, &par, &schedule, &config).unwrap();
        let (hx, hy) = (x.trace.history.unwrap(), y.trace.history.unwrap());
        for (u, v) in hx.iterates.iter().zip(&hy.iterates) {
            for (s, t) in u.iter().zip(v) {
                prop_assert!((s - t).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn averages_are_step_weighted_means_of_the_history() {
    let s = SyntheticSaddle::generate(9, 4).unwrap();
    let mut spec = s.problem_spec(3).unwrap();
    let par = orthant_params(10.0);
    let schedule = schedule_for(&spec, 4.0);
    for start in [AverageStart::Initial, AverageStart::FirstIterate] {
        let config = SolverConfig {
            iterations: 400,
            seed: 8,
            keep_history: true,
            average_start: start,
            ..Default::default()
        };
        let out = run_spdc(&mut spec, &par, &schedule, &config).unwrap();
        let h = out.trace.history.as_ref().unwrap();
        let skip = usize::from(start == AverageStart::FirstIterate);
        let mut num = vec![0.0; 9];
        let mut pnum = 0.0;
        let mut den = 0.0;
        for ((u, p), e) in h.iterates.iter().zip(&h.duals).zip(&h.steps).skip(skip) {
            for (n, x) in num.iter_mut().zip(u) {
                *n += e * x;
            }
            pnum += e * p[0];
            den += e;
        }
        for (avg, n) in out.average_u.as_slice().iter().zip(&num) {
            assert!((avg - n / den).abs() <= 1e-12 * (1.0 + avg.abs()));
        }
        assert!((out.average_p[0] - pnum / den).abs() <= 1e-12 * (1.0 + pnum.abs()));
    }
}

#[test]
fn same_seed_same_trace_different_seed_different_blocks() {
    let inst = gen_ensvm(10, 30, 3, 0.4, 2)
        .unwrap()
        .with_blocks(5)
        .unwrap();
    let par = orthant_params(inst.dual_bound());
    let schedule = schedule_for(&inst.fast_model(), 10.0);
    let config = SolverConfig {
        iterations: 1000,
        seed: 4,
        thinning: 7,
        ..Default::default()
    };
    let a = run_spdc(&mut inst.fast_model(), &par, &schedule, &config).unwrap();
    let b = run_spdc(&mut inst.fast_model(), &par, &schedule, &config).unwrap();
    let strip = |t: &conecoord_core::solver::IterationTrace| {
        t.records
            .iter()
            .map(|r| {
                (
                    r.k,
                    r.block,
                    r.eps.to_bits(),
                    r.objective.to_bits(),
                    r.feasibility.to_bits(),
                )
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a.trace), strip(&b.trace));
    assert_eq!(a.average_u, b.average_u);
    let c = run_spdc(
        &mut inst.fast_model(),
        &par,
        &schedule,
        &SolverConfig { seed: 5, ..config },
    )
    .unwrap();
    assert_ne!(strip(&a.trace), strip(&c.trace));
}

#[test]
fn fast_path_matches_generic_path() {
    let inst = gen_ensvm(15, 40, 4, 0.4, 6)
        .unwrap()
        .with_blocks(8)
        .unwrap();
    let par = orthant_params(inst.dual_bound());
    let schedule = schedule_for(&inst.fast_model(), 10.0);
    let config = SolverConfig {
        iterations: 100,
        seed: 1,
        keep_history: true,
        ..Default::default()
    };
    let fast = run_spdc(&mut inst.fast_model(), &par, &schedule, &config).unwrap();
    let generic = run_spdc(&mut inst.problem_spec().unwrap(), &par, &schedule, &config).unwrap();
    let (hf, hg) = (fast.trace.history.unwrap(), generic.trace.history.unwrap());
    assert_eq!(hf.iterates.len(), 101);
    for (u, v) in hf
        .iterates
        .iter()
        .zip(&hg.iterates)
        .chain(hf.duals.iter().zip(&hg.duals))
    {
        for (s, t) in u.iter().zip(v) {
            assert!((s - t).abs() <= 1e-10);
        }
    }
}

#[test]
fn dual_update_matches_instance_formula() {
    let inst = gen_ensvm(8, 16, 2, 0.4, 3).unwrap();
    let par =
        AugLagParams::new(0.7, Cone::orthant(1).unwrap(), DualBall::new(2.5).unwrap()).unwrap();
    let mut rng = conecoord_core::rng::Rng::seed_from_u64(0);
    for _ in 0..200 {
        let u: Vec<f64> = rng.normal_vec(16).iter().map(|x| 0.5 * x).collect();
        let p = rng.uniform_in(0.0, 2.5);
        let generic = spdc_dual_update(&par, &[p], &[inst.theta(&u)]).unwrap();
        let special = conecoord_core::instances::ensvm_dual_update(&inst, &u, p, 0.7, 2.5);
        assert_eq!(generic[0], special);
    }
}

#[test]
fn thinning_keeps_every_tenth_row_and_the_last() {
    let s = SyntheticSaddle::generate(4, 0).unwrap();
    let mut spec = s.problem_spec(2).unwrap();
    let par = orthant_params(10.0);
    let config = SolverConfig {
        iterations: 1000,
        thinning: 10,
        ..Default::default()
    };
    let schedule = schedule_for(&spec, 2.0);
    let out = run_spdc(&mut spec, &par, &schedule, &config).unwrap();
    assert_eq!(out.trace.len(), 101);
    assert_eq!(out.trace.records[0].k, 0);
    assert_eq!(out.trace.last().unwrap().k, 1000);
    assert!(out.trace.last().unwrap().block.is_none());
}

#[test]
fn appal_reaches_the_scalar_kkt_point() {
    // min ½u² s.t. 1 − u ≤ 0, optimum u = 1 with multiplier 1.
    let s = SyntheticSaddle::new(vec![0.0], vec![-1.0], -1.0).unwrap();
    let mut spec = s.problem_spec(1).unwrap();
    let par = AugLagParams::new(1.0, Cone::orthant(1).unwrap(), DualBall::unbounded()).unwrap();
    let cap = max_step_bound(&spec.step_constants(), 1.0).unwrap();
    let config = SolverConfig {
        iterations: 2000,
        trace_point: TracePoint::Current,
        ..Default::default()
    };
    let out = run_appal(
        &mut spec,
        &par,
        &StepSchedule::constant(0.8 * cap, cap).unwrap(),
        &config,
    )
    .unwrap();
    assert!((out.last_u.as_slice()[0] - 1.0).abs() < 1e-9);
    assert!((out.last_p[0] - 1.0).abs() < 1e-9);
}

#[test]
fn stop_rule_ends_the_run_early() {
    let s = SyntheticSaddle::generate(5, 2).unwrap();
    let mut spec = s.problem_spec(1).unwrap();
    let par = orthant_params(10.0);
    let cap = max_step_bound(&spec.step_constants(), 1.0).unwrap();
    let config = SolverConfig {
        iterations: 100_000,
        thinning: 10,
        trace_point: TracePoint::Current,
        stop: Some(StopRule {
            feasibility: 1e-8,
            stationarity: 1e-6,
            patience: 3,
        }),
        ..Default::default()
    };
    let out = run_appal(
        &mut spec,
        &par,
        &StepSchedule::constant(0.8 * cap, cap).unwrap(),
        &config,
    )
    .unwrap();
    assert!(out.stopped_early);
    assert!(out.iterations < 100_000);
    let u = out.last_u.as_slice();
    let gap: f64 = u
        .iter()
        .zip(&s.u_star)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap < 1e-5);
}

#[test]
fn unsafe_step_needs_explicit_opt_in() {
    let s = SyntheticSaddle::generate(3, 1).unwrap();
    let mut spec = s.problem_spec(3).unwrap();
    let par = orthant_params(10.0);
    let cap = max_step_bound(&spec.step_constants(), 1.0).unwrap();
    let schedule = StepSchedule::constant(2.0 * cap, f64::INFINITY).unwrap();
    let config = SolverConfig {
        iterations: 10,
        ..Default::default()
    };
    assert!(matches!(
        run_spdc(&mut spec, &par, &schedule, &config),
        Err(conecoord_core::Error::Config(_))
    ));
    let config = SolverConfig {
        allow_unsafe_step: true,
        ..config
    };
    assert!(run_spdc(&mut spec, &par, &schedule, &config).is_ok());
}
