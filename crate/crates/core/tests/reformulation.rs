mod common;

use drmic_core::ambiguity::{EventWiseSet, MixedMomentSet, Scenario, WassersteinSet};
use drmic_core::lifting::{DisturbanceSpace, Lifting};
use drmic_core::reformulation::{build_event_wise, build_mixed_moment, build_wasserstein, solve, Instance, ReformOptions, Reformulation};
use drmic_core::system_model::{evaluate_policy, CompileOptions, SystemModel, Term};
use drmic_milp::{solve_lp, LpStatus, MilpOptions, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exact() -> MilpOptions {
    MilpOptions {
        gap: 0.0,
        ..MilpOptions::default()
    }
}

fn optimum(r: &Reformulation) -> f64 {
    let sol = solve(r, &exact()).unwrap();
    assert_eq!(sol.status(), SolveStatus::Optimal);
    sol.objective().unwrap()
}

const CONSTRAINED: common::Shape = common::Shape {
    max_horizon: 2,
    max_nxi: 1,
    max_p: 3,
    max_pieces: 3,
    constraints: true,
    integers: true,
};

#[test]
fn zero_radius_fixed_policy_is_the_sample_average() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (sys, lifting) = common::random_system(&mut rng, &common::SMALL, None);
        let inst = Instance::new(sys.clone(), lifting.clone(), &CompileOptions::default()).unwrap();
        let samples = common::random_samples(&mut rng, lifting.space(), 2);
        let set = WassersteinSet::new(0.0, samples.clone(), lifting.space()).unwrap();
        let values = common::random_policy(&mut rng, &inst.layout);
        let mut r = build_wasserstein(&inst, &set, &ReformOptions::default()).unwrap();
        r.fix_policy(0, &values).unwrap();
        let lp = solve_lp(&r.model).unwrap();
        assert_eq!(lp.status, LpStatus::Optimal);
        let direct: f64 = samples
            .iter()
            .map(|s| evaluate_policy(&sys, &lifting, &inst.layout, &values, s).unwrap().total_cost)
            .sum::<f64>()
            / 2.0;
        assert!((lp.objective - direct).abs() <= 1e-9, "seed {seed}: {} vs {direct}", lp.objective);
    }
}

fn random_case(seed: u64) -> (Instance, WassersteinSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sys, lifting) = common::random_system(&mut rng, &CONSTRAINED, None);
    let n = rng.random_range(1..=3);
    let theta = rng.random_range(0.0..1.0);
    let samples = common::random_samples(&mut rng, lifting.space(), n);
    let set = WassersteinSet::new(theta, samples, lifting.space()).unwrap();
    (Instance::new(sys, lifting, &CompileOptions::default()).unwrap(), set)
}

#[test]
fn two_equal_scenarios_match_one() {
    for seed in 0..5 {
        let (inst, ball) = random_case(100 + seed);
        let sc = |p| Scenario {
            probability: p,
            lifting: inst.lifting.clone(),
            ball: ball.clone(),
        };
        let opts = ReformOptions::default();
        let one = optimum(&build_event_wise(std::slice::from_ref(&inst), &EventWiseSet::new(vec![sc(1.0)]).unwrap(), &opts).unwrap());
        let two = optimum(
            &build_event_wise(&[inst.clone(), inst.clone()], &EventWiseSet::new(vec![sc(0.5), sc(0.5)]).unwrap(), &opts).unwrap(),
        );
        assert!((one - two).abs() <= 1e-8, "seed {seed}: {one} vs {two}");
    }
}

#[test]
fn zero_weight_scenario_data_is_ignored() {
    let (inst, ball) = random_case(200);
    let space = inst.lifting.space().clone();
    let opts = ReformOptions::default();
    let first = Scenario {
        probability: 1.0,
        lifting: inst.lifting.clone(),
        ball,
    };
    let mut values = Vec::new();
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let p = rng.random_range(1..=3);
        let lifting = Lifting::equal_division(space.clone(), p).unwrap();
        let n = rng.random_range(1..=4);
        let samples = common::random_samples(&mut rng, &space, n);
        let second = Scenario {
            probability: 0.0,
            lifting: lifting.clone(),
            ball: WassersteinSet::new(rng.random_range(0.0..2.0), samples, &space).unwrap(),
        };
        let other = Instance::new(inst.system.clone(), lifting, &CompileOptions::default()).unwrap();
        let set = EventWiseSet::new(vec![first.clone(), second]).unwrap();
        values.push(optimum(&build_event_wise(&[inst.clone(), other], &set, &opts).unwrap()));
    }
    assert!(values.iter().all(|v| v.to_bits() == values[0].to_bits()), "{values:?}");
}

#[test]
fn vacuous_moment_bounds_need_no_tilt() {
    for seed in 0..5 {
        let (inst, ball) = random_case(400 + seed);
        let space = inst.lifting.space();
        let set = MixedMomentSet::new(ball.clone(), space.lower().to_vec(), space.upper().to_vec(), space).unwrap();
        let opts = ReformOptions::default();
        let mut r = build_mixed_moment(&inst, &set, &opts).unwrap();
        let free = optimum(&r);
        for j in 0..r.model.num_vars() {
            if r.model.var(j).name.starts_with("beta_") {
                r.model.set_bounds(j, 0.0, 0.0);
            }
        }
        let pinned = optimum(&r);
        let wasserstein = optimum(&build_wasserstein(&inst, &ball, &opts).unwrap());
        assert!((free - pinned).abs() <= 1e-8, "seed {seed}: {free} vs {pinned}");
        assert!((free - wasserstein).abs() <= 1e-8, "seed {seed}: {free} vs {wasserstein}");
    }
}

fn scalar_system(constraint: Option<(f64, f64)>) -> (SystemModel, Lifting) {
    let mut sys = SystemModel::new(1, 1, 1, 0, 1);
    sys.stages[0].b.set(0, 0, 1.0);
    sys.stages[0].d.set(0, 0, 1.0);
    sys.stages[0].cost[0].x = vec![1.0];
    sys.add_constraint("u_nonneg", vec![(Term::Control { stage: 0, index: 0 }, -1.0)], 0.0);
    if let Some((coeff, rhs)) = constraint {
        sys.add_constraint("extra", vec![(Term::Control { stage: 0, index: 0 }, coeff)], rhs);
    }
    let space = DisturbanceSpace::uniform(1, 1, 0.0, 1.0).unwrap();
    (sys, Lifting::equal_division(space, 2).unwrap())
}

#[test]
fn robust_constraint_outcomes() {
    let check = |constraint, expected| {
        let (sys, lifting) = scalar_system(constraint);
        let set = WassersteinSet::new(0.1, vec![vec![0.5]], lifting.space()).unwrap();
        let inst = Instance::new(sys, lifting, &CompileOptions::default()).unwrap();
        let sol = solve(&build_wasserstein(&inst, &set, &ReformOptions::default()).unwrap(), &exact()).unwrap();
        assert_eq!(sol.status(), expected, "{constraint:?}");
        sol
    };
    // A row with no coefficients and slack 1 changes nothing.
    let vacuous = check(Some((0.0, 1.0)), SolveStatus::Optimal);
    let plain = check(None, SolveStatus::Optimal);
    assert!((vacuous.objective().unwrap() - plain.objective().unwrap()).abs() < 1e-12);
    // u ≤ −1 contradicts u ≥ 0.
    check(Some((1.0, -1.0)), SolveStatus::Infeasible);
    // The optimal order is zero everywhere; x = ξ costs its worst-case mean.
    assert!((plain.objective().unwrap() - 0.6).abs() < 1e-9);
}
