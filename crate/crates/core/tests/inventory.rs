use drmic_core::ambiguity::WassersteinSet;
use drmic_core::inventory_bench::{run_closed_loop, run_open_loop, InventorySpec};
use drmic_core::lifting::{DisturbanceSpace, Lifting};
use drmic_core::reformulation::{build_wasserstein, solve, Instance, ReformOptions};
use drmic_core::system_model::CompileOptions;
use drmic_milp::{MilpOptions, SolveStatus};

/// Cheapest plan for a known demand path: every lot pattern, each with the
/// smallest orders that keep the inventory nonnegative.
fn deterministic_optimum(spec: &InventorySpec, demand: &[f64]) -> f64 {
    let k = spec.lot_sizes.len();
    let t = demand.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << (k * t)) {
        let mut x = spec.x0;
        let mut cost = 0.0;
        for (s, &xi) in demand.iter().enumerate() {
            let mut arrivals = 0.0;
            for j in 0..k {
                if mask >> (s * k + j) & 1 == 1 {
                    arrivals += spec.lot_sizes[j];
                    cost += spec.lot_prices[j] * spec.lot_sizes[j];
                }
            }
            let u = (xi - x - arrivals).max(0.0);
            x += u + arrivals - xi;
            cost += spec.booking_cost * u + spec.holding_cost * x;
        }
        best = best.min(cost);
    }
    best
}

#[test]
fn known_demand_matches_deterministic_plan() {
    for (x0, demand) in [(0.0, [50.0, 30.0]), (10.0, [80.0, 20.0]), (65.0, [20.0, 95.0])] {
        let spec = InventorySpec {
            x0,
            ..InventorySpec::default()
        };
        let sys = spec.system(2, x0);
        let space = DisturbanceSpace::new(2, 1, demand.to_vec(), demand.to_vec()).unwrap();
        let lifting = Lifting::equal_division(space.clone(), 1).unwrap();
        let set = WassersteinSet::new(0.0, vec![demand.to_vec()], &space).unwrap();
        let inst = Instance::new(sys, lifting, &CompileOptions::default()).unwrap();
        let r = build_wasserstein(&inst, &set, &ReformOptions::default()).unwrap();
        let sol = solve(&r, &MilpOptions { gap: 0.0, ..MilpOptions::default() }).unwrap();
        assert_eq!(sol.status(), SolveStatus::Optimal);
        let expected = deterministic_optimum(&spec, &demand);
        assert!((sol.objective().unwrap() - expected).abs() <= 1e-7, "{demand:?}: {:?} vs {expected}", sol.objective());
    }
}

#[test]
fn open_loop_objective_is_certified() {
    let spec = InventorySpec {
        samples: 8,
        segments: 2,
        seed: 4,
        ..InventorySpec::default()
    };
    let r = run_open_loop(&spec, &MilpOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    let obj = r.objective.unwrap();
    let oracle = r.oracle_value.unwrap();
    assert!(obj >= oracle - 1e-6, "{obj} vs {oracle}");
    assert!(obj <= oracle + (obj - r.bound).abs() + 1e-6, "{obj} vs {oracle}");
    let robust = r.robust.unwrap();
    assert!(robust.max_residual <= 1e-7);
    assert_eq!(robust.sampled_violations, 0);
}

#[test]
fn fixed_seed_reproduces_reports() {
    let spec = InventorySpec {
        samples: 6,
        segments: 2,
        seed: 9,
        ..InventorySpec::default()
    };
    let a = run_open_loop(&spec, &MilpOptions::default()).unwrap();
    let b = run_open_loop(&spec, &MilpOptions::default()).unwrap();
    assert_eq!(a.objective.map(f64::to_bits), b.objective.map(f64::to_bits));
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.theta.to_bits(), b.theta.to_bits());

    let c = run_closed_loop(&spec, 3, 5, &MilpOptions::default(), Some(2)).unwrap();
    let d = run_closed_loop(&spec, 3, 5, &MilpOptions::default(), Some(1)).unwrap();
    assert_eq!(c, d);
}

#[test]
fn zero_variance_demand_gives_identical_simulations() {
    let spec = InventorySpec {
        samples: 4,
        segments: 2,
        std_dev: 0.0,
        ..InventorySpec::default()
    };
    let r = run_closed_loop(&spec, 4, 3, &MilpOptions::default(), None).unwrap();
    assert_eq!(r.sims.len(), 4);
    for s in &r.sims {
        assert!(s.error.is_none());
        assert_eq!(s.total_cost.to_bits(), r.sims[0].total_cost.to_bits());
        assert_eq!(s.demands, r.sims[0].demands);
    }
    assert_eq!(r.std_dev, 0.0);
}

#[test]
fn closed_loop_trajectories_are_feasible() {
    let spec = InventorySpec {
        horizon: 3,
        samples: 6,
        segments: 2,
        seed: 2,
        ..InventorySpec::default()
    };
    let r = run_closed_loop(&spec, 5, 11, &MilpOptions::default(), None).unwrap();
    for s in &r.sims {
        assert!(s.error.is_none(), "{:?}", s.error);
        assert_eq!(s.steps_solved, spec.horizon);
        assert!(s.inventory.iter().all(|&x| x >= 0.0), "{:?}", s.inventory);
        assert!(s.orders.iter().all(|&u| u >= 0.0));
        for lots in &s.lots {
            assert!(lots.iter().all(|&g| g == 0.0 || g == 1.0), "{lots:?}");
        }
        let (l, v) = spec.support;
        assert!(s.demands.iter().all(|&d| (l..=v).contains(&d)));
    }
}
