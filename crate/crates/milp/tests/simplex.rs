use drmic_milp::{solve_lp, LpOptions, LpSolver, LpStatus, MilpModel, RowSense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lp(seed: u64, n: usize, m: usize) -> MilpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MilpModel::new("lp");
    for j in 0..n {
        let (lo, hi) = match rng.random_range(0..4) {
            0 => (f64::NEG_INFINITY, f64::INFINITY),
            1 => (0.0, f64::INFINITY),
            2 => (f64::NEG_INFINITY, rng.random_range(0.0..5.0)),
            _ => (-rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)),
        };
        let v = model.add_continuous(format!("x{j}"), lo, hi).unwrap();
        model.set_objective(v, rng.random_range(-2.0..2.0));
    }
    for i in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.5) {
                coeffs.push((j, rng.random_range(-3.0..3.0)));
            }
        }
        let sense = [RowSense::Le, RowSense::Ge, RowSense::Eq][rng.random_range(0..3)];
        model.add_row(format!("r{i}"), coeffs, sense, rng.random_range(-4.0..4.0)).unwrap();
    }
    // A box keeps most instances bounded without making them trivial.
    for j in 0..n {
        model.add_row(format!("box{j}"), [(j, 1.0)], RowSense::Le, 20.0).unwrap();
        model.add_row(format!("xob{j}"), [(j, 1.0)], RowSense::Ge, -20.0).unwrap();
    }
    model
}

/// Checks primal feasibility, dual sign conditions and zero duality gap.
fn assert_kkt(model: &MilpModel, x: &[f64], y: &[f64], d: &[f64], obj: f64) {
    let tol = 1e-6;
    assert!(model.max_violation(x) <= 1e-7);
    // Row duals: the objective changes by y_i per unit of rhs_i.
    for (i, row) in model.rows().iter().enumerate() {
        let slack = row.rhs - row.activity(x);
        match row.sense {
            RowSense::Le => assert!(y[i] <= tol && (y[i] * slack).abs() <= tol, "row {i}"),
            RowSense::Ge => assert!(y[i] >= -tol && (y[i] * slack).abs() <= tol, "row {i}"),
            RowSense::Eq => {}
        }
    }
    for (j, var) in model.vars().iter().enumerate() {
        let at_lo = (x[j] - var.lower).abs() <= 1e-7;
        let at_hi = (x[j] - var.upper).abs() <= 1e-7;
        if !at_lo && !at_hi {
            assert!(d[j].abs() <= tol, "var {j} strictly inside bounds has reduced cost {}", d[j]);
        } else if at_lo && !at_hi {
            assert!(d[j] >= -tol, "var {j}");
        } else if at_hi && !at_lo {
            assert!(d[j] <= tol, "var {j}");
        }
        let direct = model.objective()[j] - model.rows().iter().enumerate().map(|(i, r)| {
            r.coeffs.iter().find(|c| c.0 == j).map_or(0.0, |c| c.1) * y[i]
        }).sum::<f64>();
        assert!((direct - d[j]).abs() <= 1e-8);
    }
    // Complementary slackness lets the bound term use the bound the variable sits on.
    let dual_obj: f64 = model.rows().iter().zip(y).map(|(r, yi)| r.rhs * yi).sum::<f64>()
        + model
            .vars()
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if d[j].abs() <= 1e-12 {
                    0.0
                } else if (x[j] - v.lower).abs() <= 1e-7 {
                    d[j] * v.lower
                } else {
                    d[j] * v.upper
                }
            })
            .sum::<f64>();
    assert!((dual_obj - obj).abs() <= 1e-6 * obj.abs().max(1.0), "{dual_obj} vs {obj}");
}

#[test]
fn random_lps_satisfy_optimality_conditions() {
    let mut optimal = 0;
    for seed in 0..200 {
        let n = 2 + (seed as usize % 7);
        let m = 1 + (seed as usize % 5);
        let model = random_lp(seed, n, m);
        let out = solve_lp(&model).unwrap();
        if out.status == LpStatus::Optimal {
            optimal += 1;
            assert_kkt(&model, &out.x, &out.row_duals, &out.reduced_costs, out.objective);
        }
    }
    assert!(optimal > 50);
}

#[test]
fn warm_started_bound_changes_match_cold_solves() {
    for seed in 0..60 {
        let model = random_lp(1000 + seed, 6, 4);
        let mut warm = LpSolver::new(&model, LpOptions::default());
        let first = warm.solve().unwrap();
        if first.status != LpStatus::Optimal {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = rng.random_range(0..6);
        let v = first.x[j];
        let (lo, hi) = if rng.random_bool(0.5) { (v.floor() - 0.5, v - 0.3) } else { (v + 0.3, v.ceil() + 0.5) };
        let (lo, hi) = (lo.max(model.var(j).lower), hi.min(model.var(j).upper));
        if lo > hi {
            continue;
        }
        warm.set_basis(&first.basis);
        warm.set_var_bounds(j, lo, hi);
        let a = warm.solve().unwrap();
        let mut cold_model = model.clone();
        cold_model.set_bounds(j, lo, hi);
        let b = solve_lp(&cold_model).unwrap();
        assert_eq!(a.status, b.status, "seed {seed}");
        if a.status == LpStatus::Optimal {
            assert!((a.objective - b.objective).abs() <= 1e-7, "seed {seed}");
        }
    }
}

#[test]
fn transport_between_two_point_sets() {
    // Mass 1/2 on {0, 1} moved to {0, 3} with cost |x - y|.
    let src = [0.0, 1.0];
    let dst = [0.0, 3.0];
    let mut m = MilpModel::new("transport");
    let mut pi = Vec::new();
    for (a, &x) in src.iter().enumerate() {
        for (b, &y) in dst.iter().enumerate() {
            let v = m.add_continuous(format!("p{a}{b}"), 0.0, f64::INFINITY).unwrap();
            m.set_objective(v, f64::abs(x - y));
            pi.push(v);
        }
    }
    for a in 0..2 {
        m.add_row(format!("s{a}"), [(pi[2 * a], 1.0), (pi[2 * a + 1], 1.0)], RowSense::Eq, 0.5).unwrap();
        m.add_row(format!("d{a}"), [(pi[a], 1.0), (pi[a + 2], 1.0)], RowSense::Eq, 0.5).unwrap();
    }
    let out = solve_lp(&m).unwrap();
    assert_eq!(out.status, LpStatus::Optimal);
    assert!((out.objective - 1.0).abs() <= 1e-12);
}

#[test]
fn larger_assignment_problem_is_solved_exactly() {
    // Sorted pairing is optimal for 1-D assignment with |x - y| costs.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let k = 25;
    let mut xs: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..10.0)).collect();
    let mut ys: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..10.0)).collect();
    let mut m = MilpModel::new("assign");
    for i in 0..k {
        for j in 0..k {
            let v = m.add_continuous(format!("p{i}_{j}"), 0.0, f64::INFINITY).unwrap();
            m.set_objective(v, (xs[i] - ys[j]).abs());
        }
    }
    for i in 0..k {
        m.add_row(format!("s{i}"), (0..k).map(|j| (i * k + j, 1.0)), RowSense::Eq, 1.0).unwrap();
        m.add_row(format!("d{i}"), (0..k).map(|j| (j * k + i, 1.0)), RowSense::Eq, 1.0).unwrap();
    }
    let out = solve_lp(&m).unwrap();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let expected: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - b).abs()).sum();
    assert!((out.objective - expected).abs() <= 1e-8, "{} vs {expected}", out.objective);
}
