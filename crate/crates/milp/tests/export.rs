use drmic_milp::{
    mps_string, parse_mps, read_mps, solve_milp, write_lp, write_mps, ExternalSolver, MilpModel, MilpOptions,
    RowSense, VarKind,
};
use proptest::prelude::*;

fn knapsack() -> MilpModel {
    let mut m = MilpModel::new("knapsack");
    let a = m.add_integer("a", 0.0, 1.0).unwrap();
    let b = m.add_integer("b", 0.0, 1.0).unwrap();
    m.set_objective(a, -3.0);
    m.set_objective(b, -2.0);
    m.add_row("cap", [(a, 1.0), (b, 1.0)], RowSense::Le, 1.0).unwrap();
    m
}

#[test]
fn files_are_byte_identical_across_writes() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.mps"), dir.path().join("b.mps"));
    write_mps(&knapsack(), &p1).unwrap();
    write_mps(&knapsack(), &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    let (l1, l2) = (dir.path().join("a.lp"), dir.path().join("b.lp"));
    write_lp(&knapsack(), &l1).unwrap();
    write_lp(&knapsack(), &l2).unwrap();
    assert_eq!(std::fs::read(&l1).unwrap(), std::fs::read(&l2).unwrap());
}

#[test]
fn exported_knapsack_solves_to_enumerated_value() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("k.mps");
    write_mps(&knapsack(), &p).unwrap();
    let back = read_mps(&p).unwrap();
    let r = solve_milp(&back, &MilpOptions { gap: 0.0, ..Default::default() }).unwrap();
    assert_eq!(r.objective, Some(-3.0));
}

#[test]
fn failing_external_command_is_reported() {
    let solver = ExternalSolver::new("exit 3");
    assert!(solver.solve(&knapsack()).is_err());
}

fn bound() -> impl Strategy<Value = (f64, f64)> {
    prop_oneof![
        (-50i32..50, 0i32..20).prop_map(|(l, w)| (l as f64 / 4.0, (l + w) as f64 / 4.0)),
        Just((f64::NEG_INFINITY, f64::INFINITY)),
        (-50i32..50).prop_map(|u| (f64::NEG_INFINITY, u as f64 / 3.0)),
        (-50i32..50).prop_map(|l| (l as f64 / 7.0, f64::INFINITY)),
    ]
}

proptest! {
    #[test]
    fn mps_round_trip(
        vars in prop::collection::vec((bound(), any::<bool>(), -1e3f64..1e3), 1..8),
        rows in prop::collection::vec((prop::collection::vec((0usize..8, -1e2f64..1e2), 0..6), 0u8..3, -1e4f64..1e4), 0..6),
        constant in -10f64..10.0,
    ) {
        let mut m = MilpModel::new("prop");
        for (j, ((lo, hi), int, c)) in vars.iter().enumerate() {
            let kind = if *int { VarKind::Integer } else { VarKind::Continuous };
            m.add_var(format!("v{j}"), kind, *lo, *hi).unwrap();
            m.set_objective(j, *c);
        }
        m.set_objective_constant(constant);
        let n = vars.len();
        for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
            let sense = [RowSense::Le, RowSense::Ge, RowSense::Eq][*sense as usize];
            let coeffs: Vec<_> = coeffs.iter().map(|&(j, a)| (j % n, a)).collect();
            m.add_row(format!("r{i}"), coeffs, sense, *rhs).unwrap();
        }
        let text = mps_string(&m);
        let back = parse_mps(&text).unwrap();
        prop_assert_eq!(back.vars(), m.vars());
        prop_assert_eq!(back.rows(), m.rows());
        prop_assert_eq!(back.objective(), m.objective());
        prop_assert_eq!(back.objective_constant(), m.objective_constant());
        prop_assert_eq!(mps_string(&back), text);
    }
}
