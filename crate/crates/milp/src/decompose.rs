//! Models whose variables split into independent groups are solved one
//! group at a time.

use std::time::{Duration, Instant};

use crate::bnb::{relative_gap, solve_milp, MilpOptions, SolveResult, SolveStatus};
use crate::error::MilpError;
use crate::model::{MilpModel, VarId};

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Variables grouped by the rows that link them. Groups are ordered by their
/// first variable and keep model order inside.
pub fn components(model: &MilpModel) -> Vec<Vec<VarId>> {
    let n = model.num_vars();
    let mut parent: Vec<usize> = (0..n).collect();
    for row in model.rows() {
        if let Some(&(first, _)) = row.coeffs.first() {
            let a = find(&mut parent, first);
            for &(j, _) in &row.coeffs[1..] {
                let b = find(&mut parent, j);
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut index = vec![usize::MAX; n];
    let mut groups: Vec<Vec<VarId>> = Vec::new();
    for j in 0..n {
        let root = find(&mut parent, j);
        if index[root] == usize::MAX {
            index[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[index[root]].push(j);
    }
    groups
}

/// Copy of the variables in `vars` and the rows that touch them. Rows
/// without variables and the objective constant go to the first group.
fn submodel(model: &MilpModel, vars: &[VarId], first: bool, local: &mut [usize]) -> Result<MilpModel, MilpError> {
    let mut sub = MilpModel::new(model.name.clone());
    for &j in vars {
        let v = model.var(j);
        local[j] = sub.add_var(v.name.clone(), v.kind, v.lower, v.upper)?;
        sub.set_objective(local[j], model.objective()[j]);
    }
    for row in model.rows() {
        let mine = match row.coeffs.first() {
            Some(&(j, _)) => local[j] != usize::MAX,
            None => first,
        };
        if mine {
            sub.add_row(row.name.clone(), row.coeffs.iter().map(|&(j, a)| (local[j], a)), row.sense, row.rhs)?;
        }
    }
    if first {
        sub.set_objective_constant(model.objective_constant());
    }
    Ok(sub)
}

/// Solves every independent group of variables as its own model and
/// assembles the results. A model with a single group is handed to
/// [`solve_milp`] unchanged. The gap target applies per group; the time
/// limit is shared.
pub fn solve_milp_by_blocks(model: &MilpModel, options: &MilpOptions) -> Result<SolveResult, MilpError> {
    let groups = components(model);
    if groups.len() <= 1 {
        return solve_milp(model, options);
    }
    let start = Instant::now();
    let mut local = vec![usize::MAX; model.num_vars()];
    let mut x = vec![0.0; model.num_vars()];
    let mut have_x = true;
    let mut objective = 0.0;
    let mut bound = 0.0;
    let mut nodes = 0;
    let mut lp_iterations = 0;
    let mut trace = Vec::new();
    let mut status = SolveStatus::Optimal;
    for (g, vars) in groups.iter().enumerate() {
        let sub = submodel(model, vars, g == 0, &mut local)?;
        let mut opts = options.clone();
        if let Some(limit) = options.time_limit {
            opts.time_limit = Some(limit.saturating_sub(start.elapsed()).max(Duration::from_millis(1)));
        }
        let r = solve_milp(&sub, &opts)?;
        nodes += r.nodes;
        lp_iterations += r.lp_iterations;
        trace.extend(r.trace);
        match r.status {
            SolveStatus::Infeasible | SolveStatus::Unbounded => {
                return Ok(SolveResult {
                    status: r.status,
                    x: None,
                    objective: None,
                    bound: if r.status == SolveStatus::Infeasible { f64::INFINITY } else { f64::NEG_INFINITY },
                    gap: f64::INFINITY,
                    nodes,
                    lp_iterations,
                    wall_time: start.elapsed(),
                    trace,
                });
            }
            SolveStatus::Optimal | SolveStatus::GapLimit => {}
            limit => status = limit,
        }
        bound += r.bound;
        match (&r.x, r.objective) {
            (Some(sx), Some(o)) => {
                objective += o;
                for (k, &j) in vars.iter().enumerate() {
                    x[j] = sx[k];
                }
            }
            _ => have_x = false,
        }
        for &j in vars {
            local[j] = usize::MAX;
        }
    }
    let objective = have_x.then_some(objective);
    Ok(SolveResult {
        status,
        x: have_x.then_some(x),
        objective,
        bound,
        gap: objective.map_or(f64::INFINITY, |o| relative_gap(o, bound)),
        nodes,
        lp_iterations,
        wall_time: start.elapsed(),
        trace,
    })
}
