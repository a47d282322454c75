//! Best-first branch-and-bound over the simplex relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{LpError, MilpError};
use crate::model::{MilpModel, VarKind};
use crate::simplex::{Basis, LpOptions, LpSolver, LpStatus};
use crate::Tolerances;

#[derive(Debug, Clone)]
pub struct MilpOptions {
    /// Relative gap `(incumbent - bound) / max(|incumbent|, 1)` at which the
    /// search stops with [`SolveStatus::Optimal`].
    pub gap: f64,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    pub tolerances: Tolerances,
    /// Record a [`NodeEvent`] for every processed node.
    pub trace: bool,
    pub refactor_interval: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            gap: 1e-3,
            node_limit: None,
            time_limit: None,
            tolerances: Tolerances::default(),
            trace: false,
            refactor_interval: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Reserved for solvers that stop on a gap they cannot close; the
    /// built-in search reports `Optimal` once the gap is reached.
    GapLimit,
    NodeLimit,
    TimeLimit,
}

/// Snapshot taken after a node's relaxation has been processed.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEvent {
    pub node: usize,
    pub depth: usize,
    /// `None` when the node relaxation is infeasible.
    pub lp_objective: Option<f64>,
    /// Lower bound over all open nodes when this node was selected.
    pub bound: f64,
    pub incumbent: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
    pub trace: Vec<NodeEvent>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

pub(crate) fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

struct Node {
    id: usize,
    depth: usize,
    bound: f64,
    /// Bounds of the integer variables, in the order of `ints`.
    lower: Vec<f64>,
    upper: Vec<f64>,
    basis: Option<Arc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Reversed so that `BinaryHeap` pops the smallest (bound, id).
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    options: &'a MilpOptions,
    ints: Vec<usize>,
    lp: LpSolver,
    incumbent: Option<(f64, Vec<f64>)>,
    lp_iterations: usize,
}

impl Search<'_> {
    fn install(&mut self, lower: &[f64], upper: &[f64]) {
        for (k, &j) in self.ints.iter().enumerate() {
            self.lp.set_var_bounds(j, lower[k], upper[k]);
        }
    }

    fn prune_width(&self, incumbent: f64) -> f64 {
        (self.options.gap * incumbent.abs().max(1.0)).max(1e-9)
    }

    /// Fixes the integer variables at the rounded values of `x`, re-solves the
    /// continuous part and keeps the result if it improves the incumbent.
    fn try_fixed(&mut self, x: &[f64], basis: &Basis, restore: (&[f64], &[f64])) -> Result<(), LpError> {
        let rounded: Vec<f64> = self.ints.iter().map(|&j| x[j].round()).collect();
        let within = self.ints.iter().enumerate().all(|(k, _)| {
            rounded[k] >= restore.0[k] - 0.5 && rounded[k] <= restore.1[k] + 0.5
        });
        if !within {
            return Ok(());
        }
        self.install(&rounded, &rounded);
        self.lp.set_basis(basis);
        let out = self.lp.solve()?;
        self.lp_iterations += out.iterations;
        self.install(restore.0, restore.1);
        if out.status != LpStatus::Optimal {
            return Ok(());
        }
        let mut xs = out.x;
        for (k, &j) in self.ints.iter().enumerate() {
            xs[j] = rounded[k];
        }
        let obj = self.model.objective_value(&xs);
        if self.model.max_violation(&xs) > 10.0 * self.options.tolerances.feasibility {
            return Ok(());
        }
        if self.incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
            self.incumbent = Some((obj, xs));
        }
        Ok(())
    }
}

/// Solves `model` to the configured relative gap.
///
/// Nodes are processed in order of their parent's relaxation bound, ties by
/// creation order; the branching variable is the most fractional integer
/// variable, ties broken by lowest id, and the down branch is created first.
pub fn solve_milp(model: &MilpModel, options: &MilpOptions) -> Result<SolveResult, MilpError> {
    model.validate()?;
    let start = Instant::now();
    let tol = options.tolerances;
    let ints: Vec<usize> = (0..model.num_vars())
        .filter(|&j| model.var(j).kind == VarKind::Integer)
        .collect();
    let mut lower = Vec::with_capacity(ints.len());
    let mut upper = Vec::with_capacity(ints.len());
    for &j in &ints {
        let v = model.var(j);
        if !v.lower.is_finite() || !v.upper.is_finite() {
            return Err(MilpError::UnboundedInteger(v.name.clone()));
        }
        lower.push((v.lower - tol.integrality).ceil());
        upper.push((v.upper + tol.integrality).floor());
    }

    let finish = |status, incumbent: Option<(f64, Vec<f64>)>, bound: f64, nodes, iters, trace| {
        let (objective, x) = match incumbent {
            Some((o, x)) => (Some(o), Some(x)),
            None => (None, None),
        };
        let gap = objective.map_or(f64::INFINITY, |o| relative_gap(o, bound));
        Ok(SolveResult {
            status,
            x,
            objective,
            bound,
            gap,
            nodes,
            lp_iterations: iters,
            wall_time: start.elapsed(),
            trace,
        })
    };

    if lower.iter().zip(&upper).any(|(l, u)| l > u) {
        return finish(SolveStatus::Infeasible, None, f64::INFINITY, 0, 0, Vec::new());
    }

    let lp_options = LpOptions {
        tolerances: tol,
        refactor_interval: options.refactor_interval,
        ..LpOptions::default()
    };
    let mut search = Search {
        model,
        options,
        ints,
        lp: LpSolver::new(model, lp_options),
        incumbent: None,
        lp_iterations: 0,
    };

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        id: 0,
        depth: 0,
        bound: f64::NEG_INFINITY,
        lower,
        upper,
        basis: None,
    });
    let mut next_id = 1;
    let mut processed = 0;
    let mut trace = Vec::new();

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &search.incumbent {
            if *inc - node.bound <= search.prune_width(*inc) {
                let bound = node.bound.min(*inc);
                return finish(SolveStatus::Optimal, search.incumbent, bound, processed, search.lp_iterations, trace);
            }
        }
        let limit = if options.node_limit.is_some_and(|l| processed >= l) {
            Some(SolveStatus::NodeLimit)
        } else if options.time_limit.is_some_and(|l| start.elapsed() >= l) {
            Some(SolveStatus::TimeLimit)
        } else {
            None
        };
        if let Some(status) = limit {
            let bound = match &search.incumbent {
                Some((inc, _)) => node.bound.min(*inc),
                None => node.bound,
            };
            return finish(status, search.incumbent, bound, processed, search.lp_iterations, trace);
        }

        processed += 1;
        search.install(&node.lower, &node.upper);
        if let Some(b) = &node.basis {
            search.lp.set_basis(b);
        }
        let out = search.lp.solve()?;
        search.lp_iterations += out.iterations;

        let mut event = NodeEvent {
            node: node.id,
            depth: node.depth,
            lp_objective: None,
            bound: node.bound,
            incumbent: None,
        };
        match out.status {
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => {
                return finish(SolveStatus::Unbounded, None, f64::NEG_INFINITY, processed, search.lp_iterations, trace);
            }
            LpStatus::Optimal => {
                let obj = out.objective;
                event.lp_objective = Some(obj);
                let dominated = search
                    .incumbent
                    .as_ref()
                    .is_some_and(|(inc, _)| *inc - obj <= search.prune_width(*inc));
                if !dominated {
                    let mut branch = None;
                    let mut best_frac = tol.integrality;
                    for (k, &j) in search.ints.iter().enumerate() {
                        let f = out.x[j] - out.x[j].floor();
                        let dist = f.min(1.0 - f);
                        if dist > best_frac {
                            best_frac = dist;
                            branch = Some(k);
                        }
                    }
                    match branch {
                        None => {
                            search.try_fixed(&out.x, &out.basis, (&node.lower, &node.upper))?;
                        }
                        Some(k) => {
                            if node.id == 0 {
                                search.try_fixed(&out.x, &out.basis, (&node.lower, &node.upper))?;
                            }
                            let v = out.x[search.ints[k]];
                            let basis = Arc::new(out.basis);
                            let mut down_upper = node.upper.clone();
                            down_upper[k] = v.floor();
                            let mut up_lower = node.lower.clone();
                            up_lower[k] = v.ceil();
                            heap.push(Node {
                                id: next_id,
                                depth: node.depth + 1,
                                bound: obj,
                                lower: node.lower.clone(),
                                upper: down_upper,
                                basis: Some(Arc::clone(&basis)),
                            });
                            heap.push(Node {
                                id: next_id + 1,
                                depth: node.depth + 1,
                                bound: obj,
                                lower: up_lower,
                                upper: node.upper,
                                basis: Some(basis),
                            });
                            next_id += 2;
                        }
                    }
                }
            }
        }
        if options.trace {
            event.incumbent = search.incumbent.as_ref().map(|(o, _)| *o);
            trace.push(event);
        }
    }

    match search.incumbent {
        Some((inc, x)) => finish(SolveStatus::Optimal, Some((inc, x)), inc, processed, search.lp_iterations, trace),
        None => finish(SolveStatus::Infeasible, None, f64::INFINITY, processed, search.lp_iterations, trace),
    }
}
