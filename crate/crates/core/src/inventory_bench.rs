//! Single-item inventory benchmark: ordering ahead of demand at a booking
//! price, emergency lots after demand, holding cost on what is left.
//!
//! Stage `t` (zero-based) carries the order placed for it before its demand
//! (`u_t`, one stage of delay) and the lot decisions taken after the demand
//! (`γ_{t,k}`):
//! `x_t = x_{t−1} + u_t + Σ_k q_k γ_{t,k} − ξ_t`, cost `a x_t + b u_t + Σ_k c_k q_k γ_{t,k}`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use drmic_milp::{MilpOptions, SolveStatus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::ambiguity::{estimate_radius, WassersteinSet};
use crate::error::{Error, Result};
use crate::lifting::{DisturbanceSpace, Lifting};
use crate::oracle::{check_robust_feasibility, worst_case_expectation, PiecewiseFunction, RobustReport};
use crate::reformulation::{build_wasserstein, solve, Instance, ReformOptions};
use crate::system_model::{evaluate_policy, CompileOptions, CostPiece, SystemModel, Term};

/// Demand means of the sixteen-stage benchmark.
pub const DEFAULT_MEANS: [f64; 16] = [
    50.0, 30.0, 70.0, 30.0, 50.0, 30.0, 70.0, 30.0, 50.0, 30.0, 70.0, 30.0, 50.0, 30.0, 70.0, 30.0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct InventorySpec {
    pub horizon: usize,
    pub holding_cost: f64,
    pub booking_cost: f64,
    pub lot_prices: Vec<f64>,
    pub lot_sizes: Vec<f64>,
    pub x0: f64,
    pub support: (f64, f64),
    pub means: Vec<f64>,
    pub std_dev: f64,
    pub samples: usize,
    /// Draws standing in for the generating distribution when the radius is
    /// estimated.
    pub reference_samples: usize,
    /// Fixed radius; estimated from the reference draws when `None`.
    pub theta: Option<f64>,
    pub segments: usize,
    pub seed: u64,
    pub integer_bound: f64,
}

impl Default for InventorySpec {
    fn default() -> Self {
        Self {
            horizon: 2,
            holding_cost: 5.0,
            booking_cost: 2.0,
            lot_prices: vec![5.0; 3],
            lot_sizes: vec![30.0; 3],
            x0: 0.0,
            support: (20.0, 100.0),
            means: DEFAULT_MEANS.to_vec(),
            std_dev: 1.0,
            samples: 20,
            reference_samples: 500,
            theta: None,
            segments: 1,
            seed: 1,
            integer_bound: 10.0,
        }
    }
}

impl InventorySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if self.means.len() < self.horizon {
            return bad(format!("{} demand means given for horizon {}", self.means.len(), self.horizon));
        }
        if self.lot_prices.len() != self.lot_sizes.len() {
            return bad("lot prices and lot sizes differ in length".into());
        }
        if !(self.holding_cost >= 0.0 && self.booking_cost >= 0.0) {
            return bad("holding and booking costs must be nonnegative".into());
        }
        if let Some(k) = self.lot_prices.iter().position(|&c| !(c > self.booking_cost)) {
            return bad(format!("lot {k}: unit price must exceed the booking cost"));
        }
        if let Some(k) = self.lot_sizes.iter().position(|&q| !(q > 0.0)) {
            return bad(format!("lot {k}: size must be positive"));
        }
        let (l, v) = self.support;
        if !(l < v && l.is_finite() && v.is_finite()) {
            return bad(format!("invalid support [{l}, {v}]"));
        }
        if !(self.std_dev >= 0.0) {
            return bad("demand standard deviation must be nonnegative".into());
        }
        if self.samples == 0 || self.segments == 0 {
            return bad("sample and segment counts must be positive".into());
        }
        if self.theta.is_none() && self.reference_samples == 0 {
            return bad("a radius or reference samples are required".into());
        }
        if let Some(t) = self.theta {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("invalid radius {t}"));
            }
        }
        Ok(())
    }

    /// Inventory dynamics over `horizon` stages starting from `x0`.
    pub fn system(&self, horizon: usize, x0: f64) -> SystemModel {
        let k = self.lot_sizes.len();
        let mut sys = SystemModel::new(horizon, 1, 1, k, 1);
        sys.x0 = vec![x0];
        sys.u_info[0].delay = 1;
        for t in 0..horizon {
            let st = &mut sys.stages[t];
            st.a.set(0, 0, 1.0);
            st.b.set(0, 0, 1.0);
            for (j, &q) in self.lot_sizes.iter().enumerate() {
                st.c.set(0, j, q);
            }
            st.d.set(0, 0, -1.0);
            st.cost = vec![CostPiece {
                x: vec![self.holding_cost],
                u: vec![self.booking_cost],
                g: self.lot_prices.iter().zip(&self.lot_sizes).map(|(c, q)| c * q).collect(),
                constant: 0.0,
            }];
        }
        for t in 0..horizon {
            sys.add_constraint(format!("x_nonneg_{t}"), vec![(Term::State { stage: t, index: 0 }, -1.0)], 0.0);
            sys.add_constraint(format!("u_nonneg_{t}"), vec![(Term::Control { stage: t, index: 0 }, -1.0)], 0.0);
            for j in 0..k {
                let g = Term::Integer { stage: t, index: j };
                sys.add_constraint(format!("lot_lo_{t}_{j}"), vec![(g, -1.0)], 0.0);
                sys.add_constraint(format!("lot_hi_{t}_{j}"), vec![(g, 1.0)], 1.0);
            }
        }
        sys
    }
}

/// Demand paths with independent stages `N(mean_t, σ²)` truncated to the
/// support by rejection.
pub fn draw_demands(spec: &InventorySpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let (l, v) = spec.support;
    let dists = spec.means[..spec.horizon]
        .iter()
        .map(|&m| {
            if !(m >= l && m <= v) {
                return Err(Error::InvalidSpec(format!("demand mean {m} lies outside the support")));
            }
            Normal::new(m, spec.std_dev).map_err(|e| Error::InvalidSpec(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..n)
        .map(|_| {
            dists
                .iter()
                .map(|d| loop {
                    let x = d.sample(rng);
                    if x >= l && x <= v {
                        break x;
                    }
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct InventoryProblem {
    pub system: SystemModel,
    pub lifting: Lifting,
    pub set: WassersteinSet,
    pub reference: Vec<Vec<f64>>,
}

/// Benchmark system, equal-division lifting and the sample ball. Samples
/// come first from the seeded stream, reference draws after them.
pub fn build(spec: &InventorySpec) -> Result<InventoryProblem> {
    spec.validate()?;
    let system = spec.system(spec.horizon, spec.x0);
    let (l, v) = spec.support;
    let space = DisturbanceSpace::uniform(spec.horizon, 1, l, v)?;
    let lifting = Lifting::equal_division(space, spec.segments)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let samples = draw_demands(spec, spec.samples, &mut rng)?;
    let (theta, reference) = match spec.theta {
        Some(t) => (t, Vec::new()),
        None => {
            let reference = draw_demands(spec, spec.reference_samples, &mut rng)?;
            (estimate_radius(&samples, &reference)?, reference)
        }
    };
    let set = WassersteinSet::new(theta, samples, lifting.space())?;
    Ok(InventoryProblem {
        system,
        lifting,
        set,
        reference,
    })
}

#[derive(Debug, Clone)]
pub struct OpenLoopReport {
    pub horizon: usize,
    pub segments: usize,
    pub theta: f64,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub bound: f64,
    pub gap: f64,
    pub time_s: f64,
    pub nodes: usize,
    pub policy: Vec<f64>,
    pub policy_names: Vec<String>,
    /// Worst-case expectation of the returned policy by direct evaluation.
    pub oracle_value: Option<f64>,
    pub robust: Option<RobustReport>,
}

/// Random draws used when certifying robust feasibility of a policy.
pub const CERTIFY_DRAWS: usize = 100_000;

/// Builds, reformulates, solves and certifies one open-loop instance.
pub fn run_open_loop(spec: &InventorySpec, options: &MilpOptions) -> Result<OpenLoopReport> {
    let prob = build(spec)?;
    let inst = Instance::new(prob.system, prob.lifting.clone(), &CompileOptions::default())?;
    let reform = build_wasserstein(
        &inst,
        &prob.set,
        &ReformOptions {
            integer_bound: spec.integer_bound,
            ..ReformOptions::default()
        },
    )?;
    let start = Instant::now();
    let sol = solve(&reform, options)?;
    let time_s = start.elapsed().as_secs_f64();
    let mut report = OpenLoopReport {
        horizon: spec.horizon,
        segments: spec.segments,
        theta: prob.set.theta,
        status: sol.result.status,
        objective: sol.result.objective,
        bound: sol.result.bound,
        gap: sol.result.gap,
        time_s,
        nodes: sol.result.nodes,
        policy: Vec::new(),
        policy_names: inst.layout.variables().into_iter().map(|v| v.0).collect(),
        oracle_value: None,
        robust: None,
    };
    if let Some(policy) = sol.policies.first() {
        let policy = round_integers(policy, |j| inst.layout.is_integer(j));
        let numeric = inst.compiled.substitute(&policy);
        let f = PiecewiseFunction::from_problem(&numeric);
        report.oracle_value = Some(worst_case_expectation(&f, &prob.lifting, &prob.set)?.value);
        report.robust = Some(check_robust_feasibility(
            &numeric.e,
            &numeric.m,
            &prob.lifting,
            CERTIFY_DRAWS,
            spec.seed,
            options.tolerances.feasibility,
        )?);
        report.policy = policy;
    }
    Ok(report)
}

fn round_integers(values: &[f64], is_integer: impl Fn(usize) -> bool) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(j, &v)| if is_integer(j) { v.round() } else { v })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub sim_id: usize,
    pub total_cost: f64,
    pub steps_solved: usize,
    pub demands: Vec<f64>,
    pub inventory: Vec<f64>,
    pub orders: Vec<f64>,
    pub lots: Vec<Vec<f64>>,
    /// Set when a step could not be solved; the simulation stops there.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopReport {
    pub horizon: usize,
    pub segments: usize,
    pub theta: f64,
    pub seed: u64,
    pub sims: Vec<SimulationResult>,
    pub mean: f64,
    pub std_dev: f64,
}

/// Shrinking-horizon simulation. Before any demand the full problem fixes
/// the first order. After demand `t` is observed, the remaining problem is
/// solved with that stage's demand pinned to its realized value and its
/// order pinned to the one already placed; its lot decisions and the next
/// order are implemented. Sample paths keep their tail and take the
/// realized value in the pinned stage; the radius stays fixed.
pub fn run_closed_loop(
    spec: &InventorySpec,
    n_sims: usize,
    seed: u64,
    options: &MilpOptions,
    threads: Option<usize>,
) -> Result<ClosedLoopReport> {
    if n_sims == 0 {
        return Err(Error::InvalidSpec("at least one simulation is required".into()));
    }
    let prob = build(spec)?;
    let first = run_open_loop(
        &InventorySpec {
            theta: Some(prob.set.theta),
            ..spec.clone()
        },
        options,
    )?;
    if first.policy.is_empty() {
        return Err(Error::Solve(first.status));
    }
    let inst0 = Instance::new(prob.system.clone(), prob.lifting.clone(), &CompileOptions::default())?;
    let first_order = first.policy[inst0.layout.u_slot(0, 0).offset_var];
    let paths: Vec<Vec<f64>> = (0..n_sims)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64 + 1);
            draw_demands(spec, 1, &mut rng).map(|mut v| v.remove(0))
        })
        .collect::<Result<_>>()?;
    let simulate = |(s, path): (usize, &Vec<f64>)| simulate_one(spec, &prob.set, first_order, s, path, options);
    let sims: Vec<SimulationResult> = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidSpec(e.to_string()))?
            .install(|| paths.par_iter().enumerate().map(simulate).collect()),
        None => paths.par_iter().enumerate().map(simulate).collect(),
    };
    let done: Vec<f64> = sims.iter().filter(|s| s.error.is_none()).map(|s| s.total_cost).collect();
    let n = done.len() as f64;
    let mean = done.iter().sum::<f64>() / n;
    let var = if done.len() > 1 {
        done.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(ClosedLoopReport {
        horizon: spec.horizon,
        segments: spec.segments,
        theta: prob.set.theta,
        seed,
        sims,
        mean,
        std_dev: var.sqrt(),
    })
}

fn simulate_one(
    spec: &InventorySpec,
    set: &WassersteinSet,
    first_order: f64,
    sim_id: usize,
    path: &[f64],
    options: &MilpOptions,
) -> SimulationResult {
    let mut res = SimulationResult {
        sim_id,
        total_cost: 0.0,
        steps_solved: 0,
        demands: path.to_vec(),
        inventory: Vec::new(),
        orders: vec![first_order],
        lots: Vec::new(),
        error: None,
    };
    let mut x = spec.x0;
    let mut order = first_order;
    for t in 0..spec.horizon {
        match closed_loop_step(spec, set, t, x, order, path[t], options) {
            Ok(step) => {
                res.steps_solved += 1;
                res.total_cost += step.cost;
                x = step.inventory;
                res.inventory.push(x);
                res.lots.push(step.lots);
                if let Some(next) = step.next_order {
                    res.orders.push(next);
                    order = next;
                }
            }
            Err(e) => {
                res.error = Some(format!("step {t}: {e}"));
                res.total_cost = f64::NAN;
                break;
            }
        }
    }
    res
}

struct Step {
    cost: f64,
    inventory: f64,
    lots: Vec<f64>,
    next_order: Option<f64>,
}

fn closed_loop_step(
    spec: &InventorySpec,
    set: &WassersteinSet,
    t: usize,
    x_prev: f64,
    order: f64,
    demand: f64,
    options: &MilpOptions,
) -> Result<Step> {
    let h = spec.horizon - t;
    let (l, v) = spec.support;
    let mut lower = vec![l; h];
    let mut upper = vec![v; h];
    lower[0] = demand;
    upper[0] = demand;
    let space = DisturbanceSpace::new(h, 1, lower, upper)?;
    let mut ps = vec![spec.segments; h];
    ps[0] = 1;
    let lifting = Lifting::equal_division_per_dim(space, &ps)?;
    let samples: Vec<Vec<f64>> = set
        .samples
        .iter()
        .map(|s| {
            let mut tail = s[t..].to_vec();
            tail[0] = demand;
            tail
        })
        .collect();
    let ball = WassersteinSet::new(set.theta, samples, lifting.space())?;
    let inst = Instance::new(spec.system(h, x_prev), lifting, &CompileOptions::default())?;
    let mut reform = build_wasserstein(
        &inst,
        &ball,
        &ReformOptions {
            integer_bound: spec.integer_bound,
            ..ReformOptions::default()
        },
    )?;
    let placed = inst.layout.u_slot(0, 0).offset_var;
    reform.model.set_bounds(placed, order, order);
    let sol = solve(&reform, options)?;
    let Some(policy) = sol.policies.first() else {
        return Err(Error::Solve(sol.result.status));
    };
    let policy = round_integers(policy, |j| inst.layout.is_integer(j));
    let mut xi = vec![l; h];
    xi[0] = demand;
    let tr = evaluate_policy(&inst.system, &inst.lifting, &inst.layout, &policy, &xi)?;
    Ok(Step {
        cost: tr.stage_costs[0],
        inventory: tr.x[0][0],
        lots: tr.g[0].clone(),
        next_order: (h > 1).then(|| tr.u[1][0]),
    })
}

pub fn write_open_loop_csv(path: impl AsRef<Path>, reports: &[OpenLoopReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["T", "p", "objective", "bound", "gap", "time_s", "status"]).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.horizon.to_string(),
            r.segments.to_string(),
            r.objective.map_or_else(String::new, |v| v.to_string()),
            r.bound.to_string(),
            r.gap.to_string(),
            format!("{:.3}", r.time_s),
            format!("{:?}", r.status),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_closed_loop_csv(path: impl AsRef<Path>, reports: &[ClosedLoopReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["T", "p", "sim_id", "total_cost", "steps_solved"]).map_err(csv_err)?;
    for r in reports {
        for s in &r.sims {
            w.write_record([
                r.horizon.to_string(),
                r.segments.to_string(),
                s.sim_id.to_string(),
                s.total_cost.to_string(),
                s.steps_solved.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Table of objective values and solve times, one line per `(T, p)`.
pub fn open_loop_summary(reports: &[OpenLoopReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>4} {:>4} {:>14} {:>10} {:>10}  status", "T", "p", "objective ($)", "gap", "time (s)");
    for r in reports {
        let obj = r.objective.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
        let _ = writeln!(
            out,
            "{:>4} {:>4} {:>14} {:>10.2e} {:>10.2}  {:?}",
            r.horizon, r.segments, obj, r.gap, r.time_s, r.status
        );
    }
    out
}

pub fn closed_loop_summary(reports: &[ClosedLoopReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let failed = r.sims.iter().filter(|s| s.error.is_some()).count();
        let _ = writeln!(
            out,
            "T={} p={} seed={} sims={} failed={} mean={:.2} std={:.2} theta={:.4}",
            r.horizon,
            r.segments,
            r.seed,
            r.sims.len(),
            failed,
            r.mean,
            r.std_dev,
            r.theta
        );
    }
    out
}

/// Writes `text` to `path`.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    std::fs::File::create(path)?.write_all(text.as_bytes())?;
    Ok(())
}
