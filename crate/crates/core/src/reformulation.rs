//! Exact MILP reformulations of the lifted-policy problem under the
//! supported ambiguity sets.
//!
//! For every sample and combined cost piece, the inner worst case
//! `max_ξ f(ξ) − λ‖ξ − ξ̂‖₁` separates over the lifted blocks; on each
//! segment of a block it is the maximum of a concave function of a line
//! parameter, which a bounded multiplier `|ζ| ≤ λ` turns into two linear
//! rows, one per segment endpoint. Robust constraints use the same
//! endpoint enumeration without the multiplier.

pub mod baselines;

use drmic_milp::{solve_milp_by_blocks, MilpModel, MilpOptions, RowSense, SolveResult, SolveStatus, VarKind};

use crate::affine::AffineExpr;
use crate::ambiguity::{EventWiseSet, MixedMomentSet, WassersteinSet};
use crate::error::{check_len, Error, Result};
use crate::lifting::{Lifting, Segment};
use crate::system_model::{compile, CompileOptions, CompiledRow, CompiledProblem, PolicyLayout, SystemModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ReformOptions {
    /// Integer policy variables are boxed to `[-integer_bound, integer_bound]`.
    pub integer_bound: f64,
    /// Skip auxiliary variables of lifted blocks whose coefficients are all
    /// zero; their optimal value is zero, so the model stays exact.
    pub prune_zero_blocks: bool,
    pub max_vars: usize,
    pub max_rows: usize,
}

impl Default for ReformOptions {
    fn default() -> Self {
        Self {
            integer_bound: 10.0,
            prune_zero_blocks: true,
            max_vars: 2_000_000,
            max_rows: 2_000_000,
        }
    }
}

/// A system with its lifting, policy numbering and compiled data.
#[derive(Debug, Clone)]
pub struct Instance {
    pub system: SystemModel,
    pub lifting: Lifting,
    pub layout: PolicyLayout,
    pub compiled: CompiledProblem,
}

impl Instance {
    pub fn new(system: SystemModel, lifting: Lifting, options: &CompileOptions) -> Result<Self> {
        let layout = PolicyLayout::new(&system, &lifting);
        let compiled = compile(&system, &lifting, &layout, options)?;
        Ok(Self {
            system,
            lifting,
            layout,
            compiled,
        })
    }
}

/// A convex piecewise-linear function of the lifted point,
/// `max_m g_mᵀ z + h_m`, with entries affine in the decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPiece {
    pub g: Vec<AffineExpr>,
    pub h: AffineExpr,
}

#[derive(Debug, Clone)]
pub struct Reformulation {
    pub model: MilpModel,
    /// First policy variable id of each policy block (one per scenario).
    pub policy_offsets: Vec<usize>,
    pub policy_lens: Vec<usize>,
    pub lambdas: Vec<usize>,
}

impl Reformulation {
    pub fn policy_values(&self, x: &[f64], block: usize) -> Vec<f64> {
        let s = self.policy_offsets[block];
        x[s..s + self.policy_lens[block]].to_vec()
    }

    /// Fixes the policy variables of `block` to `values`.
    pub fn fix_policy(&mut self, block: usize, values: &[f64]) -> Result<()> {
        check_len("policy values", self.policy_lens[block], values.len())?;
        let s = self.policy_offsets[block];
        for (k, &v) in values.iter().enumerate() {
            self.model.set_bounds(s + k, v, v);
        }
        Ok(())
    }
}

/// Outcome of solving a reformulation.
#[derive(Debug, Clone)]
pub struct PolicySolution {
    pub result: SolveResult,
    /// Policy values per block; empty when no solution was found.
    pub policies: Vec<Vec<f64>>,
}

impl PolicySolution {
    pub fn objective(&self) -> Option<f64> {
        self.result.objective
    }

    pub fn status(&self) -> SolveStatus {
        self.result.status
    }
}

pub fn solve(reform: &Reformulation, options: &MilpOptions) -> Result<PolicySolution> {
    let result = solve_milp_by_blocks(&reform.model, options)?;
    let policies = match &result.x {
        Some(x) => (0..reform.policy_offsets.len()).map(|b| reform.policy_values(x, b)).collect(),
        None => Vec::new(),
    };
    Ok(PolicySolution { result, policies })
}

fn add_policy_vars(model: &mut MilpModel, layout: &PolicyLayout, prefix: &str, bound: f64) -> Result<usize> {
    let offset = model.num_vars();
    for (name, kind) in layout.variables() {
        let (lo, hi) = match kind {
            VarKind::Continuous => (f64::NEG_INFINITY, f64::INFINITY),
            VarKind::Integer => (-bound, bound),
        };
        model.add_var(format!("{prefix}{name}"), kind, lo, hi)?;
    }
    Ok(offset)
}

fn shift(e: &AffineExpr, offset: usize) -> AffineExpr {
    if offset == 0 {
        e.clone()
    } else {
        e.shifted(offset)
    }
}

/// Appends `expr · scale` to a row under construction, returning the
/// constant part times `scale`.
fn push_expr(coeffs: &mut Vec<(usize, f64)>, expr: &AffineExpr, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    for &(j, c) in expr.terms() {
        coeffs.push((j, c * scale));
    }
    expr.constant_term() * scale
}

/// Segment endpoints of a block; a point segment contributes one endpoint.
fn endpoints(seg: &Segment) -> Vec<(&[f64], char)> {
    if seg.start == seg.end {
        vec![(&seg.start[..], 'a')]
    } else {
        vec![(&seg.start[..], 'a'), (&seg.end[..], 'b')]
    }
}

/// Rows certifying `eta ≥ max_ξ (max_m g_mᵀ G(ξ) + h_m) − λ‖ξ − anchor‖₁`.
///
/// For each piece `m`: `eta ≥ Σ_d η_{m,d} + h_m`, and for each lifted block
/// `d`, segment `j` and segment endpoint `φ`:
/// `η_{m,d} ≥ g_{m,d}ᵀ φ − ζ_{m,d,j} (Rφ − anchor_d)` with `|ζ_{m,d,j}| ≤ λ`.
#[allow(clippy::too_many_arguments)]
pub fn worst_case_rows(
    model: &mut MilpModel,
    pieces: &[LiftedPiece],
    lifting: &Lifting,
    geometry: &[Vec<Segment>],
    anchor: &[f64],
    lambda: usize,
    eta: usize,
    prune_zero_blocks: bool,
    tag: &str,
) -> Result<()> {
    check_len("anchor", lifting.space().total_dim(), anchor.len())?;
    for (m, piece) in pieces.iter().enumerate() {
        check_len("piece coefficients", lifting.dim(), piece.g.len())?;
        let mut agg = vec![(eta, 1.0)];
        for (d, segs) in geometry.iter().enumerate() {
            let block = lifting.block(d);
            let g = &piece.g[block.clone()];
            if prune_zero_blocks && g.iter().all(AffineExpr::is_zero) {
                continue;
            }
            let eta_md = model.add_continuous(format!("eta_{tag}_{m}_{d}"), f64::NEG_INFINITY, f64::INFINITY)?;
            agg.push((eta_md, -1.0));
            for (j, seg) in segs.iter().enumerate() {
                let zeta = model.add_continuous(format!("zeta_{tag}_{m}_{d}_{j}"), f64::NEG_INFINITY, f64::INFINITY)?;
                model.add_row(format!("zu_{tag}_{m}_{d}_{j}"), [(zeta, 1.0), (lambda, -1.0)], RowSense::Le, 0.0)?;
                model.add_row(format!("zl_{tag}_{m}_{d}_{j}"), [(zeta, -1.0), (lambda, -1.0)], RowSense::Le, 0.0)?;
                for (phi, side) in endpoints(seg) {
                    let mut coeffs = vec![(eta_md, 1.0), (zeta, lifting.recover_block(d, phi) - anchor[d])];
                    let mut rhs = 0.0;
                    for (e, &p) in g.iter().zip(phi) {
                        rhs += push_expr(&mut coeffs, e, -p);
                    }
                    model.add_row(format!("ep_{tag}_{m}_{d}_{j}{side}"), coeffs, RowSense::Ge, -rhs)?;
                }
            }
        }
        let rhs = push_expr(&mut agg, &piece.h, -1.0);
        model.add_row(format!("agg_{tag}_{m}"), agg, RowSense::Ge, -rhs)?;
    }
    Ok(())
}

/// Rows enforcing `m_r ≥ E_rᵀ G(ξ)` for every `ξ` in the support: per block
/// an auxiliary `m_{r,d}` above `E_{r,d}ᵀ φ` at every segment endpoint, and
/// `m_r ≥ Σ_d m_{r,d}`. Blocks with numeric coefficients contribute their
/// exact maximum as a constant instead of an auxiliary variable.
pub fn robust_rows(
    model: &mut MilpModel,
    rows: &[CompiledRow],
    lifting: &Lifting,
    geometry: &[Vec<Segment>],
    offset: usize,
    tag: &str,
) -> Result<()> {
    for (r, row) in rows.iter().enumerate() {
        check_len("constraint coefficients", lifting.dim(), row.e.len())?;
        let mut agg = Vec::new();
        let mut fixed = 0.0;
        for (d, segs) in geometry.iter().enumerate() {
            let e = &row.e[lifting.block(d)];
            if e.iter().all(AffineExpr::is_zero) {
                continue;
            }
            if e.iter().all(AffineExpr::is_constant) {
                let best = segs
                    .iter()
                    .flat_map(endpoints)
                    .map(|(phi, _)| e.iter().zip(phi).map(|(c, p)| c.constant_term() * p).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                fixed += best;
                continue;
            }
            let m_rd = model.add_continuous(format!("m_{tag}{r}_{d}"), f64::NEG_INFINITY, f64::INFINITY)?;
            agg.push((m_rd, 1.0));
            for (j, seg) in segs.iter().enumerate() {
                for (phi, side) in endpoints(seg) {
                    let mut coeffs = vec![(m_rd, 1.0)];
                    let mut rhs = 0.0;
                    for (c, &p) in e.iter().zip(phi) {
                        rhs += push_expr(&mut coeffs, &shift(c, offset), -p);
                    }
                    model.add_row(format!("rc_{tag}{r}_{d}_{j}{side}"), coeffs, RowSense::Ge, -rhs)?;
                }
            }
        }
        // Σ_d m_{r,d} + fixed ≤ m_r
        let m_const = push_expr(&mut agg, &shift(&row.m, offset), -1.0);
        model.add_row(format!("rob_{tag}{r}"), agg, RowSense::Le, -m_const - fixed)?;
    }
    Ok(())
}

fn check_size(model: &MilpModel, options: &ReformOptions) -> Result<()> {
    if model.num_vars() > options.max_vars || model.num_rows() > options.max_rows {
        return Err(Error::ModelTooLarge {
            vars: model.num_vars(),
            rows: model.num_rows(),
        });
    }
    Ok(())
}

fn cost_pieces(compiled: &CompiledProblem, offset: usize) -> Vec<LiftedPiece> {
    compiled
        .pieces
        .iter()
        .map(|p| LiftedPiece {
            g: p.d.iter().map(|e| shift(e, offset)).collect(),
            h: shift(&p.r, offset),
        })
        .collect()
}

/// Adds one ball's worth of variables and rows; returns the objective terms.
#[allow(clippy::too_many_arguments)]
fn add_ball(
    model: &mut MilpModel,
    pieces: &[LiftedPiece],
    lifting: &Lifting,
    ball: &WassersteinSet,
    weight: f64,
    prune: bool,
    tag: &str,
) -> Result<usize> {
    let geometry = lifting.geometry();
    let lambda = model.add_continuous(format!("lambda{tag}"), 0.0, f64::INFINITY)?;
    model.add_objective(lambda, weight * ball.theta);
    let n = ball.samples.len() as f64;
    for (s, anchor) in ball.samples.iter().enumerate() {
        let eta = model.add_continuous(format!("eta{tag}_{s}"), f64::NEG_INFINITY, f64::INFINITY)?;
        model.add_objective(eta, weight / n);
        worst_case_rows(model, pieces, lifting, &geometry, anchor, lambda, eta, prune, &format!("{tag}{s}"))?;
    }
    Ok(lambda)
}

/// Worst-case expected cost over a Wasserstein ball:
/// `min λθ + (1/N) Σ_s η^s` subject to the per-sample endpoint rows and the
/// robust constraint rows.
pub fn build_wasserstein(inst: &Instance, set: &WassersteinSet, options: &ReformOptions) -> Result<Reformulation> {
    let mut model = MilpModel::new("wasserstein");
    add_policy_vars(&mut model, &inst.layout, "", options.integer_bound)?;
    let pieces = cost_pieces(&inst.compiled, 0);
    let lambda = add_ball(&mut model, &pieces, &inst.lifting, set, 1.0, options.prune_zero_blocks, "")?;
    robust_rows(&mut model, &inst.compiled.rows, &inst.lifting, &inst.lifting.geometry(), 0, "")?;
    check_size(&model, options)?;
    Ok(Reformulation {
        model,
        policy_offsets: vec![0],
        policy_lens: vec![inst.layout.num_vars],
        lambdas: vec![lambda],
    })
}

/// Wasserstein ball intersected with first-moment bounds: the cost
/// coefficients on each recovered coordinate are tilted by `β̲_d − β̄_d`
/// and the objective gains `−β̲ᵀξ̲ + β̄ᵀξ̄`.
pub fn build_mixed_moment(inst: &Instance, set: &MixedMomentSet, options: &ReformOptions) -> Result<Reformulation> {
    let mut model = MilpModel::new("mixed_moment");
    add_policy_vars(&mut model, &inst.layout, "", options.integer_bound)?;
    let dims = inst.lifting.space().total_dim();
    check_len("moment bounds", dims, set.lower.len())?;
    let mut beta_lo = Vec::with_capacity(dims);
    let mut beta_hi = Vec::with_capacity(dims);
    for d in 0..dims {
        let lo = model.add_continuous(format!("beta_lo_{d}"), 0.0, f64::INFINITY)?;
        let hi = model.add_continuous(format!("beta_hi_{d}"), 0.0, f64::INFINITY)?;
        model.set_objective(lo, -set.lower[d]);
        model.set_objective(hi, set.upper[d]);
        beta_lo.push(lo);
        beta_hi.push(hi);
    }
    let mut pieces = cost_pieces(&inst.compiled, 0);
    for p in &mut pieces {
        for d in 0..dims {
            for pos in inst.lifting.v_range(d) {
                p.g[pos].add_scaled(&AffineExpr::var(beta_lo[d]), 1.0);
                p.g[pos].add_scaled(&AffineExpr::var(beta_hi[d]), -1.0);
            }
        }
    }
    let lambda = add_ball(&mut model, &pieces, &inst.lifting, &set.ball, 1.0, false, "")?;
    robust_rows(&mut model, &inst.compiled.rows, &inst.lifting, &inst.lifting.geometry(), 0, "")?;
    check_size(&model, options)?;
    Ok(Reformulation {
        model,
        policy_offsets: vec![0],
        policy_lens: vec![inst.layout.num_vars],
        lambdas: vec![lambda],
    })
}

/// Event-wise set: one policy per scenario, block-diagonal rows and the
/// probability-weighted objective. `instances[l]` must use the lifting of
/// scenario `l`.
pub fn build_event_wise(instances: &[Instance], set: &EventWiseSet, options: &ReformOptions) -> Result<Reformulation> {
    check_len("scenario instances", set.scenarios.len(), instances.len())?;
    let mut model = MilpModel::new("event_wise");
    let mut offsets = Vec::new();
    let mut lens = Vec::new();
    for (l, inst) in instances.iter().enumerate() {
        if inst.lifting != set.scenarios[l].lifting {
            return Err(Error::InvalidSpec(format!("instance {l} does not use the lifting of scenario {l}")));
        }
        offsets.push(add_policy_vars(&mut model, &inst.layout, &format!("e{l}_"), options.integer_bound)?);
        lens.push(inst.layout.num_vars);
    }
    let mut lambdas = Vec::new();
    for (l, (inst, sc)) in instances.iter().zip(&set.scenarios).enumerate() {
        let pieces = cost_pieces(&inst.compiled, offsets[l]);
        let tag = format!("_e{l}_");
        lambdas.push(add_ball(&mut model, &pieces, &inst.lifting, &sc.ball, sc.probability, options.prune_zero_blocks, &tag)?);
        robust_rows(&mut model, &inst.compiled.rows, &inst.lifting, &inst.lifting.geometry(), offsets[l], &format!("e{l}_"))?;
    }
    check_size(&model, options)?;
    Ok(Reformulation {
        model,
        policy_offsets: offsets,
        policy_lens: lens,
        lambdas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::DisturbanceSpace;
    use drmic_milp::{solve_lp, LpStatus};

    fn unit_lifting(p: usize) -> Lifting {
        Lifting::equal_division(DisturbanceSpace::uniform(1, 1, 0.0, 1.0).unwrap(), p).unwrap()
    }

    /// Minimizes `eta` over the worst-case rows with λ fixed.
    fn worst_case_value(pieces: &[LiftedPiece], lifting: &Lifting, anchor: f64, lambda: f64) -> f64 {
        let mut m = MilpModel::new("t");
        let lam = m.add_continuous("lambda", lambda, lambda).unwrap();
        let eta = m.add_continuous("eta", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        m.set_objective(eta, 1.0);
        worst_case_rows(&mut m, pieces, lifting, &lifting.geometry(), &[anchor], lam, eta, true, "t").unwrap();
        let out = solve_lp(&m).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        out.objective
    }

    fn numeric_piece(g: &[f64], h: f64) -> LiftedPiece {
        LiftedPiece {
            g: g.iter().map(|&c| AffineExpr::constant(c)).collect(),
            h: AffineExpr::constant(h),
        }
    }

    #[test]
    fn endpoint_rows_for_identity_function() {
        let l = unit_lifting(1);
        let f = [numeric_piece(&[1.0], 0.0)];
        assert!((worst_case_value(&f, &l, 0.5, 0.0) - 1.0).abs() < 1e-12);
        assert!((worst_case_value(&f, &l, 0.5, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn endpoint_rows_for_two_pieces() {
        let l = unit_lifting(1);
        let f = [numeric_piece(&[1.0], 0.0), numeric_piece(&[-1.0], 1.0)];
        assert!((worst_case_value(&f, &l, 0.3, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auxiliary_count_for_small_wasserstein_model() {
        // N = 2, K = 2, T = 1, one dimension, p = 2; cost max(x, -x) with x = ξ.
        let mut sys = SystemModel::new(1, 1, 0, 0, 1);
        sys.stages[0].d.set(0, 0, 1.0);
        sys.stages[0].cost = vec![
            crate::system_model::CostPiece { x: vec![1.0], u: vec![], g: vec![], constant: 0.0 },
            crate::system_model::CostPiece { x: vec![-1.0], u: vec![], g: vec![], constant: 0.0 },
        ];
        let lifting = unit_lifting(2);
        let inst = Instance::new(sys, lifting.clone(), &CompileOptions::default()).unwrap();
        let set = WassersteinSet::new(0.1, vec![vec![0.2], vec![0.7]], lifting.space()).unwrap();
        let r = build_wasserstein(&inst, &set, &ReformOptions::default()).unwrap();
        assert_eq!(inst.layout.num_vars, 0);
        assert_eq!(r.model.num_vars(), 15);
    }

    #[test]
    fn robust_rows_cover_all_segment_endpoints() {
        // u_0 = Y·V + y0 ≥ 0 on [0, 1] with p = 2; fixing y0 = 0 and
        // Y = (1, -3) makes u negative at ξ = 1 only.
        let mut sys = SystemModel::new(1, 1, 1, 0, 1);
        sys.add_constraint(
            "u_nonneg",
            vec![(crate::system_model::Term::Control { stage: 0, index: 0 }, -1.0)],
            0.0,
        );
        let lifting = unit_lifting(2);
        let inst = Instance::new(sys, lifting.clone(), &CompileOptions::default()).unwrap();
        let set = WassersteinSet::new(0.0, vec![vec![0.5]], lifting.space()).unwrap();
        let mut r = build_wasserstein(&inst, &set, &ReformOptions::default()).unwrap();
        r.fix_policy(0, &[1.0, -3.0, 0.0]).unwrap();
        assert_eq!(solve_lp(&r.model).unwrap().status, LpStatus::Infeasible);
        r.fix_policy(0, &[1.0, -1.0, 0.0]).unwrap();
        assert_eq!(solve_lp(&r.model).unwrap().status, LpStatus::Optimal);
    }
}
