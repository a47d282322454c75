//! Uncertain linear systems, lifted control policies and their compilation
//! into data affine in the lifted disturbance.
//!
//! Stages are zero-based. At stage `t` the controls `u_t` (continuous) and
//! `γ_t` (integer) are chosen, the disturbance `ξ_t` arrives, and
//!
//! `x_t = A_t x_{t−1} + B_t u_t + C_t γ_t + D_t ξ_t`
//!
//! starting from `x_{−1} = x0`. The stage cost is
//! `α_t · max_τ (a_τ x_t + b_τ u_t + c_τ γ_t + r_τ)` and robust constraints
//! read `Σ_t (Ã_t x_t + B̃_t u_t + C̃_t γ_t + D̃_t ξ_t) ≤ q` for all `ξ ∈ Ξ`.
//!
//! A continuous control is affine in the `V` entries and an integer control
//! affine in the `Q` entries of the lifted disturbance it may observe; by
//! default channel `k` at stage `t` observes `ξ_0 … ξ_t`.

use drmic_milp::VarKind;

use crate::affine::{AffineExpr, LiftedAffine};
use crate::error::{check_len, Error, Result};
use crate::lifting::Lifting;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a `rows × cols` matrix from a list of rows.
    pub fn from_rows(rows: usize, cols: usize, data: &[Vec<f64>]) -> Result<Self> {
        check_len("matrix rows", rows, data.len())?;
        let mut m = Self::zeros(rows, cols);
        for (r, row) in data.iter().enumerate() {
            check_len("matrix row", cols, row.len())?;
            m.data[r * cols..(r + 1) * cols].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn check(&self, name: &str, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::InvalidSpec(format!(
                "{name} is {}x{}, expected {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

/// One affine piece `a·x_t + b·u_t + c·γ_t + constant` of a stage cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostPiece {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub g: Vec<f64>,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    /// Convex piecewise-linear cost as a maximum of pieces; never empty.
    pub cost: Vec<CostPiece>,
    pub discount: f64,
}

/// Which part of the trajectory a constraint coefficient multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    State { stage: usize, index: usize },
    Control { stage: usize, index: usize },
    Integer { stage: usize, index: usize },
    Disturbance { stage: usize, index: usize },
}

/// `Σ coeff · term ≤ rhs`, required for every disturbance in the support.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub name: String,
    pub terms: Vec<(Term, f64)>,
    pub rhs: f64,
}

/// Information available to one control channel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelInfo {
    /// Stage `t` observes disturbances of stages `0 ..= t − delay`.
    pub delay: usize,
    /// Observed disturbance dimensions; all when `None`.
    pub dims: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub horizon: usize,
    pub nx: usize,
    pub nu: usize,
    pub ng: usize,
    pub nxi: usize,
    pub x0: Vec<f64>,
    pub stages: Vec<Stage>,
    pub constraints: Vec<ConstraintRow>,
    pub u_info: Vec<ChannelInfo>,
    pub g_info: Vec<ChannelInfo>,
}

impl SystemModel {
    /// Zero dynamics, zero single-piece costs, unit discounts, no constraints.
    pub fn new(horizon: usize, nx: usize, nu: usize, ng: usize, nxi: usize) -> Self {
        let stage = Stage {
            a: Matrix::zeros(nx, nx),
            b: Matrix::zeros(nx, nu),
            c: Matrix::zeros(nx, ng),
            d: Matrix::zeros(nx, nxi),
            cost: vec![CostPiece {
                x: vec![0.0; nx],
                u: vec![0.0; nu],
                g: vec![0.0; ng],
                constant: 0.0,
            }],
            discount: 1.0,
        };
        Self {
            horizon,
            nx,
            nu,
            ng,
            nxi,
            x0: vec![0.0; nx],
            stages: vec![stage; horizon],
            constraints: Vec::new(),
            u_info: vec![ChannelInfo::default(); nu],
            g_info: vec![ChannelInfo::default(); ng],
        }
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, terms: Vec<(Term, f64)>, rhs: f64) {
        self.constraints.push(ConstraintRow {
            name: name.into(),
            terms,
            rhs,
        });
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidSpec("horizon must be positive".into()));
        }
        check_len("initial state", self.nx, self.x0.len())?;
        check_len("stages", self.horizon, self.stages.len())?;
        check_len("continuous control information", self.nu, self.u_info.len())?;
        check_len("integer control information", self.ng, self.g_info.len())?;
        for (t, s) in self.stages.iter().enumerate() {
            s.a.check(&format!("A[{t}]"), self.nx, self.nx)?;
            s.b.check(&format!("B[{t}]"), self.nx, self.nu)?;
            s.c.check(&format!("C[{t}]"), self.nx, self.ng)?;
            s.d.check(&format!("D[{t}]"), self.nx, self.nxi)?;
            if !(0.0..=1.0).contains(&s.discount) {
                return Err(Error::InvalidSpec(format!("discount of stage {t} must lie in [0, 1]")));
            }
            if s.cost.is_empty() {
                return Err(Error::InvalidSpec(format!("stage {t} has no cost pieces")));
            }
            for p in &s.cost {
                check_len("cost state coefficients", self.nx, p.x.len())?;
                check_len("cost control coefficients", self.nu, p.u.len())?;
                check_len("cost integer coefficients", self.ng, p.g.len())?;
            }
        }
        for row in &self.constraints {
            for &(term, c) in &row.terms {
                let (stage, index, n) = match term {
                    Term::State { stage, index } => (stage, index, self.nx),
                    Term::Control { stage, index } => (stage, index, self.nu),
                    Term::Integer { stage, index } => (stage, index, self.ng),
                    Term::Disturbance { stage, index } => (stage, index, self.nxi),
                };
                if stage >= self.horizon || index >= n || !c.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "constraint `{}` has an invalid term {term:?} with coefficient {c}",
                        row.name
                    )));
                }
            }
        }
        for info in self.u_info.iter().chain(&self.g_info) {
            if let Some(dims) = &info.dims {
                if dims.iter().any(|&i| i >= self.nxi) {
                    return Err(Error::InvalidSpec("information mask names an unknown dimension".into()));
                }
            }
        }
        Ok(())
    }
}

/// Decision variables of one control channel at one stage:
/// `value = Σ gain_vars[c] · z[columns[c]] + offset_var`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSlot {
    pub stage: usize,
    pub channel: usize,
    pub columns: Vec<usize>,
    pub gain_vars: Vec<usize>,
    pub offset_var: usize,
}

impl ControlSlot {
    pub fn eval(&self, values: &[f64], z: &[f64]) -> f64 {
        values[self.offset_var]
            + self
                .columns
                .iter()
                .zip(&self.gain_vars)
                .map(|(&c, &v)| values[v] * z[c])
                .sum::<f64>()
    }

    fn expr(&self, dim: usize) -> LiftedAffine {
        let mut e = LiftedAffine::zero(dim);
        for (&c, &v) in self.columns.iter().zip(&self.gain_vars) {
            e.coef[c] = AffineExpr::var(v);
        }
        e.constant = AffineExpr::var(self.offset_var);
        e
    }
}

/// Flat numbering of the policy variables: all continuous gains `Y`
/// (stage-major, then channel, then column), the continuous offsets `y0`,
/// the integer gains `Z` and the integer offsets `z0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyLayout {
    pub u: Vec<ControlSlot>,
    pub g: Vec<ControlSlot>,
    pub num_vars: usize,
    /// Ids `integer_start..num_vars` are the integer variables.
    pub integer_start: usize,
    nu: usize,
    ng: usize,
}

fn observed(lifting: &Lifting, info: &ChannelInfo, stage: usize, q_part: bool) -> Vec<usize> {
    let seen = (stage + 1).saturating_sub(info.delay);
    let dims = lifting.space().dims();
    let mut cols = Vec::new();
    for t in 0..seen {
        for i in 0..dims {
            if info.dims.as_ref().is_some_and(|ds| !ds.contains(&i)) {
                continue;
            }
            let d = lifting.space().flat(t, i);
            if q_part {
                cols.extend(lifting.q_range(d));
            } else {
                cols.extend(lifting.v_range(d));
            }
        }
    }
    cols
}

impl PolicyLayout {
    pub fn new(model: &SystemModel, lifting: &Lifting) -> Self {
        let mut next = 0;
        let mut alloc = |n: usize| {
            let ids: Vec<usize> = (next..next + n).collect();
            next += n;
            ids
        };
        let mut u = Vec::new();
        for t in 0..model.horizon {
            for k in 0..model.nu {
                let columns = observed(lifting, &model.u_info[k], t, false);
                let gain_vars = alloc(columns.len());
                u.push(ControlSlot {
                    stage: t,
                    channel: k,
                    columns,
                    gain_vars,
                    offset_var: 0,
                });
            }
        }
        for s in &mut u {
            s.offset_var = alloc(1)[0];
        }
        let integer_start = u.last().map_or(0, |s| s.offset_var + 1);
        let mut g = Vec::new();
        for t in 0..model.horizon {
            for k in 0..model.ng {
                let columns = observed(lifting, &model.g_info[k], t, true);
                let gain_vars = alloc(columns.len());
                g.push(ControlSlot {
                    stage: t,
                    channel: k,
                    columns,
                    gain_vars,
                    offset_var: 0,
                });
            }
        }
        for s in &mut g {
            s.offset_var = alloc(1)[0];
        }
        Self {
            u,
            g,
            num_vars: next,
            integer_start,
            nu: model.nu,
            ng: model.ng,
        }
    }

    pub fn u_slot(&self, stage: usize, channel: usize) -> &ControlSlot {
        &self.u[stage * self.nu + channel]
    }

    pub fn g_slot(&self, stage: usize, channel: usize) -> &ControlSlot {
        &self.g[stage * self.ng + channel]
    }

    pub fn is_integer(&self, id: usize) -> bool {
        id >= self.integer_start && id < self.num_vars
    }

    /// Variable names and kinds in id order. Stages are printed one-based.
    pub fn variables(&self) -> Vec<(String, VarKind)> {
        let mut out = vec![(String::new(), VarKind::Continuous); self.num_vars];
        for (slots, gain, offset, kind) in [
            (&self.u, "Y", "y0", VarKind::Continuous),
            (&self.g, "Z", "z0", VarKind::Integer),
        ] {
            for s in slots {
                for (&c, &v) in s.columns.iter().zip(&s.gain_vars) {
                    out[v] = (format!("{gain}_{}_{}_{c}", s.stage + 1, s.channel + 1), kind);
                }
                out[s.offset_var] = (format!("{offset}_{}_{}", s.stage + 1, s.channel + 1), kind);
            }
        }
        out
    }
}

/// One robust constraint as `m ≥ Eᵀ G(ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledRow {
    pub name: String,
    pub e: Vec<AffineExpr>,
    pub m: AffineExpr,
}

/// One combined cost piece `d_kᵀ G(ξ) + r_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPiece {
    pub d: Vec<AffineExpr>,
    pub r: AffineExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledProblem {
    pub lifted_dim: usize,
    pub rows: Vec<CompiledRow>,
    pub pieces: Vec<CompiledPiece>,
}

/// Numeric counterpart of [`CompiledProblem`] for a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericProblem {
    pub e: Vec<Vec<f64>>,
    pub m: Vec<f64>,
    pub d: Vec<Vec<f64>>,
    pub r: Vec<f64>,
}

impl NumericProblem {
    pub fn cost(&self, z: &[f64]) -> f64 {
        self.d
            .iter()
            .zip(&self.r)
            .map(|(d, r)| dot(d, z) + r)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Eᵀ z − m` per row; feasible when all are `≤ 0`.
    pub fn residuals(&self, z: &[f64]) -> Vec<f64> {
        self.e.iter().zip(&self.m).map(|(e, m)| dot(e, z) - m).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl CompiledProblem {
    pub fn substitute(&self, values: &[f64]) -> NumericProblem {
        let vec = |v: &[AffineExpr]| v.iter().map(|c| c.eval(values)).collect::<Vec<_>>();
        NumericProblem {
            e: self.rows.iter().map(|r| vec(&r.e)).collect(),
            m: self.rows.iter().map(|r| r.m.eval(values)).collect(),
            d: self.pieces.iter().map(|p| vec(&p.d)).collect(),
            r: self.pieces.iter().map(|p| p.r.eval(values)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompileOptions {
    /// Largest number of combined cost pieces accepted.
    pub piece_cap: usize,
    /// Drop combined pieces that another piece dominates on the bounding
    /// box of the lifted support (only pieces whose difference does not
    /// depend on the decision variables are compared).
    pub prune_dominated: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            piece_cap: 100_000,
            prune_dominated: false,
        }
    }
}

/// States, controls and disturbances as affine functions of the lifted point.
#[derive(Debug, Clone)]
pub struct RollOut {
    pub x: Vec<Vec<LiftedAffine>>,
    pub u: Vec<Vec<LiftedAffine>>,
    pub g: Vec<Vec<LiftedAffine>>,
    pub xi: Vec<Vec<LiftedAffine>>,
}

pub fn roll_out(model: &SystemModel, lifting: &Lifting, layout: &PolicyLayout) -> Result<RollOut> {
    model.validate()?;
    check_len("lifting horizon", model.horizon, lifting.space().horizon())?;
    check_len("lifting dimensions", model.nxi, lifting.space().dims())?;
    let dim = lifting.dim();
    let mut prev: Vec<LiftedAffine> = model
        .x0
        .iter()
        .map(|&v| {
            let mut e = LiftedAffine::zero(dim);
            e.constant = AffineExpr::constant(v);
            e
        })
        .collect();
    let mut out = RollOut {
        x: Vec::new(),
        u: Vec::new(),
        g: Vec::new(),
        xi: Vec::new(),
    };
    for (t, st) in model.stages.iter().enumerate() {
        let u: Vec<LiftedAffine> = (0..model.nu).map(|k| layout.u_slot(t, k).expr(dim)).collect();
        let g: Vec<LiftedAffine> = (0..model.ng).map(|k| layout.g_slot(t, k).expr(dim)).collect();
        let xi: Vec<LiftedAffine> = (0..model.nxi)
            .map(|i| {
                let mut e = LiftedAffine::zero(dim);
                for pos in lifting.v_range(lifting.space().flat(t, i)) {
                    e.coef[pos] = AffineExpr::constant(1.0);
                }
                e
            })
            .collect();
        let mut x = vec![LiftedAffine::zero(dim); model.nx];
        for (r, xr) in x.iter_mut().enumerate() {
            for c in 0..model.nx {
                xr.add_scaled(&prev[c], st.a.get(r, c));
            }
            for c in 0..model.nu {
                xr.add_scaled(&u[c], st.b.get(r, c));
            }
            for c in 0..model.ng {
                xr.add_scaled(&g[c], st.c.get(r, c));
            }
            for c in 0..model.nxi {
                xr.add_scaled(&xi[c], st.d.get(r, c));
            }
        }
        out.x.push(x.clone());
        out.u.push(u);
        out.g.push(g);
        out.xi.push(xi);
        prev = x;
    }
    Ok(out)
}

fn term_expr<'a>(ro: &'a RollOut, term: Term) -> &'a LiftedAffine {
    match term {
        Term::State { stage, index } => &ro.x[stage][index],
        Term::Control { stage, index } => &ro.u[stage][index],
        Term::Integer { stage, index } => &ro.g[stage][index],
        Term::Disturbance { stage, index } => &ro.xi[stage][index],
    }
}

pub fn compile_constraints(model: &SystemModel, ro: &RollOut, dim: usize) -> Vec<CompiledRow> {
    model
        .constraints
        .iter()
        .map(|row| {
            let mut lhs = LiftedAffine::zero(dim);
            for &(term, c) in &row.terms {
                lhs.add_scaled(term_expr(ro, term), c);
            }
            let mut m = AffineExpr::constant(row.rhs);
            m.add_scaled(&lhs.constant, -1.0);
            CompiledRow {
                name: row.name.clone(),
                e: lhs.coef,
                m,
            }
        })
        .collect()
}

fn stage_pieces(model: &SystemModel, ro: &RollOut, dim: usize, t: usize) -> Vec<LiftedAffine> {
    let st = &model.stages[t];
    st.cost
        .iter()
        .map(|p| {
            let mut e = LiftedAffine::zero(dim);
            for (k, &a) in p.x.iter().enumerate() {
                e.add_scaled(&ro.x[t][k], st.discount * a);
            }
            for (k, &b) in p.u.iter().enumerate() {
                e.add_scaled(&ro.u[t][k], st.discount * b);
            }
            for (k, &c) in p.g.iter().enumerate() {
                e.add_scaled(&ro.g[t][k], st.discount * c);
            }
            e.constant.add_constant(st.discount * p.constant);
            e
        })
        .collect()
}

/// Bounds of every lifted coordinate over the lifted support.
pub fn lifted_box(lifting: &Lifting) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![0.0; lifting.dim()];
    let mut hi = vec![0.0; lifting.dim()];
    for d in 0..lifting.space().total_dim() {
        let w = lifting.breakpoints(d);
        let p = w.len() - 1;
        let v = lifting.v_range(d);
        lo[v.start] = w[0];
        hi[v.start] = w[1];
        for j in 2..=p {
            hi[v.start + j - 1] = w[j] - w[j - 1];
        }
        for pos in lifting.q_range(d) {
            hi[pos] = 1.0;
        }
    }
    (lo, hi)
}

fn dominated(a: &CompiledPiece, b: &CompiledPiece, lo: &[f64], hi: &[f64]) -> bool {
    // True when b − a ≥ 0 on the box and the difference is numeric.
    let mut r = b.r.clone();
    r.add_scaled(&a.r, -1.0);
    if !r.is_constant() {
        return false;
    }
    let mut min = r.constant_term();
    for (pos, (da, db)) in a.d.iter().zip(&b.d).enumerate() {
        let mut diff = db.clone();
        diff.add_scaled(da, -1.0);
        if !diff.is_constant() {
            return false;
        }
        let c = diff.constant_term();
        min += if c >= 0.0 { c * lo[pos] } else { c * hi[pos] };
    }
    min >= 0.0
}

/// Sum over stages of the per-stage maxima, written as one maximum over the
/// combinations of stage pieces (lexicographic, first stage slowest).
pub fn compile_cost(
    model: &SystemModel,
    lifting: &Lifting,
    ro: &RollOut,
    options: &CompileOptions,
) -> Result<Vec<CompiledPiece>> {
    let dim = lifting.dim();
    let per_stage: Vec<Vec<LiftedAffine>> = (0..model.horizon).map(|t| stage_pieces(model, ro, dim, t)).collect();
    let count: f64 = per_stage.iter().map(|p| p.len() as f64).product();
    if count > options.piece_cap as f64 {
        return Err(Error::PieceExplosion {
            count,
            cap: options.piece_cap,
        });
    }
    let mut combos: Vec<LiftedAffine> = vec![LiftedAffine::zero(dim)];
    for stage in &per_stage {
        let mut next = Vec::with_capacity(combos.len() * stage.len());
        for c in &combos {
            for p in stage {
                let mut e = c.clone();
                e.add_scaled(p, 1.0);
                next.push(e);
            }
        }
        combos = next;
    }
    let mut pieces: Vec<CompiledPiece> = combos
        .into_iter()
        .map(|c| CompiledPiece {
            d: c.coef,
            r: c.constant,
        })
        .collect();
    if options.prune_dominated && pieces.len() > 1 {
        let (lo, hi) = lifted_box(lifting);
        let mut keep = vec![true; pieces.len()];
        for k in 0..pieces.len() {
            keep[k] = !(0..pieces.len()).any(|o| o != k && keep[o] && dominated(&pieces[k], &pieces[o], &lo, &hi));
        }
        let mut it = keep.iter();
        pieces.retain(|_| *it.next().unwrap());
    }
    Ok(pieces)
}

pub fn compile(
    model: &SystemModel,
    lifting: &Lifting,
    layout: &PolicyLayout,
    options: &CompileOptions,
) -> Result<CompiledProblem> {
    let ro = roll_out(model, lifting, layout)?;
    let rows = compile_constraints(model, &ro, lifting.dim());
    let pieces = compile_cost(model, lifting, &ro, options)?;
    Ok(CompiledProblem {
        lifted_dim: lifting.dim(),
        rows,
        pieces,
    })
}

/// A simulated trajectory under a numeric policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub stage_costs: Vec<f64>,
    pub total_cost: f64,
    /// `lhs − rhs` for every robust constraint.
    pub residuals: Vec<f64>,
}

impl Trajectory {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Simulates the system directly for the disturbance path `xi`.
pub fn evaluate_policy(
    model: &SystemModel,
    lifting: &Lifting,
    layout: &PolicyLayout,
    values: &[f64],
    xi: &[f64],
) -> Result<Trajectory> {
    check_len("policy values", layout.num_vars, values.len())?;
    let z = lifting.lift(xi)?;
    let mut x_prev = model.x0.clone();
    let mut tr = Trajectory {
        x: Vec::new(),
        u: Vec::new(),
        g: Vec::new(),
        stage_costs: Vec::new(),
        total_cost: 0.0,
        residuals: Vec::new(),
    };
    for (t, st) in model.stages.iter().enumerate() {
        let u: Vec<f64> = (0..model.nu).map(|k| layout.u_slot(t, k).eval(values, &z)).collect();
        let g: Vec<f64> = (0..model.ng).map(|k| layout.g_slot(t, k).eval(values, &z)).collect();
        let xi_t = &xi[t * model.nxi..(t + 1) * model.nxi];
        let x: Vec<f64> = (0..model.nx)
            .map(|r| dot(st.a.row(r), &x_prev) + dot(st.b.row(r), &u) + dot(st.c.row(r), &g) + dot(st.d.row(r), xi_t))
            .collect();
        let cost = st
            .cost
            .iter()
            .map(|p| dot(&p.x, &x) + dot(&p.u, &u) + dot(&p.g, &g) + p.constant)
            .fold(f64::NEG_INFINITY, f64::max);
        tr.stage_costs.push(st.discount * cost);
        tr.x.push(x.clone());
        tr.u.push(u);
        tr.g.push(g);
        x_prev = x;
    }
    tr.total_cost = tr.stage_costs.iter().sum();
    for row in &model.constraints {
        let lhs: f64 = row
            .terms
            .iter()
            .map(|&(term, c)| {
                c * match term {
                    Term::State { stage, index } => tr.x[stage][index],
                    Term::Control { stage, index } => tr.u[stage][index],
                    Term::Integer { stage, index } => tr.g[stage][index],
                    Term::Disturbance { stage, index } => xi[stage * model.nxi + index],
                }
            })
            .sum();
        tr.residuals.push(lhs - row.rhs);
    }
    Ok(tr)
}
