//! Bounded revised simplex.
//!
//! Every row `i` gets a logical variable `sᵢ` with `A x + s = 0`, so a `≤ b`
//! row becomes `sᵢ ≥ -b`, a `≥ b` row `sᵢ ≤ -b` and an equality fixes `sᵢ`.
//! The all-logical basis is the identity, which keeps phase 1 free of
//! artificial columns: it minimizes the sum of bound infeasibilities of the
//! basic variables instead. Warm starts go through the dual simplex.

use crate::error::LpError;
use crate::factor::EtaFile;
use crate::model::{MilpModel, RowSense};
use crate::Tolerances;

const NONE: usize = usize::MAX;
/// Ratio-test ties are decided within this absolute window.
const TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Status of every column: structural variables first, then one logical per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub objective: f64,
    /// Structural variable values.
    pub x: Vec<f64>,
    /// Sensitivity of the objective to each row's right-hand side.
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    pub basis: Basis,
}

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub tolerances: Tolerances,
    /// Defaults to `100 (n + m) + 10_000` when unset.
    pub max_iterations: Option<usize>,
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            max_iterations: None,
            refactor_interval: 100,
            bland_after: 50,
        }
    }
}

/// Solves the LP relaxation of `model` from scratch.
pub fn solve_lp(model: &MilpModel) -> Result<LpOutcome, LpError> {
    LpSolver::new(model, LpOptions::default()).solve()
}

enum DualEnd {
    Feasible,
    Infeasible,
}

/// Reusable simplex state: bounds can be changed and a previous basis
/// installed between calls to [`LpSolver::solve`].
#[derive(Debug, Clone)]
pub struct LpSolver {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    val: Vec<f64>,
    cost: Vec<f64>,
    obj_constant: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    head: Vec<usize>,
    pos: Vec<usize>,
    etas: EtaFile,
    updates: usize,
    options: LpOptions,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
}

fn default_status(lo: f64, hi: f64) -> VarStatus {
    if lo.is_finite() {
        VarStatus::AtLower
    } else if hi.is_finite() {
        VarStatus::AtUpper
    } else {
        VarStatus::Free
    }
}

impl LpSolver {
    pub fn new(model: &MilpModel, options: LpOptions) -> Self {
        let n = model.num_vars();
        let m = model.num_rows();
        let mut counts = vec![0usize; n + 1];
        for row in model.rows() {
            for &(j, _) in &row.coeffs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut fill = counts;
        let mut row_idx = vec![0; nnz];
        let mut val = vec![0.0; nnz];
        for (i, row) in model.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                let k = fill[j];
                row_idx[k] = i;
                val[k] = a;
                fill[j] += 1;
            }
        }

        let mut cost = model.objective().to_vec();
        cost.resize(n + m, 0.0);
        let mut lower: Vec<f64> = model.vars().iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = model.vars().iter().map(|v| v.upper).collect();
        for row in model.rows() {
            let (lo, hi) = match row.sense {
                RowSense::Le => (-row.rhs, f64::INFINITY),
                RowSense::Ge => (f64::NEG_INFINITY, -row.rhs),
                RowSense::Eq => (-row.rhs, -row.rhs),
            };
            lower.push(lo);
            upper.push(hi);
        }

        let mut status: Vec<VarStatus> = (0..n).map(|j| default_status(lower[j], upper[j])).collect();
        status.extend(std::iter::repeat(VarStatus::Basic).take(m));
        let max_iterations = options.max_iterations.unwrap_or(100 * (n + m) + 10_000);
        let mut s = Self {
            n,
            m,
            col_start,
            row_idx,
            val,
            cost,
            obj_constant: model.objective_constant(),
            lower,
            upper,
            status,
            x: vec![0.0; n + m],
            head: (n..n + m).collect(),
            pos: vec![NONE; n + m],
            etas: EtaFile::default(),
            updates: 0,
            options,
            iterations: 0,
            max_iterations,
            degenerate_run: 0,
        };
        for r in 0..m {
            s.pos[n + r] = r;
        }
        for j in 0..n {
            s.x[j] = s.nonbasic_value(j);
        }
        s
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Changes the bounds of structural variable `j`.
    pub fn set_var_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(j < self.n, "structural variable index out of range");
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.status[j] != VarStatus::Basic {
            self.normalize_status(j);
            self.x[j] = self.nonbasic_value(j);
        }
    }

    pub fn basis(&self) -> Basis {
        Basis {
            status: self.status.clone(),
        }
    }

    /// Installs a basis, typically the optimal basis of a parent problem.
    pub fn set_basis(&mut self, basis: &Basis) {
        assert_eq!(basis.status.len(), self.n + self.m, "basis size mismatch");
        self.status.clone_from(&basis.status);
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                self.normalize_status(j);
                self.x[j] = self.nonbasic_value(j);
            }
        }
    }

    fn normalize_status(&mut self, j: usize) {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        self.status[j] = match self.status[j] {
            VarStatus::AtLower if lo.is_finite() => VarStatus::AtLower,
            VarStatus::AtUpper if hi.is_finite() => VarStatus::AtUpper,
            VarStatus::Free if !lo.is_finite() && !hi.is_finite() => VarStatus::Free,
            VarStatus::AtLower | VarStatus::Free if hi.is_finite() && !lo.is_finite() => VarStatus::AtUpper,
            VarStatus::AtUpper | VarStatus::Free if lo.is_finite() => VarStatus::AtLower,
            VarStatus::Basic => VarStatus::Basic,
            _ => default_status(lo, hi),
        };
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lower[j],
            VarStatus::AtUpper => self.upper[j],
            VarStatus::Free | VarStatus::Basic => 0.0,
        }
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|k| self.val[k] * y[self.row_idx[k]])
                .sum()
        } else {
            y[j - self.n]
        }
    }

    fn load_col(&self, j: usize, v: &mut [f64]) {
        v.iter_mut().for_each(|e| *e = 0.0);
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                v[self.row_idx[k]] = self.val[k];
            }
        } else {
            v[j - self.n] = 1.0;
        }
    }

    fn col_nnz(&self, j: usize) -> usize {
        if j < self.n {
            self.col_start[j + 1] - self.col_start[j]
        } else {
            1
        }
    }

    /// Rebuilds the eta file from the current set of basic variables. Columns
    /// found numerically dependent are made nonbasic and replaced by logicals.
    fn reinvert(&mut self) {
        let (n, m) = (self.n, self.m);
        self.etas.clear();
        self.head = vec![NONE; m];
        self.pos = vec![NONE; n + m];
        let mut structural = Vec::new();
        for j in 0..n + m {
            if self.status[j] != VarStatus::Basic {
                continue;
            }
            if j >= n {
                let r = j - n;
                self.head[r] = j;
                self.pos[j] = r;
            } else {
                structural.push(j);
            }
        }
        structural.sort_by_key(|&j| (self.col_nnz(j), j));
        let mut v = vec![0.0; m];
        for j in structural {
            self.load_col(j, &mut v);
            self.etas.ftran(&mut v);
            let mut best = NONE;
            let mut best_abs = 0.0;
            let mut col_max = 0.0f64;
            for r in 0..m {
                col_max = col_max.max(v[r].abs());
                if self.head[r] == NONE && v[r].abs() > best_abs {
                    best_abs = v[r].abs();
                    best = r;
                }
            }
            if best == NONE || best_abs <= 1e-11 * col_max.max(1.0) {
                self.status[j] = default_status(self.lower[j], self.upper[j]);
                self.x[j] = self.nonbasic_value(j);
                continue;
            }
            self.etas.push(best, &v, 1e-14);
            self.head[best] = j;
            self.pos[j] = best;
        }
        for r in 0..m {
            if self.head[r] == NONE {
                let j = n + r;
                self.status[j] = VarStatus::Basic;
                self.head[r] = j;
                self.pos[j] = r;
            }
        }
        self.updates = 0;
    }

    /// True when the eta file factors exactly the basis given by `status`.
    fn factor_matches_status(&self) -> bool {
        self.head.len() == self.m
            && !self.head.contains(&NONE)
            && (0..self.n + self.m).all(|j| (self.status[j] == VarStatus::Basic) == (self.pos[j] != NONE))
    }

    fn compute_primal(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < self.n {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.row_idx[k]] -= self.val[k] * xj;
                }
            } else {
                rhs[j - self.n] -= xj;
            }
        }
        self.etas.ftran(&mut rhs);
        for r in 0..self.m {
            self.x[self.head[r]] = rhs[r];
        }
    }

    fn refresh(&mut self) {
        self.reinvert();
        self.compute_primal();
    }

    fn maybe_refactor(&mut self) {
        if self.updates >= self.options.refactor_interval || self.etas.nnz() > 20 * (self.m + self.col_start[self.n]) + 1000 {
            self.refresh();
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let tol = self.options.tolerances.feasibility;
        let xj = self.x[j];
        if xj < self.lower[j] - tol {
            self.lower[j] - xj
        } else if xj > self.upper[j] + tol {
            xj - self.upper[j]
        } else {
            0.0
        }
    }

    fn is_primal_feasible(&self) -> bool {
        self.head.iter().all(|&j| self.infeasibility(j) == 0.0)
    }

    fn duals(&self) -> Vec<f64> {
        let mut y: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        self.etas.btran(&mut y);
        y
    }

    fn is_dual_feasible(&self) -> bool {
        let tol = self.options.tolerances.reduced_cost;
        let y = self.duals();
        (0..self.n + self.m).all(|j| {
            if self.lower[j] == self.upper[j] {
                return true;
            }
            let d = self.cost[j] - self.col_dot(j, &y);
            match self.status[j] {
                VarStatus::Basic => true,
                VarStatus::AtLower => d >= -tol,
                VarStatus::AtUpper => d <= tol,
                VarStatus::Free => d.abs() <= tol,
            }
        })
    }

    fn count_iteration(&mut self) -> Result<(), LpError> {
        self.iterations += 1;
        if self.iterations > self.max_iterations {
            return Err(LpError::IterationLimit(self.max_iterations));
        }
        Ok(())
    }

    fn replace_basic(&mut self, r: usize, entering: usize, alpha: &[f64]) {
        let leaving = self.head[r];
        self.pos[leaving] = NONE;
        self.status[entering] = VarStatus::Basic;
        self.head[r] = entering;
        self.pos[entering] = r;
        self.etas.push(r, alpha, 1e-14);
        self.updates += 1;
    }

    /// Primal simplex; runs phase 1 while any basic variable is out of bounds.
    fn primal(&mut self) -> Result<LpStatus, LpError> {
        let tol = self.options.tolerances;
        let (n, m) = (self.n, self.m);
        let mut alpha = vec![0.0; m];
        loop {
            self.maybe_refactor();
            let mut cb = vec![0.0; m];
            let mut phase1 = false;
            for r in 0..m {
                let j = self.head[r];
                if self.x[j] < self.lower[j] - tol.feasibility {
                    cb[r] = -1.0;
                    phase1 = true;
                } else if self.x[j] > self.upper[j] + tol.feasibility {
                    cb[r] = 1.0;
                    phase1 = true;
                }
            }
            if !phase1 {
                for r in 0..m {
                    cb[r] = self.cost[self.head[r]];
                }
            }
            self.etas.btran(&mut cb);
            let y = cb;

            let bland = self.degenerate_run >= self.options.bland_after;
            let mut entering = NONE;
            let mut dir = 0.0;
            let mut best = 0.0;
            for j in 0..n + m {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let d = cj - self.col_dot(j, &y);
                let candidate = match st {
                    VarStatus::AtLower if d < -tol.reduced_cost => 1.0,
                    VarStatus::AtUpper if d > tol.reduced_cost => -1.0,
                    VarStatus::Free if d.abs() > tol.reduced_cost => -d.signum(),
                    _ => 0.0,
                };
                if candidate == 0.0 {
                    continue;
                }
                if bland {
                    entering = j;
                    dir = candidate;
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = j;
                    dir = candidate;
                }
            }
            if entering == NONE {
                return Ok(if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal });
            }

            let q = entering;
            self.load_col(q, &mut alpha);
            self.etas.ftran(&mut alpha);

            let mut theta = self.upper[q] - self.lower[q];
            let mut leave = NONE;
            let mut leave_upper = false;
            let mut leave_abs = 0.0;
            for r in 0..m {
                let a = alpha[r];
                if a.abs() <= tol.pivot {
                    continue;
                }
                let j = self.head[r];
                let rate = -dir * a;
                let xj = self.x[j];
                let (limit, to_upper) = if rate > 0.0 {
                    if phase1 && xj < self.lower[j] - tol.feasibility {
                        (self.lower[j], false)
                    } else if self.upper[j].is_finite() {
                        (self.upper[j], true)
                    } else {
                        continue;
                    }
                } else if phase1 && xj > self.upper[j] + tol.feasibility {
                    (self.upper[j], true)
                } else if self.lower[j].is_finite() {
                    (self.lower[j], false)
                } else {
                    continue;
                };
                let t = ((limit - xj) / rate).max(0.0);
                let better = if t < theta - TIE {
                    true
                } else if t <= theta + TIE && leave != NONE {
                    if bland {
                        j < self.head[leave]
                    } else {
                        a.abs() > leave_abs
                    }
                } else {
                    t <= theta + TIE && leave == NONE && t < theta
                };
                if better {
                    theta = t;
                    leave = r;
                    leave_upper = to_upper;
                    leave_abs = a.abs();
                }
            }
            if !theta.is_finite() {
                if phase1 {
                    return Err(LpError::NumericalFailure("unbounded phase-1 ray".into()));
                }
                return Ok(LpStatus::Unbounded);
            }

            self.degenerate_run = if theta <= TIE { self.degenerate_run + 1 } else { 0 };
            if theta > 0.0 {
                self.x[q] += dir * theta;
                for r in 0..m {
                    if alpha[r] != 0.0 {
                        let j = self.head[r];
                        self.x[j] -= dir * alpha[r] * theta;
                    }
                }
            }
            if leave == NONE {
                self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[q] = self.nonbasic_value(q);
            } else {
                let jl = self.head[leave];
                self.status[jl] = if leave_upper { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[jl] = if leave_upper { self.upper[jl] } else { self.lower[jl] };
                self.replace_basic(leave, q, &alpha);
            }
            self.count_iteration()?;
        }
    }

    /// Dual simplex from a dual-feasible basis until primal feasibility.
    fn dual(&mut self) -> Result<DualEnd, LpError> {
        let tol = self.options.tolerances;
        let (n, m) = (self.n, self.m);
        let mut alpha = vec![0.0; m];
        let mut rho = vec![0.0; m];
        loop {
            self.maybe_refactor();
            let mut r = NONE;
            let mut worst = 0.0;
            for i in 0..m {
                let inf = self.infeasibility(self.head[i]);
                if inf > worst {
                    worst = inf;
                    r = i;
                }
            }
            if r == NONE {
                return Ok(DualEnd::Feasible);
            }
            let jl = self.head[r];
            let increase = self.x[jl] < self.lower[jl];
            let target = if increase { self.lower[jl] } else { self.upper[jl] };

            let y = self.duals();
            rho.iter_mut().for_each(|e| *e = 0.0);
            rho[r] = 1.0;
            self.etas.btran(&mut rho);

            let mut q = NONE;
            let mut best_ratio = f64::INFINITY;
            let mut best_abs = 0.0;
            for k in 0..n + m {
                let st = self.status[k];
                if st == VarStatus::Basic || self.lower[k] == self.upper[k] {
                    continue;
                }
                let a = self.col_dot(k, &rho);
                if a.abs() <= tol.pivot {
                    continue;
                }
                // x_r moves by -a per unit increase of x_k.
                let can_inc = matches!(st, VarStatus::AtLower | VarStatus::Free);
                let can_dec = matches!(st, VarStatus::AtUpper | VarStatus::Free);
                let ok = if increase {
                    (a < 0.0 && can_inc) || (a > 0.0 && can_dec)
                } else {
                    (a > 0.0 && can_inc) || (a < 0.0 && can_dec)
                };
                if !ok {
                    continue;
                }
                let d = self.cost[k] - self.col_dot(k, &y);
                let slack = match st {
                    VarStatus::AtLower => d.max(0.0),
                    VarStatus::AtUpper => (-d).max(0.0),
                    _ => d.abs(),
                };
                let ratio = slack / a.abs();
                if ratio < best_ratio - TIE || (ratio <= best_ratio + TIE && a.abs() > best_abs) {
                    best_ratio = ratio;
                    best_abs = a.abs();
                    q = k;
                }
            }
            if q == NONE {
                return Ok(DualEnd::Infeasible);
            }
            self.load_col(q, &mut alpha);
            self.etas.ftran(&mut alpha);
            if alpha[r].abs() <= tol.pivot {
                // Row and column computations disagree; rebuild and retry.
                self.refresh();
                self.count_iteration()?;
                continue;
            }
            let delta = (self.x[jl] - target) / alpha[r];
            self.x[q] += delta;
            for i in 0..m {
                if alpha[i] != 0.0 {
                    let j = self.head[i];
                    self.x[j] -= alpha[i] * delta;
                }
            }
            self.x[jl] = target;
            self.status[jl] = if increase { VarStatus::AtLower } else { VarStatus::AtUpper };
            self.replace_basic(r, q, &alpha);
            self.count_iteration()?;
        }
    }

    /// Optimizes from the current basis and bounds.
    pub fn solve(&mut self) -> Result<LpOutcome, LpError> {
        self.iterations = 0;
        self.degenerate_run = 0;
        for attempt in 0..4 {
            if attempt > 0 || !self.factor_matches_status() {
                self.refresh();
            } else {
                self.compute_primal();
            }
            let status = if self.is_primal_feasible() {
                self.primal()?
            } else if self.is_dual_feasible() {
                match self.dual()? {
                    DualEnd::Infeasible => LpStatus::Infeasible,
                    DualEnd::Feasible => self.primal()?,
                }
            } else {
                self.primal()?
            };
            if status == LpStatus::Optimal {
                // Recompute the basic values; refactorize only when they drift.
                self.compute_primal();
                if !self.is_primal_feasible() {
                    self.refresh();
                    if !self.is_primal_feasible() {
                        continue;
                    }
                }
            }
            return Ok(self.outcome(status));
        }
        Err(LpError::NumericalFailure(
            "primal infeasibility persists after refactorization".into(),
        ))
    }

    fn outcome(&self, status: LpStatus) -> LpOutcome {
        let y = self.duals();
        let x = self.x[..self.n].to_vec();
        let objective = self.obj_constant + self.cost[..self.n].iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
        let reduced_costs = (0..self.n).map(|j| self.cost[j] - self.col_dot(j, &y)).collect();
        LpOutcome {
            status,
            objective,
            x,
            row_duals: y,
            reduced_costs,
            iterations: self.iterations,
            basis: self.basis(),
        }
    }
}
