//! Reference formulations: an affine policy in the original disturbance
//! coordinates with constant integer decisions, and sample average
//! approximation of the lifted problem.

use drmic_milp::{MilpModel, RowSense, VarKind};

use super::{add_policy_vars, robust_rows, push_expr, ReformOptions, Reformulation};
use crate::affine::{AffineExpr, LiftedAffine};
use crate::ambiguity::WassersteinSet;
use crate::error::{check_len, Error, Result};
use crate::lifting::DisturbanceSpace;
use crate::system_model::{CompileOptions, SystemModel, Term};

use super::Instance;

/// Policy variables of the affine baseline: `u_{t,k} = Σ Y ξ_d + y0` over
/// the observed flat dimensions, `γ_{t,k} = z0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayout {
    /// Per `(stage, channel)`: observed flat dimensions, their gain ids and
    /// the offset id.
    pub u: Vec<(Vec<usize>, Vec<usize>, usize)>,
    pub g: Vec<usize>,
    pub num_vars: usize,
}

impl AffineLayout {
    pub fn new(system: &SystemModel, space: &DisturbanceSpace) -> Self {
        let mut next = 0;
        let mut u = Vec::new();
        for t in 0..system.horizon {
            for k in 0..system.nu {
                let info = &system.u_info[k];
                let seen = (t + 1).saturating_sub(info.delay);
                let mut dims = Vec::new();
                for s in 0..seen {
                    for i in 0..space.dims() {
                        if info.dims.as_ref().is_none_or(|ds| ds.contains(&i)) {
                            dims.push(space.flat(s, i));
                        }
                    }
                }
                let gains: Vec<usize> = (next..next + dims.len()).collect();
                next += dims.len();
                u.push((dims, gains, 0));
            }
        }
        for slot in &mut u {
            slot.2 = next;
            next += 1;
        }
        let g = (0..system.horizon * system.ng).map(|i| next + i).collect();
        next += system.horizon * system.ng;
        Self { u, g, num_vars: next }
    }

    pub fn variables(&self, system: &SystemModel) -> Vec<(String, VarKind)> {
        let mut out = vec![(String::new(), VarKind::Continuous); self.num_vars];
        for (i, (dims, gains, offset)) in self.u.iter().enumerate() {
            let (t, k) = (i / system.nu + 1, i % system.nu + 1);
            for (&d, &v) in dims.iter().zip(gains) {
                out[v] = (format!("Y_{t}_{k}_{d}"), VarKind::Continuous);
            }
            out[*offset] = (format!("y0_{t}_{k}"), VarKind::Continuous);
        }
        for (i, &v) in self.g.iter().enumerate() {
            out[v] = (format!("z0_{}_{}", i / system.ng + 1, i % system.ng + 1), VarKind::Integer);
        }
        out
    }
}

/// Robust rows `Eᵀξ ≤ m` and cost pieces `max_k d_kᵀξ + r_k` in the
/// original coordinates.
#[derive(Debug, Clone)]
pub struct AffineProblem {
    pub layout: AffineLayout,
    pub rows: Vec<(Vec<AffineExpr>, AffineExpr)>,
    pub pieces: Vec<(Vec<AffineExpr>, AffineExpr)>,
}

impl AffineProblem {
    pub fn new(system: &SystemModel, space: &DisturbanceSpace, options: &CompileOptions) -> Result<Self> {
        system.validate()?;
        check_len("support horizon", system.horizon, space.horizon())?;
        check_len("support dimensions", system.nxi, space.dims())?;
        let dim = space.total_dim();
        let layout = AffineLayout::new(system, space);
        let mut xs: Vec<Vec<LiftedAffine>> = Vec::new();
        let mut us = Vec::new();
        let mut gs = Vec::new();
        let mut xis = Vec::new();
        let mut prev: Vec<LiftedAffine> = system
            .x0
            .iter()
            .map(|&v| LiftedAffine {
                coef: vec![AffineExpr::zero(); dim],
                constant: AffineExpr::constant(v),
            })
            .collect();
        for (t, st) in system.stages.iter().enumerate() {
            let u: Vec<LiftedAffine> = (0..system.nu)
                .map(|k| {
                    let (dims, gains, offset) = &layout.u[t * system.nu + k];
                    let mut e = LiftedAffine::zero(dim);
                    for (&d, &v) in dims.iter().zip(gains) {
                        e.coef[d] = AffineExpr::var(v);
                    }
                    e.constant = AffineExpr::var(*offset);
                    e
                })
                .collect();
            let g: Vec<LiftedAffine> = (0..system.ng)
                .map(|k| {
                    let mut e = LiftedAffine::zero(dim);
                    e.constant = AffineExpr::var(layout.g[t * system.ng + k]);
                    e
                })
                .collect();
            let xi: Vec<LiftedAffine> = (0..system.nxi)
                .map(|i| {
                    let mut e = LiftedAffine::zero(dim);
                    e.coef[space.flat(t, i)] = AffineExpr::constant(1.0);
                    e
                })
                .collect();
            let mut x = vec![LiftedAffine::zero(dim); system.nx];
            for (r, xr) in x.iter_mut().enumerate() {
                for c in 0..system.nx {
                    xr.add_scaled(&prev[c], st.a.get(r, c));
                }
                for c in 0..system.nu {
                    xr.add_scaled(&u[c], st.b.get(r, c));
                }
                for c in 0..system.ng {
                    xr.add_scaled(&g[c], st.c.get(r, c));
                }
                for c in 0..system.nxi {
                    xr.add_scaled(&xi[c], st.d.get(r, c));
                }
            }
            prev = x.clone();
            xs.push(x);
            us.push(u);
            gs.push(g);
            xis.push(xi);
        }
        let rows = system
            .constraints
            .iter()
            .map(|row| {
                let mut lhs = LiftedAffine::zero(dim);
                for &(term, c) in &row.terms {
                    let e = match term {
                        Term::State { stage, index } => &xs[stage][index],
                        Term::Control { stage, index } => &us[stage][index],
                        Term::Integer { stage, index } => &gs[stage][index],
                        Term::Disturbance { stage, index } => &xis[stage][index],
                    };
                    lhs.add_scaled(e, c);
                }
                let mut m = AffineExpr::constant(row.rhs);
                m.add_scaled(&lhs.constant, -1.0);
                (lhs.coef, m)
            })
            .collect();
        let count: f64 = system.stages.iter().map(|s| s.cost.len() as f64).product();
        if count > options.piece_cap as f64 {
            return Err(Error::PieceExplosion {
                count,
                cap: options.piece_cap,
            });
        }
        let mut combos = vec![LiftedAffine::zero(dim)];
        for (t, st) in system.stages.iter().enumerate() {
            let mut next = Vec::with_capacity(combos.len() * st.cost.len());
            for c in &combos {
                for p in &st.cost {
                    let mut e = c.clone();
                    for (k, &a) in p.x.iter().enumerate() {
                        e.add_scaled(&xs[t][k], st.discount * a);
                    }
                    for (k, &b) in p.u.iter().enumerate() {
                        e.add_scaled(&us[t][k], st.discount * b);
                    }
                    for (k, &c) in p.g.iter().enumerate() {
                        e.add_scaled(&gs[t][k], st.discount * c);
                    }
                    e.constant.add_constant(st.discount * p.constant);
                    next.push(e);
                }
            }
            combos = next;
        }
        let pieces = combos.into_iter().map(|c| (c.coef, c.constant)).collect();
        Ok(Self { layout, rows, pieces })
    }
}

fn free(model: &mut MilpModel, name: String) -> Result<usize> {
    Ok(model.add_continuous(name, f64::NEG_INFINITY, f64::INFINITY)?)
}

/// Wasserstein model of the affine baseline with the support box handled
/// by its dual: per sample `s` and piece `k`,
/// `η^s ≥ r_k + d_kᵀξ̂ + γ⁺ᵀ(v − ξ̂) + γ⁻ᵀ(ξ̂ − l)` with
/// `‖γ⁺ − γ⁻ − d_k‖_∞ ≤ λ`, `γ± ≥ 0`; robust rows use
/// `m ≥ Eᵀc + Σ_d π_d ρ_d`, `π ≥ ±E` for box center `c` and radii `ρ`.
pub fn build_affine_wasserstein(
    system: &SystemModel,
    space: &DisturbanceSpace,
    set: &WassersteinSet,
    compile: &CompileOptions,
    options: &ReformOptions,
) -> Result<(AffineProblem, Reformulation)> {
    let prob = AffineProblem::new(system, space, compile)?;
    let mut model = MilpModel::new("affine_wasserstein");
    for (name, kind) in prob.layout.variables(system) {
        match kind {
            VarKind::Continuous => model.add_continuous(name, f64::NEG_INFINITY, f64::INFINITY)?,
            VarKind::Integer => model.add_integer(name, -options.integer_bound, options.integer_bound)?,
        };
    }
    let dim = space.total_dim();
    let lambda = model.add_continuous("lambda", 0.0, f64::INFINITY)?;
    model.set_objective(lambda, set.theta);
    let n = set.samples.len() as f64;
    for (s, xh) in set.samples.iter().enumerate() {
        let eta = free(&mut model, format!("eta_{s}"))?;
        model.set_objective(eta, 1.0 / n);
        for (k, (d, r)) in prob.pieces.iter().enumerate() {
            // η − d_kᵀξ̂ − γ⁺ᵀ(v − ξ̂) − γ⁻ᵀ(ξ̂ − l) − (r_k vars) ≥ r_k const
            let mut coeffs = vec![(eta, 1.0)];
            let mut rhs = push_expr(&mut coeffs, r, -1.0);
            for j in 0..dim {
                rhs += push_expr(&mut coeffs, &d[j], -xh[j]);
                let (l, v) = space.bounds(j);
                let gp = model.add_continuous(format!("gp_{s}_{k}_{j}"), 0.0, f64::INFINITY)?;
                let gm = model.add_continuous(format!("gm_{s}_{k}_{j}"), 0.0, f64::INFINITY)?;
                coeffs.push((gp, -(v - xh[j])));
                coeffs.push((gm, -(xh[j] - l)));
                // ±(γ⁺ − γ⁻ − d) ≤ λ
                for (sign, tag) in [(1.0, "u"), (-1.0, "l")] {
                    let mut c = vec![(gp, sign), (gm, -sign), (lambda, -1.0)];
                    let k0 = push_expr(&mut c, &d[j], -sign);
                    model.add_row(format!("dn{tag}_{s}_{k}_{j}"), c, RowSense::Le, -k0)?;
                }
            }
            model.add_row(format!("cost_{s}_{k}"), coeffs, RowSense::Ge, -rhs)?;
        }
    }
    for (r, (e, m)) in prob.rows.iter().enumerate() {
        let mut agg = Vec::new();
        let mut fixed = 0.0;
        for j in 0..dim {
            if e[j].is_zero() {
                continue;
            }
            let (l, v) = space.bounds(j);
            let (c, rho) = (0.5 * (l + v), 0.5 * (v - l));
            if e[j].is_constant() {
                fixed += e[j].constant_term() * c + e[j].constant_term().abs() * rho;
                continue;
            }
            fixed += push_expr(&mut agg, &e[j], c);
            let pi = model.add_continuous(format!("pi_{r}_{j}"), 0.0, f64::INFINITY)?;
            agg.push((pi, rho));
            for (sign, tag) in [(1.0, "u"), (-1.0, "l")] {
                let mut cs = vec![(pi, -1.0)];
                let k0 = push_expr(&mut cs, &e[j], sign);
                model.add_row(format!("pi{tag}_{r}_{j}"), cs, RowSense::Le, -k0)?;
            }
        }
        let m_const = push_expr(&mut agg, m, -1.0);
        model.add_row(format!("rob{r}"), agg, RowSense::Le, -m_const - fixed)?;
    }
    if model.num_vars() > options.max_vars || model.num_rows() > options.max_rows {
        return Err(Error::ModelTooLarge {
            vars: model.num_vars(),
            rows: model.num_rows(),
        });
    }
    let len = prob.layout.num_vars;
    Ok((
        prob,
        Reformulation {
            model,
            policy_offsets: vec![0],
            policy_lens: vec![len],
            lambdas: vec![lambda],
        },
    ))
}

/// Sample average approximation of the lifted problem: the empirical mean
/// of the cost with the robust constraints kept for the whole support.
pub fn build_saa(inst: &Instance, samples: &[Vec<f64>], options: &ReformOptions) -> Result<Reformulation> {
    if samples.is_empty() {
        return Err(Error::InvalidSpec("at least one sample is required".into()));
    }
    let mut model = MilpModel::new("saa");
    add_policy_vars(&mut model, &inst.layout, "", options.integer_bound)?;
    let n = samples.len() as f64;
    for (s, xi) in samples.iter().enumerate() {
        let z = inst.lifting.lift(xi)?;
        let eta = free(&mut model, format!("eta_{s}"))?;
        model.set_objective(eta, 1.0 / n);
        for (k, p) in inst.compiled.pieces.iter().enumerate() {
            let mut coeffs = vec![(eta, 1.0)];
            let mut rhs = push_expr(&mut coeffs, &p.r, -1.0);
            for (e, &zi) in p.d.iter().zip(&z) {
                rhs += push_expr(&mut coeffs, e, -zi);
            }
            model.add_row(format!("cost_{s}_{k}"), coeffs, RowSense::Ge, -rhs)?;
        }
    }
    robust_rows(&mut model, &inst.compiled.rows, &inst.lifting, &inst.lifting.geometry(), 0, "")?;
    if model.num_vars() > options.max_vars || model.num_rows() > options.max_rows {
        return Err(Error::ModelTooLarge {
            vars: model.num_vars(),
            rows: model.num_rows(),
        });
    }
    Ok(Reformulation {
        model,
        policy_offsets: vec![0],
        policy_lens: vec![inst.layout.num_vars],
        lambdas: Vec::new(),
    })
}
