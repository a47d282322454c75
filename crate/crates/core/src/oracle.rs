//! Direct evaluation of worst-case expectations and robust constraints for
//! fixed numeric policies, used to certify the reformulations.
//!
//! Everything here works from the breakpoints alone: the lifted image of
//! each dimension is rebuilt locally, and inner maxima are found by
//! enumerating segment endpoints (including left limits) and the anchor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ambiguity::{EventWiseSet, MixedMomentSet, WassersteinSet};
use crate::error::{check_len, Error, Result};
use crate::lifting::Lifting;
use crate::system_model::NumericProblem;

const TIE_TOL: f64 = 1e-12;

/// Golden-section stopping width for the λ search.
pub const LAMBDA_TOL: f64 = 1e-10;

/// `f(z) = max_k d_kᵀ z + r_k` with numeric coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFunction {
    pub d: Vec<Vec<f64>>,
    pub r: Vec<f64>,
}

impl PiecewiseFunction {
    pub fn new(d: Vec<Vec<f64>>, r: Vec<f64>) -> Result<Self> {
        check_len("piece offsets", d.len(), r.len())?;
        if d.is_empty() {
            return Err(Error::InvalidSpec("a piecewise function needs at least one piece".into()));
        }
        Ok(Self { d, r })
    }

    pub fn from_problem(p: &NumericProblem) -> Self {
        Self {
            d: p.d.clone(),
            r: p.r.clone(),
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.d
            .iter()
            .zip(&self.r)
            .map(|(d, r)| r + d.iter().zip(z).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A point of one dimension's lifted image: the image of `x`, or its left
/// limit when `left` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub x: f64,
    pub left: bool,
}

/// Lifted block of `x` for breakpoints `w`, or its left limit.
fn lift_block(w: &[f64], x: f64, left: bool) -> Vec<f64> {
    let p = w.len() - 1;
    let mut out = vec![0.0; 2 * p - 1];
    out[0] = x.min(w[1]);
    for j in 2..=p {
        out[j - 1] = (x.min(w[j]) - w[j - 1]).max(0.0);
    }
    for j in 1..p {
        let on = if left { x > w[j] } else { x >= w[j] };
        out[p + j - 1] = if on { 1.0 } else { 0.0 };
    }
    out
}

fn candidates(w: &[f64], anchor: Option<f64>) -> Vec<Candidate> {
    let p = w.len() - 1;
    let mut out = Vec::with_capacity(2 * p + 1);
    for j in 1..=p {
        out.push(Candidate { x: w[j - 1], left: false });
        out.push(Candidate { x: w[j], left: j < p });
    }
    if let Some(a) = anchor {
        out.push(Candidate { x: a, left: false });
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(value, −slope)` pairs in λ: value `v − λ·dist` is stored as `(v, dist)`.
#[derive(Debug, Clone, Copy)]
struct Line {
    v: f64,
    dist: f64,
}

impl Line {
    fn at(&self, lambda: f64) -> f64 {
        self.v - lambda * self.dist
    }
}

/// True when `a` beats `b` at `lambda`; ties go to the line that stays
/// ahead to the right (`right`) or to the left.
fn beats(a: Line, b: Line, lambda: f64, right: bool) -> bool {
    let (va, vb) = (a.at(lambda), b.at(lambda));
    let tol = TIE_TOL * (1.0 + va.abs().max(vb.abs()));
    if (va - vb).abs() > tol {
        return va > vb;
    }
    if right {
        a.dist < b.dist
    } else {
        a.dist > b.dist
    }
}

/// Per-sample data: for each piece and dimension, the candidate lines.
struct SampleTable {
    /// `lines[k][d]` with the matching candidates in `cands[d]`.
    lines: Vec<Vec<Vec<Line>>>,
    cands: Vec<Vec<Candidate>>,
}

fn sample_table(f: &PiecewiseFunction, lifting: &Lifting, anchor: &[f64]) -> Result<SampleTable> {
    let dims = lifting.space().total_dim();
    check_len("anchor", dims, anchor.len())?;
    for d in &f.d {
        check_len("piece coefficients", lifting.dim(), d.len())?;
    }
    let cands: Vec<Vec<Candidate>> = (0..dims)
        .map(|d| candidates(lifting.breakpoints(d), Some(anchor[d])))
        .collect();
    let images: Vec<Vec<Vec<f64>>> = (0..dims)
        .map(|d| {
            cands[d]
                .iter()
                .map(|c| lift_block(lifting.breakpoints(d), c.x, c.left))
                .collect()
        })
        .collect();
    let lines = f
        .d
        .iter()
        .map(|g| {
            (0..dims)
                .map(|d| {
                    let gd = &g[lifting.block(d)];
                    cands[d]
                        .iter()
                        .zip(&images[d])
                        .map(|(c, z)| Line {
                            v: dot(gd, z),
                            dist: (c.x - anchor[d]).abs(),
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(SampleTable { lines, cands })
}

impl SampleTable {
    /// Active line of `max_k r_k + Σ_d max_c line` at `lambda`, with the
    /// maximizing piece and candidate indices.
    fn active(&self, r: &[f64], lambda: f64, right: bool) -> (Line, usize, Vec<usize>) {
        let mut best: Option<(Line, usize, Vec<usize>)> = None;
        for (k, per_dim) in self.lines.iter().enumerate() {
            let mut total = Line { v: r[k], dist: 0.0 };
            let mut pick = Vec::with_capacity(per_dim.len());
            for lines in per_dim {
                let mut bi = 0;
                for (i, &l) in lines.iter().enumerate().skip(1) {
                    if beats(l, lines[bi], lambda, right) {
                        bi = i;
                    }
                }
                total.v += lines[bi].v;
                total.dist += lines[bi].dist;
                pick.push(bi);
            }
            if best.as_ref().is_none_or(|b| beats(total, b.0, lambda, right)) {
                best = Some((total, k, pick));
            }
        }
        best.expect("at least one piece")
    }

    /// Smallest λ above which every per-dimension maximum sits at a point
    /// at distance zero from the anchor.
    fn freeze_bound(&self) -> f64 {
        let mut bound: f64 = 0.0;
        for per_dim in &self.lines {
            for lines in per_dim {
                let at_anchor = lines
                    .iter()
                    .filter(|l| l.dist == 0.0)
                    .map(|l| l.v)
                    .fold(f64::NEG_INFINITY, f64::max);
                for l in lines.iter().filter(|l| l.dist > 0.0) {
                    bound = bound.max((l.v - at_anchor) / l.dist);
                }
            }
        }
        bound
    }
}

/// Inner maximum with its maximizer, per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerMax {
    pub value: f64,
    pub piece: usize,
    /// Maximizing disturbance; coordinates reached only as a left limit are
    /// flagged in `left_limit`.
    pub xi: Vec<f64>,
    pub left_limit: Vec<bool>,
}

/// `sup_ξ f(G(ξ)) − λ‖ξ − anchor‖₁` over the support, by enumeration of
/// segment endpoints and the anchor in every dimension.
pub fn inner_max(f: &PiecewiseFunction, lifting: &Lifting, anchor: &[f64], lambda: f64) -> Result<InnerMax> {
    let table = sample_table(f, lifting, anchor)?;
    Ok(table.inner(&f.r, lambda))
}

impl SampleTable {
    fn inner(&self, r: &[f64], lambda: f64) -> InnerMax {
        let (line, piece, pick) = self.active(r, lambda, true);
        InnerMax {
            value: line.at(lambda),
            piece,
            xi: pick.iter().enumerate().map(|(d, &i)| self.cands[d][i].x).collect(),
            left_limit: pick.iter().enumerate().map(|(d, &i)| self.cands[d][i].left).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub value: f64,
    pub lambda: f64,
    pub inner: Vec<InnerMax>,
    /// Upper end of the λ search interval.
    pub lambda_bound: f64,
    pub tolerance: f64,
    pub evaluations: usize,
}

struct Dual<'a> {
    tables: Vec<SampleTable>,
    r: &'a [f64],
    theta: f64,
    evaluations: usize,
}

impl Dual<'_> {
    /// `h(λ)` and its one-sided slope.
    fn eval(&mut self, lambda: f64, right: bool) -> (f64, f64) {
        self.evaluations += 1;
        let n = self.tables.len() as f64;
        let (mut v, mut s) = (lambda * self.theta, self.theta);
        for t in &self.tables {
            let (line, _, _) = t.active(self.r, lambda, right);
            v += line.at(lambda) / n;
            s -= line.dist / n;
        }
        (v, s)
    }
}

/// `min_{λ ≥ 0} λθ + (1/N) Σ_s inner_max(f, ξ̂_s, λ)`.
///
/// `h` is convex and piecewise linear and constant-sloped (`θ ≥ 0`) beyond
/// the freeze bound, so the minimum lies in `[0, Λ]`. A golden-section
/// search narrows the bracket, and the final value comes from intersecting
/// the exact one-sided lines at the bracket ends.
pub fn worst_case_expectation(f: &PiecewiseFunction, lifting: &Lifting, set: &WassersteinSet) -> Result<OracleReport> {
    let tables = set
        .samples
        .iter()
        .map(|s| sample_table(f, lifting, s))
        .collect::<Result<Vec<_>>>()?;
    let big = tables.iter().map(SampleTable::freeze_bound).fold(0.0, f64::max);
    let mut h = Dual {
        tables,
        r: &f.r,
        theta: set.theta,
        evaluations: 0,
    };
    let mut best = (f64::INFINITY, 0.0);
    let mut consider = |lambda: f64, value: f64| {
        if value < best.0 {
            best = (value, lambda);
        }
    };
    let (v0, _) = h.eval(0.0, true);
    consider(0.0, v0);
    let (vb, _) = h.eval(big, true);
    consider(big, vb);
    let (mut a, mut b) = (0.0, big);
    if big > 0.0 {
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut fc = h.eval(c, true).0;
        let mut fd = h.eval(d, true).0;
        consider(c, fc);
        consider(d, fd);
        while b - a > LAMBDA_TOL {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = h.eval(c, true).0;
                consider(c, fc);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = h.eval(d, true).0;
                consider(d, fd);
            }
        }
        let (va, sa) = h.eval(a, true);
        let (vb, sb) = h.eval(b, false);
        consider(a, va);
        consider(b, vb);
        // Lines through (a, va) with slope sa and (b, vb) with slope sb.
        if sa < 0.0 && sb > 0.0 && sb > sa {
            let x = ((vb - sb * b) - (va - sa * a)) / (sa - sb);
            if x > a && x < b {
                let (vx, _) = h.eval(x, true);
                consider(x, vx);
            }
        }
    }
    let (value, lambda) = best;
    let inner = h.tables.iter().map(|t| t.inner(&f.r, lambda)).collect();
    Ok(OracleReport {
        value,
        lambda,
        inner,
        lambda_bound: big,
        tolerance: LAMBDA_TOL,
        evaluations: h.evaluations,
    })
}

/// Probability-weighted sum of the per-scenario worst cases; `fs[l]` is
/// expressed in the lifting of scenario `l`.
pub fn event_wise_worst_case(fs: &[PiecewiseFunction], set: &EventWiseSet) -> Result<f64> {
    check_len("scenario functions", set.scenarios.len(), fs.len())?;
    let mut total = 0.0;
    for (f, sc) in fs.iter().zip(&set.scenarios) {
        total += sc.probability * worst_case_expectation(f, &sc.lifting, &sc.ball)?.value;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedMomentReport {
    /// Always an upper bound on the worst case over the mixed set.
    pub value: f64,
    pub is_upper_bound: bool,
    /// Multipliers `β̲`, `β̄` attaining `value`.
    pub beta_lower: Vec<f64>,
    pub beta_upper: Vec<f64>,
}

/// Upper bound on the worst case over a Wasserstein ball with first-moment
/// bounds: any `δ = β̲ − β̄` gives
/// `WC(f + δᵀξ) − β̲ᵀξ̲ + β̄ᵀξ̄ ≥` the mixed worst case. Coordinate pattern
/// search over `δ` starts at zero on a lattice of spacing
/// `1 + max |coefficient|` and halves the spacing down to `1e-9`.
pub fn check_mixed_moment(f: &PiecewiseFunction, lifting: &Lifting, set: &MixedMomentSet) -> Result<MixedMomentReport> {
    let dims = lifting.space().total_dim();
    let objective = |delta: &[f64]| -> Result<f64> {
        let mut g = f.clone();
        for dk in &mut g.d {
            for d in 0..dims {
                for pos in lifting.v_range(d) {
                    dk[pos] += delta[d];
                }
            }
        }
        let mut v = worst_case_expectation(&g, lifting, &set.ball)?.value;
        for d in 0..dims {
            v += -delta[d].max(0.0) * set.lower[d] + (-delta[d]).max(0.0) * set.upper[d];
        }
        Ok(v)
    };
    let mut delta = vec![0.0; dims];
    let mut best = objective(&delta)?;
    let mut step = 1.0 + f.d.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
    while step > 1e-9 {
        let mut improved = false;
        for d in 0..dims {
            for dir in [1.0, -1.0] {
                let mut trial = delta.clone();
                trial[d] += dir * step;
                let v = objective(&trial)?;
                if v < best - 1e-13 {
                    best = v;
                    delta = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(MixedMomentReport {
        value: best,
        is_upper_bound: true,
        beta_lower: delta.iter().map(|x| x.max(0.0)).collect(),
        beta_upper: delta.iter().map(|x| (-x).max(0.0)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustReport {
    /// `max_r sup_ξ E_rᵀ G(ξ) − m_r` from endpoint enumeration.
    pub max_residual: f64,
    pub worst_row: Option<usize>,
    pub worst_xi: Vec<f64>,
    /// Largest residual over the random draws.
    pub sampled_max: f64,
    /// Draws with a residual above `tolerance`.
    pub sampled_violations: usize,
    pub tolerance: f64,
}

/// Robust feasibility of `E_rᵀ G(ξ) ≤ m_r` over the support: exact by
/// per-dimension endpoint maxima, plus `n_random` uniform draws.
pub fn check_robust_feasibility(
    e: &[Vec<f64>],
    m: &[f64],
    lifting: &Lifting,
    n_random: usize,
    seed: u64,
    tolerance: f64,
) -> Result<RobustReport> {
    check_len("constraint bounds", e.len(), m.len())?;
    let dims = lifting.space().total_dim();
    let cands: Vec<Vec<Candidate>> = (0..dims).map(|d| candidates(lifting.breakpoints(d), None)).collect();
    let images: Vec<Vec<Vec<f64>>> = (0..dims)
        .map(|d| {
            cands[d]
                .iter()
                .map(|c| lift_block(lifting.breakpoints(d), c.x, c.left))
                .collect()
        })
        .collect();
    let mut report = RobustReport {
        max_residual: f64::NEG_INFINITY,
        worst_row: None,
        worst_xi: Vec::new(),
        sampled_max: f64::NEG_INFINITY,
        sampled_violations: 0,
        tolerance,
    };
    for (r, (er, &mr)) in e.iter().zip(m).enumerate() {
        check_len("constraint coefficients", lifting.dim(), er.len())?;
        let mut total = -mr;
        let mut xi = Vec::with_capacity(dims);
        for d in 0..dims {
            let ed = &er[lifting.block(d)];
            let (bi, bv) = images[d]
                .iter()
                .map(|z| dot(ed, z))
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
            total += bv;
            xi.push(cands[d][bi].x);
        }
        if total > report.max_residual {
            report.max_residual = total;
            report.worst_row = Some(r);
            report.worst_xi = xi;
        }
    }
    if !e.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = vec![0.0; lifting.dim()];
        for _ in 0..n_random {
            for d in 0..dims {
                let (l, v) = lifting.space().bounds(d);
                let x = if l < v { rng.random_range(l..=v) } else { l };
                z[lifting.block(d)].copy_from_slice(&lift_block(lifting.breakpoints(d), x, false));
            }
            let worst = e
                .iter()
                .zip(m)
                .map(|(er, mr)| dot(er, &z) - mr)
                .fold(f64::NEG_INFINITY, f64::max);
            report.sampled_max = report.sampled_max.max(worst);
            if worst > tolerance {
                report.sampled_violations += 1;
            }
        }
    }
    Ok(report)
}
