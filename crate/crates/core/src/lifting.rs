//! Piecewise-linear lifting of a box support.
//!
//! Each scalar disturbance `ξ` on `[l, v]` with breakpoints
//! `l = w₀ < w₁ < … < w_p = v` is mapped to `p` continuous entries
//! `V₁ = min(ξ, w₁)`, `V_j = max(min(ξ, w_j) − w_{j−1}, 0)` and `p − 1`
//! indicators `Q_j = [ξ ≥ w_j]`. Blocks are stacked stage-major, then by
//! dimension, with the `V` entries of a block before its `Q` entries.

use std::ops::Range;

use crate::error::{check_len, Error, Result};

/// Absolute tolerance for support membership.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Hyperrectangle `Ξ = Π_{t,i} [l_{t,i}, v_{t,i}]`, stored stage-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSpace {
    horizon: usize,
    dims: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DisturbanceSpace {
    pub fn new(horizon: usize, dims: usize, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if horizon == 0 || dims == 0 {
            return Err(Error::InvalidSpec("horizon and dimension must be positive".into()));
        }
        check_len("support lower bounds", horizon * dims, lower.len())?;
        check_len("support upper bounds", horizon * dims, upper.len())?;
        for (d, (&l, &v)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !v.is_finite() || l > v {
                return Err(Error::InvalidSpec(format!(
                    "support interval {d} is [{l}, {v}]; bounds must be finite with lower <= upper"
                )));
            }
        }
        Ok(Self {
            horizon,
            dims,
            lower,
            upper,
        })
    }

    /// Same interval `[l, v]` for every stage and dimension.
    pub fn uniform(horizon: usize, dims: usize, l: f64, v: f64) -> Result<Self> {
        Self::new(horizon, dims, vec![l; horizon * dims], vec![v; horizon * dims])
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.horizon * self.dims
    }

    /// Flat index of dimension `i` at stage `t` (both zero-based).
    pub fn flat(&self, t: usize, i: usize) -> usize {
        t * self.dims + i
    }

    pub fn bounds(&self, d: usize) -> (f64, f64) {
        (self.lower[d], self.upper[d])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn check(&self, xi: &[f64]) -> Result<()> {
        check_len("disturbance", self.total_dim(), xi.len())?;
        for (d, &x) in xi.iter().enumerate() {
            let (l, v) = self.bounds(d);
            if !(x >= l - SUPPORT_TOL && x <= v + SUPPORT_TOL) {
                return Err(Error::OutOfSupport {
                    index: d,
                    value: x,
                    lower: l,
                    upper: v,
                });
            }
        }
        Ok(())
    }
}

/// One piece of the lifted image of `[l, v]`: the lifted block moves
/// linearly from `start` (the value at `lower`) to `end` as `ξ` goes from
/// `lower` to `upper`. `end` is the left limit at `upper` unless the segment
/// is the last one, where it is attained.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub lower: f64,
    pub upper: f64,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lifting {
    space: DisturbanceSpace,
    breakpoints: Vec<Vec<f64>>,
    offsets: Vec<usize>,
    stage_offsets: Vec<usize>,
}

impl Lifting {
    /// `breakpoints[d]` lists `w₀ … w_p` for flat dimension `d`, endpoints
    /// included. Zero-length segments are rejected, except that a point
    /// support may use the single segment `[l, l]`.
    pub fn new(space: DisturbanceSpace, breakpoints: Vec<Vec<f64>>) -> Result<Self> {
        check_len("breakpoint lists", space.total_dim(), breakpoints.len())?;
        let mut breakpoints = breakpoints;
        for (d, w) in breakpoints.iter_mut().enumerate() {
            let (l, v) = space.bounds(d);
            if w.len() < 2 {
                return Err(Error::InvalidSpec(format!(
                    "dimension {d}: need at least the two support endpoints as breakpoints"
                )));
            }
            let last = w.len() - 1;
            if (w[0] - l).abs() > SUPPORT_TOL || (w[last] - v).abs() > SUPPORT_TOL {
                return Err(Error::InvalidSpec(format!(
                    "dimension {d}: breakpoints must start at {l} and end at {v}"
                )));
            }
            w[0] = l;
            w[last] = v;
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSpec(format!("dimension {d}: non-finite breakpoint")));
            }
            let point_support = last == 1 && l == v;
            if !point_support && w.windows(2).any(|p| p[1] <= p[0]) {
                return Err(Error::InvalidSpec(format!(
                    "dimension {d}: breakpoints must be strictly increasing (zero-length segments are not allowed)"
                )));
            }
        }
        let mut offsets = Vec::with_capacity(breakpoints.len() + 1);
        let mut acc = 0;
        for w in &breakpoints {
            offsets.push(acc);
            acc += 2 * (w.len() - 1) - 1;
        }
        offsets.push(acc);
        let stage_offsets = (0..=space.horizon()).map(|t| offsets[t * space.dims()]).collect();
        Ok(Self {
            space,
            breakpoints,
            offsets,
            stage_offsets,
        })
    }

    /// Interior breakpoints only; the support endpoints are added.
    pub fn from_interior(space: DisturbanceSpace, interior: Vec<Vec<f64>>) -> Result<Self> {
        check_len("breakpoint lists", space.total_dim(), interior.len())?;
        let full = interior
            .into_iter()
            .enumerate()
            .map(|(d, inner)| {
                let (l, v) = space.bounds(d);
                let mut w = vec![l];
                w.extend(inner);
                w.push(v);
                w
            })
            .collect();
        Self::new(space, full)
    }

    /// `p` equal-length segments on every dimension.
    pub fn equal_division(space: DisturbanceSpace, p: usize) -> Result<Self> {
        let ps = vec![p; space.total_dim()];
        Self::equal_division_per_dim(space, &ps)
    }

    pub fn equal_division_per_dim(space: DisturbanceSpace, ps: &[usize]) -> Result<Self> {
        check_len("segment counts", space.total_dim(), ps.len())?;
        let mut all = Vec::with_capacity(ps.len());
        for (d, &p) in ps.iter().enumerate() {
            if p == 0 {
                return Err(Error::InvalidSpec(format!("dimension {d}: segment count must be positive")));
            }
            let (l, v) = space.bounds(d);
            let mut w: Vec<f64> = (0..=p).map(|j| l + (v - l) * j as f64 / p as f64).collect();
            w[p] = v;
            all.push(w);
        }
        Self::new(space, all)
    }

    pub fn space(&self) -> &DisturbanceSpace {
        &self.space
    }

    pub fn breakpoints(&self, d: usize) -> &[f64] {
        &self.breakpoints[d]
    }

    /// Segment count `p` of flat dimension `d`.
    pub fn segments(&self, d: usize) -> usize {
        self.breakpoints[d].len() - 1
    }

    /// Total lifted dimension.
    pub fn dim(&self) -> usize {
        self.offsets[self.offsets.len() - 1]
    }

    /// Positions of the whole block of flat dimension `d`.
    pub fn block(&self, d: usize) -> Range<usize> {
        self.offsets[d]..self.offsets[d + 1]
    }

    pub fn v_range(&self, d: usize) -> Range<usize> {
        let s = self.offsets[d];
        s..s + self.segments(d)
    }

    pub fn q_range(&self, d: usize) -> Range<usize> {
        let s = self.offsets[d] + self.segments(d);
        s..self.offsets[d + 1]
    }

    /// Lifted length of the first `stages` stages.
    pub fn prefix_len(&self, stages: usize) -> usize {
        self.stage_offsets[stages]
    }

    /// `V` positions of the first `stages` stages, in stacking order.
    pub fn v_positions(&self, stages: usize) -> Vec<usize> {
        (0..stages * self.space.dims()).flat_map(|d| self.v_range(d)).collect()
    }

    /// `Q` positions of the first `stages` stages, in stacking order.
    pub fn q_positions(&self, stages: usize) -> Vec<usize> {
        (0..stages * self.space.dims()).flat_map(|d| self.q_range(d)).collect()
    }

    /// True iff every dimension has a single segment, in which case the
    /// lifted policy class is the affine one.
    pub fn degenerates_to_affine(&self) -> bool {
        self.breakpoints.iter().all(|w| w.len() == 2)
    }

    /// Writes the lifted block of dimension `d` at `x` into `out`
    /// (length `2p − 1`). `x` is clamped to the support.
    pub fn lift_dim(&self, d: usize, x: f64, out: &mut [f64]) {
        let w = &self.breakpoints[d];
        let p = w.len() - 1;
        let x = x.clamp(w[0], w[p]);
        out[0] = x.min(w[1]);
        for j in 2..=p {
            out[j - 1] = (x.min(w[j]) - w[j - 1]).max(0.0);
        }
        for j in 1..p {
            out[p + j - 1] = if x >= w[j] { 1.0 } else { 0.0 };
        }
    }

    pub fn lift(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.space.check(xi)?;
        let mut z = vec![0.0; self.dim()];
        for (d, &x) in xi.iter().enumerate() {
            let r = self.block(d);
            self.lift_dim(d, x, &mut z[r]);
        }
        Ok(z)
    }

    /// Sums the `V` entries of every block; `Q` entries are ignored.
    pub fn recover(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("lifted point", self.dim(), z.len())?;
        Ok((0..self.space.total_dim())
            .map(|d| z[self.v_range(d)].iter().sum())
            .collect())
    }

    /// Sum of the `V` entries of a single block given in local coordinates.
    pub fn recover_block(&self, d: usize, block: &[f64]) -> f64 {
        block[..self.segments(d)].iter().sum()
    }

    /// The `p` segments making up the lifted image of dimension `d`.
    pub fn segment_geometry(&self, d: usize) -> Vec<Segment> {
        let w = &self.breakpoints[d];
        let p = w.len() - 1;
        let width = 2 * p - 1;
        (1..=p)
            .map(|j| {
                let mut start = vec![0.0; width];
                self.lift_dim(d, w[j - 1], &mut start);
                let mut end = vec![0.0; width];
                self.lift_dim(d, w[j], &mut end);
                // Left limit: the indicator that switches on at w_j is still off.
                if j < p {
                    end[p + j - 1] = 0.0;
                }
                Segment {
                    lower: w[j - 1],
                    upper: w[j],
                    start,
                    end,
                    closed: j == p,
                }
            })
            .collect()
    }

    pub fn geometry(&self) -> Vec<Vec<Segment>> {
        (0..self.space.total_dim()).map(|d| self.segment_geometry(d)).collect()
    }
}
