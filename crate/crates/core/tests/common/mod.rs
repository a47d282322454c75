#![allow(dead_code)]

use drmic_core::lifting::{DisturbanceSpace, Lifting};
use drmic_core::system_model::{CostPiece, PolicyLayout, SystemModel, Term};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Shape {
    pub max_horizon: usize,
    pub max_nxi: usize,
    pub max_p: usize,
    pub max_pieces: usize,
    pub constraints: bool,
    pub integers: bool,
}

pub const SMALL: Shape = Shape {
    max_horizon: 2,
    max_nxi: 2,
    max_p: 3,
    max_pieces: 4,
    constraints: false,
    integers: true,
};

fn coeff(rng: &mut ChaCha8Rng) -> f64 {
    (rng.random_range(-4..=4) as f64) * 0.25
}

/// Random system on a random box with random breakpoints; the product of
/// per-stage piece counts stays within `shape.max_pieces`.
pub fn random_system(rng: &mut ChaCha8Rng, shape: &Shape, p: Option<usize>) -> (SystemModel, Lifting) {
    let horizon = rng.random_range(1..=shape.max_horizon);
    let nxi = rng.random_range(1..=shape.max_nxi);
    let nx = rng.random_range(1..=2);
    let nu = rng.random_range(1..=2);
    let ng = if shape.integers { rng.random_range(0..=1) } else { 0 };
    let mut sys = SystemModel::new(horizon, nx, nu, ng, nxi);
    sys.x0 = (0..nx).map(|_| coeff(rng)).collect();
    let mut budget = shape.max_pieces;
    for t in 0..horizon {
        let st = &mut sys.stages[t];
        for r in 0..nx {
            for c in 0..nx {
                st.a.set(r, c, coeff(rng));
            }
            for c in 0..nu {
                st.b.set(r, c, coeff(rng));
            }
            for c in 0..ng {
                st.c.set(r, c, coeff(rng));
            }
            for c in 0..nxi {
                st.d.set(r, c, coeff(rng));
            }
        }
        let left = horizon - t - 1;
        let cap = (budget as f64 / 2f64.powi(left as i32)).floor().max(1.0) as usize;
        let k = rng.random_range(1..=cap.max(1));
        budget /= k;
        st.cost = (0..k)
            .map(|_| CostPiece {
                x: (0..nx).map(|_| coeff(rng)).collect(),
                u: (0..nu).map(|_| coeff(rng)).collect(),
                g: (0..ng).map(|_| coeff(rng)).collect(),
                constant: coeff(rng),
            })
            .collect();
        st.discount = [1.0, 0.9, 0.5][rng.random_range(0..3)];
    }
    for k in 0..nu {
        sys.u_info[k].delay = rng.random_range(0..=1);
    }
    if shape.constraints {
        for t in 0..horizon {
            for k in 0..nu {
                sys.add_constraint(
                    format!("u_hi_{t}_{k}"),
                    vec![(Term::Control { stage: t, index: k }, 1.0)],
                    5.0,
                );
                sys.add_constraint(
                    format!("u_lo_{t}_{k}"),
                    vec![(Term::Control { stage: t, index: k }, -1.0)],
                    5.0,
                );
            }
            sys.add_constraint(
                format!("x_hi_{t}"),
                vec![(Term::State { stage: t, index: 0 }, 1.0)],
                20.0,
            );
        }
    }
    let lower: Vec<f64> = (0..horizon * nxi).map(|_| rng.random_range(-1.0..0.0)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.5..2.0)).collect();
    let space = DisturbanceSpace::new(horizon, nxi, lower.clone(), upper.clone()).unwrap();
    let lifting = match p {
        Some(p) => Lifting::equal_division(space, p).unwrap(),
        None => {
            let interior = (0..horizon * nxi)
                .map(|d| {
                    let p = rng.random_range(1..=shape.max_p);
                    let mut pts: Vec<f64> = (1..p)
                        .map(|_| lower[d] + (upper[d] - lower[d]) * rng.random_range(0.05..0.95))
                        .collect();
                    pts.sort_by(f64::total_cmp);
                    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
                    pts
                })
                .collect();
            Lifting::from_interior(space, interior).unwrap()
        }
    };
    (sys, lifting)
}

pub fn random_policy(rng: &mut ChaCha8Rng, layout: &PolicyLayout) -> Vec<f64> {
    (0..layout.num_vars)
        .map(|j| {
            if layout.is_integer(j) {
                rng.random_range(-2..=2) as f64
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect()
}

pub fn random_samples(rng: &mut ChaCha8Rng, space: &DisturbanceSpace, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..space.total_dim())
                .map(|d| {
                    let (l, v) = space.bounds(d);
                    // Occasionally land exactly on a support bound.
                    match rng.random_range(0..10) {
                        0 => l,
                        1 => v,
                        _ => rng.random_range(l..v),
                    }
                })
                .collect()
        })
        .collect()
}
