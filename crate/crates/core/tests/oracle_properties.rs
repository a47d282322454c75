use drmic_core::ambiguity::WassersteinSet;
use drmic_core::lifting::{DisturbanceSpace, Lifting};
use drmic_core::oracle::{inner_max, worst_case_expectation, PiecewiseFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lifting(rng: &mut ChaCha8Rng, dims: usize) -> Lifting {
    let lower: Vec<f64> = (0..dims).map(|_| rng.random_range(-2.0..1.0)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.5..3.0)).collect();
    let space = DisturbanceSpace::new(1, dims, lower.clone(), upper.clone()).unwrap();
    let interior = (0..dims)
        .map(|d| {
            let p = rng.random_range(1..=4);
            let mut pts: Vec<f64> = (1..p).map(|_| rng.random_range(lower[d] + 0.05..upper[d] - 0.05)).collect();
            pts.sort_by(f64::total_cmp);
            pts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            pts
        })
        .collect();
    Lifting::from_interior(space, interior).unwrap()
}

fn random_function(rng: &mut ChaCha8Rng, lifting: &Lifting) -> PiecewiseFunction {
    let k = rng.random_range(1..=3);
    let d = (0..k)
        .map(|_| (0..lifting.dim()).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let r = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    PiecewiseFunction::new(d, r).unwrap()
}

fn penalized(f: &PiecewiseFunction, lifting: &Lifting, anchor: &[f64], lambda: f64, xi: &[f64]) -> f64 {
    let dist: f64 = xi.iter().zip(anchor).map(|(a, b)| (a - b).abs()).sum();
    f.eval(&lifting.lift(xi).unwrap()) - lambda * dist
}

/// Uniform grid over `[l, v]` with `n` points, plus the left-limit probes
/// just below each interior breakpoint.
fn axis(lifting: &Lifting, d: usize, n: usize) -> Vec<f64> {
    let (l, v) = lifting.space().bounds(d);
    let mut pts: Vec<f64> = (0..n).map(|i| l + (v - l) * i as f64 / (n - 1) as f64).collect();
    let w = lifting.breakpoints(d);
    for &b in &w[1..w.len() - 1] {
        pts.push(b - 1e-9 * (v - l));
    }
    pts
}

/// Largest change of the penalized function over one grid step.
fn step_bound(f: &PiecewiseFunction, lifting: &Lifting, lambda: f64, n: usize) -> f64 {
    let slope = f
        .d
        .iter()
        .map(|d| d.iter().map(|c| c.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let widest = (0..lifting.space().total_dim())
        .map(|d| {
            let (l, v) = lifting.space().bounds(d);
            v - l
        })
        .fold(0.0, f64::max);
    (slope + lambda) * widest / (n - 1) as f64 * lifting.space().total_dim() as f64 + 1e-7
}

#[test]
fn inner_max_matches_dense_grid_in_one_dimension() {
    let n = 10_000;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lifting = random_lifting(&mut rng, 1);
        let f = random_function(&mut rng, &lifting);
        let (l, v) = lifting.space().bounds(0);
        let anchor = [rng.random_range(l..=v)];
        let lambda = rng.random_range(0.0..4.0);
        let exact = inner_max(&f, &lifting, &anchor, lambda).unwrap();
        let grid = axis(&lifting, 0, n)
            .into_iter()
            .map(|x| penalized(&f, &lifting, &anchor, lambda, &[x]))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(grid <= exact.value + 1e-9, "seed {seed}: grid {grid} above exact {}", exact.value);
        assert!(exact.value - grid <= step_bound(&f, &lifting, lambda, n), "seed {seed}: {} vs {grid}", exact.value);
    }
}

#[test]
fn inner_max_matches_dense_grid_in_two_dimensions() {
    let n = 400;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let lifting = random_lifting(&mut rng, 2);
        let f = random_function(&mut rng, &lifting);
        let anchor: Vec<f64> = (0..2)
            .map(|d| {
                let (l, v) = lifting.space().bounds(d);
                rng.random_range(l..=v)
            })
            .collect();
        let lambda = rng.random_range(0.0..4.0);
        let exact = inner_max(&f, &lifting, &anchor, lambda).unwrap();
        let (a0, a1) = (axis(&lifting, 0, n), axis(&lifting, 1, n));
        let mut grid = f64::NEG_INFINITY;
        for &x in &a0 {
            for &y in &a1 {
                grid = grid.max(penalized(&f, &lifting, &anchor, lambda, &[x, y]));
            }
        }
        assert!(grid <= exact.value + 1e-9, "seed {seed}: grid {grid} above exact {}", exact.value);
        assert!(exact.value - grid <= step_bound(&f, &lifting, lambda, n), "seed {seed}: {} vs {grid}", exact.value);
    }
}

#[test]
fn dual_function_is_convex_and_minimized() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let dims = rng.random_range(1..=2);
        let lifting = random_lifting(&mut rng, dims);
        let f = random_function(&mut rng, &lifting);
        let samples: Vec<Vec<f64>> = (0..rng.random_range(1..=4))
            .map(|_| {
                (0..dims)
                    .map(|d| {
                        let (l, v) = lifting.space().bounds(d);
                        rng.random_range(l..=v)
                    })
                    .collect()
            })
            .collect();
        let theta = rng.random_range(0.0..1.0);
        let set = WassersteinSet::new(theta, samples.clone(), lifting.space()).unwrap();
        let report = worst_case_expectation(&f, &lifting, &set).unwrap();
        let h = |lambda: f64| {
            lambda * theta
                + samples
                    .iter()
                    .map(|s| inner_max(&f, &lifting, s, lambda).unwrap().value)
                    .sum::<f64>()
                    / samples.len() as f64
        };
        let top = 2.0 * report.lambda_bound.max(1.0);
        let lambdas: Vec<f64> = (0..100).map(|i| top * i as f64 / 99.0).collect();
        let values: Vec<f64> = lambdas.iter().map(|&l| h(l)).collect();
        for i in 1..99 {
            let mid = 0.5 * (values[i - 1] + values[i + 1]);
            assert!(values[i] <= mid + 1e-9, "seed {seed}: h not convex at {}", lambdas[i]);
        }
        let grid_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(report.value <= grid_min + 1e-9, "seed {seed}: {} above grid minimum {grid_min}", report.value);
        assert!((h(report.lambda) - report.value).abs() <= 1e-9);
    }
}

#[test]
fn huge_radius_gives_the_robust_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let lifting = random_lifting(&mut rng, 1);
    let f = random_function(&mut rng, &lifting);
    let (l, v) = lifting.space().bounds(0);
    let set = WassersteinSet::new(1e6, vec![vec![0.5 * (l + v)]], lifting.space()).unwrap();
    let report = worst_case_expectation(&f, &lifting, &set).unwrap();
    let robust = inner_max(&f, &lifting, &[0.5 * (l + v)], 0.0).unwrap().value;
    assert!((report.value - robust).abs() <= 1e-9);
    assert_eq!(report.lambda, 0.0);
}
