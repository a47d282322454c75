//! Ambiguity sets built around empirical samples, sample files and the
//! empirical Wasserstein radius.

use std::path::Path;

use drmic_milp::{solve_lp, LpStatus, MilpModel, RowSense};

use crate::error::{check_len, Error, Result};
use crate::lifting::{DisturbanceSpace, Lifting, SUPPORT_TOL};

/// 1-Wasserstein ball (1-norm ground metric) of radius `theta` around the
/// uniform distribution on `samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinSet {
    pub theta: f64,
    pub samples: Vec<Vec<f64>>,
}

impl WassersteinSet {
    pub fn new(theta: f64, samples: Vec<Vec<f64>>, space: &DisturbanceSpace) -> Result<Self> {
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::InvalidSpec(format!("radius must be finite and nonnegative, got {theta}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidSpec("at least one sample is required".into()));
        }
        check_samples(&samples, space)?;
        Ok(Self { theta, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Wasserstein ball intersected with bounds on the first moment.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedMomentSet {
    pub ball: WassersteinSet,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl MixedMomentSet {
    pub fn new(ball: WassersteinSet, lower: Vec<f64>, upper: Vec<f64>, space: &DisturbanceSpace) -> Result<Self> {
        check_len("moment lower bound", space.total_dim(), lower.len())?;
        check_len("moment upper bound", space.total_dim(), upper.len())?;
        for d in 0..space.total_dim() {
            let (l, v) = space.bounds(d);
            if lower[d] > upper[d] {
                return Err(Error::InvalidSpec(format!(
                    "moment bounds of dimension {d}: lower {} exceeds upper {}",
                    lower[d], upper[d]
                )));
            }
            if lower[d] < l - SUPPORT_TOL || upper[d] > v + SUPPORT_TOL {
                return Err(Error::InvalidSpec(format!(
                    "moment bounds of dimension {d} must lie inside the support [{l}, {v}]"
                )));
            }
        }
        Ok(Self { ball, lower, upper })
    }
}

/// One event of an event-wise set: its own support, lifting and ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub probability: f64,
    pub lifting: Lifting,
    pub ball: WassersteinSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventWiseSet {
    pub scenarios: Vec<Scenario>,
}

impl EventWiseSet {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::InvalidSpec("an event-wise set needs at least one scenario".into()));
        }
        let mut total = 0.0;
        for (l, s) in scenarios.iter().enumerate() {
            if !(s.probability >= 0.0) {
                return Err(Error::InvalidSpec(format!("scenario {l} has a negative probability")));
            }
            check_samples(&s.ball.samples, s.lifting.space())?;
            total += s.probability;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!("scenario probabilities sum to {total}, not 1")));
        }
        Ok(Self { scenarios })
    }
}

/// The three supported ambiguity families.
#[derive(Debug, Clone, PartialEq)]
pub enum AmbiguitySpec {
    Wasserstein(WassersteinSet),
    MixedMoment(MixedMomentSet),
    EventWise(EventWiseSet),
}

fn check_samples(samples: &[Vec<f64>], space: &DisturbanceSpace) -> Result<()> {
    for (row, s) in samples.iter().enumerate() {
        check_len(&format!("sample {row}"), space.total_dim(), s.len())?;
        for (col, &x) in s.iter().enumerate() {
            let (l, v) = space.bounds(col);
            if !(x >= l - SUPPORT_TOL && x <= v + SUPPORT_TOL) {
                return Err(Error::SampleOutOfSupport {
                    row,
                    col,
                    value: x,
                    lower: l,
                    upper: v,
                });
            }
        }
    }
    Ok(())
}

/// Parses comma-separated points, one per line, all of the same width.
/// Lines starting with `#` are skipped; a header row is not allowed.
pub fn parse_points(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(row + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(row + 1, |p| p.line() as usize);
        let values = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{f}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = points.first() {
            if first.len() != values.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} columns, found {}", first.len(), values.len()),
                });
            }
        }
        points.push(values);
    }
    if points.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no samples found".into(),
        });
    }
    Ok(points)
}

/// Parses samples in the format of [`parse_points`] and checks them against
/// the support; columns are stage-major.
pub fn parse_samples(text: &str, space: &DisturbanceSpace) -> Result<Vec<Vec<f64>>> {
    let samples = parse_points(text)?;
    if samples[0].len() != space.total_dim() {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected {} columns, found {}", space.total_dim(), samples[0].len()),
        });
    }
    check_samples(&samples, space)?;
    Ok(samples)
}

pub fn load_samples(path: impl AsRef<Path>, space: &DisturbanceSpace) -> Result<Vec<Vec<f64>>> {
    parse_samples(&std::fs::read_to_string(path)?, space)
}

/// Writes samples in the format read by [`parse_samples`].
pub fn samples_to_csv(samples: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for s in samples {
        let row: Vec<String> = s.iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Exact 1-Wasserstein distance (1-norm ground metric) between the uniform
/// distributions on `a` and `b`, from the transportation LP.
pub fn estimate_radius(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidSpec("both sample sets must be nonempty".into()));
    }
    let dim = a[0].len();
    for s in a.iter().chain(b) {
        check_len("sample dimension", dim, s.len())?;
    }
    let (n, m) = (a.len(), b.len());
    // Masses scaled by n·m so that every marginal is an integer.
    let mut model = MilpModel::new("transport");
    for i in 0..n {
        for j in 0..m {
            let v = model.add_continuous(format!("p{i}_{j}"), 0.0, f64::INFINITY)?;
            let c: f64 = a[i].iter().zip(&b[j]).map(|(x, y)| (x - y).abs()).sum();
            model.set_objective(v, c);
        }
    }
    for i in 0..n {
        model.add_row(format!("src{i}"), (0..m).map(|j| (i * m + j, 1.0)), RowSense::Eq, m as f64)?;
    }
    for j in 0..m {
        model.add_row(format!("dst{j}"), (0..n).map(|i| (i * m + j, 1.0)), RowSense::Eq, n as f64)?;
    }
    let out = solve_lp(&model)?;
    if out.status != LpStatus::Optimal {
        return Err(Error::InvalidSpec(format!("transport problem returned {:?}", out.status)));
    }
    Ok((out.objective / (n * m) as f64).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_transport() {
        let a = vec![vec![0.0], vec![1.0]];
        let b = vec![vec![0.0], vec![3.0]];
        assert!((estimate_radius(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(estimate_radius(&a, &a).unwrap(), 0.0);
        assert!(estimate_radius(&a, &[]).is_err());
    }

    #[test]
    fn sample_file_validation() {
        let space = DisturbanceSpace::uniform(2, 1, 20.0, 100.0).unwrap();
        let s = parse_samples("50,30\n# note\n 60 , 40\n", &space).unwrap();
        assert_eq!(s, vec![vec![50.0, 30.0], vec![60.0, 40.0]]);
        assert!(matches!(parse_samples("", &space), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_samples("50,30\n101,40\n", &space),
            Err(Error::SampleOutOfSupport { row: 1, col: 0, .. })
        ));
        assert!(matches!(parse_samples("50\n", &space), Err(Error::Parse { .. })));
        assert_eq!(parse_samples(&samples_to_csv(&s), &space).unwrap(), s);
    }

    #[test]
    fn set_validation() {
        let space = DisturbanceSpace::uniform(1, 1, 0.0, 1.0).unwrap();
        let ball = WassersteinSet::new(0.1, vec![vec![0.5]], &space).unwrap();
        assert!(WassersteinSet::new(-0.1, vec![vec![0.5]], &space).is_err());
        assert!(MixedMomentSet::new(ball.clone(), vec![0.6], vec![0.4], &space).is_err());
        assert!(MixedMomentSet::new(ball.clone(), vec![0.0], vec![1.0], &space).is_ok());
        let lifting = Lifting::equal_division(space, 2).unwrap();
        let sc = |p| Scenario {
            probability: p,
            lifting: lifting.clone(),
            ball: ball.clone(),
        };
        assert!(EventWiseSet::new(vec![sc(0.5), sc(0.5)]).is_ok());
        assert!(EventWiseSet::new(vec![sc(0.5), sc(0.4)]).is_err());
    }
}
