//! Hand a model to an external solver through files.
//!
//! The command template may contain `{model}` and `{solution}`; they are
//! replaced by the paths of the exported MPS file and of the file the solver
//! must write, one `name value` pair per line.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

use crate::model::MilpModel;
use crate::mps::write_mps;

#[derive(Debug, Error)]
pub enum ExternalSolverError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver command `{command}` failed with {status}: {stderr}")]
    CommandFailed {
        command: String,
        status: String,
        stderr: String,
    },
    #[error("solution line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("solution has no value for variable `{0}`")]
    Missing(String),
}

/// Reads a `name value` solution file into model order. Blank lines, lines
/// starting with `#` and names unknown to the model are ignored.
pub fn read_solution(path: impl AsRef<Path>, model: &MilpModel) -> Result<Vec<f64>, ExternalSolverError> {
    let text = std::fs::read_to_string(path)?;
    let mut values: HashMap<&str, f64> = HashMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line_t = line.trim();
        if line_t.is_empty() || line_t.starts_with('#') {
            continue;
        }
        let mut it = line_t.split_whitespace();
        let (Some(name), Some(v), None) = (it.next(), it.next(), it.next()) else {
            return Err(ExternalSolverError::Parse {
                line: ln + 1,
                message: "expected `name value`".into(),
            });
        };
        let v: f64 = v.parse().map_err(|_| ExternalSolverError::Parse {
            line: ln + 1,
            message: format!("bad number `{v}`"),
        })?;
        values.insert(name, v);
    }
    model
        .vars()
        .iter()
        .map(|var| {
            values
                .get(var.name.as_str())
                .copied()
                .ok_or_else(|| ExternalSolverError::Missing(var.name.clone()))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub command: String,
    /// Directory for the exchanged files; a fresh temporary directory when unset.
    pub work_dir: Option<PathBuf>,
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            work_dir: None,
        }
    }

    /// Exports `model`, runs the command through `sh -c` and returns the
    /// variable values it reported.
    pub fn solve(&self, model: &MilpModel) -> Result<Vec<f64>, ExternalSolverError> {
        let tmp;
        let dir = match &self.work_dir {
            Some(d) => d.clone(),
            None => {
                tmp = tempfile::tempdir()?;
                tmp.path().to_path_buf()
            }
        };
        let model_path = dir.join("model.mps");
        let solution_path = dir.join("model.sol");
        write_mps(model, &model_path)?;
        let _ = std::fs::remove_file(&solution_path);
        let command = self
            .command
            .replace("{model}", &model_path.to_string_lossy())
            .replace("{solution}", &solution_path.to_string_lossy());
        let out = Command::new("sh").arg("-c").arg(&command).output()?;
        if !out.status.success() {
            return Err(ExternalSolverError::CommandFailed {
                command,
                status: out.status.to_string(),
                stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
            });
        }
        read_solution(&solution_path, model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solution_file_is_read_in_model_order() {
        let mut m = MilpModel::new("t");
        m.add_continuous("x", 0.0, 1.0).unwrap();
        m.add_continuous("y", 0.0, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.sol");
        std::fs::write(&p, "# comment\ny 0.5\nx 1\nextra 3\n").unwrap();
        assert_eq!(read_solution(&p, &m).unwrap(), vec![1.0, 0.5]);
        std::fs::write(&p, "x 1\n").unwrap();
        assert!(matches!(read_solution(&p, &m), Err(ExternalSolverError::Missing(_))));
    }

    #[test]
    fn command_template_is_substituted() {
        let mut m = MilpModel::new("t");
        m.add_continuous("x", 0.0, 1.0).unwrap();
        let solver = ExternalSolver::new("test -s {model} && printf 'x 0.25\\n' > {solution}");
        assert_eq!(solver.solve(&m).unwrap(), vec![0.25]);
    }
}
