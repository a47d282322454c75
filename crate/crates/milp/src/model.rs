use std::collections::{HashMap, HashSet};

use crate::error::ModelError;

/// Dense variable index, `0..model.num_vars()`.
pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// A linear row `Σ coeffs · x  (sense)  rhs`. Coefficients are sorted by
/// variable id, merged, and never zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (zero or negative when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            RowSense::Le => act - self.rhs,
            RowSense::Ge => self.rhs - act,
            RowSense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Minimization MILP: variables with bounds and kinds, sparse rows and a
/// linear objective plus constant.
#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    pub name: String,
    vars: Vec<Variable>,
    rows: Vec<Row>,
    objective: Vec<f64>,
    obj_constant: f64,
    var_names: HashMap<String, VarId>,
    row_names: HashSet<String>,
}

fn check_name(name: &str) -> Result<(), ModelError> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(ModelError::InvalidName(name.to_string()));
    }
    Ok(())
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        check_name(&name)?;
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(ModelError::EmptyDomain { name, lower, upper });
        }
        if self.var_names.contains_key(&name) {
            return Err(ModelError::DuplicateVariable(name));
        }
        let id = self.vars.len();
        self.var_names.insert(name.clone(), id);
        self.vars.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        self.objective.push(0.0);
        Ok(id)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId, ModelError> {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId, ModelError> {
        self.add_var(name, VarKind::Integer, lower, upper)
    }

    /// Adds a row; duplicate variable entries are summed and exact zeros dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> Result<usize, ModelError> {
        let name = name.into();
        check_name(&name)?;
        if self.row_names.contains(&name) {
            return Err(ModelError::DuplicateRow(name));
        }
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite { context: name, value: rhs });
        }
        let mut merged: Vec<(VarId, f64)> = coeffs.into_iter().collect();
        for &(j, a) in &merged {
            if j >= self.vars.len() {
                return Err(ModelError::UnknownVariable(j));
            }
            if !a.is_finite() {
                return Err(ModelError::NonFinite { context: name, value: a });
            }
        }
        merged.sort_by_key(|&(j, _)| j);
        let mut coeffs: Vec<(VarId, f64)> = Vec::with_capacity(merged.len());
        for (j, a) in merged {
            match coeffs.last_mut() {
                Some((last, acc)) if *last == j => *acc += a,
                _ => coeffs.push((j, a)),
            }
        }
        coeffs.retain(|&(_, a)| a != 0.0);
        self.row_names.insert(name.clone());
        self.rows.push(Row {
            name,
            coeffs,
            sense,
            rhs,
        });
        Ok(self.rows.len() - 1)
    }

    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn add_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var] += coeff;
    }

    pub fn set_objective_constant(&mut self, c: f64) {
        self.obj_constant = c;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.vars[var];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn set_kind(&mut self, var: VarId, kind: VarKind) {
        self.vars[var].kind = kind;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_integer(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Integer).count()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id]
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.obj_constant
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_names.get(name).copied()
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest violation of any row or variable bound (non-positive when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x));
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xj)| (v.lower - xj).max(xj - v.upper));
        rows.chain(bounds).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_integral(&self, x: &[f64], tol: f64) -> bool {
        self.vars
            .iter()
            .zip(x)
            .all(|(v, &xj)| v.kind == VarKind::Continuous || (xj - xj.round()).abs() <= tol)
    }

    /// Same model with every integrality requirement dropped.
    pub fn relaxed(&self) -> Self {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        m
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(ModelError::EmptyDomain {
                    name: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(ModelError::NonFinite {
                    context: format!("objective:{}", self.vars[j].name),
                    value: c,
                });
            }
        }
        if !self.obj_constant.is_finite() {
            return Err(ModelError::NonFinite {
                context: "objective constant".into(),
                value: self.obj_constant,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_merge_duplicates_and_drop_zeros() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        let y = m.add_continuous("y", 0.0, 1.0).unwrap();
        m.add_row("r", [(y, 1.0), (x, 2.0), (y, -1.0), (x, 0.5)], RowSense::Le, 1.0)
            .unwrap();
        assert_eq!(m.rows()[0].coeffs, vec![(x, 2.5)]);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut m = MilpModel::new("t");
        m.add_continuous("x", 0.0, 1.0).unwrap();
        assert!(matches!(
            m.add_continuous("x", 0.0, 1.0),
            Err(ModelError::DuplicateVariable(_))
        ));
        assert!(matches!(m.add_continuous("a b", 0.0, 1.0), Err(ModelError::InvalidName(_))));
        assert!(matches!(m.add_continuous("z", 2.0, 1.0), Err(ModelError::EmptyDomain { .. })));
    }

    #[test]
    fn violation_measures() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        m.add_row("le", [(x, 1.0)], RowSense::Le, 2.0).unwrap();
        assert_eq!(m.max_violation(&[3.0]), 1.0);
        assert!(m.max_violation(&[1.0]) <= 0.0);
        assert_eq!(m.max_violation(&[-1.0]), 1.0);
    }
}
