use std::fmt;

use crate::MilpError;

/// Sense of a linear constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// A single row `coeffs · x (relation) rhs` with sparse coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Minimization LP over box-bounded variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
    pub names: Vec<String>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Adds a variable and returns its column index.
    pub fn add_var(&mut self, name: impl Into<String>, lo: f64, hi: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lo, hi));
        self.names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x));
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.objective.len();
        if self.bounds.len() != n || self.names.len() != n {
            return Err(MilpError::Invalid(format!(
                "dimension mismatch: {} costs, {} bounds, {} names",
                n,
                self.bounds.len(),
                self.names.len()
            )));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(MilpError::Invalid(format!("objective coefficient of {} is not finite", self.names[j])));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(MilpError::Invalid(format!("bad bounds [{lo}, {hi}] on {}", self.names[j])));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(MilpError::Invalid(format!("row {i} has non-finite rhs")));
            }
            for &(j, a) in &c.coeffs {
                if j >= n {
                    return Err(MilpError::Invalid(format!("row {i} references column {j} of {n}")));
                }
                if !a.is_finite() {
                    return Err(MilpError::Invalid(format!("row {i} has a non-finite coefficient")));
                }
            }
        }
        Ok(())
    }
}

/// LP plus a set of columns restricted to {0, 1}.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    pub binary_vars: Vec<usize>,
}

impl MixedIntegerProgram {
    pub fn new(lp: LinearProgram) -> Self {
        Self { lp, binary_vars: Vec::new() }
    }

    /// Adds a binary column with bounds [0, 1].
    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> usize {
        let j = self.lp.add_var(name, 0.0, 1.0, cost);
        self.binary_vars.push(j);
        j
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        self.lp.validate()?;
        for &j in &self.binary_vars {
            let Some(&(lo, hi)) = self.lp.bounds.get(j) else {
                return Err(MilpError::Invalid(format!("binary index {j} out of range")));
            };
            if lo < 0.0 || hi > 1.0 {
                return Err(MilpError::Invalid(format!(
                    "binary {} has bounds [{lo}, {hi}] outside [0, 1]",
                    self.lp.names[j]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Row duals of the final LP (empty unless the status is optimal).
    pub duals: Vec<f64>,
}

impl Solution {
    pub(crate) fn infeasible(n: usize) -> Self {
        Self { status: Status::Infeasible, values: vec![0.0; n], objective: f64::INFINITY, duals: Vec::new() }
    }

    pub(crate) fn unbounded(n: usize) -> Self {
        Self { status: Status::Unbounded, values: vec![0.0; n], objective: f64::NEG_INFINITY, duals: Vec::new() }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
