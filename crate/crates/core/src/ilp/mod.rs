//! Exact binary integer programming for region-form programs.
//!
//! [`BranchAndBound`] bounds with an exact rational simplex;
//! [`BruteForce`] enumerates assignments and serves as the reference.
//! Both return the optimum that is smallest in the order
//! (objective value, assignment read lexicographically), so their
//! answers are identical whenever both succeed.

mod branch_bound;
mod brute_force;
mod simplex;

pub use branch_bound::BranchAndBound;
pub use brute_force::BruteForce;
pub use simplex::{lp_relax, LpRelaxation};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("enumeration budget exceeded: {free} free variables, budget {budget}")]
    BudgetExceeded { free: usize, budget: usize },
    #[error("relaxation unexpectedly unbounded")]
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowKind {
    Ge,
    Le,
    Eq,
}

/// `coefficients · v (>=|<=|=) rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub coefficients: Vec<i64>,
    pub kind: RowKind,
    pub rhs: i64,
}

impl Row {
    pub fn new(coefficients: Vec<i64>, kind: RowKind, rhs: i64) -> Self {
        Row {
            coefficients,
            kind,
            rhs,
        }
    }

    pub fn lhs(&self, assignment: &[i64]) -> i64 {
        self.coefficients.iter().zip(assignment).map(|(c, v)| c * v).sum()
    }

    pub fn holds(&self, assignment: &[i64]) -> bool {
        let lhs = self.lhs(assignment);
        match self.kind {
            RowKind::Ge => lhs >= self.rhs,
            RowKind::Le => lhs <= self.rhs,
            RowKind::Eq => lhs == self.rhs,
        }
    }
}

/// Minimize `objective · v` over `v ∈ {0,1}^n` subject to the rows and
/// the per-variable fixings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryProgram {
    variables: usize,
    objective: Vec<i64>,
    rows: Vec<Row>,
    fixings: Vec<Option<bool>>,
    conflicting_fixings: bool,
}

impl BinaryProgram {
    pub fn new(variables: usize, objective: Vec<i64>, rows: Vec<Row>) -> Self {
        BinaryProgram {
            variables,
            objective,
            rows,
            fixings: vec![None; variables],
            conflicting_fixings: false,
        }
    }

    pub fn variables(&self) -> usize {
        self.variables
    }

    pub fn objective(&self) -> &[i64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn fixings(&self) -> &[Option<bool>] {
        &self.fixings
    }

    pub fn add_row(&mut self, row: Row) {
        self.rows.push(row);
    }

    /// Fixes a variable. Fixing it to both values makes the program
    /// infeasible.
    pub fn fix(&mut self, var: usize, value: bool) {
        match self.fixings[var] {
            Some(v) if v != value => self.conflicting_fixings = true,
            _ => self.fixings[var] = Some(value),
        }
    }

    pub fn has_conflicting_fixings(&self) -> bool {
        self.conflicting_fixings
    }

    pub fn free_variables(&self) -> usize {
        self.fixings.iter().filter(|f| f.is_none()).count()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.objective.len() != self.variables {
            return Err(SolverError::Dimension(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.variables
            )));
        }
        if self.fixings.len() != self.variables {
            return Err(SolverError::Dimension("fixings length".into()));
        }
        if let Some((i, r)) = self
            .rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.coefficients.len() != self.variables)
        {
            return Err(SolverError::Dimension(format!(
                "row {i} has {} coefficients for {} variables",
                r.coefficients.len(),
                self.variables
            )));
        }
        Ok(())
    }

    /// Exact integer check of rows, fixings and binary domain.
    pub fn is_feasible(&self, assignment: &[i64]) -> bool {
        assignment.len() == self.variables
            && !self.conflicting_fixings
            && assignment.iter().all(|&v| v == 0 || v == 1)
            && self
                .fixings
                .iter()
                .zip(assignment)
                .all(|(f, &v)| f.is_none_or(|b| i64::from(b) == v))
            && self.rows.iter().all(|r| r.holds(assignment))
    }

    pub fn objective_value(&self, assignment: &[i64]) -> i64 {
        self.objective.iter().zip(assignment).map(|(c, v)| c * v).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub status: Status,
    /// Present iff optimal.
    pub assignment: Option<Vec<bool>>,
    pub objective: Option<i64>,
}

impl Solution {
    pub fn infeasible() -> Self {
        Solution {
            status: Status::Infeasible,
            assignment: None,
            objective: None,
        }
    }

    pub(crate) fn optimal(program: &BinaryProgram, assignment: Vec<bool>) -> Self {
        let ints: Vec<i64> = assignment.iter().map(|&b| i64::from(b)).collect();
        debug_assert!(program.is_feasible(&ints));
        Solution {
            status: Status::Optimal,
            objective: Some(program.objective_value(&ints)),
            assignment: Some(assignment),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// A solver for binary programs. Implementations must agree with
/// [`BruteForce`] on status, objective and (tie-broken) assignment.
pub trait BinarySolver: Send + Sync {
    fn solve(&self, program: &BinaryProgram) -> Result<Solution, SolverError>;
}

/// Strict total order used to pick among equal-objective optima.
pub(crate) fn better(a: (i64, &[bool]), b: (i64, &[bool])) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

pub fn solve(program: &BinaryProgram) -> Result<Solution, SolverError> {
    BranchAndBound.solve(program)
}

pub fn brute_force(program: &BinaryProgram) -> Result<Solution, SolverError> {
    BruteForce::default().solve(program)
}
