//! Linear programs in the form
//!
//! ```text
//! minimise    cᵀx
//! subject to  A_eq x  = b_eq
//!             A_in x <= b_in
//!             l <= x <= u          (infinite bounds allowed)
//! ```
//!
//! Constraint matrices are stored as sparse rows. Two backends solve them:
//! a sparse bounded simplex (default, used for every problem of realistic
//! size) and a dense two-phase tableau simplex with Bland's rule that serves
//! as a reference on small instances.

mod dense;
mod epigraph;
mod mps;
mod sparse;

pub use epigraph::l1_epigraph;
pub use mps::write_mps;

use crate::{Error, Result};

/// Primal feasibility tolerance for an optimal solution.
pub const FEASIBILITY_TOL: f64 = 1e-7;

/// Sparse row: `(variable index, coefficient)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    names: Vec<Option<String>>,
    eq_rows: Vec<SparseRow>,
    eq_rhs: Vec<f64>,
    ineq_rows: Vec<SparseRow>,
    ineq_rhs: Vec<f64>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(None);
        self.objective.len() - 1
    }

    pub fn add_named_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        let idx = self.add_var(cost, lower, upper);
        self.names[idx] = Some(name.into());
        idx
    }

    /// `row · x = rhs`
    pub fn add_eq(&mut self, row: SparseRow, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    /// `row · x <= rhs`
    pub fn add_le(&mut self, row: SparseRow, rhs: f64) {
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
    }

    /// `row · x >= rhs`, stored negated as a `<=` row.
    pub fn add_ge(&mut self, row: SparseRow, rhs: f64) {
        let negated = row.into_iter().map(|(j, v)| (j, -v)).collect();
        self.add_le(negated, -rhs);
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    pub fn eq_rows(&self) -> &[SparseRow] {
        &self.eq_rows
    }

    pub fn eq_rhs(&self) -> &[f64] {
        &self.eq_rhs
    }

    pub fn ineq_rows(&self) -> &[SparseRow] {
        &self.ineq_rows
    }

    pub fn ineq_rhs(&self) -> &[f64] {
        &self.ineq_rhs
    }

    pub fn var_name(&self, var: usize) -> String {
        self.names[var].clone().unwrap_or_else(|| format!("x{var}"))
    }

    /// Checks dimensions, bound ordering and finiteness.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::invalid(format!("objective coefficient of {} is {c}", self.var_name(j))));
            }
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::invalid(format!("bounds [{l}, {u}] of {} are inconsistent", self.var_name(j))));
            }
        }
        let rows = self.eq_rows.iter().zip(&self.eq_rhs).chain(self.ineq_rows.iter().zip(&self.ineq_rhs));
        for (row, rhs) in rows {
            if !rhs.is_finite() {
                return Err(Error::invalid(format!("constraint right-hand side {rhs}")));
            }
            for &(j, v) in row {
                if j >= n {
                    return Err(Error::DimensionMismatch {
                        what: "constraint column",
                        expected: n,
                        found: j + 1,
                    });
                }
                if !v.is_finite() {
                    return Err(Error::invalid(format!("constraint coefficient {v} on {}", self.var_name(j))));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Worst violation of any constraint or bound at `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let dot = |row: &SparseRow| row.iter().map(|&(j, v)| v * x[j]).sum::<f64>();
        let eq = self
            .eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(row, b)| (dot(row) - b).abs())
            .fold(0.0, f64::max);
        let ineq = self
            .ineq_rows
            .iter()
            .zip(&self.ineq_rhs)
            .map(|(row, b)| (dot(row) - b).max(0.0))
            .fold(0.0, f64::max);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max);
        eq.max(ineq).max(bounds)
    }

    /// Slack `b_in - A_in x` of every inequality row.
    pub fn ineq_slacks(&self, x: &[f64]) -> Vec<f64> {
        self.ineq_rows
            .iter()
            .zip(&self.ineq_rhs)
            .map(|(row, b)| b - row.iter().map(|&(j, v)| v * x[j]).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Empty unless the status is optimal.
    pub x: Vec<f64>,
    /// `cᵀx` recomputed from `x`; `+∞` when infeasible, `-∞` when unbounded.
    pub objective_value: f64,
    pub status: LpStatus,
    pub max_residual: f64,
    pub iterations: u64,
}

impl LpSolution {
    fn infeasible(iterations: u64) -> Self {
        Self {
            x: Vec::new(),
            objective_value: f64::INFINITY,
            status: LpStatus::Infeasible,
            max_residual: f64::NAN,
            iterations,
        }
    }

    fn unbounded(iterations: u64) -> Self {
        Self {
            x: Vec::new(),
            objective_value: f64::NEG_INFINITY,
            status: LpStatus::Unbounded,
            max_residual: f64::NAN,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Returns the solution if optimal, otherwise a typed error.
    pub fn into_optimal(self, context: &str) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(Error::Infeasible(context.to_string())),
            LpStatus::Unbounded => Err(Error::Unbounded(context.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Sparse bounded-variable simplex with LU factorisation.
    #[default]
    Sparse,
    /// Dense two-phase tableau simplex with Bland's rule.
    DenseSimplex,
}

/// Solves `problem` with the default backend.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    solve_lp_with(problem, Backend::default())
}

pub fn solve_lp_with(problem: &LpProblem, backend: Backend) -> Result<LpSolution> {
    problem.validate()?;
    let raw = match backend {
        Backend::Sparse => sparse::solve(problem)?,
        Backend::DenseSimplex => dense::solve(problem)?,
    };
    let RawSolution { status, x, iterations } = raw;
    match status {
        LpStatus::Infeasible => return Ok(LpSolution::infeasible(iterations)),
        LpStatus::Unbounded => return Ok(LpSolution::unbounded(iterations)),
        LpStatus::Optimal => {}
    }
    let x = clamp_to_bounds(problem, x);
    let max_residual = problem.max_residual(&x);
    if !(max_residual <= FEASIBILITY_TOL) {
        return Err(Error::Numerical {
            context: format!("{backend:?} LP solve returned an infeasible point"),
            iterations,
            residual: max_residual,
        });
    }
    Ok(LpSolution {
        objective_value: problem.objective_value(&x),
        x,
        status,
        max_residual,
        iterations,
    })
}

// Values within solver tolerance of a bound are snapped onto it.
fn clamp_to_bounds(problem: &LpProblem, mut x: Vec<f64>) -> Vec<f64> {
    for (v, (l, u)) in x.iter_mut().zip(problem.lower.iter().zip(&problem.upper)) {
        *v = v.clamp(*l, *u);
    }
    x
}

pub(crate) struct RawSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub iterations: u64,
}
