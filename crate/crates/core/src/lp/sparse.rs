//! Adapter onto `microlp`'s sparse bounded simplex.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::{LpProblem, LpStatus, RawSolution, SparseRow};
use crate::{Error, Result};

/// Sorts a row, merges repeated columns and drops exact zeros.
fn canonical(row: &SparseRow) -> SparseRow {
    let mut row = row.clone();
    row.sort_by_key(|&(j, _)| j);
    let mut merged: SparseRow = Vec::with_capacity(row.len());
    for (j, v) in row {
        match merged.last_mut() {
            Some((last, acc)) if *last == j => *acc += v,
            _ => merged.push((j, v)),
        }
    }
    merged.retain(|&(_, v)| v != 0.0);
    merged
}

pub(crate) fn solve(problem: &LpProblem) -> Result<RawSolution> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..problem.n_vars())
        .map(|j| {
            lp.add_var(
                problem.objective()[j],
                (problem.lower_bounds()[j], problem.upper_bounds()[j]),
            )
        })
        .collect();
    let infeasible = || RawSolution {
        status: LpStatus::Infeasible,
        x: Vec::new(),
        iterations: 0,
    };
    let rows = problem
        .eq_rows()
        .iter()
        .zip(problem.eq_rhs())
        .map(|r| (r, ComparisonOp::Eq))
        .chain(problem.ineq_rows().iter().zip(problem.ineq_rhs()).map(|r| (r, ComparisonOp::Le)));
    for ((row, &rhs), op) in rows {
        let row = canonical(row);
        if row.is_empty() {
            let violated = match op {
                ComparisonOp::Eq => rhs.abs() > super::FEASIBILITY_TOL,
                _ => rhs < -super::FEASIBILITY_TOL,
            };
            if violated {
                return Ok(infeasible());
            }
            continue;
        }
        lp.add_constraint(row.iter().map(|&(j, v)| (vars[j], v)), op, rhs);
    }
    match lp.solve() {
        Ok(outcome) => {
            let iterations = outcome.stats().lp_iterations;
            let solution = outcome.into_solution().map_err(|_| Error::Numerical {
                context: "sparse simplex interrupted".into(),
                iterations,
                residual: f64::NAN,
            })?;
            Ok(RawSolution {
                status: LpStatus::Optimal,
                x: vars.iter().map(|&v| solution.var_value_raw(v)).collect(),
                iterations,
            })
        }
        Err(microlp::Error::Infeasible) => Ok(infeasible()),
        Err(microlp::Error::Unbounded) => Ok(RawSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            iterations: 0,
        }),
        Err(e) => Err(Error::Numerical {
            context: format!("sparse simplex: {e}"),
            iterations: 0,
            residual: f64::NAN,
        }),
    }
}
