//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Entering variable: lowest-index column with negative reduced cost.
//! Leaving variable: minimum ratio, ties broken by lowest basic index.

use super::{LpProblem, LpStatus, RawSolution};
use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
/// Phase-one optimum above this declares infeasibility.
const INFEASIBILITY_TOL: f64 = 1e-7;

/// How one original variable is expressed through standard-form columns:
/// `x = offset + Σ sign * y_col`.
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct Tableau {
    n_cols: usize,
    /// `m` constraint rows then the reduced-cost row; each row has
    /// `n_cols + 1` entries with the right-hand side last.
    data: Vec<f64>,
    basis: Vec<usize>,
    iterations: u64,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn width(&self) -> usize {
        self.n_cols + 1
    }

    fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width() + col]
    }

    fn rhs(&self, row: usize) -> f64 {
        self.at(row, self.n_cols)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width();
        let p = self.at(row, col);
        for j in 0..w {
            self.data[row * w + j] /= p;
        }
        for i in 0..=self.m() {
            if i == row {
                continue;
            }
            let factor = self.data[i * w + col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..w {
                self.data[i * w + j] -= factor * self.data[row * w + j];
            }
            self.data[i * w + col] = 0.0;
        }
        self.basis[row] = col;
        self.iterations += 1;
    }

    fn run(&mut self, allowed: &[bool], max_iterations: u64) -> Result<Outcome> {
        let m = self.m();
        loop {
            if self.iterations > max_iterations {
                return Err(Error::Numerical {
                    context: "dense simplex iteration limit".into(),
                    iterations: self.iterations,
                    residual: f64::NAN,
                });
            }
            let entering = (0..self.n_cols)
                .find(|&j| allowed[j] && !self.basis.contains(&j) && self.at(m, j) < -PIVOT_TOL);
            let Some(col) = entering else {
                return Ok(Outcome::Optimal);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.at(i, col);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - PIVOT_TOL
                            || (ratio <= best + PIVOT_TOL && self.basis[i] < self.basis[r])
                        {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            match leaving {
                None => return Ok(Outcome::Unbounded),
                Some((row, _)) => self.pivot(row, col),
            }
        }
    }

    /// Installs `costs` as the objective, priced out against the basis.
    fn set_costs(&mut self, costs: &[f64]) {
        let m = self.m();
        let w = self.width();
        for j in 0..self.n_cols {
            self.data[m * w + j] = costs[j];
        }
        self.data[m * w + self.n_cols] = 0.0;
        for i in 0..m {
            let cb = costs[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for j in 0..w {
                self.data[m * w + j] -= cb * self.data[i * w + j];
            }
        }
    }
}

pub(crate) fn solve(problem: &LpProblem) -> Result<RawSolution> {
    let n = problem.n_vars();
    // Map every original variable onto nonnegative standard-form columns.
    let mut maps = Vec::with_capacity(n);
    let mut n_struct = 0;
    // (column, width) rows for finite upper bounds: y <= u - l
    let mut bound_rows = Vec::new();
    for j in 0..n {
        let (l, u) = (problem.lower_bounds()[j], problem.upper_bounds()[j]);
        let map = if l.is_finite() {
            let col = n_struct;
            n_struct += 1;
            if u.is_finite() {
                bound_rows.push((col, u - l));
            }
            VarMap {
                offset: l,
                cols: vec![(col, 1.0)],
            }
        } else if u.is_finite() {
            let col = n_struct;
            n_struct += 1;
            VarMap {
                offset: u,
                cols: vec![(col, -1.0)],
            }
        } else {
            let col = n_struct;
            n_struct += 2;
            VarMap {
                offset: 0.0,
                cols: vec![(col, 1.0), (col + 1, -1.0)],
            }
        };
        maps.push(map);
    }

    // Rows in standard form: (dense coefficients over structural columns,
    // slack sign or 0, rhs).
    let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    let mut push_row = |row: &[(usize, f64)], rhs: f64, slack: f64| {
        let mut dense = vec![0.0; n_struct];
        let mut rhs = rhs;
        for &(j, v) in row {
            rhs -= v * maps[j].offset;
            for &(col, sign) in &maps[j].cols {
                dense[col] += v * sign;
            }
        }
        rows.push((dense, slack, rhs));
    };
    for (row, &rhs) in problem.eq_rows().iter().zip(problem.eq_rhs()) {
        push_row(row, rhs, 0.0);
    }
    for (row, &rhs) in problem.ineq_rows().iter().zip(problem.ineq_rhs()) {
        push_row(row, rhs, 1.0);
    }
    for &(col, width) in &bound_rows {
        let mut dense = vec![0.0; n_struct];
        dense[col] = 1.0;
        rows.push((dense, 1.0, width));
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != 0.0).count();
    let art_start = n_struct + n_slack;
    let n_cols = art_start + m;
    let width = n_cols + 1;
    let mut data = vec![0.0; (m + 1) * width];
    let mut slack_col = n_struct;
    for (i, (dense, slack, rhs)) in rows.iter().enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in dense.iter().enumerate() {
            data[i * width + j] = sign * v;
        }
        if *slack != 0.0 {
            data[i * width + slack_col] = sign * slack;
            slack_col += 1;
        }
        data[i * width + art_start + i] = 1.0;
        data[i * width + n_cols] = sign * rhs;
    }
    let mut tableau = Tableau {
        n_cols,
        data,
        basis: (art_start..art_start + m).collect(),
        iterations: 0,
    };
    let max_iterations = 50 * (n_cols as u64 + m as u64) + 1000;

    // Phase one: minimise the sum of artificials.
    let mut phase_one_costs = vec![0.0; n_cols];
    phase_one_costs[art_start..].iter_mut().for_each(|c| *c = 1.0);
    tableau.set_costs(&phase_one_costs);
    let all = vec![true; n_cols];
    tableau.run(&all, max_iterations)?;
    let infeasibility = -tableau.rhs(m);
    if infeasibility > INFEASIBILITY_TOL {
        return Ok(RawSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            iterations: tableau.iterations,
        });
    }
    // Drive remaining artificials out of the basis; rows where that is
    // impossible are redundant and stay inert.
    for i in 0..m {
        if tableau.basis[i] < art_start {
            continue;
        }
        if let Some(col) = (0..art_start).find(|&j| tableau.at(i, j).abs() > PIVOT_TOL) {
            tableau.pivot(i, col);
        }
    }

    // Phase two on the original costs, artificials barred from entering.
    let mut costs = vec![0.0; n_cols];
    for (j, map) in maps.iter().enumerate() {
        for &(col, sign) in &map.cols {
            costs[col] = problem.objective()[j] * sign;
        }
    }
    tableau.set_costs(&costs);
    let allowed: Vec<bool> = (0..n_cols).map(|j| j < art_start).collect();
    if let Outcome::Unbounded = tableau.run(&allowed, max_iterations)? {
        return Ok(RawSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            iterations: tableau.iterations,
        });
    }

    let mut y = vec![0.0; n_cols];
    for (i, &b) in tableau.basis.iter().enumerate() {
        y[b] = tableau.rhs(i);
    }
    let x = maps
        .iter()
        .map(|map| map.offset + map.cols.iter().map(|&(col, sign)| sign * y[col]).sum::<f64>())
        .collect();
    Ok(RawSolution {
        status: LpStatus::Optimal,
        x,
        iterations: tableau.iterations,
    })
}
