//! Free-format MPS export for cross-checking with external solvers.
//!
//! Numbers use Rust's shortest round-trip decimal formatting, which never
//! switches to exponent notation, so values survive a text round trip.

use std::fmt::Write as _;

use super::LpProblem;

/// Renders `problem` as a free-format MPS document.
pub fn write_mps(problem: &LpProblem, name: &str) -> String {
    let mut out = String::new();
    let n = problem.n_vars();
    // column-major view of the constraint matrix
    let mut columns: Vec<Vec<(String, f64)>> = vec![Vec::new(); n];
    let eq_names: Vec<String> = (0..problem.n_eq()).map(|i| format!("E{i}")).collect();
    let le_names: Vec<String> = (0..problem.n_ineq()).map(|i| format!("L{i}")).collect();
    for (row, name) in problem.eq_rows().iter().zip(&eq_names).chain(problem.ineq_rows().iter().zip(&le_names)) {
        for &(j, v) in row {
            columns[j].push((name.clone(), v));
        }
    }

    let _ = writeln!(out, "NAME {name}");
    out.push_str("ROWS\n N COST\n");
    for r in &eq_names {
        let _ = writeln!(out, " E {r}");
    }
    for r in &le_names {
        let _ = writeln!(out, " L {r}");
    }
    out.push_str("COLUMNS\n");
    for j in 0..n {
        let var = problem.var_name(j);
        let cost = problem.objective()[j];
        if cost != 0.0 {
            let _ = writeln!(out, " {var} COST {cost}");
        }
        for (row, v) in &columns[j] {
            let _ = writeln!(out, " {var} {row} {v}");
        }
    }
    out.push_str("RHS\n");
    for (r, b) in eq_names.iter().zip(problem.eq_rhs()).chain(le_names.iter().zip(problem.ineq_rhs())) {
        if *b != 0.0 {
            let _ = writeln!(out, " RHS {r} {b}");
        }
    }
    out.push_str("BOUNDS\n");
    for j in 0..n {
        let var = problem.var_name(j);
        let (l, u) = (problem.lower_bounds()[j], problem.upper_bounds()[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) if l == u => {
                let _ = writeln!(out, " FX BND {var} {l}");
            }
            (true, true) => {
                let _ = writeln!(out, " LO BND {var} {l}");
                let _ = writeln!(out, " UP BND {var} {u}");
            }
            (true, false) => {
                if l != 0.0 {
                    let _ = writeln!(out, " LO BND {var} {l}");
                }
            }
            (false, true) => {
                let _ = writeln!(out, " MI BND {var}");
                let _ = writeln!(out, " UP BND {var} {u}");
            }
            (false, false) => {
                let _ = writeln!(out, " FR BND {var}");
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}
