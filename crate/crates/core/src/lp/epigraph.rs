use super::{LpProblem, SparseRow};
use crate::{Error, Result};

/// Appends `min ‖M x - b‖₁` to `base` through auxiliary variables `t ≥ 0`
/// with `-t ≤ M x - b ≤ t`, each `t_j` costing 1.
///
/// `rows[j]` is row `j` of `M` over the variables of `base`. Returns the
/// augmented problem and the index of the first auxiliary variable; the
/// auxiliaries are contiguous, one per row.
pub fn l1_epigraph(rows: &[SparseRow], offset: &[f64], mut base: LpProblem) -> Result<(LpProblem, usize)> {
    if rows.len() != offset.len() {
        return Err(Error::DimensionMismatch {
            what: "epigraph offset",
            expected: rows.len(),
            found: offset.len(),
        });
    }
    let n = base.n_vars();
    if let Some(&(j, _)) = rows.iter().flatten().find(|(j, _)| *j >= n) {
        return Err(Error::DimensionMismatch {
            what: "epigraph matrix column",
            expected: n,
            found: j + 1,
        });
    }
    let first = base.n_vars();
    for (j, (row, &b)) in rows.iter().zip(offset).enumerate() {
        let t = base.add_named_var(format!("t{j}"), 1.0, 0.0, f64::INFINITY);
        // M x - t <= b
        let mut upper = row.clone();
        upper.push((t, -1.0));
        base.add_le(upper, b);
        // -M x - t <= -b
        let mut lower: SparseRow = row.iter().map(|&(k, v)| (k, -v)).collect();
        lower.push((t, -1.0));
        base.add_le(lower, -b);
    }
    Ok((base, first))
}
