//! Convex approximations of the cross apprenticeship learning problem
//!
//! ```text
//! min_{π_1..π_N, π_c}  Σ_i ‖Φᵀμ_i^{π_i} − Φᵀμ_{E_i}‖₁   s.t.  ‖π_i − π_c‖∞ ≤ ε
//! ```
//!
//! In occupation-measure form the coupling constraint reads
//! `|μ_i(s,a) − π_c(s,a) σ_i(s)| ≤ ε σ_i(s)` with `σ_i(s) = Σ_a μ_i(s,a)`,
//! which is bilinear. [`solve_mccormick`] replaces the product
//! `w_i = π_c σ_i` by its McCormick envelope over the boxes
//! `α(s) ≤ σ_i(s) ≤ |A|/(1−γ)` and `0 ≤ π_c ≤ 1`, giving an LP whose value is
//! a lower bound of the cross-learning optimum. [`solve_inner`] is the
//! conservative inner approximation that ties every `μ_i` to a central
//! measure in sup-norm.
//!
//! Policies read off an LP solution generally violate the coupling
//! constraint; [`recover_policies`] projects them (Euclidean, row by row)
//! onto the ε-box around a centre to restore feasibility.

use serde::{Deserialize, Serialize};

use crate::apprenticeship::{add_measure_block, discrepancy, CostBasis, EnvironmentBundle};
use crate::lp::{l1_epigraph, solve_lp, LpProblem, LpStatus, SparseRow};
use crate::mdp::{
    occupation_from_policy, policy_from_occupation, FeasibilityPolytope, OccupationMeasure,
    Policy,
};
use crate::{Error, Result};

/// Slack allowed when certifying `‖π_i − π_c‖∞ ≤ ε`.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CalInstance {
    envs: Vec<EnvironmentBundle>,
    basis: CostBasis,
    epsilon: f64,
}

impl CalInstance {
    /// All environments must share states, actions, discount and initial
    /// distribution.
    pub fn new(envs: Vec<EnvironmentBundle>, basis: CostBasis, epsilon: f64) -> Result<Self> {
        let first = envs.first().ok_or(Error::EmptyInput("cross-learning needs an environment"))?;
        for env in &envs[1..] {
            if !env.mdp.shares_structure_with(&first.mdp) {
                return Err(Error::invalid(format!(
                    "environment `{}` differs from `{}` in states, actions, discount or initial distribution",
                    env.label, first.label
                )));
            }
        }
        if basis.n_pairs() != first.mdp.n_pairs() {
            return Err(Error::DimensionMismatch {
                what: "cost basis rows",
                expected: first.mdp.n_pairs(),
                found: basis.n_pairs(),
            });
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("centrality {epsilon} must be finite and nonnegative")));
        }
        Ok(Self { envs, basis, epsilon })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.envs.clone(), self.basis.clone(), epsilon)
    }

    pub fn envs(&self) -> &[EnvironmentBundle] {
        &self.envs
    }

    pub fn basis(&self) -> &CostBasis {
        &self.basis
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_states(&self) -> usize {
        self.envs[0].mdp.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.envs[0].mdp.n_actions()
    }

    fn initial_dist(&self) -> &[f64] {
        self.envs[0].mdp.initial_dist()
    }

    fn mass_upper_bound(&self) -> f64 {
        self.envs[0].mdp.state_mass_upper_bound()
    }

    /// Objective of the cross-learning problem at the given individual
    /// policies, using exact occupation measures.
    pub fn objective(&self, policies: &[Policy]) -> Result<f64> {
        if policies.len() != self.envs.len() {
            return Err(Error::DimensionMismatch {
                what: "individual policies",
                expected: self.envs.len(),
                found: policies.len(),
            });
        }
        let mut total = 0.0;
        for (env, pi) in self.envs.iter().zip(policies) {
            let mu = occupation_from_policy(&env.mdp, pi)?;
            total += discrepancy(&mu, &env.expert_measure, &self.basis)?;
        }
        Ok(total)
    }
}

/// Variable layout of the McCormick LP. Every block is contiguous and
/// indexed `s * |A| + a` (or `s` for state masses).
///
/// For `N` environments, `|S|` states, `|A|` actions and `n_c` basis
/// columns the LP has
///
/// * variables: `N|S||A|` (μ) + `|S||A|` (π_c) + `N|S||A|` (w) + `N|S|` (σ) + `N n_c` (epigraph),
/// * equalities: `N|S|` (flow) + `|S|` (π_c rows) + `N|S|` (σ definitions),
/// * inequalities: `2N|S||A|` (proximity) + `4N|S||A|` (envelope) + `2N n_c` (epigraph).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McCormickLayout {
    pub n_envs: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub n_features: usize,
    pub mu: Vec<usize>,
    pub pi_c: usize,
    pub w: Vec<usize>,
    pub sigma: Vec<usize>,
    pub epigraph: usize,
}

impl McCormickLayout {
    /// `(variables, equalities, inequalities)` of the McCormick LP.
    pub fn expected_counts(n_envs: usize, n_states: usize, n_actions: usize, n_features: usize) -> (usize, usize, usize) {
        let sa = n_states * n_actions;
        let vars = n_envs * sa + sa + n_envs * sa + n_envs * n_states + n_envs * n_features;
        let eqs = n_envs * n_states + n_states + n_envs * n_states;
        let ineqs = 2 * n_envs * sa + 4 * n_envs * sa + 2 * n_envs * n_features;
        (vars, eqs, ineqs)
    }
}

#[derive(Debug, Clone)]
pub struct McCormickProgram {
    pub lp: LpProblem,
    pub layout: McCormickLayout,
}

/// Builds the McCormick outer relaxation of `instance`.
pub fn build_mccormick(instance: &CalInstance) -> Result<McCormickProgram> {
    let (n_s, n_a) = (instance.n_states(), instance.n_actions());
    let alpha = instance.initial_dist();
    let upper = instance.mass_upper_bound();
    let eps = instance.epsilon();
    if let Some(s) = (0..n_s).find(|&s| !(alpha[s] < upper)) {
        return Err(Error::invalid(format!(
            "degenerate state-mass box at state {s}: {} >= {upper}",
            alpha[s]
        )));
    }

    let mut lp = LpProblem::new();
    let mu: Vec<usize> = instance
        .envs()
        .iter()
        .enumerate()
        .map(|(i, env)| add_measure_block(&mut lp, &env.mdp, &i.to_string()))
        .collect();

    let pi_c = lp.n_vars();
    for s in 0..n_s {
        for a in 0..n_a {
            lp.add_named_var(format!("pic_{s}_{a}"), 0.0, 0.0, 1.0);
        }
        lp.add_eq((0..n_a).map(|a| (pi_c + s * n_a + a, 1.0)).collect(), 1.0);
    }
    let mut w = Vec::with_capacity(mu.len());
    let mut sigma = Vec::with_capacity(mu.len());
    for i in 0..mu.len() {
        w.push(lp.n_vars());
        for s in 0..n_s {
            for a in 0..n_a {
                lp.add_named_var(format!("w_{i}_{s}_{a}"), 0.0, 0.0, f64::INFINITY);
            }
        }
        sigma.push(lp.n_vars());
        for s in 0..n_s {
            lp.add_named_var(format!("sigma_{i}_{s}"), 0.0, alpha[s], upper);
        }
    }

    for i in 0..mu.len() {
        for s in 0..n_s {
            let sig = sigma[i] + s;
            let mut row: SparseRow = vec![(sig, 1.0)];
            row.extend((0..n_a).map(|a| (mu[i] + s * n_a + a, -1.0)));
            lp.add_eq(row, 0.0);
        }
    }
    for i in 0..mu.len() {
        for s in 0..n_s {
            let sig = sigma[i] + s;
            for a in 0..n_a {
                let k = s * n_a + a;
                let (m, wv, p) = (mu[i] + k, w[i] + k, pi_c + k);
                // |μ − w| ≤ ε σ
                lp.add_le(vec![(m, 1.0), (wv, -1.0), (sig, -eps)], 0.0);
                lp.add_le(vec![(wv, 1.0), (m, -1.0), (sig, -eps)], 0.0);
                // w ≥ α π_c
                lp.add_le(vec![(p, alpha[s]), (wv, -1.0)], 0.0);
                // w ≥ σ + U (π_c − 1)
                lp.add_le(vec![(sig, 1.0), (p, upper), (wv, -1.0)], upper);
                // w ≤ σ + α (π_c − 1)
                lp.add_le(vec![(wv, 1.0), (sig, -1.0), (p, -alpha[s])], -alpha[s]);
                // w ≤ U π_c
                lp.add_le(vec![(wv, 1.0), (p, -upper)], 0.0);
            }
        }
    }

    let mut rows = Vec::new();
    let mut offsets = Vec::new();
    for (env, &first) in instance.envs().iter().zip(&mu) {
        rows.extend(instance.basis().feature_rows(first));
        offsets.extend(instance.basis().features(env.expert_measure.as_slice()));
    }
    let (lp, epigraph) = l1_epigraph(&rows, &offsets, lp)?;
    debug_assert_eq!(
        (lp.n_vars(), lp.n_eq(), lp.n_ineq()),
        McCormickLayout::expected_counts(mu.len(), n_s, n_a, instance.basis().n_columns())
    );
    Ok(McCormickProgram {
        lp,
        layout: McCormickLayout {
            n_envs: mu.len(),
            n_states: n_s,
            n_actions: n_a,
            n_features: instance.basis().n_columns(),
            mu,
            pi_c,
            w,
            sigma,
            epigraph,
        },
    })
}

#[derive(Debug, Clone)]
pub struct McCormickSolution {
    pub measures: Vec<OccupationMeasure>,
    pub cross_policy: Policy,
    pub aux_w: Vec<Vec<f64>>,
    pub aux_state_mass: Vec<Vec<f64>>,
    /// Raw `π_c` values as returned by the LP (before renormalisation).
    pub cross_raw: Vec<f64>,
    pub lower_bound: f64,
    pub lp_residual: f64,
}

impl McCormickSolution {
    /// Largest violation of the relaxation's constraints (flow, state-mass
    /// definitions, proximity and envelope cuts) at this solution.
    pub fn constraint_violation(&self, instance: &CalInstance) -> f64 {
        let (n_s, n_a) = (instance.n_states(), instance.n_actions());
        let alpha = instance.initial_dist();
        let upper = instance.mass_upper_bound();
        let eps = instance.epsilon();
        let mut worst: f64 = 0.0;
        for (i, env) in instance.envs().iter().enumerate() {
            let mu = self.measures[i].as_slice();
            worst = worst.max(FeasibilityPolytope::from_mdp(&env.mdp).residual(mu));
            let sigma = &self.aux_state_mass[i];
            let w = &self.aux_w[i];
            for s in 0..n_s {
                worst = worst.max((sigma[s] - self.measures[i].state_mass(s)).abs());
                for a in 0..n_a {
                    let k = s * n_a + a;
                    let p = self.cross_raw[k];
                    let violations = [
                        (mu[k] - w[k]).abs() - eps * sigma[s],
                        alpha[s] * p - w[k],
                        sigma[s] + upper * (p - 1.0) - w[k],
                        w[k] - sigma[s] - alpha[s] * (p - 1.0),
                        w[k] - upper * p,
                        -w[k],
                    ];
                    worst = violations.iter().fold(worst, |acc, v| acc.max(*v));
                }
            }
        }
        worst
    }
}

/// Solves the McCormick relaxation; its value is a lower bound on the
/// cross-learning optimum.
pub fn solve_mccormick(instance: &CalInstance) -> Result<McCormickSolution> {
    let McCormickProgram { lp, layout } = build_mccormick(instance)?;
    let sol = solve_lp(&lp)?.into_optimal("McCormick relaxation")?;
    let (n_s, n_a) = (layout.n_states, layout.n_actions);
    let sa = n_s * n_a;
    let x = &sol.x;
    let measures = layout
        .mu
        .iter()
        .map(|&first| OccupationMeasure::from_solver_output(n_s, n_a, x[first..first + sa].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let cross_raw = x[layout.pi_c..layout.pi_c + sa].to_vec();
    let cross_policy = Policy::from_unnormalized(n_s, n_a, cross_raw.clone())?;
    Ok(McCormickSolution {
        measures,
        cross_policy,
        aux_w: layout.w.iter().map(|&f| x[f..f + sa].to_vec()).collect(),
        aux_state_mass: layout.sigma.iter().map(|&f| x[f..f + n_s].to_vec()).collect(),
        cross_raw,
        lower_bound: sol.objective_value,
        lp_residual: sol.max_residual,
    })
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub measures: Vec<OccupationMeasure>,
    pub central: OccupationMeasure,
    pub value: f64,
    /// Sup-norm radius `ν_min ε / (2|S||A|)` tying each measure to the centre.
    pub radius: f64,
}

impl InnerSolution {
    /// Individual policies and the cross policy read off the measures.
    pub fn policies(&self) -> Result<(Vec<Policy>, Policy)> {
        let individual = self
            .measures
            .iter()
            .map(policy_from_occupation)
            .collect::<Result<Vec<_>>>()?;
        Ok((individual, policy_from_occupation(&self.central)?))
    }
}

#[derive(Debug, Clone)]
pub enum InnerOutcome {
    Solved(InnerSolution),
    /// The ball constraint admits no measures; common for large `|S||A|`.
    Infeasible { radius: f64 },
}

/// Inner approximation: every `μ_i` within sup-distance
/// `ν_min ε / (2|S||A|)` of a central measure whose state masses lie in
/// `[ν_min, |A|/(1−γ)]`, where `ν_min` is the smallest positive `α(s)`.
pub fn solve_inner(instance: &CalInstance) -> Result<InnerOutcome> {
    let (n_s, n_a) = (instance.n_states(), instance.n_actions());
    let sa = n_s * n_a;
    let nu_min = instance
        .initial_dist()
        .iter()
        .copied()
        .filter(|a| *a > 0.0)
        .fold(f64::INFINITY, f64::min);
    let upper = instance.mass_upper_bound();
    let radius = nu_min * instance.epsilon() / (2.0 * sa as f64);

    let mut lp = LpProblem::new();
    let mu: Vec<usize> = instance
        .envs()
        .iter()
        .enumerate()
        .map(|(i, env)| add_measure_block(&mut lp, &env.mdp, &i.to_string()))
        .collect();
    let centre = lp.n_vars();
    for s in 0..n_s {
        for a in 0..n_a {
            lp.add_named_var(format!("muc_{s}_{a}"), 0.0, 0.0, f64::INFINITY);
        }
        let row: SparseRow = (0..n_a).map(|a| (centre + s * n_a + a, 1.0)).collect();
        lp.add_ge(row.clone(), nu_min);
        lp.add_le(row, upper);
    }
    for &first in &mu {
        for k in 0..sa {
            lp.add_le(vec![(first + k, 1.0), (centre + k, -1.0)], radius);
            lp.add_le(vec![(centre + k, 1.0), (first + k, -1.0)], radius);
        }
    }
    let mut rows = Vec::new();
    let mut offsets = Vec::new();
    for (env, &first) in instance.envs().iter().zip(&mu) {
        rows.extend(instance.basis().feature_rows(first));
        offsets.extend(instance.basis().features(env.expert_measure.as_slice()));
    }
    let (lp, _) = l1_epigraph(&rows, &offsets, lp)?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Infeasible => Ok(InnerOutcome::Infeasible { radius }),
        LpStatus::Unbounded => Err(Error::Unbounded("inner approximation".into())),
        LpStatus::Optimal => {
            let x = &sol.x;
            let measures = mu
                .iter()
                .map(|&f| OccupationMeasure::from_solver_output(n_s, n_a, x[f..f + sa].to_vec()))
                .collect::<Result<Vec<_>>>()?;
            let central = OccupationMeasure::from_solver_output(n_s, n_a, x[centre..centre + sa].to_vec())?;
            Ok(InnerOutcome::Solved(InnerSolution {
                measures,
                central,
                value: sol.objective_value,
                radius,
            }))
        }
    }
}

/// Euclidean projection of `v` onto
/// `{x : x ≥ 0, Σx = 1, |x_a − center_a| ≤ ε}`.
///
/// The projection is `x_a = clamp(v_a − τ, lo_a, hi_a)` with
/// `lo_a = max(0, center_a − ε)`, `hi_a = center_a + ε`, and `τ` the root of
/// the nonincreasing map `τ ↦ Σ_a x_a(τ) − 1`, located by bisection and then
/// solved exactly on the identified free set.
pub fn project_box_simplex(v: &[f64], center: &[f64], epsilon: f64) -> Vec<f64> {
    assert_eq!(v.len(), center.len(), "projection dimension mismatch");
    let lo: Vec<f64> = center.iter().map(|c| (c - epsilon).max(0.0)).collect();
    let hi: Vec<f64> = center.iter().map(|c| c + epsilon).collect();
    let in_set = v.iter().zip(lo.iter().zip(&hi)).all(|(x, (l, h))| *x >= *l && *x <= *h)
        && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-15;
    if in_set {
        return v.to_vec();
    }
    let point = |tau: f64| -> Vec<f64> {
        v.iter()
            .zip(lo.iter().zip(&hi))
            .map(|(x, (l, h))| (x - tau).clamp(*l, *h))
            .collect()
    };
    let excess = |tau: f64| point(tau).iter().sum::<f64>() - 1.0;

    let mut left = v.iter().zip(&hi).map(|(x, h)| x - h).fold(f64::INFINITY, f64::min);
    let mut right = v.iter().zip(&lo).map(|(x, l)| x - l).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (left + right);
        if mid <= left || mid >= right {
            break;
        }
        if excess(mid) > 0.0 {
            left = mid;
        } else {
            right = mid;
        }
    }
    let tau = 0.5 * (left + right);
    // exact τ on the free set at the bracketed root
    let mut free_sum = 0.0;
    let mut clamped_sum = 0.0;
    let mut n_free = 0usize;
    for ((x, l), h) in v.iter().zip(&lo).zip(&hi) {
        let y = x - tau;
        if y <= *l {
            clamped_sum += l;
        } else if y >= *h {
            clamped_sum += h;
        } else {
            free_sum += x;
            n_free += 1;
        }
    }
    let tau = if n_free > 0 {
        (free_sum + clamped_sum - 1.0) / n_free as f64
    } else {
        tau
    };
    point(tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionStrategy {
    /// Project every individual policy onto the ε-box around the LP's `π_c`.
    CrossCentered,
    /// Project onto the ε-box around the average individual policy, which
    /// then serves as the cross policy.
    #[default]
    AverageCentered,
}

#[derive(Debug, Clone)]
pub struct CalPolicies {
    pub individual: Vec<Policy>,
    pub cross: Policy,
    pub feasible: bool,
    pub achieved_objective: f64,
}

fn project_policy(policy: &Policy, center: &Policy, epsilon: f64) -> Result<Policy> {
    let probs = (0..policy.n_states())
        .flat_map(|s| project_box_simplex(policy.row(s), center.row(s), epsilon))
        .collect();
    Policy::from_unnormalized(policy.n_states(), policy.n_actions(), probs)
}

/// Turns a McCormick solution into cross-learning feasible policies.
pub fn recover_policies(
    sol: &McCormickSolution,
    instance: &CalInstance,
    strategy: ProjectionStrategy,
) -> Result<CalPolicies> {
    let raw = sol
        .measures
        .iter()
        .map(policy_from_occupation)
        .collect::<Result<Vec<_>>>()?;
    let eps = instance.epsilon();
    let center = match strategy {
        ProjectionStrategy::CrossCentered => sol.cross_policy.clone(),
        ProjectionStrategy::AverageCentered => {
            let n = raw.len() as f64;
            let mut avg = vec![0.0; raw[0].as_slice().len()];
            for pi in &raw {
                avg.iter_mut().zip(pi.as_slice()).for_each(|(a, p)| *a += p / n);
            }
            Policy::from_unnormalized(raw[0].n_states(), raw[0].n_actions(), avg)?
        }
    };
    let individual = raw
        .iter()
        .map(|pi| project_policy(pi, &center, eps))
        .collect::<Result<Vec<_>>>()?;
    let feasible = individual
        .iter()
        .all(|pi| pi.sup_distance(&center) <= eps + FEASIBILITY_SLACK);
    let achieved_objective = instance.objective(&individual)?;
    Ok(CalPolicies {
        individual,
        cross: center,
        feasible,
        achieved_objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_identity_inside() {
        let v = [0.2, 0.3, 0.5];
        assert_eq!(project_box_simplex(&v, &[0.25, 0.25, 0.5], 0.1), v.to_vec());
    }

    #[test]
    fn projection_zero_radius_is_center() {
        let c = [0.1, 0.6, 0.3];
        let x = project_box_simplex(&[1.0, 0.0, 0.0], &c, 0.0);
        for (a, b) in x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_large_radius_is_simplex_projection() {
        // plain simplex projection of (1, 1, 0): (0.5, 0.5, 0)
        let x = project_box_simplex(&[1.0, 1.0, 0.0], &[1.0 / 3.0; 3], 1.0);
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12 && x[2].abs() < 1e-12);
    }

    #[test]
    fn projection_binding_box() {
        // one-hot pulled toward the uniform centre by at most 0.2
        let x = project_box_simplex(&[1.0, 0.0], &[0.5, 0.5], 0.2);
        assert!((x[0] - 0.7).abs() < 1e-12 && (x[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn counts_formula_small_case() {
        // N = 1, |S| = 2, |A| = 2, identity basis: 4 + 4 + 4 + 2 + 4 variables,
        // 2 + 2 + 2 equalities, 8 + 16 + 8 inequalities
        assert_eq!(McCormickLayout::expected_counts(1, 2, 2, 4), (18, 6, 32));
    }
}
