//! Cost bases, the worst-case cost discrepancy and single-environment
//! apprenticeship learning.
//!
//! With a cost set `{Φw : ‖w‖∞ ≤ 1}` the worst-case cost gap between a
//! measure `μ` and the expert measure `μ_E` is `‖Φᵀμ − Φᵀμ_E‖₁`, which turns
//! apprenticeship learning into a linear program over the occupation
//! polytope of the environment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lp::{l1_epigraph, solve_lp, LpProblem, SparseRow};
use crate::mdp::{
    occupation_from_policy, policy_from_occupation, FeasibilityPolytope, Mdp, OccupationMeasure,
    Policy,
};
use crate::{Error, Result};

/// Matrix `Φ` whose columns span the candidate cost functions.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBasis {
    n_pairs: usize,
    columns: Vec<Vec<f64>>,
}

impl CostBasis {
    /// `φ_j = e_j` for every state-action pair.
    pub fn identity(n_pairs: usize) -> Self {
        let columns = (0..n_pairs)
            .map(|j| {
                let mut e = vec![0.0; n_pairs];
                e[j] = 1.0;
                e
            })
            .collect();
        Self { n_pairs, columns }
    }

    /// Every column must have sup-norm at most 1.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let n_pairs = columns
            .first()
            .map(Vec::len)
            .ok_or(Error::EmptyInput("cost basis without columns"))?;
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n_pairs {
                return Err(Error::DimensionMismatch {
                    what: "cost basis column",
                    expected: n_pairs,
                    found: col.len(),
                });
            }
            let norm = col.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if !(norm <= 1.0) {
                return Err(Error::invalid(format!(
                    "cost basis column {j} has sup-norm {norm}, above 1"
                )));
            }
        }
        Ok(Self { n_pairs, columns })
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// `Φᵀ v`
    pub fn features(&self, v: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| col.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Rows of `Φᵀ` as sparse rows over variables starting at `var_offset`.
    pub fn feature_rows(&self, var_offset: usize) -> Vec<SparseRow> {
        self.columns
            .iter()
            .map(|col| {
                col.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| (var_offset + k, *v))
                    .collect()
            })
            .collect()
    }
}

/// One environment together with the expert behaviour observed in it.
#[derive(Debug, Clone)]
pub struct EnvironmentBundle {
    pub mdp: Mdp,
    pub expert_measure: OccupationMeasure,
    pub label: String,
}

impl EnvironmentBundle {
    pub fn new(mdp: Mdp, expert_measure: OccupationMeasure, label: impl Into<String>) -> Result<Self> {
        if expert_measure.n_states() != mdp.n_states() || expert_measure.n_actions() != mdp.n_actions() {
            return Err(Error::DimensionMismatch {
                what: "expert measure",
                expected: mdp.n_pairs(),
                found: expert_measure.as_slice().len(),
            });
        }
        let bundle = Self {
            mdp,
            expert_measure,
            label: label.into(),
        };
        let violations = bundle.state_bound_violations(1e-9);
        if !violations.is_empty() {
            log::warn!(
                "expert measure of `{}` violates the state-mass bounds in {} states (empirical noise?)",
                bundle.label,
                violations.len()
            );
        }
        Ok(bundle)
    }

    /// States whose expert mass lies outside `[α(s), |A|/(1-γ)]` by more than `tol`.
    pub fn state_bound_violations(&self, tol: f64) -> Vec<usize> {
        let upper = self.mdp.state_mass_upper_bound();
        self.expert_measure
            .state_masses()
            .iter()
            .enumerate()
            .filter(|(s, m)| **m < self.mdp.initial_dist()[*s] - tol || **m > upper + tol)
            .map(|(s, _)| s)
            .collect()
    }
}

/// Weights `β` on the probability simplex over environments.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceWeights {
    beta: Vec<f64>,
}

impl PerformanceWeights {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        let total: f64 = beta.iter().sum();
        if beta.is_empty() || beta.iter().any(|b| !(*b >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights {beta:?} are not a probability vector")));
        }
        Ok(Self { beta })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            beta: vec![1.0 / n as f64; n],
        }
    }

    /// All weight on environment `i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut beta = vec![0.0; n];
        beta[i] = 1.0;
        Self { beta }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }
}

/// `‖Φᵀμ − Φᵀμ_E‖₁`, the largest cost gap over the unit cost ball.
pub fn discrepancy(mu: &OccupationMeasure, expert: &OccupationMeasure, basis: &CostBasis) -> Result<f64> {
    for m in [mu, expert] {
        if m.as_slice().len() != basis.n_pairs() {
            return Err(Error::DimensionMismatch {
                what: "measure vs cost basis",
                expected: basis.n_pairs(),
                found: m.as_slice().len(),
            });
        }
    }
    let diff: Vec<f64> = mu
        .as_slice()
        .iter()
        .zip(expert.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    Ok(basis.features(&diff).iter().map(|v| v.abs()).sum())
}

/// `V_β(π) = Σ_i β_i ‖Φᵀμ_i^π − Φᵀμ_{E_i}‖₁`.
pub fn performance(
    beta: &PerformanceWeights,
    policy: &Policy,
    envs: &[EnvironmentBundle],
    basis: &CostBasis,
) -> Result<f64> {
    if beta.as_slice().len() != envs.len() {
        return Err(Error::DimensionMismatch {
            what: "performance weights",
            expected: envs.len(),
            found: beta.as_slice().len(),
        });
    }
    let mut total = 0.0;
    for (b, env) in beta.as_slice().iter().zip(envs) {
        if *b == 0.0 {
            continue;
        }
        let mu = occupation_from_policy(&env.mdp, policy)?;
        total += b * discrepancy(&mu, &env.expert_measure, basis)?;
    }
    Ok(total)
}

/// Adds one nonnegative measure variable per state-action pair together with
/// the flow constraints `(B − γP)ᵀμ = α` of `mdp`. Returns the first index.
pub(crate) fn add_measure_block(lp: &mut LpProblem, mdp: &Mdp, tag: &str) -> usize {
    let first = lp.n_vars();
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            lp.add_named_var(format!("mu_{tag}_{s}_{a}"), 0.0, 0.0, f64::INFINITY);
        }
    }
    let polytope = FeasibilityPolytope::from_mdp(mdp);
    for s in 0..polytope.n_rows() {
        let row = polytope
            .sparse_row(s)
            .into_iter()
            .map(|(k, v)| (first + k, v))
            .collect();
        lp.add_eq(row, polytope.rhs()[s]);
    }
    first
}

/// Result of the single-environment apprenticeship LP.
#[derive(Debug, Clone)]
pub struct DecoupledSolution {
    pub policy: Policy,
    pub measure: OccupationMeasure,
    pub value: f64,
}

/// Minimises `‖Φᵀμ − Φᵀμ_E‖₁` over the occupation polytope of `env`.
pub fn solve_decoupled(env: &EnvironmentBundle, basis: &CostBasis) -> Result<DecoupledSolution> {
    let mdp = &env.mdp;
    if basis.n_pairs() != mdp.n_pairs() {
        return Err(Error::DimensionMismatch {
            what: "cost basis rows",
            expected: mdp.n_pairs(),
            found: basis.n_pairs(),
        });
    }
    let mut lp = LpProblem::new();
    let first = add_measure_block(&mut lp, mdp, "0");
    let target = basis.features(env.expert_measure.as_slice());
    let (lp, _) = l1_epigraph(&basis.feature_rows(first), &target, lp)?;
    let sol = solve_lp(&lp)?.into_optimal("decoupled apprenticeship LP")?;
    let measure = OccupationMeasure::from_solver_output(
        mdp.n_states(),
        mdp.n_actions(),
        sol.x[first..first + mdp.n_pairs()].to_vec(),
    )?;
    let policy = policy_from_occupation(&measure)?;
    Ok(DecoupledSolution {
        policy,
        measure,
        value: sol.objective_value.max(0.0),
    })
}

/// All points of the simplex of dimension `n` with coordinates in `{0, 1/grid, ..., 1}`.
pub fn simplex_grid(n: usize, grid: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, remaining: usize, grid: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() == n - 1 {
            prefix.push(remaining);
            out.push(prefix.iter().map(|k| *k as f64 / grid as f64).collect());
            prefix.pop();
            return;
        }
        for k in 0..=remaining {
            prefix.push(k);
            rec(n, remaining - k, grid, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, grid, grid, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Largest product grid the brute-force oracle accepts.
const MAX_GRID_POLICIES: usize = 5_000_000;

/// Every policy whose rows lie on the `1/grid` simplex lattice.
pub fn grid_policies(n_states: usize, n_actions: usize, grid: usize) -> Result<Vec<Policy>> {
    if n_states * n_actions > 8 || grid == 0 || grid > 21 {
        return Err(Error::InstanceTooLarge {
            pairs: n_states * n_actions,
            grid,
        });
    }
    let rows = simplex_grid(n_actions, grid);
    let count = rows.len().checked_pow(n_states as u32).unwrap_or(usize::MAX);
    if count > MAX_GRID_POLICIES {
        return Err(Error::InstanceTooLarge {
            pairs: n_states * n_actions,
            grid,
        });
    }
    let mut policies = Vec::with_capacity(count);
    let mut idx = vec![0usize; n_states];
    loop {
        let probs = idx.iter().flat_map(|&i| rows[i].iter().copied()).collect();
        policies.push(Policy::from_unnormalized(n_states, n_actions, probs)?);
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == n_states {
                return Ok(policies);
            }
            idx[pos] += 1;
            if idx[pos] < rows.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Grid-search oracle for the centralised problem
/// `min_π Σ_i ‖Φᵀμ_i^π − Φᵀμ_{E_i}‖₁`. Resolution error is `O(1/grid)`.
pub fn solve_centralized_bruteforce(
    envs: &[EnvironmentBundle],
    basis: &CostBasis,
    grid: usize,
) -> Result<(Policy, f64)> {
    let first = envs.first().ok_or(Error::EmptyInput("no environments"))?;
    let (n_states, n_actions) = (first.mdp.n_states(), first.mdp.n_actions());
    let weights = vec![1.0; envs.len()];
    let mut best: Option<(Policy, f64)> = None;
    for policy in grid_policies(n_states, n_actions, grid)? {
        let mut value = 0.0;
        for (w, env) in weights.iter().zip(envs) {
            let mu = occupation_from_policy(&env.mdp, &policy)?;
            value += w * discrepancy(&mu, &env.expert_measure, basis)?;
        }
        if best.as_ref().is_none_or(|(_, v)| value < *v) {
            best = Some((policy, value));
        }
    }
    best.ok_or(Error::EmptyInput("empty policy grid"))
}

/// Sampled lower estimate of the Lipschitz constant of `π ↦ μ^π` in `mdp`
/// (Euclidean norms on both sides), mixing far-apart random pairs with small
/// local perturbations.
pub fn estimate_measure_lipschitz(mdp: &Mdp, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_states, n_actions) = (mdp.n_states(), mdp.n_actions());
    let mut best: f64 = 0.0;
    for k in 0..samples {
        let p1 = Policy::random(n_states, n_actions, &mut rng);
        let p2 = if k % 2 == 0 {
            Policy::random(n_states, n_actions, &mut rng)
        } else {
            let t: f64 = 1e-3 * rng.random::<f64>();
            let other = Policy::random(n_states, n_actions, &mut rng);
            let mix = p1
                .as_slice()
                .iter()
                .zip(other.as_slice())
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect();
            Policy::from_unnormalized(n_states, n_actions, mix)?
        };
        let gap = p1.l2_distance(&p2);
        if gap < 1e-12 {
            continue;
        }
        let m1 = occupation_from_policy(mdp, &p1)?;
        let m2 = occupation_from_policy(mdp, &p2)?;
        let dm = m1
            .as_slice()
            .iter()
            .zip(m2.as_slice())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        best = best.max(dm / gap);
    }
    Ok(best)
}
