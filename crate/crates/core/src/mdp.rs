//! Finite MDPs, stationary policies and discounted occupation measures.
//!
//! States and actions are dense 0-based indices. A state-action pair `(s, a)`
//! lives at flat index `s * n_actions + a` everywhere in this crate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Tolerance on row sums of stochastic tables.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Residual tolerance for exact occupation measures.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// State masses at or below this are treated as zero when extracting a policy.
pub const MIN_STATE_MASS: f64 = 1e-12;

fn check_distribution(what: &str, probs: &[f64]) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::invalid(format!("{what} has invalid entry {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::invalid(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// A finite discounted MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    /// Row `s * n_actions + a` holds the next-state distribution.
    transition: Vec<f64>,
    discount: f64,
    initial_dist: Vec<f64>,
}

impl Mdp {
    /// `transition` is flat, `n_states * n_actions` rows of length `n_states`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        discount: f64,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("an MDP needs at least one state and one action"));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::DimensionMismatch {
                what: "transition table",
                expected: n_states * n_actions * n_states,
                found: transition.len(),
            });
        }
        if initial_dist.len() != n_states {
            return Err(Error::DimensionMismatch {
                what: "initial distribution",
                expected: n_states,
                found: initial_dist.len(),
            });
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::invalid(format!("discount {discount} outside (0, 1)")));
        }
        for (row_idx, row) in transition.chunks(n_states).enumerate() {
            let (s, a) = (row_idx / n_actions, row_idx % n_actions);
            check_distribution(&format!("transition row (state {s}, action {a})"), row)?;
        }
        check_distribution("initial distribution", &initial_dist)?;
        Ok(Self {
            n_states,
            n_actions,
            transition,
            discount,
            initial_dist,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn pair_index(&self, state: usize, action: usize) -> usize {
        state * self.n_actions + action
    }

    /// Next-state distribution of `(state, action)`.
    pub fn next_dist(&self, state: usize, action: usize) -> &[f64] {
        let row = self.pair_index(state, action);
        &self.transition[row * self.n_states..(row + 1) * self.n_states]
    }

    /// Upper bound `|A| / (1 - γ)` on any per-state occupation mass.
    pub fn state_mass_upper_bound(&self) -> f64 {
        self.n_actions as f64 / (1.0 - self.discount)
    }

    /// Same state/action spaces, discount and initial distribution.
    pub fn shares_structure_with(&self, other: &Mdp) -> bool {
        self.n_states == other.n_states
            && self.n_actions == other.n_actions
            && (self.discount - other.discount).abs() <= STOCHASTIC_TOL
            && self
                .initial_dist
                .iter()
                .zip(&other.initial_dist)
                .all(|(a, b)| (a - b).abs() <= STOCHASTIC_TOL)
    }
}

/// A stationary randomized policy, stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("a policy needs at least one state and one action"));
        }
        if probs.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                what: "policy table",
                expected: n_states * n_actions,
                found: probs.len(),
            });
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            check_distribution(&format!("policy row of state {s}"), row)?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Builds a policy from nonnegative rows that are only approximately
    /// normalised (e.g. straight out of an LP), renormalising each row.
    pub fn from_unnormalized(n_states: usize, n_actions: usize, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                what: "policy table",
                expected: n_states * n_actions,
                found: probs.len(),
            });
        }
        for (s, row) in probs.chunks_mut(n_actions).enumerate() {
            row.iter_mut().for_each(|p| *p = p.max(0.0));
            let total: f64 = row.iter().sum();
            if total <= MIN_STATE_MASS {
                return Err(Error::ZeroStateMass { state: s });
            }
            row.iter_mut().for_each(|p| *p /= total);
        }
        Self::new(n_states, n_actions, probs)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self {
            n_states,
            n_actions,
            probs: vec![p; n_states * n_actions],
        }
    }

    /// One-hot rows selecting `actions[s]` in every state.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::invalid(format!("action {a} out of range in state {s}")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Self::new(actions.len(), n_actions, probs)
    }

    /// A policy with every row drawn uniformly from the simplex.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states {
            probs.extend(random_simplex_point(n_actions, rng));
        }
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.n_actions + action]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.n_actions)
    }

    /// Entrywise max-norm distance.
    pub fn sup_distance(&self, other: &Policy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean (Frobenius) distance.
    pub fn l2_distance(&self, other: &Policy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Index of the most likely action in `state`, lowest index on ties.
    pub fn greedy_action(&self, state: usize) -> usize {
        argmax(self.row(state))
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Uniform sample from the probability simplex of dimension `n`.
pub fn random_simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    // normalised exponentials are Dirichlet(1, ..., 1)
    let mut x: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    x
}

/// Discounted state-action visitation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl OccupationMeasure {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                what: "occupation measure",
                expected: n_states * n_actions,
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("occupation measure entry {v} is negative or not finite")));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    /// Like [`OccupationMeasure::new`] but clips small negative noise (as
    /// produced by LP solvers) to zero first.
    pub fn from_solver_output(n_states: usize, n_actions: usize, mut values: Vec<f64>) -> Result<Self> {
        values.iter_mut().for_each(|v| *v = v.max(0.0));
        Self::new(n_states, n_actions, values)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    pub fn state_mass(&self, state: usize) -> f64 {
        self.values[state * self.n_actions..(state + 1) * self.n_actions]
            .iter()
            .sum()
    }

    pub fn state_masses(&self) -> Vec<f64> {
        self.values.chunks(self.n_actions).map(|r| r.iter().sum()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn sup_distance(&self, other: &OccupationMeasure) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// An observed sequence of `(state, action)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }
}

/// The polytope `{ μ ≥ 0 : (B - γP)ᵀ μ = α }` of valid occupation measures.
#[derive(Debug, Clone)]
pub struct FeasibilityPolytope {
    n_states: usize,
    n_pairs: usize,
    /// Dense `n_states x n_pairs`, row-major.
    eq_matrix: Vec<f64>,
    eq_rhs: Vec<f64>,
}

impl FeasibilityPolytope {
    pub fn from_mdp(mdp: &Mdp) -> Self {
        let n_states = mdp.n_states();
        let n_pairs = mdp.n_pairs();
        let gamma = mdp.discount();
        let mut eq_matrix = vec![0.0; n_states * n_pairs];
        for s in 0..n_states {
            for a in 0..mdp.n_actions() {
                let col = mdp.pair_index(s, a);
                // B[(s,a), s] = 1
                eq_matrix[s * n_pairs + col] += 1.0;
                for (next, p) in mdp.next_dist(s, a).iter().enumerate() {
                    eq_matrix[next * n_pairs + col] -= gamma * p;
                }
            }
        }
        Self {
            n_states,
            n_pairs,
            eq_matrix,
            eq_rhs: mdp.initial_dist().to_vec(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_states
    }

    pub fn n_cols(&self) -> usize {
        self.n_pairs
    }

    pub fn rhs(&self) -> &[f64] {
        &self.eq_rhs
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.eq_matrix[state * self.n_pairs..(state + 1) * self.n_pairs]
    }

    /// Nonzero entries of row `state` as `(pair, coefficient)`.
    pub fn sparse_row(&self, state: usize) -> Vec<(usize, f64)> {
        self.row(state)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect()
    }

    /// `‖(B - γP)ᵀ μ - α‖∞` plus the magnitude of any negative entry of `μ`.
    pub fn residual(&self, mu: &[f64]) -> f64 {
        let eq = (0..self.n_states)
            .map(|s| {
                let lhs: f64 = self.row(s).iter().zip(mu).map(|(a, m)| a * m).sum();
                (lhs - self.eq_rhs[s]).abs()
            })
            .fold(0.0, f64::max);
        let neg = mu.iter().map(|m| (-m).max(0.0)).fold(0.0, f64::max);
        eq.max(neg)
    }
}

/// State kernel `P_π(s, s') = Σ_a π(a|s) P(s'|s,a)`, row-major.
pub fn policy_kernel(mdp: &Mdp, policy: &Policy) -> Vec<f64> {
    let n = mdp.n_states();
    let mut kernel = vec![0.0; n * n];
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            for (next, p) in mdp.next_dist(s, a).iter().enumerate() {
                kernel[s * n + next] += pa * p;
            }
        }
    }
    kernel
}

/// Discounted state visitation `d = (I - γ P_πᵀ)⁻¹ α`.
pub fn state_visitation(mdp: &Mdp, policy: &Policy) -> Result<Vec<f64>> {
    check_policy_fits(mdp, policy)?;
    let n = mdp.n_states();
    let gamma = mdp.discount();
    let kernel = policy_kernel(mdp, policy);
    // system matrix is I - γ P_πᵀ, so entry (i, j) = δ_ij - γ P_π(j, i)
    let system = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - gamma * kernel[j * n + i]
    });
    let rhs = DVector::from_column_slice(mdp.initial_dist());
    let d = system
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical {
            context: "occupation linear solve (singular system)".into(),
            iterations: 0,
            residual: f64::INFINITY,
        })?;
    let residual = (&system * &d - &rhs).amax();
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical {
            context: "occupation linear solve".into(),
            iterations: 0,
            residual,
        });
    }
    Ok(d.iter().map(|v| v.max(0.0)).collect())
}

fn check_policy_fits(mdp: &Mdp, policy: &Policy) -> Result<()> {
    if policy.n_states() != mdp.n_states() {
        return Err(Error::DimensionMismatch {
            what: "policy states",
            expected: mdp.n_states(),
            found: policy.n_states(),
        });
    }
    if policy.n_actions() != mdp.n_actions() {
        return Err(Error::DimensionMismatch {
            what: "policy actions",
            expected: mdp.n_actions(),
            found: policy.n_actions(),
        });
    }
    Ok(())
}

/// Exact occupation measure `μ(s, a) = d(s) π(a|s)` of `policy` in `mdp`.
pub fn occupation_from_policy(mdp: &Mdp, policy: &Policy) -> Result<OccupationMeasure> {
    let d = state_visitation(mdp, policy)?;
    let values: Vec<f64> = (0..mdp.n_pairs())
        .map(|idx| d[idx / mdp.n_actions()] * policy.as_slice()[idx])
        .collect();
    let residual = FeasibilityPolytope::from_mdp(mdp).residual(&values);
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical {
            context: "occupation measure outside the feasibility polytope".into(),
            iterations: 0,
            residual,
        });
    }
    OccupationMeasure::new(mdp.n_states(), mdp.n_actions(), values)
}

/// Normalises each state's row of `mu` into an action distribution.
pub fn policy_from_occupation(mu: &OccupationMeasure) -> Result<Policy> {
    Policy::from_unnormalized(mu.n_states(), mu.n_actions(), mu.as_slice().to_vec())
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        acc += p;
        last_positive = i;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the accumulated total
    last_positive
}

/// Rolls out `horizon` steps drawing randomness from `rng`.
pub fn sample_trajectory_with<R: Rng + ?Sized>(
    mdp: &Mdp,
    policy: &Policy,
    horizon: usize,
    rng: &mut R,
) -> Trajectory {
    let mut steps = Vec::with_capacity(horizon);
    let mut state = sample_index(mdp.initial_dist(), rng);
    for _ in 0..horizon {
        let action = sample_index(policy.row(state), rng);
        steps.push((state, action));
        state = sample_index(mdp.next_dist(state, action), rng);
    }
    Trajectory { steps }
}

/// Rolls out one trajectory; a pure function of its arguments.
pub fn sample_trajectory(mdp: &Mdp, policy: &Policy, horizon: usize, seed: u64) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::invalid("trajectory horizon must be at least 1"));
    }
    check_policy_fits(mdp, policy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_trajectory_with(mdp, policy, horizon, &mut rng))
}

/// Average truncated discounted visit counts over `trajectories`.
pub fn empirical_occupation(
    trajectories: &[Trajectory],
    n_states: usize,
    n_actions: usize,
    discount: f64,
) -> Result<OccupationMeasure> {
    if trajectories.is_empty() {
        return Err(Error::EmptyInput("no trajectories for the empirical occupation measure"));
    }
    let mut values = vec![0.0; n_states * n_actions];
    for traj in trajectories {
        let mut weight = 1.0;
        for &(s, a) in &traj.steps {
            if s >= n_states || a >= n_actions {
                return Err(Error::invalid(format!(
                    "trajectory step ({s}, {a}) outside {n_states} states x {n_actions} actions"
                )));
            }
            values[s * n_actions + a] += weight;
            weight *= discount;
        }
    }
    let n = trajectories.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    OccupationMeasure::new(n_states, n_actions, values)
}
