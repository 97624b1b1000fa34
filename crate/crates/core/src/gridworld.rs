//! Windy gridworlds, SARSA experts and goal-reaching evaluation.
//!
//! Cells are `(row, col)` with row 0 at the top; state index is
//! `row * cols + col`. Wind blows upward (toward row 0) with a per-column
//! magnitude. A move adds the action offset and the wind of the current
//! column, then clamps each axis to the grid. The goal cell is absorbing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mdp::{
    argmax, empirical_occupation, sample_index, sample_trajectory_with, Mdp, OccupationMeasure,
    Policy,
};
use crate::{Error, Result};

pub const N_ACTIONS: usize = 4;
pub const ACTION_NAMES: [&str; N_ACTIONS] = ["left", "right", "up", "down"];
/// `(row offset, column offset)` per action.
const ACTION_OFFSETS: [(i64, i64); N_ACTIONS] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindyGridworld {
    pub rows: usize,
    pub cols: usize,
    pub wind: Vec<u32>,
    pub goal: (usize, usize),
}

impl WindyGridworld {
    pub fn new(rows: usize, cols: usize, wind: Vec<u32>, goal: (usize, usize)) -> Result<Self> {
        let world = Self { rows, cols, wind, goal };
        world.validate()?;
        Ok(world)
    }

    /// 7x10 world with the given wind vector.
    pub fn standard(wind: Vec<u32>, goal: (usize, usize)) -> Result<Self> {
        Self::new(7, 10, wind, goal)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("gridworld needs at least one row and column"));
        }
        if self.rows * self.cols < 2 {
            return Err(Error::invalid("gridworld needs a non-goal cell"));
        }
        if self.wind.len() != self.cols {
            return Err(Error::DimensionMismatch {
                what: "wind vector",
                expected: self.cols,
                found: self.wind.len(),
            });
        }
        if self.goal.0 >= self.rows || self.goal.1 >= self.cols {
            return Err(Error::invalid(format!(
                "goal {:?} outside {}x{} grid",
                self.goal, self.rows, self.cols
            )));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.rows * self.cols
    }

    pub fn state(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn cell(&self, state: usize) -> (usize, usize) {
        (state / self.cols, state % self.cols)
    }

    pub fn goal_state(&self) -> usize {
        self.state(self.goal.0, self.goal.1)
    }

    /// Deterministic successor of `(row, col)` under `action`, ignoring the
    /// absorbing goal.
    pub fn step_cell(&self, (row, col): (usize, usize), action: usize) -> (usize, usize) {
        let (dr, dc) = ACTION_OFFSETS[action];
        let r = row as i64 + dr - self.wind[col] as i64;
        let c = col as i64 + dc;
        (
            r.clamp(0, self.rows as i64 - 1) as usize,
            c.clamp(0, self.cols as i64 - 1) as usize,
        )
    }

    pub fn next_state(&self, state: usize, action: usize) -> usize {
        if state == self.goal_state() {
            return state;
        }
        let (r, c) = self.step_cell(self.cell(state), action);
        self.state(r, c)
    }

    /// Uniform over every cell except the goal.
    pub fn initial_dist(&self) -> Vec<f64> {
        let n = self.n_states();
        let p = 1.0 / (n - 1) as f64;
        (0..n).map(|s| if s == self.goal_state() { 0.0 } else { p }).collect()
    }

    pub fn to_mdp(&self, discount: f64) -> Result<Mdp> {
        self.validate()?;
        let n = self.n_states();
        let mut transition = vec![0.0; n * N_ACTIONS * n];
        for s in 0..n {
            for a in 0..N_ACTIONS {
                transition[(s * N_ACTIONS + a) * n + self.next_state(s, a)] = 1.0;
            }
        }
        Mdp::new(n, N_ACTIONS, transition, discount, self.initial_dist())
    }
}

/// 7x10 windy gridworld MDP with the given wind and goal.
pub fn make_windy_gridworld(wind: &[u32], goal: (usize, usize), discount: f64) -> Result<Mdp> {
    WindyGridworld::standard(wind.to_vec(), goal)?.to_mdp(discount)
}

/// Goal cell shared by the four benchmark worlds.
pub const STANDARD_GOAL: (usize, usize) = (3, 7);

/// The four benchmark worlds, differing only in their wind vectors.
pub fn paper_worlds() -> Vec<WindyGridworld> {
    [
        [0, 0, 0, 1, 1, 1, 2, 2, 1, 0],
        [1, 1, 0, 0, 0, 2, 0, 0, 1, 0],
        [0, 1, 0, 1, 2, 0, 1, 1, 1, 0],
        [0, 0, 1, 1, 2, 2, 0, 0, 1, 0],
    ]
    .into_iter()
    .map(|wind| WindyGridworld {
        rows: 7,
        cols: 10,
        wind: wind.to_vec(),
        goal: STANDARD_GOAL,
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SarsaConfig {
    pub learning_rate: f64,
    /// Probability of a uniformly random action (ε-greedy).
    pub exploration: f64,
    pub episodes: usize,
    pub max_episode_steps: usize,
    /// Discount used inside SARSA updates (1 = undiscounted episodic task).
    pub discount: f64,
    /// Expert gate: fraction of start states that must reach the goal ...
    pub gate_fraction: f64,
    /// ... within this many greedy steps.
    pub gate_steps: usize,
}

impl Default for SarsaConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            exploration: 0.1,
            episodes: 8000,
            max_episode_steps: 1000,
            discount: 1.0,
            gate_fraction: 0.95,
            gate_steps: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpertArtifacts {
    /// Greedy policy with one-hot rows.
    pub policy: Policy,
    /// Empirical occupation measure, filled in by [`expert_measure`].
    pub measure: Option<OccupationMeasure>,
    /// Return (minus steps taken) of every training episode.
    pub episode_returns: Vec<f64>,
}

fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], exploration: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < exploration {
        return rng.random_range(0..q.len());
    }
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..q.len()).filter(|&a| q[a] == best).collect();
    ties[rng.random_range(0..ties.len())]
}

/// Probability of reaching `goal` within `steps` from each state under `policy`.
pub fn reach_probabilities(mdp: &Mdp, policy: &Policy, goal: usize, steps: usize) -> Vec<f64> {
    let n = mdp.n_states();
    // value[s] = P(hit goal within k steps | s_0 = s), iterated k = 0..steps
    let mut value: Vec<f64> = (0..n).map(|s| if s == goal { 1.0 } else { 0.0 }).collect();
    for _ in 0..steps {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                if s == goal {
                    return 1.0;
                }
                (0..mdp.n_actions())
                    .map(|a| {
                        let pa = policy.prob(s, a);
                        if pa == 0.0 {
                            return 0.0;
                        }
                        pa * mdp.next_dist(s, a).iter().zip(&value).map(|(p, v)| p * v).sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        value = next;
    }
    value
}

/// Tabular SARSA with ε-greedy exploration on an episodic task: reward −1
/// per step until `goal`, episodes start from the initial distribution.
///
/// Returns the greedy policy (lowest action index on ties). The policy must
/// reach the goal with probability above one half within `gate_steps` from
/// at least `gate_fraction` of the start states, otherwise
/// [`Error::QualityGate`] carries the training log.
pub fn train_sarsa(mdp: &Mdp, goal: usize, config: &SarsaConfig, seed: u64) -> Result<ExpertArtifacts> {
    if goal >= mdp.n_states() {
        return Err(Error::invalid(format!("goal state {goal} out of range")));
    }
    let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = vec![0.0; n_s * n_a];
    let mut episode_returns = Vec::with_capacity(config.episodes);
    let alpha = config.learning_rate;
    let gamma = config.discount;
    for _ in 0..config.episodes {
        let mut state = sample_index(mdp.initial_dist(), &mut rng);
        let mut action = epsilon_greedy(&q[state * n_a..(state + 1) * n_a], config.exploration, &mut rng);
        let mut steps = 0usize;
        while state != goal && steps < config.max_episode_steps {
            let next = sample_index(mdp.next_dist(state, action), &mut rng);
            let reward = -1.0;
            steps += 1;
            let target = if next == goal {
                reward
            } else {
                let next_action = epsilon_greedy(&q[next * n_a..(next + 1) * n_a], config.exploration, &mut rng);
                let t = reward + gamma * q[next * n_a + next_action];
                let k = state * n_a + action;
                q[k] += alpha * (t - q[k]);
                state = next;
                action = next_action;
                continue;
            };
            let k = state * n_a + action;
            q[k] += alpha * (target - q[k]);
            state = next;
        }
        episode_returns.push(-(steps as f64));
    }

    let greedy: Vec<usize> = (0..n_s).map(|s| argmax(&q[s * n_a..(s + 1) * n_a])).collect();
    let policy = Policy::deterministic(&greedy, n_a)?;
    let reach = reach_probabilities(mdp, &policy, goal, config.gate_steps);
    let starts: Vec<usize> = (0..n_s).filter(|&s| mdp.initial_dist()[s] > 0.0).collect();
    let reached = starts.iter().filter(|&&s| reach[s] > 0.5).count();
    let required = (config.gate_fraction * starts.len() as f64).ceil() as usize;
    if reached < required {
        return Err(Error::QualityGate {
            reached,
            total: starts.len(),
            required,
            episode_returns,
        });
    }
    Ok(ExpertArtifacts {
        policy,
        measure: None,
        episode_returns,
    })
}

/// Empirical occupation measure of `policy` from `n_traj` rollouts of
/// `horizon` steps, starts drawn from the initial distribution.
pub fn expert_measure(mdp: &Mdp, policy: &Policy, n_traj: usize, horizon: usize, seed: u64) -> Result<OccupationMeasure> {
    if n_traj == 0 || horizon == 0 {
        return Err(Error::invalid("expert measure needs at least one trajectory of one step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajectories: Vec<_> = (0..n_traj)
        .map(|_| sample_trajectory_with(mdp, policy, horizon, &mut rng))
        .collect();
    empirical_occupation(&trajectories, mdp.n_states(), mdp.n_actions(), mdp.discount())
}

/// Number of `n_traj` rollouts, each from a uniformly random non-goal state,
/// that enter `goal` within `max_steps` steps.
pub fn evaluate_success(
    mdp: &Mdp,
    goal: usize,
    policy: &Policy,
    n_traj: usize,
    max_steps: usize,
    seed: u64,
) -> Result<usize> {
    if goal >= mdp.n_states() || mdp.n_states() < 2 {
        return Err(Error::invalid(format!("goal state {goal} invalid for evaluation")));
    }
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(Error::DimensionMismatch {
            what: "evaluated policy",
            expected: mdp.n_pairs(),
            found: policy.as_slice().len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0;
    for _ in 0..n_traj {
        // uniform over the n - 1 non-goal states
        let mut state = rng.random_range(0..mdp.n_states() - 1);
        if state >= goal {
            state += 1;
        }
        for _ in 0..max_steps {
            let action = sample_index(policy.row(state), &mut rng);
            state = sample_index(mdp.next_dist(state, action), &mut rng);
            if state == goal {
                successes += 1;
                break;
            }
        }
    }
    Ok(successes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEFT: usize = 0;
    const RIGHT: usize = 1;
    const UP: usize = 2;

    #[test]
    fn unit_move_without_wind() {
        let w = WindyGridworld::standard(vec![0; 10], STANDARD_GOAL).unwrap();
        assert_eq!(w.step_cell((0, 0), RIGHT), (0, 1));
        assert_eq!(w.step_cell((0, 0), LEFT), (0, 0));
    }

    #[test]
    fn wind_pushes_up_right() {
        let w = WindyGridworld::standard(vec![0, 0, 0, 1, 0, 0, 0, 0, 0, 0], STANDARD_GOAL).unwrap();
        assert_eq!(w.step_cell((5, 3), RIGHT), (4, 4));
    }

    #[test]
    fn top_row_clamps() {
        let w = WindyGridworld::standard(vec![2; 10], STANDARD_GOAL).unwrap();
        assert_eq!(w.step_cell((0, 4), UP), (0, 4));
        assert_eq!(w.step_cell((1, 4), 3), (0, 4));
    }

    #[test]
    fn standard_world_values() {
        let worlds = paper_worlds();
        assert_eq!(worlds.len(), 4);
        assert_eq!(worlds[0].wind[6], 2);
        assert!(worlds.iter().all(|w| w.wind[9] == 0 && w.goal == (3, 7)));
    }

    #[test]
    fn mdp_rows_are_unit_vectors() {
        let mdp = paper_worlds()[0].to_mdp(0.9).unwrap();
        for s in 0..mdp.n_states() {
            for a in 0..N_ACTIONS {
                let row = mdp.next_dist(s, a);
                assert_eq!(row.iter().filter(|p| **p == 1.0).count(), 1);
                assert_eq!(row.iter().sum::<f64>(), 1.0);
            }
        }
        let goal = paper_worlds()[0].goal_state();
        assert_eq!(mdp.initial_dist()[goal], 0.0);
        assert!(mdp.next_dist(goal, RIGHT)[goal] == 1.0);
    }

    #[test]
    fn invalid_wind_length() {
        assert!(matches!(
            make_windy_gridworld(&[0; 9], STANDARD_GOAL, 0.9),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_step_world_learns_down() {
        let world = WindyGridworld::new(2, 1, vec![0], (1, 0)).unwrap();
        let mdp = world.to_mdp(0.9).unwrap();
        let config = SarsaConfig {
            episodes: 200,
            ..SarsaConfig::default()
        };
        let expert = train_sarsa(&mdp, world.goal_state(), &config, 3).unwrap();
        assert_eq!(expert.policy.greedy_action(0), 3);
    }

    #[test]
    fn unreachable_goal_scores_zero() {
        // goal far away in a long corridor; uniform random walk cannot get there in 20 steps
        let world = WindyGridworld::new(1, 40, vec![0; 40], (0, 39)).unwrap();
        let mdp = world.to_mdp(0.9).unwrap();
        let stay = Policy::deterministic(&vec![UP; 40], N_ACTIONS).unwrap();
        assert_eq!(evaluate_success(&mdp, world.goal_state(), &stay, 200, 20, 1).unwrap(), 0);
    }

    #[test]
    fn evaluation_is_seeded() {
        let world = &paper_worlds()[1];
        let mdp = world.to_mdp(0.9).unwrap();
        let pi = Policy::uniform(mdp.n_states(), N_ACTIONS);
        let a = evaluate_success(&mdp, world.goal_state(), &pi, 200, 20, 5).unwrap();
        let b = evaluate_success(&mdp, world.goal_state(), &pi, 200, 20, 5).unwrap();
        assert_eq!(a, b);
    }
}
