//! Independent oracles and instance generators shared by the integration
//! tests. Nothing here calls the solvers under test.

#![allow(dead_code)]

use crosslearn::apprenticeship::{discrepancy, CostBasis, EnvironmentBundle};
use crosslearn::lp::LpProblem;
use crosslearn::mdp::{occupation_from_policy, random_simplex_point, Mdp, Policy};
use rand::Rng;

pub fn random_mdp<R: Rng>(rng: &mut R, n_states: usize, n_actions: usize, discount: f64, alpha: &[f64]) -> Mdp {
    let mut t = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        t.extend(random_simplex_point(n_states, rng));
    }
    Mdp::new(n_states, n_actions, t, discount, alpha.to_vec()).unwrap()
}

/// Strictly positive initial distribution.
pub fn random_positive_dist<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let mut d: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let err: f64 = 1.0 - d.iter().sum::<f64>();
    d[0] += err;
    d
}

/// Environments sharing `α` and `γ`, each with the exact measure of its own
/// random expert policy.
pub fn toy_envs<R: Rng>(rng: &mut R, n_envs: usize, n_states: usize, n_actions: usize, discount: f64) -> Vec<EnvironmentBundle> {
    let alpha = random_positive_dist(rng, n_states);
    (0..n_envs)
        .map(|i| {
            let mdp = random_mdp(rng, n_states, n_actions, discount, &alpha);
            let expert = Policy::random(n_states, n_actions, rng);
            let mu = occupation_from_policy(&mdp, &expert).unwrap();
            EnvironmentBundle::new(mdp, mu, format!("env{i}")).unwrap()
        })
        .collect()
}

/// `d = Σ_t γ^t (P_πᵀ)^t α` by fixed-point iteration, then `μ = d π`.
pub fn occupation_by_series(mdp: &Mdp, policy: &Policy) -> Vec<f64> {
    let n = mdp.n_states();
    let mut d = mdp.initial_dist().to_vec();
    loop {
        let mut next = mdp.initial_dist().to_vec();
        for s in 0..n {
            for a in 0..mdp.n_actions() {
                let w = mdp.discount() * d[s] * policy.prob(s, a);
                for (sp, p) in mdp.next_dist(s, a).iter().enumerate() {
                    next[sp] += w * p;
                }
            }
        }
        let change = next.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        d = next;
        if change < 1e-15 {
            break;
        }
    }
    (0..n)
        .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
        .map(|(s, a)| d[s] * policy.prob(s, a))
        .collect()
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

pub fn rank(rows: &[Vec<f64>]) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())) else {
            break;
        };
        if m[p][c].abs() < 1e-10 {
            continue;
        }
        m.swap(r, p);
        for i in 0..m.len() {
            if i != r {
                let f = m[i][c] / m[r][c];
                for k in c..cols {
                    m[i][k] -= f * m[r][k];
                }
            }
        }
        r += 1;
    }
    r
}

/// Brute-force vertex enumeration for LPs with finite box bounds:
/// every choice of `n` linearly independent active constraints (all
/// equalities included) is solved and checked. Returns the best objective,
/// or `None` when no vertex is feasible.
pub fn vertex_enumeration(lp: &LpProblem) -> Option<f64> {
    let n = lp.n_vars();
    let dense = |row: &[(usize, f64)]| {
        let mut v = vec![0.0; n];
        for &(j, c) in row {
            v[j] += c;
        }
        v
    };
    let mut eqs: Vec<(Vec<f64>, f64)> = Vec::new();
    for (r, b) in lp.eq_rows().iter().map(|r| dense(r)).zip(lp.eq_rhs().iter().copied()) {
        if r.iter().all(|v| *v == 0.0) {
            if b.abs() > 1e-12 {
                return None;
            }
            continue;
        }
        eqs.push((r, b));
    }
    let all_eqs = eqs.clone();
    // keep a maximal linearly independent subset as active constraints
    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
    for (r, b) in eqs {
        let mut trial: Vec<Vec<f64>> = basis.iter().map(|(x, _)| x.clone()).collect();
        trial.push(r.clone());
        if rank(&trial) == trial.len() {
            basis.push((r, b));
        }
    }
    let eqs = basis;
    let mut candidates: Vec<(Vec<f64>, f64)> =
        lp.ineq_rows().iter().map(|r| dense(r)).zip(lp.ineq_rhs().iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        candidates.push((e.clone(), lp.lower_bounds()[j]));
        candidates.push((e, lp.upper_bounds()[j]));
    }
    let need = n.checked_sub(eqs.len())?;
    let feasible = |x: &[f64]| {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        all_eqs.iter().all(|(a, b)| (dot(a) - b).abs() <= 1e-8)
            && lp.ineq_rows().iter().zip(lp.ineq_rhs()).all(|(r, b)| dot(&dense(r)) <= b + 1e-8)
            && (0..n).all(|j| x[j] >= lp.lower_bounds()[j] - 1e-8 && x[j] <= lp.upper_bounds()[j] + 1e-8)
    };
    let mut best: Option<f64> = None;
    let mut pick = Vec::new();
    fn choose(
        start: usize,
        need: usize,
        total: usize,
        pick: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if pick.len() == need {
            f(pick);
            return;
        }
        for k in start..total {
            pick.push(k);
            choose(k + 1, need, total, pick, f);
            pick.pop();
        }
    }
    let mut visit = |chosen: &[usize]| {
        let mut a: Vec<Vec<f64>> = eqs.iter().map(|(r, _)| r.clone()).collect();
        let mut b: Vec<f64> = eqs.iter().map(|(_, v)| *v).collect();
        for &k in chosen {
            a.push(candidates[k].0.clone());
            b.push(candidates[k].1);
        }
        if let Some(x) = solve_dense(a, b) {
            if feasible(&x) {
                let value: f64 = lp.objective().iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.is_none_or(|bv| value < bv) {
                    best = Some(value);
                }
            }
        }
    };
    choose(0, need, candidates.len(), &mut pick, &mut visit);
    best
}

/// Euclidean projection onto `{x in simplex : |x - c| <= ε}` by enumerating
/// every lower/free/upper clamp pattern.
pub fn projection_by_active_sets(v: &[f64], center: &[f64], epsilon: f64) -> Vec<f64> {
    let n = v.len();
    let lo: Vec<f64> = center.iter().map(|c| (c - epsilon).max(0.0)).collect();
    let hi: Vec<f64> = center.iter().map(|c| (c + epsilon).min(1.0)).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut pattern = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            pattern.push(c % 3);
            c /= 3;
        }
        let fixed: f64 = (0..n)
            .map(|i| match pattern[i] {
                0 => lo[i],
                2 => hi[i],
                _ => 0.0,
            })
            .sum();
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 1).collect();
        let x: Vec<f64> = if free.is_empty() {
            (0..n).map(|i| if pattern[i] == 0 { lo[i] } else { hi[i] }).collect()
        } else {
            let tau = (free.iter().map(|&i| v[i]).sum::<f64>() + fixed - 1.0) / free.len() as f64;
            (0..n)
                .map(|i| match pattern[i] {
                    0 => lo[i],
                    2 => hi[i],
                    _ => v[i] - tau,
                })
                .collect()
        };
        let ok = (x.iter().sum::<f64>() - 1.0).abs() <= 1e-12
            && (0..n).all(|i| x[i] >= lo[i] - 1e-12 && x[i] <= hi[i] + 1e-12);
        if !ok {
            continue;
        }
        let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd - 1e-15) {
            best = Some((d, x));
        }
    }
    best.expect("box-simplex intersection is nonempty").1
}

/// Exhaustive grid oracle for two-action cross-learning instances.
pub struct CalGridOracle {
    pub grid: usize,
    pub policies: Vec<Policy>,
    /// `values[i][k]`: discrepancy of policy `k` in environment `i`.
    pub values: Vec<Vec<f64>>,
}

pub struct CalGridOptimum {
    pub value: f64,
    pub cross: usize,
    pub individual: Vec<usize>,
}

impl CalGridOracle {
    pub fn new(envs: &[EnvironmentBundle], basis: &CostBasis, grid: usize) -> Self {
        let policies = crosslearn::apprenticeship::grid_policies(envs[0].mdp.n_states(), envs[0].mdp.n_actions(), grid).unwrap();
        let values = envs
            .iter()
            .map(|env| {
                policies
                    .iter()
                    .map(|pi| {
                        let mu = occupation_from_policy(&env.mdp, pi).unwrap();
                        discrepancy(&mu, &env.expert_measure, basis).unwrap()
                    })
                    .collect()
            })
            .collect();
        Self { grid, policies, values }
    }

    /// `min_{π_c} Σ_i min_{‖π_i − π_c‖∞ ≤ ε} V_i(π_i)` over grid policies.
    pub fn solve(&self, epsilon: f64) -> CalGridOptimum {
        let m = self.policies.len();
        let mut best: Option<CalGridOptimum> = None;
        for c in 0..m {
            let mut total = 0.0;
            let mut picks = Vec::with_capacity(self.values.len());
            for vals in &self.values {
                let (k, v) = (0..m)
                    .filter(|&k| self.policies[k].sup_distance(&self.policies[c]) <= epsilon + 1e-12)
                    .map(|k| (k, vals[k]))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                total += v;
                picks.push(k);
            }
            if best.as_ref().is_none_or(|b| total < b.value) {
                best = Some(CalGridOptimum {
                    value: total,
                    cross: c,
                    individual: picks,
                });
            }
        }
        best.unwrap()
    }

    /// Largest change of any `V_i` between grid policies whose rows each
    /// move by at most one lattice step: a resolution error estimate.
    pub fn resolution(&self) -> f64 {
        let step = 1.0 / self.grid as f64 + 1e-12;
        let m = self.policies.len();
        let mut worst: f64 = 0.0;
        for vals in &self.values {
            for a in 0..m {
                for b in (a + 1)..m {
                    if self.policies[a].sup_distance(&self.policies[b]) <= step {
                        worst = worst.max((vals[a] - vals[b]).abs());
                    }
                }
            }
        }
        worst
    }
}
