use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::report::{EpsilonResult, ExpertSummary, Provenance, Report, REPORT_SCHEMA};
use crate::apprenticeship::EnvironmentBundle;
use crate::cal::{recover_policies, solve_mccormick, CalInstance, CalPolicies, McCormickSolution};
use crate::gridworld::{evaluate_success, expert_measure, train_sarsa, WindyGridworld};
use crate::io::{read_json, write_json, BundleDoc, MeasureDoc, PolicyDoc};
use crate::mdp::{Mdp, Policy};
use crate::seeds::{derive_seed, SCHEME};
use crate::{Error, Result};

/// Slack allowed when checking `lower_bound <= achieved_objective`.
pub const SANDWICH_SLACK: f64 = 1e-7;

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut canonical = config.clone();
    canonical.output_dir.clear();
    sha256_hex(serde_json::to_string(&canonical).expect("config serializes").as_bytes())
}

pub fn world_label(index: usize) -> String {
    format!("world{}", index + 1)
}

/// SARSA attempts per world before the quality gate failure is reported.
pub const SARSA_ATTEMPTS: u64 = 5;

/// Sub-seed of SARSA attempt `attempt` for world `index`.
pub fn sarsa_seed(master: u64, index: usize, attempt: u64) -> u64 {
    if attempt == 0 {
        derive_seed(master, "sarsa", index as u64)
    } else {
        derive_seed(master, &format!("sarsa-retry-{attempt}"), index as u64)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedExpert {
    sarsa_seed: u64,
    policy: PolicyDoc,
    measure: MeasureDoc,
    episode_returns: Vec<f64>,
}

/// Expert policy, empirical measure and training log for one world.
#[derive(Debug, Clone)]
pub struct WorldExpert {
    pub world: WindyGridworld,
    pub mdp: Mdp,
    pub policy: Policy,
    pub bundle: EnvironmentBundle,
    pub episode_returns: Vec<f64>,
    /// Seed of the SARSA run that passed the quality gate.
    pub sarsa_seed: u64,
}

fn expert_cache_key(world: &WindyGridworld, config: &ExperimentConfig, base_seed: u64, measure_seed: u64) -> String {
    let key = serde_json::json!({
        "world": world,
        "discount": config.discount,
        "expert": config.expert,
        "sarsa_seed": base_seed,
        "measure_seed": measure_seed,
    });
    sha256_hex(key.to_string().as_bytes())
}

/// Trains (or loads from `cache_dir`) the expert of world `index`.
pub fn prepare_expert(
    world: &WindyGridworld,
    index: usize,
    config: &ExperimentConfig,
    cache_dir: Option<&Path>,
) -> Result<WorldExpert> {
    let mdp = world.to_mdp(config.discount)?;
    let base_seed = sarsa_seed(config.seed, index, 0);
    let measure_seed = derive_seed(config.seed, "expert", index as u64);
    let cache_path = cache_dir.map(|dir| {
        dir.join(format!(
            "expert-{}.json",
            expert_cache_key(world, config, base_seed, measure_seed)
        ))
    });
    let cached: Option<CachedExpert> = cache_path
        .as_ref()
        .filter(|p| p.exists())
        .and_then(|p| match read_json(p) {
            Ok(c) => Some(c),
            Err(e) => {
                log::warn!("ignoring unreadable expert cache {}: {e}", p.display());
                None
            }
        });
    let (policy, measure, episode_returns, used_seed) = match cached {
        Some(c) => {
            log::info!("{}: expert loaded from cache", world_label(index));
            (c.policy.to_policy()?, c.measure.to_measure()?, c.episode_returns, c.sarsa_seed)
        }
        None => {
            let mut attempt = 0;
            let (expert, used_seed) = loop {
                let seed = sarsa_seed(config.seed, index, attempt);
                match train_sarsa(&mdp, world.goal_state(), &config.expert.sarsa, seed) {
                    Ok(expert) => break (expert, seed),
                    Err(Error::QualityGate { reached, total, .. }) if attempt + 1 < SARSA_ATTEMPTS => {
                        log::warn!(
                            "{}: SARSA seed {seed} failed the quality gate ({reached}/{total}), retrying",
                            world_label(index)
                        );
                        attempt += 1;
                    }
                    Err(e) => return Err(e),
                }
            };
            let measure = expert_measure(&mdp, &expert.policy, config.expert.n_traj, config.expert.horizon, measure_seed)?;
            if let Some(path) = &cache_path {
                write_json(
                    path,
                    &CachedExpert {
                        sarsa_seed: used_seed,
                        policy: PolicyDoc::from_policy(&expert.policy),
                        measure: MeasureDoc::from_measure(&measure),
                        episode_returns: expert.episode_returns.clone(),
                    },
                )?;
            }
            (expert.policy, measure, expert.episode_returns, used_seed)
        }
    };
    let bundle = EnvironmentBundle::new(mdp.clone(), measure, world_label(index))?;
    Ok(WorldExpert {
        world: world.clone(),
        mdp,
        policy,
        bundle,
        episode_returns,
        sarsa_seed: used_seed,
    })
}

/// Success counts of `policies` (rows) in every world (columns).
pub fn success_matrix(experts: &[WorldExpert], policies: &[&Policy], config: &ExperimentConfig) -> Result<Vec<Vec<usize>>> {
    policies
        .par_iter()
        .map(|pi| {
            experts
                .iter()
                .enumerate()
                .map(|(j, e)| {
                    evaluate_success(
                        &e.mdp,
                        e.world.goal_state(),
                        pi,
                        config.evaluation.n_traj,
                        config.evaluation.max_steps,
                        derive_seed(config.seed, "eval", j as u64),
                    )
                })
                .collect()
        })
        .collect()
}

fn epsilon_dir(out: &Path, epsilon: f64) -> PathBuf {
    out.join(format!("eps_{epsilon}"))
}

#[derive(Serialize)]
struct SolutionDump<'a> {
    epsilon: f64,
    lower_bound: f64,
    achieved_objective: f64,
    lp_residual: f64,
    feasible: bool,
    individual: Vec<PolicyDoc>,
    cross: PolicyDoc,
    relaxation_cross: PolicyDoc,
    worlds: &'a [String],
}

fn solve_epsilon(
    base: &CalInstance,
    epsilon: f64,
    config: &ExperimentConfig,
) -> Result<(McCormickSolution, CalPolicies)> {
    let instance = base.with_epsilon(epsilon)?;
    let sol = solve_mccormick(&instance)?;
    let policies = recover_policies(&sol, &instance, config.strategy)?;
    Ok((sol, policies))
}

/// Runs the full pipeline and writes every artifact below
/// `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.check()?;
    let started = Instant::now();
    let out = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&out)?;
    let cache = out.join("cache");
    let worlds = config.worlds.resolve();
    let labels: Vec<String> = (0..worlds.len()).map(world_label).collect();

    let experts = worlds
        .par_iter()
        .enumerate()
        .map(|(j, w)| prepare_expert(w, j, config, Some(&cache)).map_err(|e| e.in_stage(format!("expert {}", world_label(j)))))
        .collect::<Result<Vec<_>>>()?;
    for (j, e) in experts.iter().enumerate() {
        write_json(&out.join("bundles").join(format!("{}.json", labels[j])), &BundleDoc::from_bundle(&e.bundle))?;
        write_json(&out.join("experts").join(format!("{}.json", labels[j])), &PolicyDoc::from_policy(&e.policy))?;
    }

    let expert_policies: Vec<&Policy> = experts.iter().map(|e| &e.policy).collect();
    let expert_success = success_matrix(&experts, &expert_policies, config).map_err(|e| e.in_stage("expert evaluation"))?;
    let expert_summaries = experts
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let tail = &e.episode_returns[e.episode_returns.len().saturating_sub(100)..];
            ExpertSummary {
                world: labels[j].clone(),
                sarsa_seed: e.sarsa_seed,
                measure_seed: derive_seed(config.seed, "expert", j as u64),
                evaluation_seed: derive_seed(config.seed, "eval", j as u64),
                final_mean_steps: -tail.iter().sum::<f64>() / tail.len().max(1) as f64,
                self_success: expert_success[j][j],
            }
        })
        .collect();

    let basis = config.cost_basis.build(experts[0].mdp.n_pairs())?;
    let base = CalInstance::new(experts.iter().map(|e| e.bundle.clone()).collect(), basis, 1.0)?;
    let solved = config
        .epsilon_values
        .par_iter()
        .map(|&eps| solve_epsilon(&base, eps, config).map_err(|e| e.in_stage(format!("solve epsilon={eps}"))))
        .collect::<Result<Vec<_>>>()?;

    let mut results = Vec::new();
    for (&eps, (sol, policies)) in config.epsilon_values.iter().zip(&solved) {
        let sandwich_holds = sol.lower_bound <= policies.achieved_objective + SANDWICH_SLACK;
        log::info!(
            "epsilon {eps}: lower_bound {:.6} achieved_objective {:.6} sandwich {}",
            sol.lower_bound,
            policies.achieved_objective,
            if sandwich_holds { "ok" } else { "VIOLATED" }
        );
        let dir = epsilon_dir(&out, eps);
        write_json(
            &dir.join("solution.json"),
            &SolutionDump {
                epsilon: eps,
                lower_bound: sol.lower_bound,
                achieved_objective: policies.achieved_objective,
                lp_residual: sol.lp_residual,
                feasible: policies.feasible,
                individual: policies.individual.iter().map(PolicyDoc::from_policy).collect(),
                cross: PolicyDoc::from_policy(&policies.cross),
                relaxation_cross: PolicyDoc::from_policy(&sol.cross_policy),
                worlds: &labels,
            },
        )?;
        let mut evaluated: Vec<&Policy> = policies.individual.iter().collect();
        evaluated.push(&policies.cross);
        let success = success_matrix(&experts, &evaluated, config).map_err(|e| e.in_stage(format!("evaluate epsilon={eps}")))?;
        results.push(EpsilonResult {
            epsilon: eps,
            lower_bound: sol.lower_bound,
            achieved_objective: policies.achieved_objective,
            sandwich_holds,
            feasible: policies.feasible,
            success,
        });
    }

    let report = Report {
        provenance: Provenance {
            schema: REPORT_SCHEMA.into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash(config),
            master_seed: config.seed,
            seed_scheme: SCHEME.into(),
            discount: config.discount,
            strategy: config.strategy,
            initial_distribution: "uniform over non-goal cells".into(),
        },
        worlds: labels,
        evaluation_rollouts: config.evaluation.n_traj,
        evaluation_max_steps: config.evaluation.max_steps,
        experts: expert_summaries,
        results,
    };
    write_json(&out.join("report.json"), &report)?;
    std::fs::write(out.join("report.txt"), report.to_table())?;
    write_json(
        &out.join("run_info.json"),
        &serde_json::json!({
            "wall_clock_seconds": started.elapsed().as_secs_f64(),
            "threads": rayon::current_num_threads(),
            "config_hash": report.provenance.config_hash,
        }),
    )?;
    Ok(report)
}
