//! Acceptance checks 1 to 10. Prints one PASS/FAIL line per criterion and
//! exits with a nonzero status when any criterion fails.
//!
//! Run with `cargo test -p crosslearn --test acceptance`.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{projection_by_active_sets, random_mdp, random_positive_dist, toy_envs, CalGridOracle};
use crosslearn::apprenticeship::{discrepancy, solve_decoupled, CostBasis, EnvironmentBundle};
use crosslearn::cal::{project_box_simplex, recover_policies, solve_inner, solve_mccormick, CalInstance, InnerOutcome, ProjectionStrategy};
use crosslearn::gridworld::paper_worlds;
use crosslearn::harness::{prepare_expert, run_experiment, ExperimentConfig};
use crosslearn::mdp::{
    empirical_occupation, occupation_from_policy, policy_from_occupation, random_simplex_point, sample_trajectory_with,
    FeasibilityPolytope, Mdp, Policy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FLOW_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-8;
const CORPUS_BUDGET: Duration = Duration::from_secs(5);
const LEMMA_SLACK: f64 = 1e-9;
const DECOUPLED_ZERO_TOL: f64 = 1e-6;
const BOUND_SLACK: f64 = 1e-7;
const DECOUPLING_TOL: f64 = 1e-6;
const MONOTONE_SLACK: f64 = 1e-7;
const LP_TOL: f64 = 1e-7;
const GRID: usize = 20;
const SANDWICH_BUDGET: Duration = Duration::from_secs(120);
const PROJECTION_TOL: f64 = 1e-8;
const CONSTRAINT_TOL: f64 = 1e-10;
const DIAGONAL_MIN: usize = 160;
const OFF_DIAGONAL_MAX: usize = 60;
const ZERO_EPS_SPREAD: usize = 40;
const PIPELINE_BUDGET: Duration = Duration::from_secs(30 * 60);
const INNER_TOL: f64 = 1e-6;
const EPSILONS: [f64; 4] = [1.0, 0.6, 0.2, 0.0];

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Corpus {
    mdps: Vec<Mdp>,
    policies: Vec<Policy>,
}

fn corpus() -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mdps = Vec::new();
    let mut policies = Vec::new();
    for _ in 0..100 {
        let n_s = rng.random_range(1..=10);
        let n_a = rng.random_range(1..=4);
        let gamma = rng.random_range(0.0..0.99);
        let alpha = random_simplex_point(n_s, &mut rng);
        mdps.push(random_mdp(&mut rng, n_s, n_a, gamma, &alpha));
        policies.push(Policy::random(n_s, n_a, &mut rng));
    }
    Corpus { mdps, policies }
}

fn toy_instance(seed: u64, n_envs: usize, n_s: usize, n_a: usize, epsilon: f64) -> CalInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let envs = toy_envs(&mut rng, n_envs, n_s, n_a, 0.8);
    CalInstance::new(envs, CostBasis::identity(n_s * n_a), epsilon).unwrap()
}

fn criterion_1(c: &Corpus) -> Outcome {
    let start = Instant::now();
    let (mut flow, mut trip): (f64, f64) = (0.0, 0.0);
    for (mdp, pi) in c.mdps.iter().zip(&c.policies) {
        let mu = occupation_from_policy(mdp, pi).map_err(|e| e.to_string())?;
        flow = flow.max(FeasibilityPolytope::from_mdp(mdp).residual(mu.as_slice()));
        let back = policy_from_occupation(&mu).map_err(|e| e.to_string())?;
        // states with zero visitation have no recoverable policy
        for s in 0..mdp.n_states() {
            if mu.state_mass(s) > 1e-9 {
                for a in 0..mdp.n_actions() {
                    trip = trip.max((back.prob(s, a) - pi.prob(s, a)).abs());
                }
            }
        }
    }
    let took = start.elapsed();
    check(
        flow <= FLOW_TOL && trip <= ROUND_TRIP_TOL && took < CORPUS_BUDGET,
        format!("flow residual {flow:.2e}, round trip {trip:.2e}, {took:.2?}"),
    )
}

fn criterion_2(c: &Corpus) -> Outcome {
    let mut worst: f64 = f64::NEG_INFINITY;
    for (mdp, pi) in c.mdps.iter().zip(&c.policies) {
        let mu = occupation_from_policy(mdp, pi).map_err(|e| e.to_string())?;
        let upper = mdp.n_actions() as f64 / (1.0 - mdp.discount());
        for s in 0..mdp.n_states() {
            let m = mu.state_mass(s);
            worst = worst.max(mdp.initial_dist()[s] - m).max(m - upper);
        }
    }
    check(worst <= LEMMA_SLACK, format!("largest bound violation {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut exact_worst: f64 = 0.0;
    let mut dominance_gap: f64 = f64::NEG_INFINITY;
    for _ in 0..20 {
        let n_s = rng.random_range(2..=5);
        let n_a = rng.random_range(2..=3);
        let alpha = random_positive_dist(&mut rng, n_s);
        let mdp = random_mdp(&mut rng, n_s, n_a, 0.85, &alpha);
        let basis = CostBasis::identity(n_s * n_a);
        let expert = Policy::random(n_s, n_a, &mut rng);

        let exact = occupation_from_policy(&mdp, &expert).map_err(|e| e.to_string())?;
        let env = EnvironmentBundle::new(mdp.clone(), exact, "exact").map_err(|e| e.to_string())?;
        exact_worst = exact_worst.max(solve_decoupled(&env, &basis).map_err(|e| e.to_string())?.value);

        let trajs: Vec<_> = (0..50).map(|_| sample_trajectory_with(&mdp, &expert, 60, &mut rng)).collect();
        let empirical = empirical_occupation(&trajs, n_s, n_a, mdp.discount()).map_err(|e| e.to_string())?;
        let env = EnvironmentBundle::new(mdp.clone(), empirical, "empirical").map_err(|e| e.to_string())?;
        let value = solve_decoupled(&env, &basis).map_err(|e| e.to_string())?.value;
        for _ in 0..100 {
            let pi = Policy::random(n_s, n_a, &mut rng);
            let mu = occupation_from_policy(&mdp, &pi).map_err(|e| e.to_string())?;
            let d = discrepancy(&mu, &env.expert_measure, &basis).map_err(|e| e.to_string())?;
            dominance_gap = dominance_gap.max(value - d);
        }
    }
    check(
        exact_worst <= DECOUPLED_ZERO_TOL && dominance_gap <= BOUND_SLACK,
        format!("exact expert value {exact_worst:.2e}, worst value minus random discrepancy {dominance_gap:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cut_worst: f64 = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let alpha = rng.random_range(0.0..0.5);
        let upper = rng.random_range(1.0..50.0);
        let sigma = rng.random_range(alpha..=upper);
        let p: f64 = rng.random_range(0.0..=1.0);
        let w = sigma * p;
        let cuts = [
            alpha * p - w,
            sigma + upper * (p - 1.0) - w,
            w - sigma - alpha * (p - 1.0),
            w - upper * p,
        ];
        cut_worst = cuts.iter().fold(cut_worst, |acc, v| acc.max(*v / upper));
    }
    let mut bound_gap: f64 = f64::NEG_INFINITY;
    let mut n_instances = 0;
    for seed in 0..12u64 {
        let n_envs = 2 + (seed % 2) as usize;
        let n_s = 2 + (seed % 3) as usize;
        let eps = [0.0, 0.1, 0.3, 0.5, 0.8, 1.0][(seed % 6) as usize];
        let instance = toy_instance(100 + seed, n_envs, n_s, 2, eps);
        let lb = solve_mccormick(&instance).map_err(|e| e.to_string())?.lower_bound;
        for _ in 0..1000 {
            let cross = Policy::random(n_s, 2, &mut rng);
            let individual = (0..n_envs)
                .map(|_| {
                    let raw = Policy::random(n_s, 2, &mut rng);
                    let probs = (0..n_s).flat_map(|s| project_box_simplex(raw.row(s), cross.row(s), eps)).collect();
                    Policy::from_unnormalized(n_s, 2, probs)
                })
                .collect::<crosslearn::Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            let value = instance.objective(&individual).map_err(|e| e.to_string())?;
            bound_gap = bound_gap.max(lb - value);
        }
        n_instances += 1;
    }
    // the cuts are evaluated in floating point, so "exactly" means up to rounding
    check(
        cut_worst <= 1e-12 && bound_gap <= BOUND_SLACK,
        format!("worst relative cut violation {cut_worst:.2e}, worst bound minus sampled objective {bound_gap:.2e} over {n_instances} instances"),
    )
}

fn decoupling_error(instance: &CalInstance) -> Result<f64, String> {
    let sol = solve_mccormick(instance).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (env, mu) in instance.envs().iter().zip(&sol.measures) {
        let reached = discrepancy(mu, &env.expert_measure, instance.basis()).map_err(|e| e.to_string())?;
        let optimum = solve_decoupled(env, instance.basis()).map_err(|e| e.to_string())?.value;
        worst = worst.max((reached - optimum).abs());
    }
    Ok(worst)
}

fn criterion_5(grid_instance: &CalInstance) -> Outcome {
    let mut toy_worst: f64 = 0.0;
    for seed in 0..10 {
        let instance = toy_instance(500 + seed, 2 + (seed % 2) as usize, 3, 2, 1.0);
        toy_worst = toy_worst.max(decoupling_error(&instance)?);
    }
    let grid_worst = decoupling_error(&grid_instance.with_epsilon(1.0).map_err(|e| e.to_string())?)?;
    check(
        toy_worst <= DECOUPLING_TOL && grid_worst <= DECOUPLING_TOL,
        format!("toy instances {toy_worst:.2e}, gridworlds {grid_worst:.2e}"),
    )
}

fn bounds_over_epsilon(base: &CalInstance) -> Result<Vec<f64>, String> {
    EPSILONS
        .iter()
        .map(|&eps| {
            let instance = base.with_epsilon(eps).map_err(|e| e.to_string())?;
            Ok(solve_mccormick(&instance).map_err(|e| e.to_string())?.lower_bound)
        })
        .collect()
}

fn criterion_6(grid_instance: &CalInstance) -> Outcome {
    let mut worst: f64 = f64::NEG_INFINITY;
    for seed in 0..20 {
        let base = toy_instance(600 + seed, 2 + (seed % 2) as usize, 2 + (seed % 3) as usize, 2, 1.0);
        let lbs = bounds_over_epsilon(&base)?;
        worst = lbs.windows(2).fold(worst, |acc, w| acc.max(w[0] - w[1]));
    }
    let grid = bounds_over_epsilon(grid_instance)?;
    let grid_worst = grid.windows(2).fold(f64::NEG_INFINITY, |acc, w| acc.max(w[0] - w[1]));
    check(
        worst <= MONOTONE_SLACK && grid_worst <= MONOTONE_SLACK,
        format!(
            "largest increase toy {worst:.2e}, gridworld {grid_worst:.2e} (gridworld bounds {:?})",
            grid.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut worst_lower: f64 = f64::NEG_INFINITY;
    let mut worst_upper: f64 = f64::NEG_INFINITY;
    let mut worst_prop: f64 = f64::NEG_INFINITY;
    for seed in 0..6 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let envs = toy_envs(&mut rng, 2, 2, 2, 0.8);
        let basis = CostBasis::identity(4);
        let oracle = CalGridOracle::new(&envs, &basis, GRID);
        // each V_i may move by `resolution` when a policy snaps to the grid
        let tol = envs.len() as f64 * oracle.resolution() + LP_TOL;
        let decoupled = envs
            .iter()
            .map(|env| solve_decoupled(env, &basis).map(|d| d.value))
            .collect::<crosslearn::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        for eps in EPSILONS {
            let instance = CalInstance::new(envs.clone(), basis.clone(), eps).map_err(|e| e.to_string())?;
            let sol = solve_mccormick(&instance).map_err(|e| e.to_string())?;
            let grid = oracle.solve(eps);
            worst_lower = worst_lower.max(sol.lower_bound - grid.value);
            for strategy in [ProjectionStrategy::CrossCentered, ProjectionStrategy::AverageCentered] {
                let rec = recover_policies(&sol, &instance, strategy).map_err(|e| e.to_string())?;
                worst_upper = worst_upper.max(grid.value - rec.achieved_objective - tol);
            }
            for (i, &k) in grid.individual.iter().enumerate() {
                let v_ind = oracle.values[i][k];
                let v_cross = oracle.values[i][grid.cross];
                worst_prop = worst_prop.max(decoupled[i] - v_ind - LP_TOL).max(v_ind - v_cross - LP_TOL);
            }
        }
    }
    let took = start.elapsed();
    check(
        worst_lower <= LP_TOL && worst_upper <= 0.0 && worst_prop <= 0.0 && took < SANDWICH_BUDGET,
        format!(
            "lower side {worst_lower:.2e}, upper side excess {worst_upper:.2e}, ordering excess {worst_prop:.2e}, {took:.2?}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut err, mut viol): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-0.5..1.5)).collect();
        let center = random_simplex_point(4, &mut rng);
        let eps = rng.random_range(0.0..=1.0);
        let x = project_box_simplex(&v, &center, eps);
        let y = projection_by_active_sets(&v, &center, eps);
        err = x.iter().zip(&y).fold(err, |acc, (a, b)| acc.max((a - b).abs()));
        viol = viol.max((x.iter().sum::<f64>() - 1.0).abs());
        for (xi, ci) in x.iter().zip(&center) {
            let lo = (ci - eps).max(0.0);
            let hi = (ci + eps).min(1.0);
            viol = viol.max(lo - xi).max(xi - hi);
        }
    }
    check(
        err <= PROJECTION_TOL && viol <= CONSTRAINT_TOL,
        format!("oracle gap {err:.2e}, constraint violation {viol:.2e}"),
    )
}

fn criterion_9(out: &Path) -> Outcome {
    let start = Instant::now();
    let mut config = ExperimentConfig::standard();
    config.output_dir = out.to_string_lossy().into_owned();
    let report = run_experiment(&config).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let n = report.worlds.len();
    let at = |eps: f64| report.result_for(eps).ok_or(format!("no result for epsilon {eps}"));

    let one = at(1.0)?;
    let diagonal: Vec<usize> = (0..n).map(|i| one.success[i][i]).collect();
    let off_min = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| one.success[i][j])
        .min()
        .unwrap_or(usize::MAX);
    let a = diagonal.iter().all(|&d| d >= DIAGONAL_MIN) && off_min <= OFF_DIAGONAL_MAX;

    let zero = at(0.0)?;
    let spread = (0..n)
        .map(|j| {
            let col: Vec<usize> = (0..n).map(|i| zero.success[i][j]).collect();
            col.iter().max().unwrap() - col.iter().min().unwrap()
        })
        .max()
        .unwrap_or(0);
    let b = spread <= ZERO_EPS_SPREAD;

    let off_mean = |eps: f64| -> Result<f64, String> {
        let r = at(eps)?;
        let vals: Vec<usize> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| r.success[i][j])
            .collect();
        Ok(vals.iter().sum::<usize>() as f64 / vals.len() as f64)
    };
    let trend = [off_mean(1.0)?, off_mean(0.6)?, off_mean(0.2)?];
    let c = trend.windows(2).all(|w| w[1] >= w[0]);

    check(
        a && b && c && took < PIPELINE_BUDGET,
        format!(
            "(a) {} diagonal {diagonal:?}, lowest off-diagonal {off_min}; (b) {} largest spread at eps 0 {spread}; (c) {} off-diagonal means {:.1}/{:.1}/{:.1}; {took:.2?}",
            pass_word(a),
            pass_word(b),
            pass_word(c),
            trend[0],
            trend[1],
            trend[2]
        ),
    )
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "fails"
    }
}

fn criterion_10(grid_instance: &CalInstance) -> Outcome {
    let instance = grid_instance.with_epsilon(0.2).map_err(|e| e.to_string())?;
    let grid_infeasible = match solve_inner(&instance).map_err(|e| e.to_string())? {
        InnerOutcome::Infeasible { radius } => format!("gridworlds infeasible at radius {radius:.2e}"),
        InnerOutcome::Solved(sol) => return Err(format!("gridworlds unexpectedly solved with value {}", sol.value)),
    };
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        // ε far above 1 makes the ball wide enough to contain any measure
        let single = toy_instance(1000 + seed, 1, 3, 2, 1.0);
        let radius_one = match solve_inner(&single).map_err(|e| e.to_string())? {
            InnerOutcome::Solved(s) => s.radius,
            InnerOutcome::Infeasible { radius } => radius,
        };
        let upper = single.envs()[0].mdp.state_mass_upper_bound();
        let eps = (2.0 * upper / radius_one).ceil();
        let wide = single.with_epsilon(eps).map_err(|e| e.to_string())?;
        let dec = solve_decoupled(&wide.envs()[0], wide.basis()).map_err(|e| e.to_string())?.value;
        match solve_inner(&wide).map_err(|e| e.to_string())? {
            InnerOutcome::Solved(s) => worst = worst.max((s.value - dec).abs()),
            InnerOutcome::Infeasible { .. } => return Err(format!("N=1 instance {seed} infeasible at epsilon {eps}")),
        }
    }
    check(worst <= INNER_TOL, format!("{grid_infeasible}; N=1 gap to decoupled {worst:.2e}"))
}

fn gridworld_instance(cache: &Path) -> Result<CalInstance, String> {
    let config = ExperimentConfig::standard();
    let cache = cache.join("cache");
    let bundles = paper_worlds()
        .iter()
        .enumerate()
        .map(|(j, w)| prepare_expert(w, j, &config, Some(&cache)).map(|e| e.bundle))
        .collect::<crosslearn::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let n_pairs = bundles[0].mdp.n_pairs();
    CalInstance::new(bundles, CostBasis::identity(n_pairs), 1.0).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let out = tempfile::tempdir().expect("temporary directory");
    let corpus = corpus();
    let grid = gridworld_instance(out.path());

    let criteria: Vec<Criterion> = vec![
        ("occupation measure exactness", Box::new(|| criterion_1(&corpus))),
        ("state mass bounds", Box::new(|| criterion_2(&corpus))),
        ("decoupled LP sanity", Box::new(criterion_3)),
        ("McCormick cut soundness", Box::new(criterion_4)),
        ("unit epsilon decoupling", Box::new(|| criterion_5(grid.as_ref().map_err(|e| e.clone())?))),
        ("epsilon monotonicity", Box::new(|| criterion_6(grid.as_ref().map_err(|e| e.clone())?))),
        ("brute-force sandwich", Box::new(criterion_7)),
        ("projection correctness", Box::new(criterion_8)),
        ("gridworld trends", Box::new(|| criterion_9(out.path()))),
        ("inner approximation", Box::new(|| criterion_10(grid.as_ref().map_err(|e| e.clone())?))),
    ];

    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
