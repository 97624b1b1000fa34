use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crosslearn::cal::{recover_policies, solve_mccormick, CalInstance, ProjectionStrategy};
use crosslearn::gridworld::{evaluate_success, paper_worlds, WindyGridworld};
use crosslearn::harness::{run_experiment, validate_config, world_label, ExperimentConfig};
use crosslearn::io::{read_json, write_json, BasisSpec, BundleDoc, PolicyDoc};
use crosslearn::Result;

#[derive(Parser)]
#[command(name = "crosslearn", version, about = "Cross apprenticeship learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    CrossCentered,
    AverageCentered,
}

impl From<Strategy> for ProjectionStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::CrossCentered => ProjectionStrategy::CrossCentered,
            Strategy::AverageCentered => ProjectionStrategy::AverageCentered,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full gridworld experiment.
    Run {
        /// JSON config; defaults to the four benchmark worlds.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the benchmark worlds as JSON.
    Worlds,
    /// Solve one cross-learning instance from bundle files.
    Solve {
        #[arg(long = "bundle", required = true, num_args = 1..)]
        bundles: Vec<PathBuf>,
        #[arg(long)]
        epsilon: f64,
        /// `identity` or a JSON file holding a list of basis columns.
        #[arg(long, default_value = "identity")]
        basis: String,
        #[arg(long, value_enum, default_value = "average-centered")]
        strategy: Strategy,
        /// Where to write the solution; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count goal-reaching rollouts of a policy in a world.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        /// World JSON (rows, cols, wind, goal).
        #[arg(long)]
        world: PathBuf,
        #[arg(long, default_value_t = 0.9)]
        discount: f64,
        #[arg(long, default_value_t = 200)]
        n_traj: usize,
        #[arg(long, default_value_t = 20)]
        max_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut config = match config {
                Some(path) => validate_config(&std::fs::read_to_string(path)?)?,
                None => ExperimentConfig::standard(),
            };
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(out) = out {
                config.output_dir = out.to_string_lossy().into_owned();
            }
            let report = run_experiment(&config)?;
            print!("{}", report.to_table());
            eprintln!("artifacts written to {}", config.output_dir);
        }
        Command::Worlds => {
            let worlds: Vec<_> = paper_worlds()
                .into_iter()
                .enumerate()
                .map(|(i, w)| json!({ "label": world_label(i), "world": w }))
                .collect();
            println!("{}", serde_json::to_string_pretty(&worlds)?);
        }
        Command::Solve {
            bundles,
            epsilon,
            basis,
            strategy,
            out,
        } => {
            let envs = bundles
                .iter()
                .map(|p| read_json::<BundleDoc>(p)?.to_bundle())
                .collect::<Result<Vec<_>>>()?;
            let spec = if basis == "identity" {
                BasisSpec::default()
            } else {
                BasisSpec::Columns(read_json(&PathBuf::from(basis))?)
            };
            let basis = spec.build(envs[0].mdp.n_pairs())?;
            let instance = CalInstance::new(envs, basis, epsilon)?;
            let sol = solve_mccormick(&instance)?;
            let policies = recover_policies(&sol, &instance, strategy.into())?;
            let doc = json!({
                "epsilon": epsilon,
                "lower_bound": sol.lower_bound,
                "achieved_objective": policies.achieved_objective,
                "feasible": policies.feasible,
                "individual": policies.individual.iter().map(PolicyDoc::from_policy).collect::<Vec<_>>(),
                "cross": PolicyDoc::from_policy(&policies.cross),
            });
            match out {
                Some(path) => write_json(&path, &doc)?,
                None => println!("{}", serde_json::to_string_pretty(&doc)?),
            }
        }
        Command::Eval {
            policy,
            world,
            discount,
            n_traj,
            max_steps,
            seed,
        } => {
            let policy = read_json::<PolicyDoc>(&policy)?.to_policy()?;
            let world: WindyGridworld = read_json(&world)?;
            let mdp = world.to_mdp(discount)?;
            let hits = evaluate_success(&mdp, world.goal_state(), &policy, n_traj, max_steps, seed)?;
            println!("{hits}/{n_traj}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
