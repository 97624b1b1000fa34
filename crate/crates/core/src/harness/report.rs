use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cal::ProjectionStrategy;

pub const REPORT_SCHEMA: &str = "crosslearn-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema: String,
    pub crate_version: String,
    /// sha256 of the canonical JSON form of the resolved config.
    pub config_hash: String,
    pub master_seed: u64,
    pub seed_scheme: String,
    pub discount: f64,
    pub strategy: ProjectionStrategy,
    pub initial_distribution: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertSummary {
    pub world: String,
    pub sarsa_seed: u64,
    pub measure_seed: u64,
    pub evaluation_seed: u64,
    /// Mean steps over the last 100 training episodes.
    pub final_mean_steps: f64,
    pub self_success: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonResult {
    pub epsilon: f64,
    pub lower_bound: f64,
    pub achieved_objective: f64,
    pub sandwich_holds: bool,
    pub feasible: bool,
    /// Row `i < N` is individual policy `i + 1`, the last row the cross policy;
    /// column `j` is world `j + 1`.
    pub success: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    pub worlds: Vec<String>,
    pub evaluation_rollouts: usize,
    pub evaluation_max_steps: usize,
    pub experts: Vec<ExpertSummary>,
    pub results: Vec<EpsilonResult>,
}

impl Report {
    pub fn result_for(&self, epsilon: f64) -> Option<&EpsilonResult> {
        self.results.iter().find(|r| r.epsilon == epsilon)
    }

    /// Fixed-width success table, one block per ε.
    pub fn to_table(&self) -> String {
        let n = self.worlds.len();
        let label_width = 22;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Successful rollouts out of {} (goal within {} steps)",
            self.evaluation_rollouts, self.evaluation_max_steps
        );
        for r in &self.results {
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "epsilon = {}   lower_bound = {:.6}   achieved_objective = {:.6}",
                r.epsilon, r.lower_bound, r.achieved_objective
            );
            let _ = write!(out, "{:<label_width$}", "");
            for w in &self.worlds {
                let _ = write!(out, "{w:>10}");
            }
            let _ = writeln!(out);
            for (i, row) in r.success.iter().enumerate() {
                let label = if i < n {
                    format!("Individual policy {}", i + 1)
                } else {
                    "Cross-learned policy".to_string()
                };
                let _ = write!(out, "{label:<label_width$}");
                for v in row {
                    let _ = write!(out, "{v:>10}");
                }
                let _ = writeln!(out);
            }
        }
        out
    }
}
