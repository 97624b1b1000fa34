//! JSON documents for MDPs, policies, measures, bundles and cost bases.
//!
//! Matrices are arrays of rows. MDP transition rows are ordered by flat
//! pair index `s * n_actions + a`; policy and measure rows are per state.
//! Floats are written with shortest round-trip formatting.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::apprenticeship::{CostBasis, EnvironmentBundle};
use crate::mdp::{Mdp, OccupationMeasure, Policy};
use crate::{Error, Result};

fn check_rows(what: &'static str, rows: &[Vec<f64>], n_rows: usize, width: usize) -> Result<Vec<f64>> {
    if rows.len() != n_rows {
        return Err(Error::DimensionMismatch {
            what,
            expected: n_rows,
            found: rows.len(),
        });
    }
    let mut flat = Vec::with_capacity(n_rows * width);
    for row in rows {
        if row.len() != width {
            return Err(Error::DimensionMismatch {
                what,
                expected: width,
                found: row.len(),
            });
        }
        flat.extend_from_slice(row);
    }
    Ok(flat)
}

fn to_rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    flat.chunks(width).map(<[f64]>::to_vec).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDoc {
    pub n_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    pub initial_dist: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl MdpDoc {
    pub fn from_mdp(mdp: &Mdp) -> Self {
        let transition = (0..mdp.n_states())
            .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
            .map(|(s, a)| mdp.next_dist(s, a).to_vec())
            .collect();
        Self {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            discount: mdp.discount(),
            initial_dist: mdp.initial_dist().to_vec(),
            transition,
        }
    }

    pub fn to_mdp(&self) -> Result<Mdp> {
        let flat = check_rows(
            "transition rows",
            &self.transition,
            self.n_states * self.n_actions,
            self.n_states,
        )?;
        Mdp::new(self.n_states, self.n_actions, flat, self.discount, self.initial_dist.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDoc {
    pub n_states: usize,
    pub n_actions: usize,
    pub probs: Vec<Vec<f64>>,
}

impl PolicyDoc {
    pub fn from_policy(policy: &Policy) -> Self {
        Self {
            n_states: policy.n_states(),
            n_actions: policy.n_actions(),
            probs: to_rows(policy.as_slice(), policy.n_actions()),
        }
    }

    pub fn to_policy(&self) -> Result<Policy> {
        let flat = check_rows("policy rows", &self.probs, self.n_states, self.n_actions)?;
        Policy::new(self.n_states, self.n_actions, flat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDoc {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<Vec<f64>>,
}

impl MeasureDoc {
    pub fn from_measure(mu: &OccupationMeasure) -> Self {
        Self {
            n_states: mu.n_states(),
            n_actions: mu.n_actions(),
            values: to_rows(mu.as_slice(), mu.n_actions()),
        }
    }

    pub fn to_measure(&self) -> Result<OccupationMeasure> {
        let flat = check_rows("measure rows", &self.values, self.n_states, self.n_actions)?;
        OccupationMeasure::new(self.n_states, self.n_actions, flat)
    }
}

/// An environment plus its expert measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleDoc {
    pub label: String,
    pub mdp: MdpDoc,
    pub expert_measure: MeasureDoc,
}

impl BundleDoc {
    pub fn from_bundle(env: &EnvironmentBundle) -> Self {
        Self {
            label: env.label.clone(),
            mdp: MdpDoc::from_mdp(&env.mdp),
            expert_measure: MeasureDoc::from_measure(&env.expert_measure),
        }
    }

    pub fn to_bundle(&self) -> Result<EnvironmentBundle> {
        EnvironmentBundle::new(self.mdp.to_mdp()?, self.expert_measure.to_measure()?, self.label.clone())
    }
}

/// `"identity"` or an explicit list of columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisSpec {
    Named(BasisName),
    Columns(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisName {
    Identity,
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec::Named(BasisName::Identity)
    }
}

impl BasisSpec {
    pub fn build(&self, n_pairs: usize) -> Result<CostBasis> {
        match self {
            BasisSpec::Named(BasisName::Identity) => Ok(CostBasis::identity(n_pairs)),
            BasisSpec::Columns(cols) => {
                let basis = CostBasis::from_columns(cols.clone())?;
                if basis.n_pairs() != n_pairs {
                    return Err(Error::DimensionMismatch {
                        what: "cost basis rows",
                        expected: n_pairs,
                        found: basis.n_pairs(),
                    });
                }
                Ok(basis)
            }
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
