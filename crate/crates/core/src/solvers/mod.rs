//! Classical solvers: a simulated-annealing sampler for arbitrary models,
//! an exhaustive minimizer for tiny ones, and exact routing oracles that
//! supply ground truth for the formulations.

mod exhaustive;
mod oracle;
mod sa;
mod scan;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{Assignment, ModelError};

pub use exhaustive::{solve_exhaustive, solve_exhaustive_with_limit, EXHAUSTIVE_LIMIT};
pub use oracle::{solve_tsp_brute, solve_tsp_oracle, solve_vrp_oracle};
pub use sa::{solve_sa, SaParams};
pub use scan::{enumerate_route_sets, feasible_scan, feasible_scan_vrp, SCAN_CITY_LIMIT};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("instance with {got} cities exceeds the {what} limit of {limit}")]
    TooLarge { got: usize, limit: usize, what: &'static str },
    #[error("fleet of {got} vehicles exceeds the oracle limit of {limit}")]
    FleetTooLarge { got: usize, limit: usize },
    #[error("annealing parameters need beta_end > beta_start > 0 and at least one read")]
    BadParams,
    #[error("no feasible encoding exists for this scan")]
    NothingFeasible,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Encode(#[from] crate::decode::EncodeError),
}

/// One sampled assignment with its exact model energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub assignment: Assignment,
    pub energy: f64,
}

/// Samples sorted ascending by energy, with run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub elapsed_s: f64,
    pub params: SaParams,
}

impl SampleSet {
    pub fn best(&self) -> Option<&Sample> {
        self.samples.first()
    }

    /// `{"samples": [{"bits", "energy"}...], "elapsed_s", "params"}`
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "samples": self
                .samples
                .iter()
                .map(|s| serde_json::json!({
                    "bits": s.assignment.to_bitstring(),
                    "energy": s.energy,
                }))
                .collect::<Vec<_>>(),
            "elapsed_s": self.elapsed_s,
            "params": self.params,
        })
    }
}
