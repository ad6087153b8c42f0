//! Attacker best response and defender cutting-plane master over the
//! partition-tree surrogate.

mod attacker;
mod defender;
pub mod search;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::RefinementMode;

pub use attacker::{attacker_best_response, AttackerResponse};
pub use defender::{solve_defender, solve_defender_with_model, AttackerPlan, AttackerPlanPool, IterationLog, SraOutcome};
pub use search::{enumerate_allocations, AllocationSpace, Deadline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MasterMode {
    /// Plain enumeration; the reference mode.
    Enumerate,
    #[default]
    BranchAndBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Cell-error threshold.
    pub epsilon_cell: f64,
    /// Relative master gap.
    pub epsilon_gap: f64,
    /// Seconds; `None` runs to completion.
    pub time_limit: Option<f64>,
    pub refinement_mode: RefinementMode,
    pub master_mode: MasterMode,
    /// Defender-tree refinements per outer iteration.
    pub refinements_per_iteration: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon_cell: 1e-6,
            epsilon_gap: 1e-6,
            time_limit: Some(60.0),
            refinement_mode: RefinementMode::ExactArgmin,
            master_mode: MasterMode::BranchAndBound,
            refinements_per_iteration: 1,
        }
    }
}

impl SolverConfig {
    pub fn unlimited() -> Self {
        SolverConfig {
            time_limit: None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_cell > 0.0 && self.epsilon_cell.is_finite()) {
            return Err(Error::argument(format!("epsilon_cell must be positive, got {}", self.epsilon_cell)));
        }
        if !(self.epsilon_gap > 0.0 && self.epsilon_gap.is_finite()) {
            return Err(Error::argument(format!("epsilon_gap must be positive, got {}", self.epsilon_gap)));
        }
        if let Some(t) = self.time_limit {
            if !(t >= 0.0) {
                return Err(Error::argument(format!("time_limit must be non-negative, got {t}")));
            }
        }
        if self.refinements_per_iteration == 0 {
            return Err(Error::argument("refinements_per_iteration must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn deadline(&self) -> Deadline {
        Deadline::after_secs(self.time_limit)
    }
}
