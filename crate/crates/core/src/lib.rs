//! Exact solvers for tri-level defender-attacker-operator interdiction of
//! stochastic max-flow networks with decision-dependent arc failures.

pub mod def_benchmark;
pub mod error;
pub mod flow;
pub mod instance;
pub mod masters;
pub mod oracle;
pub mod partition;
pub mod prob;
pub mod report;

pub use def_benchmark::{def_attacker_best_response, def_expected_value, def_solve, ScenarioSet};
pub use error::{Error, Result};
pub use flow::{AvailabilityVector, CutCertificate};
pub use instance::{generate_grid, random_network, Allocation, Arc, ArcId, GridSpec, NetworkInstance, NodeId, Role};
pub use masters::{attacker_best_response, enumerate_allocations, solve_defender, MasterMode, SolverConfig};
pub use partition::{BoundMode, Cell, CellId, PartitionTree, RefinementMode};
pub use prob::StateProbabilityModel;
pub use report::{Method, Report, Status};
