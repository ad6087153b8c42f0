use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::instance::{Allocation, ArcId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sra,
    Def,
    Oracle,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Sra => "sra",
            Method::Def => "def",
            Method::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    TimeLimit,
}

/// Solver-neutral work counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub max_flow_solves: u64,
    pub penalty_solves: u64,
    pub flow_solves: u64,
    /// Scenario terms summed (DEF, oracle) or leaf cells evaluated (SRA).
    pub scenarios_touched: u64,
    /// Allocations fully evaluated by the master and attacker searches.
    pub candidates_evaluated: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: Method,
    pub status: Status,
    /// Best proven lower bound, attained by `x`.
    pub objective: Option<f64>,
    pub ub: Option<f64>,
    pub lb: Option<f64>,
    pub gap: Option<f64>,
    /// Defender-tree refinements.
    pub refinements: usize,
    pub attacker_refinements: usize,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub x: BTreeMap<ArcId, u8>,
    pub v_pool: Vec<BTreeMap<ArcId, u8>>,
    pub counters: Counters,
}

impl Report {
    pub fn is_solved(&self) -> bool {
        self.status == Status::Solved
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `(ub - lb) / max(|lb|, 1)`, or `None` while either bound is missing.
pub fn relative_gap(ub: f64, lb: f64) -> Option<f64> {
    if ub.is_finite() && lb.is_finite() {
        Some(((ub - lb) / lb.abs().max(1.0)).max(0.0))
    } else {
        None
    }
}

pub(crate) fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub(crate) fn pool_maps(pool: &[Allocation]) -> Vec<BTreeMap<ArcId, u8>> {
    pool.iter().map(Allocation::to_map).collect()
}
