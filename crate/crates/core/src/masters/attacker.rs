use std::cell::Cell as Counter;

use crate::error::Result;
use crate::instance::{Allocation, NetworkInstance, Role};
use crate::partition::{CellId, Evaluator, PartitionTree};
use crate::prob::{cell_mean_into, StateProbabilityModel};

use super::search::{branch_and_bound_min, enumerate_min, AllocationSpace, Deadline, Partial, SearchOutcome};
use super::{MasterMode, SolverConfig};

#[derive(Debug, Clone)]
pub struct AttackerResponse {
    pub v: Allocation,
    /// Surrogate optimum: a lower bound on the attacker's true best response.
    pub value: f64,
    /// Mean-value tree bound at `v`.
    pub upper: f64,
    /// Largest leaf error at `v` on exit.
    pub max_error: f64,
    pub refinements: usize,
    pub candidates: u64,
    pub cells_evaluated: u64,
    /// The surrogate search finished, so `value` is a valid bound.
    pub complete: bool,
}

/// Best response of the attacker against `x`, refining `tree` until every
/// leaf error at the chosen plan is at most `epsilon_cell`.
pub fn attacker_best_response(
    instance: &NetworkInstance,
    model: &StateProbabilityModel,
    x: &Allocation,
    tree: &mut PartitionTree,
    config: &SolverConfig,
) -> Result<AttackerResponse> {
    config.validate()?;
    x.check(instance)?;
    let ev = Evaluator::new(instance, model);
    best_response(&ev, x.levels(), tree, config, config.deadline())
}

pub(crate) fn best_response(
    ev: &Evaluator<'_>,
    x: &[u8],
    tree: &mut PartitionTree,
    config: &SolverConfig,
    deadline: Deadline,
) -> Result<AttackerResponse> {
    let space = AllocationSpace::new(ev.instance, Role::Attacker);
    let mut refinements = 0;
    let mut candidates = 0;
    let cells = Counter::new(0u64);
    loop {
        let outcome = surrogate_search(ev, x, tree, &space, config.master_mode, deadline, &cells);
        candidates += outcome.work;
        let v = outcome.levels.clone();
        let mut response = AttackerResponse {
            v: Allocation::from_levels(Role::Attacker, v.clone()),
            value: outcome.value,
            upper: f64::NAN,
            max_error: f64::NAN,
            refinements,
            candidates,
            cells_evaluated: cells.get(),
            complete: outcome.complete,
        };
        if !outcome.complete {
            return Ok(response);
        }
        let (leaf, err) = ev.max_error_leaf(x, &v, tree);
        response.max_error = err;
        if err <= config.epsilon_cell || deadline.expired() {
            response.upper = ev.tree_bound(x, &v, tree, crate::partition::BoundMode::Upper);
            return Ok(response);
        }
        let arc = ev.select_refinement_arc(x, &v, tree.cell(leaf), config.refinement_mode)?;
        tree.refine(ev.instance, leaf, arc)?;
        refinements += 1;
    }
}

fn surrogate_search(
    ev: &Evaluator<'_>,
    x: &[u8],
    tree: &PartitionTree,
    space: &AllocationSpace,
    mode: MasterMode,
    deadline: Deadline,
    cells: &Counter<u64>,
) -> SearchOutcome {
    let leaves: Vec<CellId> = tree.leaves();
    let m = ev.instance.arc_count();
    let mut xi = vec![1.0; m];
    let mut penalty = vec![0.0; m];
    let mut eval = |v: &[u8], best: f64| -> f64 {
        let mut sum = 0.0;
        for &id in &leaves {
            let cell = tree.cell(id);
            let p = ev.cell_prob(x, v, cell);
            if p == 0.0 {
                continue;
            }
            cells.set(cells.get() + 1);
            cell_mean_into(ev.model, ev.instance, x, v, cell, &mut xi);
            for k in 0..m {
                penalty[k] = 1.0 - xi[k];
            }
            sum += p * ev.net.penalty_flow(&penalty).value;
            if sum >= best - super::search::TIE_TOL {
                return sum;
            }
        }
        sum
    };
    match mode {
        MasterMode::Enumerate => enumerate_min(space, deadline, eval),
        MasterMode::BranchAndBound => {
            let mut bound = |p: &Partial<'_>| relaxed_theta(ev, x, tree, tree.root(), p);
            branch_and_bound_min(space, deadline, &mut bound, &mut eval)
        }
    }
}

/// Attacker levels still possible for `arc` under a partial allocation.
fn options(p: &Partial<'_>, arc: usize) -> std::ops::RangeInclusive<u8> {
    if p.is_decided(arc) {
        p.levels[arc]..=p.levels[arc]
    } else {
        0..=p.open_max()
    }
}

/// Lower bound on the surrogate over every completion of `p`: leaves take
/// the smallest attainable survival on open arcs (the penalty recourse is
/// nondecreasing in availability) and open split arcs take the minimising
/// level independently at each node.
fn relaxed_theta(ev: &Evaluator<'_>, x: &[u8], tree: &PartitionTree, node: CellId, p: &Partial<'_>) -> f64 {
    let cell = tree.cell(node);
    if cell.is_leaf() {
        let penalty: Vec<f64> = ev
            .instance
            .arcs
            .iter()
            .map(|a| {
                if !a.failable {
                    0.0
                } else if let Some(&s) = cell.fixed.get(&a.id) {
                    if s {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    let lo = options(p, a.id)
                        .map(|l| ev.model.survival(a.id, x[a.id], l))
                        .fold(f64::INFINITY, f64::min);
                    1.0 - lo
                }
            })
            .collect();
        return ev.net.penalty_flow(&penalty).value;
    }
    let child_vals: Vec<(bool, f64)> = cell
        .children
        .iter()
        .map(|&ch| {
            let (_, s) = tree.cell(ch).entry.expect("child has an entry fixing");
            (s, relaxed_theta(ev, x, tree, ch, p))
        })
        .collect();
    let (k, _) = tree.cell(cell.children[0]).entry.expect("child has an entry fixing");
    options(p, k)
        .map(|l| {
            child_vals
                .iter()
                .map(|&(s, t)| ev.model.prob_of(k, s, x[k], l) * t)
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}
