use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Instant;

use crate::error::Result;
use crate::flow::CutCertificate;
use crate::instance::{Allocation, ArcId, NetworkInstance, Role};
use crate::partition::{CellId, Evaluator, PartitionTree};
use crate::prob::StateProbabilityModel;
use crate::report::{finite, pool_maps, relative_gap, Counters, Method, Report, Status};

use super::attacker::best_response;
use super::search::{branch_and_bound_min, enumerate_min, AllocationSpace, Deadline, Partial, SearchOutcome, TIE_TOL};
use super::{MasterMode, SolverConfig};

/// One stored attack plan with the min-cut duals of every defender leaf.
#[derive(Debug, Clone)]
pub struct AttackerPlan {
    pub v: Allocation,
    pub certificates: BTreeMap<CellId, CutCertificate>,
    /// `(arc, c_k * beta_k)` for the arcs with a nonzero dual, per leaf.
    weights: BTreeMap<CellId, Vec<(ArcId, f64)>>,
    /// Failable arcs whose survival depends on the defender level under `v`.
    sensitive: Vec<ArcId>,
    cache: HashMap<Vec<u8>, f64>,
}

#[derive(Debug, Clone, Default)]
pub struct AttackerPlanPool {
    pub plans: Vec<AttackerPlan>,
}

impl AttackerPlan {
    fn new(ev: &Evaluator<'_>, v: Allocation) -> Self {
        let lmax = ev.instance.defender_levels as u8;
        let sensitive = ev
            .instance
            .failable_arcs()
            .into_iter()
            .filter(|&k| {
                let s0 = ev.model.survival(k, 0, v.level(k));
                (1..=lmax).any(|l| ev.model.survival(k, l, v.level(k)) != s0)
            })
            .collect();
        AttackerPlan {
            v,
            certificates: BTreeMap::new(),
            weights: BTreeMap::new(),
            sensitive,
            cache: HashMap::new(),
        }
    }

    /// Solves the mean-value max flow of `leaf` at `(x, v)` and stores its cut.
    fn attach(&mut self, ev: &Evaluator<'_>, tree: &PartitionTree, x: &[u8], leaf: CellId) {
        let xi = ev.cell_mean(x, self.v.levels(), tree.cell(leaf));
        let cert = ev.net.max_flow(&xi).certificate;
        let w = ev
            .instance
            .arcs
            .iter()
            .filter(|a| cert.beta[a.id] > 0.0)
            .map(|a| (a.id, a.capacity * cert.beta[a.id]))
            .collect();
        self.weights.insert(leaf, w);
        self.certificates.insert(leaf, cert);
        self.cache.clear();
    }

    /// Cut value of one leaf: `sum_k c_k * beta_k * mean_k(x, v)`.
    pub fn leaf_cut(&self, ev: &Evaluator<'_>, tree: &PartitionTree, leaf: CellId, x: &[u8]) -> f64 {
        let cell = tree.cell(leaf);
        let v = self.v.levels();
        self.weights[&leaf]
            .iter()
            .map(|&(k, w)| {
                let xi = match cell.fixed.get(&k) {
                    Some(&s) => s as u8 as f64,
                    None if ev.instance.arcs[k].failable => ev.model.survival(k, x[k], v[k]),
                    None => 1.0,
                };
                w * xi
            })
            .sum()
    }

    /// Tree-recursive cut value at `x`; an upper bound on the expected max
    /// flow under `(x, v)` for every `x`.
    pub fn cut_value(&self, ev: &Evaluator<'_>, tree: &PartitionTree, x: &[u8]) -> f64 {
        self.theta(ev, tree, tree.root(), x)
    }

    fn theta(&self, ev: &Evaluator<'_>, tree: &PartitionTree, node: CellId, x: &[u8]) -> f64 {
        let cell = tree.cell(node);
        if cell.is_leaf() {
            return self.leaf_cut(ev, tree, node, x);
        }
        let v = self.v.levels();
        cell.children
            .iter()
            .map(|&ch| {
                let (k, s) = tree.cell(ch).entry.expect("child has an entry fixing");
                let rho = ev.model.prob_of(k, s, x[k], v[k]);
                if rho == 0.0 {
                    0.0
                } else {
                    rho * self.theta(ev, tree, ch, x)
                }
            })
            .sum()
    }

    fn cached_cut(&mut self, ev: &Evaluator<'_>, tree: &PartitionTree, x: &[u8]) -> (f64, bool) {
        let key: Vec<u8> = self.sensitive.iter().map(|&k| x[k]).collect();
        if let Some(&c) = self.cache.get(&key) {
            return (c, false);
        }
        let c = self.cut_value(ev, tree, x);
        self.cache.insert(key, c);
        (c, true)
    }

    /// Upper bound on the cut over every completion of a partial defender
    /// allocation.
    fn relaxed(&self, ev: &Evaluator<'_>, tree: &PartitionTree, node: CellId, p: &Partial<'_>) -> f64 {
        let cell = tree.cell(node);
        let v = self.v.levels();
        let options = |k: ArcId| {
            if p.is_decided(k) {
                p.levels[k]..=p.levels[k]
            } else {
                0..=p.open_max()
            }
        };
        if cell.is_leaf() {
            return self.weights[&node]
                .iter()
                .map(|&(k, w)| {
                    let xi = match cell.fixed.get(&k) {
                        Some(&s) => s as u8 as f64,
                        None if ev.instance.arcs[k].failable => options(k)
                            .map(|l| ev.model.survival(k, l, v[k]))
                            .fold(f64::NEG_INFINITY, f64::max),
                        None => 1.0,
                    };
                    w * xi
                })
                .sum();
        }
        let child_vals: Vec<(bool, f64)> = cell
            .children
            .iter()
            .map(|&ch| {
                let (_, s) = tree.cell(ch).entry.expect("child has an entry fixing");
                (s, self.relaxed(ev, tree, ch, p))
            })
            .collect();
        let (k, _) = tree.cell(cell.children[0]).entry.expect("child has an entry fixing");
        options(k)
            .map(|l| child_vals.iter().map(|&(s, t)| ev.model.prob_of(k, s, l, v[k]) * t).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl AttackerPlanPool {
    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn allocations(&self) -> Vec<Allocation> {
        self.plans.iter().map(|p| p.v.clone()).collect()
    }

    /// Appends `v` with duals for every current leaf, computed at `x`.
    pub fn push(&mut self, ev: &Evaluator<'_>, tree: &PartitionTree, x: &[u8], v: Allocation) {
        let mut plan = AttackerPlan::new(ev, v);
        for leaf in tree.leaves() {
            plan.attach(ev, tree, x, leaf);
        }
        self.plans.push(plan);
    }

    /// Gives every plan duals for newly created leaves, computed at `x`.
    pub fn attach_leaves(&mut self, ev: &Evaluator<'_>, tree: &PartitionTree, x: &[u8], leaves: &[CellId]) {
        for plan in &mut self.plans {
            for &leaf in leaves {
                plan.attach(ev, tree, x, leaf);
            }
        }
    }

    /// Master objective: the smallest plan cut at `x`.
    pub fn master_value(&self, ev: &Evaluator<'_>, tree: &PartitionTree, x: &[u8]) -> f64 {
        self.plans
            .iter()
            .map(|p| p.cut_value(ev, tree, x))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Solves the defender problem with the contest probability model.
pub fn solve_defender(instance: &NetworkInstance, config: &SolverConfig) -> Result<Report> {
    let model = StateProbabilityModel::for_instance(instance);
    solve_defender_with_model(instance, &model, config).map(|o| o.report)
}

/// Bounds after one outer iteration.
#[derive(Debug, Clone)]
pub struct IterationLog {
    pub x: Allocation,
    pub v: Allocation,
    pub lb: f64,
    pub ub: f64,
    pub refinements: usize,
}

#[derive(Debug, Clone)]
pub struct SraOutcome {
    pub report: Report,
    pub defender_tree: PartitionTree,
    pub attacker_tree: PartitionTree,
    pub pool: AttackerPlanPool,
    pub history: Vec<IterationLog>,
}

pub fn solve_defender_with_model(
    instance: &NetworkInstance,
    model: &StateProbabilityModel,
    config: &SolverConfig,
) -> Result<SraOutcome> {
    config.validate()?;
    instance.validate()?;
    let start = Instant::now();
    let deadline = config.deadline();
    let ev = Evaluator::new(instance, model);
    let space = AllocationSpace::new(instance, Role::Defender);

    let mut x = vec![0u8; instance.arc_count()];
    let mut incumbent = x.clone();
    // Trivial bounds until the first iterations improve them: flow never
    // exceeds the undisrupted maximum and is never negative.
    let mut ub = ev.net.max_flow(&vec![1.0; instance.arc_count()]).value;
    let mut lb = 0.0;
    let mut def_tree = PartitionTree::new();
    let mut att_tree = PartitionTree::new();
    let mut pool = AttackerPlanPool::default();
    let mut history = Vec::new();
    let mut seen = HashSet::new();
    let mut counters = Counters::default();
    let mut iterations = 0;
    let mut status = Status::Solved;
    let converged = |ub: f64, lb: f64| ub - lb <= config.epsilon_gap * lb.max(1.0);

    loop {
        if deadline.expired() {
            status = Status::TimeLimit;
            break;
        }
        // Revisiting a point with unchanged trees would reproduce the same
        // plan, so such an iteration refines any positive-error leaf instead.
        let stalled = !seen.insert((x.clone(), def_tree.len(), att_tree.len()));
        iterations += 1;
        let resp = best_response(&ev, &x, &mut att_tree, config, deadline)?;
        counters.candidates_evaluated += resp.candidates;
        counters.scenarios_touched += resp.cells_evaluated;
        if !resp.complete {
            status = Status::TimeLimit;
            break;
        }
        if resp.value > lb {
            lb = resp.value;
            incumbent.clone_from(&x);
        }
        let v = resp.v.levels().to_vec();
        pool.push(&ev, &def_tree, &x, resp.v.clone());

        let threshold = if stalled { 0.0 } else { config.epsilon_cell };
        let mut refined = false;
        for _ in 0..config.refinements_per_iteration {
            let (leaf, err) = ev.max_error_leaf(&x, &v, &def_tree);
            if err <= threshold {
                break;
            }
            let arc = ev.select_refinement_arc(&x, &v, def_tree.cell(leaf), config.refinement_mode)?;
            let (a, b) = def_tree.refine(instance, leaf, arc)?;
            pool.attach_leaves(&ev, &def_tree, &x, &[a, b]);
            refined = true;
        }
        if stalled && !refined {
            let (leaf, err) = ev.max_error_leaf(&x, &v, &att_tree);
            if err <= 0.0 {
                history.push(IterationLog {
                    x: Allocation::from_levels(Role::Defender, x.clone()),
                    v: resp.v,
                    lb,
                    ub,
                    refinements: def_tree.refinements(),
                });
                break;
            }
            let arc = ev.select_refinement_arc(&x, &v, att_tree.cell(leaf), config.refinement_mode)?;
            att_tree.refine(instance, leaf, arc)?;
        }

        let master = solve_master(&ev, &def_tree, &mut pool, &space, config.master_mode, deadline);
        counters.candidates_evaluated += master.work;
        history.push(IterationLog {
            x: Allocation::from_levels(Role::Defender, x.clone()),
            v: resp.v,
            lb,
            ub: ub.min(if master.complete { -master.value } else { f64::INFINITY }),
            refinements: def_tree.refinements(),
        });
        if !master.complete {
            status = Status::TimeLimit;
            break;
        }
        ub = ub.min(-master.value + 0.0);
        if converged(ub, lb) {
            break;
        }
        x = master.levels;
    }

    counters.max_flow_solves = ev.net.counters.max_flow();
    counters.penalty_solves = ev.net.counters.penalty();
    counters.flow_solves = ev.net.counters.total();
    let report = Report {
        method: Method::Sra,
        status,
        objective: finite(lb),
        ub: finite(ub),
        lb: finite(lb),
        gap: relative_gap(ub, lb),
        refinements: def_tree.refinements(),
        attacker_refinements: att_tree.refinements(),
        iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
        x: Allocation::from_levels(Role::Defender, incumbent).to_map(),
        v_pool: pool_maps(&pool.allocations()),
        counters,
    };
    Ok(SraOutcome {
        report,
        defender_tree: def_tree,
        attacker_tree: att_tree,
        pool,
        history,
    })
}

/// Maximises the smallest plan cut over defender allocations. The outcome is
/// in minimisation form: `value` is the negated master optimum.
fn solve_master(
    ev: &Evaluator<'_>,
    tree: &PartitionTree,
    pool: &mut AttackerPlanPool,
    space: &AllocationSpace,
    mode: MasterMode,
    deadline: Deadline,
) -> SearchOutcome {
    let plans = std::cell::RefCell::new(&mut pool.plans);
    let eval = |x: &[u8], best_neg: f64| -> f64 {
        let threshold = -best_neg;
        let mut m = f64::INFINITY;
        for plan in plans.borrow_mut().iter_mut().rev() {
            let (c, _) = plan.cached_cut(ev, tree, x);
            m = m.min(c);
            if m <= threshold + TIE_TOL {
                break;
            }
        }
        -m
    };
    match mode {
        MasterMode::Enumerate => enumerate_min(space, deadline, eval),
        MasterMode::BranchAndBound => {
            let bound = |p: &Partial<'_>| {
                -plans
                    .borrow()
                    .iter()
                    .map(|plan| plan.relaxed(ev, tree, tree.root(), p))
                    .fold(f64::INFINITY, f64::min)
            };
            branch_and_bound_min(space, deadline, bound, eval)
        }
    }
}
