//! Deterministic-equivalent benchmark: every arc-state scenario enumerated,
//! with exact expectation cuts inside the same outer cutting-plane loop.

use std::cell::Cell as Counter;
use std::collections::HashMap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::flow::{AvailabilityVector, Network};
use crate::instance::{Allocation, ArcId, NetworkInstance, Role};
use crate::masters::search::{branch_and_bound_min, enumerate_min, AllocationSpace, Deadline, Partial, SearchOutcome, TIE_TOL};
use crate::masters::{MasterMode, SolverConfig};
use crate::prob::StateProbabilityModel;
use crate::report::{finite, pool_maps, relative_gap, Counters, Method, Report, Status};

/// Largest number of failable arcs the benchmark accepts (3x3 grids have 24).
pub const MAX_DEF_FAILABLE_ARCS: usize = 24;

/// Scenarios are checked against the deadline in blocks of this size.
const CHUNK: usize = 1 << 12;

/// All `2^n` availability scenarios in lexicographic order with their max
/// flow. Failable arc `j` is bit `n - 1 - j` of the scenario index.
#[derive(Debug, Clone)]
pub struct ScenarioSet {
    failable: Vec<ArcId>,
    values: Vec<f64>,
}

impl ScenarioSet {
    pub fn build(instance: &NetworkInstance) -> Result<Self> {
        let net = Network::new(instance);
        Self::build_until(instance, &net, Deadline::none()).map(|s| s.expect("no deadline"))
    }

    /// Returns `Ok(None)` if the deadline passes mid-build.
    pub fn build_until(instance: &NetworkInstance, net: &Network, deadline: Deadline) -> Result<Option<Self>> {
        let failable = instance.failable_arcs();
        let n = failable.len();
        if n > MAX_DEF_FAILABLE_ARCS {
            return Err(Error::Capacity(format!(
                "deterministic equivalent supports at most {MAX_DEF_FAILABLE_ARCS} failable arcs, instance has {n}"
            )));
        }
        let count = 1usize << n;
        let mut values = Vec::with_capacity(count);
        let mut xi = vec![1.0; instance.arc_count()];
        for s in 0..count {
            if s % CHUNK == CHUNK - 1 && deadline.expired() {
                return Ok(None);
            }
            for (j, &k) in failable.iter().enumerate() {
                xi[k] = (s >> (n - 1 - j) & 1) as f64;
            }
            values.push(net.max_flow(&xi).value);
        }
        Ok(Some(ScenarioSet { failable, values }))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn failable_arcs(&self) -> &[ArcId] {
        &self.failable
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn availability(&self, instance: &NetworkInstance, index: usize) -> AvailabilityVector {
        let n = self.failable.len();
        let mut av = AvailabilityVector::all_available(instance);
        for (j, &k) in self.failable.iter().enumerate() {
            av.set(k, (index >> (n - 1 - j) & 1) as f64);
        }
        av
    }

    /// `sum_s prod_j (p_j or 1 - p_j) * Q(s)` for per-arc survival
    /// probabilities `p` (indexed like `failable_arcs`). Stops early and
    /// returns the partial sum once it reaches `stop`.
    fn expectation(&self, p: &[f64], stop: f64, touched: &Counter<u64>) -> f64 {
        let n = self.failable.len();
        // Top levels branch recursively; the bottom `low` arcs are summed in
        // chunks so the early-exit test stays off the hot path.
        let low = n.min(12);
        let high = n - low;
        let mut weights = vec![1.0; 1 << low];
        for (i, w) in weights.iter_mut().enumerate() {
            for j in 0..low {
                let pj = p[high + j];
                *w *= if i >> (low - 1 - j) & 1 == 1 { pj } else { 1.0 - pj };
            }
        }
        let mut sum = 0.0;
        for top in 0usize..(1 << high) {
            let mut w = 1.0;
            for j in 0..high {
                let pj = p[j];
                w *= if top >> (high - 1 - j) & 1 == 1 { pj } else { 1.0 - pj };
            }
            let base = top << low;
            let block = &self.values[base..base + (1 << low)];
            let part: f64 = block.iter().zip(&weights).map(|(q, c)| q * c).sum();
            sum += w * part;
            touched.set(touched.get() + (1 << low) as u64);
            if sum >= stop {
                return sum;
            }
        }
        sum
    }
}

fn survival_vector(model: &StateProbabilityModel, arcs: &[ArcId], x: &[u8], v: &[u8]) -> Vec<f64> {
    arcs.iter().map(|&k| model.survival(k, x[k], v[k])).collect()
}

fn check_scenarios(instance: &NetworkInstance, scenarios: &ScenarioSet) -> Result<()> {
    if scenarios.failable != instance.failable_arcs() {
        return Err(Error::argument("scenario set was built for a different instance"));
    }
    Ok(())
}

/// Exact expected max flow under `(x, v)` by full scenario summation.
pub fn def_expected_value(instance: &NetworkInstance, scenarios: &ScenarioSet, x: &Allocation, v: &Allocation) -> Result<f64> {
    check_scenarios(instance, scenarios)?;
    x.check(instance)?;
    v.check(instance)?;
    let model = StateProbabilityModel::for_instance(instance);
    let p = survival_vector(&model, &scenarios.failable, x.levels(), v.levels());
    Ok(scenarios.expectation(&p, f64::INFINITY, &Counter::new(0)))
}

struct DefContext<'a> {
    instance: &'a NetworkInstance,
    model: &'a StateProbabilityModel,
    scenarios: &'a ScenarioSet,
    touched: Counter<u64>,
}

impl DefContext<'_> {
    fn attacker_search(&self, x: &[u8], mode: MasterMode, deadline: Deadline) -> SearchOutcome {
        let space = AllocationSpace::new(self.instance, Role::Attacker);
        let arcs = &self.scenarios.failable;
        let eval = |v: &[u8], best: f64| {
            let p = survival_vector(self.model, arcs, x, v);
            self.scenarios.expectation(&p, best - TIE_TOL, &self.touched)
        };
        match mode {
            MasterMode::Enumerate => enumerate_min(&space, deadline, eval),
            MasterMode::BranchAndBound => {
                // The expectation is nondecreasing in each survival probability.
                let bound = |part: &Partial<'_>| {
                    let p: Vec<f64> = arcs
                        .iter()
                        .map(|&k| {
                            if part.is_decided(k) {
                                self.model.survival(k, x[k], part.levels[k])
                            } else {
                                (0..=part.open_max())
                                    .map(|l| self.model.survival(k, x[k], l))
                                    .fold(f64::INFINITY, f64::min)
                            }
                        })
                        .collect();
                    self.scenarios.expectation(&p, f64::INFINITY, &self.touched)
                };
                branch_and_bound_min(&space, deadline, bound, eval)
            }
        }
    }
}

/// Exact attacker best response to `x` by full scenario summation.
pub fn def_attacker_best_response(instance: &NetworkInstance, scenarios: &ScenarioSet, x: &Allocation) -> Result<(Allocation, f64)> {
    check_scenarios(instance, scenarios)?;
    x.check(instance)?;
    let model = StateProbabilityModel::for_instance(instance);
    let ctx = DefContext {
        instance,
        model: &model,
        scenarios,
        touched: Counter::new(0),
    };
    let out = ctx.attacker_search(x.levels(), MasterMode::Enumerate, Deadline::none());
    Ok((Allocation::from_levels(Role::Attacker, out.levels), out.value))
}

struct DefPlan {
    v: Vec<u8>,
    sensitive: Vec<ArcId>,
    cache: HashMap<Vec<u8>, f64>,
}

pub fn def_solve(instance: &NetworkInstance, config: &SolverConfig) -> Result<Report> {
    let model = StateProbabilityModel::for_instance(instance);
    def_solve_with_model(instance, &model, config)
}

pub fn def_solve_with_model(instance: &NetworkInstance, model: &StateProbabilityModel, config: &SolverConfig) -> Result<Report> {
    config.validate()?;
    instance.validate()?;
    let start = Instant::now();
    let deadline = config.deadline();
    let net = Network::new(instance);
    let mut counters = Counters::default();
    let mut ub = net.max_flow(&vec![1.0; instance.arc_count()]).value;
    let mut lb = 0.0;
    let mut x = vec![0u8; instance.arc_count()];
    let mut incumbent = x.clone();
    let mut pool: Vec<DefPlan> = Vec::new();
    let mut iterations = 0;
    let mut status = Status::Solved;

    let scenarios = ScenarioSet::build_until(instance, &net, deadline)?;
    counters.max_flow_solves = net.counters.max_flow();
    counters.flow_solves = net.counters.total();
    let Some(scenarios) = scenarios else {
        return Ok(Report {
            method: Method::Def,
            status: Status::TimeLimit,
            objective: Some(lb),
            ub: Some(ub),
            lb: Some(lb),
            gap: relative_gap(ub, lb),
            refinements: 0,
            attacker_refinements: 0,
            iterations: 0,
            wall_time_s: start.elapsed().as_secs_f64(),
            x: Allocation::zero(instance, Role::Defender).to_map(),
            v_pool: Vec::new(),
            counters,
        });
    };
    let ctx = DefContext {
        instance,
        model,
        scenarios: &scenarios,
        touched: Counter::new(0),
    };
    let arcs = scenarios.failable.clone();
    let lmax = instance.defender_levels as u8;
    let space = AllocationSpace::new(instance, Role::Defender);

    loop {
        if deadline.expired() {
            status = Status::TimeLimit;
            break;
        }
        iterations += 1;
        let br = ctx.attacker_search(&x, config.master_mode, deadline);
        counters.candidates_evaluated += br.work;
        if !br.complete {
            status = Status::TimeLimit;
            break;
        }
        if br.value > lb {
            lb = br.value;
            incumbent.clone_from(&x);
        }
        let sensitive = arcs
            .iter()
            .copied()
            .filter(|&k| {
                let s0 = model.survival(k, 0, br.levels[k]);
                (1..=lmax).any(|l| model.survival(k, l, br.levels[k]) != s0)
            })
            .collect();
        pool.push(DefPlan {
            v: br.levels,
            sensitive,
            cache: HashMap::new(),
        });
        if ub - lb <= config.epsilon_gap * lb.max(1.0) {
            break;
        }

        let plans = std::cell::RefCell::new(&mut pool);
        let eval = |cand: &[u8], best_neg: f64| {
            let threshold = -best_neg;
            let mut m = f64::INFINITY;
            for plan in plans.borrow_mut().iter_mut().rev() {
                let key: Vec<u8> = plan.sensitive.iter().map(|&k| cand[k]).collect();
                let c = match plan.cache.get(&key) {
                    Some(&c) => c,
                    None => {
                        let p = survival_vector(model, &arcs, cand, &plan.v);
                        let c = scenarios.expectation(&p, f64::INFINITY, &ctx.touched);
                        plan.cache.insert(key, c);
                        c
                    }
                };
                m = m.min(c);
                if m <= threshold + TIE_TOL {
                    break;
                }
            }
            -m
        };
        let master = match config.master_mode {
            MasterMode::Enumerate => enumerate_min(&space, deadline, eval),
            MasterMode::BranchAndBound => {
                let bound = |part: &Partial<'_>| {
                    let mut m = f64::INFINITY;
                    for plan in plans.borrow().iter() {
                        let p: Vec<f64> = arcs
                            .iter()
                            .map(|&k| {
                                if part.is_decided(k) {
                                    model.survival(k, part.levels[k], plan.v[k])
                                } else {
                                    (0..=part.open_max())
                                        .map(|l| model.survival(k, l, plan.v[k]))
                                        .fold(f64::NEG_INFINITY, f64::max)
                                }
                            })
                            .collect();
                        m = m.min(scenarios.expectation(&p, f64::INFINITY, &ctx.touched));
                    }
                    -m
                };
                branch_and_bound_min(&space, deadline, bound, eval)
            }
        };
        counters.candidates_evaluated += master.work;
        if !master.complete {
            status = Status::TimeLimit;
            break;
        }
        ub = ub.min(-master.value + 0.0);
        if ub - lb <= config.epsilon_gap * lb.max(1.0) {
            break;
        }
        x = master.levels;
    }

    counters.scenarios_touched = ctx.touched.get();
    let v_pool: Vec<Allocation> = pool
        .iter()
        .map(|p| Allocation::from_levels(Role::Attacker, p.v.clone()))
        .collect();
    Ok(Report {
        method: Method::Def,
        status,
        objective: finite(lb),
        ub: finite(ub),
        lb: finite(lb),
        gap: relative_gap(ub, lb),
        refinements: 0,
        attacker_refinements: 0,
        iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
        x: Allocation::from_levels(Role::Defender, incumbent).to_map(),
        v_pool: pool_maps(&v_pool),
        counters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_grid;

    #[test]
    fn scenario_count_and_order() {
        let inst = generate_grid(2, 2, 1, 1, 4).unwrap();
        let s = ScenarioSet::build(&inst).unwrap();
        assert_eq!(s.len(), 256);
        assert_eq!(s.value(0), 0.0);
        // first failable arc is the most significant bit
        let av = s.availability(&inst, 128);
        assert_eq!(av.get(inst.failable_arcs()[0]), 1.0);
        assert_eq!(av.get(inst.failable_arcs()[1]), 0.0);
    }

    #[test]
    fn zero_allocations_give_nominal_flow() {
        let inst = generate_grid(2, 2, 1, 1, 4).unwrap();
        let s = ScenarioSet::build(&inst).unwrap();
        let x = Allocation::zero(&inst, Role::Defender);
        let v = Allocation::zero(&inst, Role::Attacker);
        let e = def_expected_value(&inst, &s, &x, &v).unwrap();
        assert_eq!(e, s.value(s.len() - 1));
    }

    #[test]
    fn guard_refuses_large_instances() {
        let inst = generate_grid(3, 4, 1, 1, 0).unwrap();
        assert!(matches!(ScenarioSet::build(&inst), Err(Error::Capacity(_))));
    }
}
