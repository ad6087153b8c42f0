//! Brute-force ground truth for tiny instances.
//!
//! Kept deliberately separate from the solver code: it has its own
//! allocation enumerator and its own rational contest probabilities, and
//! shares only the max-flow routine.

use std::collections::HashMap;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::flow::{max_flow, AvailabilityVector};
use crate::instance::{Allocation, ArcId, NetworkInstance, Role};
use crate::report::{Counters, Method, Report, Status};

pub const MAX_FAILABLE_ARCS: usize = 20;
pub const MAX_ATTACKER_ALLOCATIONS: usize = 100_000;
pub const MAX_TRILEVEL_PAIRS: usize = 10_000_000;
pub const MAX_TRILEVEL_FAILABLE_ARCS: usize = 10;

/// Integer max-flow values keyed by the failable-arc availability mask.
struct FlowTable<'a> {
    instance: &'a NetworkInstance,
    failable: Vec<ArcId>,
    values: HashMap<u64, BigInt>,
    solves: u64,
    terms: u64,
}

impl<'a> FlowTable<'a> {
    fn new(instance: &'a NetworkInstance) -> Result<Self> {
        let failable = instance.failable_arcs();
        if failable.len() > MAX_FAILABLE_ARCS {
            return Err(Error::Capacity(format!(
                "oracle supports at most {MAX_FAILABLE_ARCS} failable arcs, instance has {}",
                failable.len()
            )));
        }
        Ok(FlowTable {
            instance,
            failable,
            values: HashMap::new(),
            solves: 0,
            terms: 0,
        })
    }

    fn value(&mut self, mask: u64) -> Result<BigInt> {
        if let Some(q) = self.values.get(&mask) {
            return Ok(q.clone());
        }
        let xi = AvailabilityVector::from_failable_bits(self.instance, mask);
        let (q, _) = max_flow(self.instance, &xi)?;
        self.solves += 1;
        let rounded = q.round();
        if (q - rounded).abs() > 1e-6 {
            return Err(Error::invariant("arcs", format!("non-integral max flow {q}")));
        }
        let q = BigInt::from(rounded as i64);
        self.values.insert(mask, q.clone());
        Ok(q)
    }

    /// Exact expectation under `(x, v)`. Unattacked arcs survive surely, so
    /// only the states of attacked arcs are enumerated; every other scenario
    /// has probability zero.
    fn expectation(&mut self, x: &[u8], v: &[u8]) -> Result<BigRational> {
        let n = self.failable.len();
        let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut base = full;
        let mut contested = Vec::new();
        let mut denom = BigInt::from(1);
        for (j, &k) in self.failable.iter().enumerate() {
            let (l, a) = (x[k] as i64, v[k] as i64);
            if a == 0 {
                continue;
            }
            base &= !(1u64 << j);
            if l > 0 {
                // survives with l / (l + a); fails otherwise
                contested.push((j, l, a));
                denom *= l + a;
            }
            // attacked and undefended: fails surely, bit stays clear
        }
        let mut total = BigInt::zero();
        for sub in 0u64..(1u64 << contested.len()) {
            let mut mask = base;
            let mut weight = BigInt::from(1);
            for (i, &(j, l, a)) in contested.iter().enumerate() {
                if sub >> i & 1 == 1 {
                    mask |= 1u64 << j;
                    weight *= l;
                } else {
                    weight *= a;
                }
            }
            self.terms += 1;
            total += weight * self.value(mask)?;
        }
        Ok(BigRational::new(total, denom))
    }
}

fn allocations(instance: &NetworkInstance, role: Role) -> Vec<Vec<u8>> {
    fn rec(arcs: &[ArcId], i: usize, rem: u32, lmax: u32, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if i == arcs.len() {
            out.push(cur.clone());
            return;
        }
        for l in 0..=lmax.min(rem) {
            cur[arcs[i]] = l as u8;
            rec(arcs, i + 1, rem - l, lmax, cur, out);
        }
        cur[arcs[i]] = 0;
    }
    let arcs = instance.failable_arcs();
    let mut cur = vec![0u8; instance.arc_count()];
    let mut out = Vec::new();
    let lmax = instance.levels(role);
    let units = instance.budget(role) * lmax;
    rec(&arcs, 0, units, lmax, &mut cur, &mut out);
    out
}

fn check_pair(instance: &NetworkInstance, x: &Allocation, v: &Allocation) -> Result<()> {
    if x.role != Role::Defender || v.role != Role::Attacker {
        return Err(Error::argument("expected a defender and an attacker allocation"));
    }
    x.check(instance)?;
    v.check(instance)
}

/// Exact expected max flow under `(x, v)`.
pub fn expected_value(instance: &NetworkInstance, x: &Allocation, v: &Allocation) -> Result<BigRational> {
    check_pair(instance, x, v)?;
    FlowTable::new(instance)?.expectation(x.levels(), v.levels())
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn best_response_in(table: &mut FlowTable<'_>, attacks: &[Vec<u8>], x: &[u8]) -> Result<(usize, BigRational)> {
    let mut best: Option<(usize, BigRational)> = None;
    for (i, v) in attacks.iter().enumerate() {
        let e = table.expectation(x, v)?;
        if best.as_ref().is_none_or(|(_, b)| e < *b) {
            best = Some((i, e));
        }
    }
    Ok(best.expect("the zero attack is always feasible"))
}

fn attacker_set(instance: &NetworkInstance) -> Result<Vec<Vec<u8>>> {
    let attacks = allocations(instance, Role::Attacker);
    if attacks.len() > MAX_ATTACKER_ALLOCATIONS {
        return Err(Error::Capacity(format!(
            "{} attacker allocations exceed the oracle limit of {MAX_ATTACKER_ALLOCATIONS}",
            attacks.len()
        )));
    }
    Ok(attacks)
}

/// Exact attacker best response to `x`; the lexicographically first
/// minimiser wins ties.
pub fn best_response_exact(instance: &NetworkInstance, x: &Allocation) -> Result<(Allocation, BigRational)> {
    if x.role != Role::Defender {
        return Err(Error::argument("expected a defender allocation"));
    }
    x.check(instance)?;
    let mut table = FlowTable::new(instance)?;
    let attacks = attacker_set(instance)?;
    let (i, val) = best_response_in(&mut table, &attacks, x.levels())?;
    Ok((Allocation::from_levels(Role::Attacker, attacks[i].clone()), val))
}

#[derive(Debug, Clone)]
pub struct TrilevelSolution {
    pub x: Allocation,
    pub v: Allocation,
    pub value: BigRational,
    pub flow_solves: u64,
    pub scenarios_touched: u64,
    pub pairs: u64,
}

/// Exact tri-level optimum by exhausting defender and attacker allocations.
pub fn trilevel_exact(instance: &NetworkInstance) -> Result<(Allocation, Allocation, BigRational)> {
    trilevel_exact_detailed(instance).map(|s| (s.x, s.v, s.value))
}

pub fn trilevel_exact_detailed(instance: &NetworkInstance) -> Result<TrilevelSolution> {
    instance.validate()?;
    if instance.failable_count() > MAX_TRILEVEL_FAILABLE_ARCS {
        return Err(Error::Capacity(format!(
            "tri-level oracle supports at most {MAX_TRILEVEL_FAILABLE_ARCS} failable arcs, instance has {}",
            instance.failable_count()
        )));
    }
    let mut table = FlowTable::new(instance)?;
    let defences = allocations(instance, Role::Defender);
    let attacks = attacker_set(instance)?;
    let pairs = defences.len().saturating_mul(attacks.len());
    if pairs > MAX_TRILEVEL_PAIRS {
        return Err(Error::Capacity(format!(
            "{pairs} allocation pairs exceed the oracle limit of {MAX_TRILEVEL_PAIRS}"
        )));
    }
    let mut best: Option<(usize, usize, BigRational)> = None;
    for (i, x) in defences.iter().enumerate() {
        let (j, val) = best_response_in(&mut table, &attacks, x)?;
        if best.as_ref().is_none_or(|(_, _, b)| val > *b) {
            best = Some((i, j, val));
        }
    }
    let (i, j, value) = best.expect("the zero defence is always feasible");
    Ok(TrilevelSolution {
        x: Allocation::from_levels(Role::Defender, defences[i].clone()),
        v: Allocation::from_levels(Role::Attacker, attacks[j].clone()),
        value,
        flow_solves: table.solves,
        scenarios_touched: table.terms,
        pairs: pairs as u64,
    })
}

/// Tri-level optimum packaged in the shared report format.
pub fn solve_report(instance: &NetworkInstance) -> Result<Report> {
    let start = Instant::now();
    let sol = trilevel_exact_detailed(instance)?;
    let value = to_f64(&sol.value);
    Ok(Report {
        method: Method::Oracle,
        status: Status::Solved,
        objective: Some(value),
        ub: Some(value),
        lb: Some(value),
        gap: Some(0.0),
        refinements: 0,
        attacker_refinements: 0,
        iterations: 1,
        wall_time_s: start.elapsed().as_secs_f64(),
        x: sol.x.to_map(),
        v_pool: vec![sol.v.to_map()],
        counters: Counters {
            max_flow_solves: sol.flow_solves,
            penalty_solves: 0,
            flow_solves: sol.flow_solves,
            scenarios_touched: sol.scenarios_touched,
            candidates_evaluated: sol.pairs,
        },
    })
}
