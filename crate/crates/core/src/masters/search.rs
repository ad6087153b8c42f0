//! Exact search over allocation sets: plain enumeration in canonical order and
//! depth-first branch-and-bound with caller-supplied relaxation bounds.
//!
//! Both searches minimise and keep the first candidate (in lexicographic
//! order) among values within [`TIE_TOL`], so the two modes return the same
//! allocation.

use std::time::Instant;

use crate::instance::{Allocation, ArcId, NetworkInstance, Role};

/// Values closer than this are treated as ties.
pub const TIE_TOL: f64 = 1e-10;

/// Optional wall-clock deadline.
#[derive(Debug, Clone, Copy)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn none() -> Self {
        Deadline(None)
    }

    pub fn after_secs(secs: Option<f64>) -> Self {
        Deadline(secs.map(|s| Instant::now() + std::time::Duration::from_secs_f64(s.max(0.0))))
    }

    pub fn expired(&self) -> bool {
        self.0.is_some_and(|d| Instant::now() >= d)
    }
}

/// The feasible allocations of one player: at most `max_level` units per
/// failable arc and at most `units` in total.
#[derive(Debug, Clone)]
pub struct AllocationSpace {
    pub role: Role,
    pub arcs: Vec<ArcId>,
    pub arc_count: usize,
    pub max_level: u8,
    pub units: u32,
}

impl AllocationSpace {
    pub fn new(instance: &NetworkInstance, role: Role) -> Self {
        AllocationSpace {
            role,
            arcs: instance.failable_arcs(),
            arc_count: instance.arc_count(),
            max_level: instance.levels(role) as u8,
            units: instance.budget_units(role),
        }
    }

    pub fn iter(&self) -> AllocationIter {
        AllocationIter {
            space: self.clone(),
            levels: vec![0; self.arc_count],
            used: 0,
            started: false,
            done: false,
        }
    }

    /// Number of feasible allocations, counted without enumerating them.
    pub fn count(&self) -> u128 {
        // ways[u] = number of assignments to the arcs seen so far using exactly u units
        let cap = self.units as usize;
        let mut ways = vec![0u128; cap + 1];
        ways[0] = 1;
        for _ in &self.arcs {
            let mut next = vec![0u128; cap + 1];
            for (u, &w) in ways.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                for l in 0..=self.max_level as usize {
                    if u + l <= cap {
                        next[u + l] += w;
                    }
                }
            }
            ways = next;
        }
        ways.iter().sum()
    }
}

/// Lexicographic odometer over feasible level vectors; the first failable
/// arc is the most significant digit.
pub struct AllocationIter {
    space: AllocationSpace,
    levels: Vec<u8>,
    used: u32,
    started: bool,
    done: bool,
}

impl AllocationIter {
    /// Advances and returns the next level vector without allocating.
    pub fn advance(&mut self) -> Option<&[u8]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.levels);
        }
        for &k in self.space.arcs.iter().rev() {
            if self.levels[k] < self.space.max_level && self.used < self.space.units {
                self.levels[k] += 1;
                self.used += 1;
                return Some(&self.levels);
            }
            self.used -= self.levels[k] as u32;
            self.levels[k] = 0;
        }
        self.done = true;
        None
    }
}

impl Iterator for AllocationIter {
    type Item = Allocation;

    fn next(&mut self) -> Option<Allocation> {
        let role = self.space.role;
        self.advance().map(|l| Allocation::from_levels(role, l.to_vec()))
    }
}

/// Every feasible allocation for `role`, in canonical lexicographic order.
pub fn enumerate_allocations(instance: &NetworkInstance, role: Role) -> AllocationIter {
    AllocationSpace::new(instance, role).iter()
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub levels: Vec<u8>,
    pub value: f64,
    /// Candidates fully evaluated (enumeration) or search nodes visited (B&B).
    pub work: u64,
    pub complete: bool,
}

/// Minimises `eval` over the whole space. `eval` receives the incumbent
/// value and may return early with any value `>= incumbent - TIE_TOL` once it
/// knows the candidate cannot win.
pub fn enumerate_min<E>(space: &AllocationSpace, deadline: Deadline, mut eval: E) -> SearchOutcome
where
    E: FnMut(&[u8], f64) -> f64,
{
    let mut best = SearchOutcome {
        levels: vec![0; space.arc_count],
        value: f64::INFINITY,
        work: 0,
        complete: true,
    };
    let mut it = space.iter();
    while let Some(levels) = it.advance() {
        if deadline.expired() {
            best.complete = false;
            break;
        }
        best.work += 1;
        let val = eval(levels, best.value);
        if val < best.value - TIE_TOL {
            best.value = val;
            best.levels.copy_from_slice(levels);
        }
    }
    best
}

/// A node of the branch-and-bound tree: the first `depth` failable arcs
/// have decided levels, the rest are still open.
pub struct Partial<'a> {
    pub space: &'a AllocationSpace,
    pub levels: &'a [u8],
    pub depth: usize,
    pub remaining: u32,
}

impl Partial<'_> {
    pub fn is_decided(&self, arc: ArcId) -> bool {
        match self.space.arcs.binary_search(&arc) {
            Ok(pos) => pos < self.depth,
            Err(_) => true,
        }
    }

    /// Levels an open arc may still take.
    pub fn open_max(&self) -> u8 {
        (self.space.max_level as u32).min(self.remaining) as u8
    }
}

/// Depth-first branch-and-bound minimising `eval`, pruning any subtree whose
/// `bound` is no better than the incumbent. `bound` must never exceed the
/// value of any completion of the partial allocation.
pub fn branch_and_bound_min<B, E>(space: &AllocationSpace, deadline: Deadline, mut bound: B, mut eval: E) -> SearchOutcome
where
    B: FnMut(&Partial<'_>) -> f64,
    E: FnMut(&[u8], f64) -> f64,
{
    struct State {
        levels: Vec<u8>,
        best: SearchOutcome,
    }
    fn recurse<B, E>(space: &AllocationSpace, st: &mut State, depth: usize, remaining: u32, deadline: Deadline, bound: &mut B, eval: &mut E)
    where
        B: FnMut(&Partial<'_>) -> f64,
        E: FnMut(&[u8], f64) -> f64,
    {
        if !st.best.complete {
            return;
        }
        st.best.work += 1;
        if deadline.expired() {
            st.best.complete = false;
            return;
        }
        if depth == space.arcs.len() {
            let val = eval(&st.levels, st.best.value);
            if val < st.best.value - TIE_TOL {
                st.best.value = val;
                st.best.levels.copy_from_slice(&st.levels);
            }
            return;
        }
        if depth > 0 && st.best.value.is_finite() {
            let partial = Partial {
                space,
                levels: &st.levels,
                depth,
                remaining,
            };
            if bound(&partial) >= st.best.value - TIE_TOL {
                return;
            }
        }
        let k = space.arcs[depth];
        let top = (space.max_level as u32).min(remaining) as u8;
        for l in 0..=top {
            st.levels[k] = l;
            recurse(space, st, depth + 1, remaining - l as u32, deadline, bound, eval);
        }
        st.levels[k] = 0;
    }
    let mut st = State {
        levels: vec![0; space.arc_count],
        best: SearchOutcome {
            levels: vec![0; space.arc_count],
            value: f64::INFINITY,
            work: 0,
            complete: true,
        },
    };
    recurse(space, &mut st, 0, space.units, deadline, &mut bound, &mut eval);
    st.best
}
