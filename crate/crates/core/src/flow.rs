//! Operator recourse: max flow under arc availability, its min-cut dual, and the
//! penalty form used as a convex under-estimator on fractional availability.
//!
//! Dual certificates use the normalisation `alpha[source] = 0`,
//! `alpha[sink] = 1`; `beta[k]` is the dual of arc `k`'s capacity row.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{ArcId, NetworkInstance, NodeId};

const EPS: f64 = 1e-11;

/// Availability of every arc; non-failable arcs are pinned at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityVector {
    xi: Vec<f64>,
}

impl AvailabilityVector {
    pub fn all_available(instance: &NetworkInstance) -> Self {
        AvailabilityVector {
            xi: vec![1.0; instance.arc_count()],
        }
    }

    /// Dense constructor; entries for non-failable arcs must be 1.
    pub fn from_dense(instance: &NetworkInstance, xi: Vec<f64>) -> Result<Self> {
        let v = AvailabilityVector { xi };
        v.check(instance)?;
        Ok(v)
    }

    /// Binary scenario: bit `j` of `mask` is the state of the `j`-th failable arc.
    pub fn from_failable_bits(instance: &NetworkInstance, mask: u64) -> Self {
        let mut xi = vec![1.0; instance.arc_count()];
        for (j, k) in instance.failable_arcs().into_iter().enumerate() {
            xi[k] = if mask >> j & 1 == 1 { 1.0 } else { 0.0 };
        }
        AvailabilityVector { xi }
    }

    pub fn set(&mut self, arc: ArcId, value: f64) {
        self.xi[arc] = value;
    }

    pub fn get(&self, arc: ArcId) -> f64 {
        self.xi[arc]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.xi
    }

    pub fn is_binary(&self) -> bool {
        self.xi.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn check(&self, instance: &NetworkInstance) -> Result<()> {
        if self.xi.len() != instance.arc_count() {
            return Err(Error::argument(format!(
                "availability vector has {} entries, instance has {} arcs",
                self.xi.len(),
                instance.arc_count()
            )));
        }
        for (k, &v) in self.xi.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::argument(format!("xi[{k}] = {v} outside [0, 1]")));
            }
            if !instance.arcs[k].failable && v != 1.0 {
                return Err(Error::argument(format!("xi[{k}]: non-failable arc must be available")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutCertificate {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub value: f64,
}

impl CutCertificate {
    /// `sum_k c_k * xi_k * beta_k`: the dual objective of the capacity-scaled
    /// max flow at `xi`. Valid as an upper bound on max flow for every `xi`
    /// because dual feasibility does not depend on capacities.
    pub fn scaled_objective(&self, instance: &NetworkInstance, xi: &[f64]) -> f64 {
        instance
            .arcs
            .iter()
            .map(|a| a.capacity * xi[a.id] * self.beta[a.id])
            .sum()
    }

    /// Max violation of `alpha_i - alpha_j + beta_k + penalty_k >= 0` and `beta >= 0`.
    pub fn dual_violation(&self, instance: &NetworkInstance, penalty: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &instance.arcs {
            let slack = self.alpha[a.tail] - self.alpha[a.head] + self.beta[a.id] + penalty[a.id];
            worst = worst.max(-slack).max(-self.beta[a.id]);
        }
        worst = worst.max((self.alpha[instance.source]).abs());
        worst.max((self.alpha[instance.sink] - 1.0).abs())
    }
}

/// Primal flow plus dual certificate.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub value: f64,
    pub flow: Vec<f64>,
    pub certificate: CutCertificate,
}

/// Work counters shared across a solve.
#[derive(Debug, Default)]
pub struct FlowCounters {
    pub max_flow_solves: AtomicU64,
    pub penalty_solves: AtomicU64,
}

impl FlowCounters {
    pub fn max_flow(&self) -> u64 {
        self.max_flow_solves.load(Ordering::Relaxed)
    }

    pub fn penalty(&self) -> u64 {
        self.penalty_solves.load(Ordering::Relaxed)
    }

    pub fn total(&self) -> u64 {
        self.max_flow() + self.penalty()
    }
}

/// Residual-graph view of an instance, built once per solve.
#[derive(Debug)]
pub struct Network {
    n: usize,
    source: NodeId,
    sink: NodeId,
    tail: Vec<NodeId>,
    head: Vec<NodeId>,
    capacity: Vec<f64>,
    /// Residual edges: `2k` is arc `k` forward, `2k + 1` its reverse.
    adj: Vec<Vec<usize>>,
    pub counters: FlowCounters,
}

impl Network {
    pub fn new(instance: &NetworkInstance) -> Self {
        let n = instance.node_count;
        let mut adj = vec![Vec::new(); n];
        for a in &instance.arcs {
            adj[a.tail].push(2 * a.id);
            adj[a.head].push(2 * a.id + 1);
        }
        Network {
            n,
            source: instance.source,
            sink: instance.sink,
            tail: instance.arcs.iter().map(|a| a.tail).collect(),
            head: instance.arcs.iter().map(|a| a.head).collect(),
            capacity: instance.arcs.iter().map(|a| a.capacity).collect(),
            adj,
            counters: FlowCounters::default(),
        }
    }

    fn edge_to(&self, e: usize) -> NodeId {
        if e % 2 == 0 {
            self.head[e / 2]
        } else {
            self.tail[e / 2]
        }
    }

    /// Max flow with arc `k` capacity `c_k * xi_k`; returns the source-side
    /// minimal min cut as certificate.
    pub fn max_flow(&self, xi: &[f64]) -> FlowSolution {
        self.counters.max_flow_solves.fetch_add(1, Ordering::Relaxed);
        let m = self.tail.len();
        let mut res = vec![0.0; 2 * m];
        for k in 0..m {
            res[2 * k] = self.capacity[k] * xi[k];
        }
        let mut value = 0.0;
        let mut level = vec![usize::MAX; self.n];
        let mut iter = vec![0usize; self.n];
        loop {
            if !self.bfs_levels(&res, &mut level) {
                break;
            }
            iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let pushed = self.dfs_push(self.source, f64::INFINITY, &mut res, &level, &mut iter);
                if pushed <= EPS {
                    break;
                }
                value += pushed;
            }
        }
        let flow: Vec<f64> = (0..m).map(|k| res[2 * k + 1]).collect();

        // Source side = residual reachability from the source.
        let reach = self.reachable(&res);
        let alpha: Vec<f64> = reach.iter().map(|&r| if r { 0.0 } else { 1.0 }).collect();
        let beta: Vec<f64> = (0..m)
            .map(|k| if reach[self.tail[k]] && !reach[self.head[k]] { 1.0 } else { 0.0 })
            .collect();
        let dual: f64 = (0..m).map(|k| self.capacity[k] * xi[k] * beta[k]).sum();
        FlowSolution {
            value,
            flow,
            certificate: CutCertificate { alpha, beta, value: dual },
        }
    }

    fn bfs_levels(&self, res: &[f64], level: &mut [usize]) -> bool {
        level.iter_mut().for_each(|l| *l = usize::MAX);
        level[self.source] = 0;
        let mut queue = VecDeque::from([self.source]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.edge_to(e);
                if res[e] > EPS && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level[self.sink] != usize::MAX
    }

    fn dfs_push(&self, u: NodeId, limit: f64, res: &mut [f64], level: &[usize], iter: &mut [usize]) -> f64 {
        if u == self.sink {
            return limit;
        }
        while iter[u] < self.adj[u].len() {
            let e = self.adj[u][iter[u]];
            let v = self.edge_to(e);
            if res[e] > EPS && level[v] == level[u] + 1 {
                let got = self.dfs_push(v, limit.min(res[e]), res, level, iter);
                if got > EPS {
                    res[e] -= got;
                    res[e ^ 1] += got;
                    return got;
                }
            }
            iter[u] += 1;
        }
        0.0
    }

    fn reachable(&self, res: &[f64]) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        seen[self.source] = true;
        let mut stack = vec![self.source];
        while let Some(u) = stack.pop() {
            for &e in &self.adj[u] {
                let v = self.edge_to(e);
                if res[e] > EPS && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// `max y_ts - sum_k penalty_k * y_k` over conserving flows with
    /// `0 <= y_k <= c_k`, by successive shortest paths: augment along the
    /// cheapest path while it still earns a profit.
    pub fn penalty_flow(&self, penalty: &[f64]) -> FlowSolution {
        self.counters.penalty_solves.fetch_add(1, Ordering::Relaxed);
        let m = self.tail.len();
        let mut res = vec![0.0; 2 * m];
        let cost = |e: usize| if e % 2 == 0 { penalty[e / 2] } else { -penalty[e / 2] };
        for k in 0..m {
            res[2 * k] = self.capacity[k];
        }
        let mut value = 0.0;
        let mut total = 0.0;
        let mut dist = vec![f64::INFINITY; self.n];
        let mut parent = vec![usize::MAX; self.n];
        loop {
            self.shortest_paths(&res, &cost, &mut dist, &mut parent, None);
            let d = dist[self.sink];
            if !(d < 1.0 - EPS) {
                break;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = self.sink;
            while v != self.source {
                let e = parent[v];
                bottleneck = bottleneck.min(res[e]);
                v = self.edge_to(e ^ 1);
            }
            if !(bottleneck > EPS) || !bottleneck.is_finite() {
                break;
            }
            let mut v = self.sink;
            while v != self.source {
                let e = parent[v];
                res[e] -= bottleneck;
                res[e ^ 1] += bottleneck;
                v = self.edge_to(e ^ 1);
            }
            value += (1.0 - d) * bottleneck;
            total += bottleneck;
        }
        let flow: Vec<f64> = (0..m).map(|k| res[2 * k + 1]).collect();

        // Potentials from the residual graph closed by the return arc.
        self.shortest_paths(&res, &cost, &mut dist, &mut parent, Some(total));
        let alpha: Vec<f64> = dist
            .iter()
            .map(|&d| if d.is_finite() { d.clamp(0.0, 1.0) } else { 1.0 })
            .collect();
        let beta: Vec<f64> = (0..m)
            .map(|k| (alpha[self.head[k]] - alpha[self.tail[k]] - penalty[k]).max(0.0))
            .collect();
        let dual: f64 = (0..m).map(|k| self.capacity[k] * beta[k]).sum();
        FlowSolution {
            value,
            flow,
            certificate: CutCertificate { alpha, beta, value: dual },
        }
    }

    /// Bellman-Ford from the source over residual edges. With
    /// `return_flow = Some(f)` the circulation arcs `t -> s` (cost -1) and,
    /// when `f > 0`, `s -> t` (cost +1) are included.
    fn shortest_paths(
        &self,
        res: &[f64],
        cost: &dyn Fn(usize) -> f64,
        dist: &mut [f64],
        parent: &mut [usize],
        return_flow: Option<f64>,
    ) {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        dist[self.source] = 0.0;
        let mut in_queue = vec![false; self.n];
        let mut relax_count = vec![0usize; self.n];
        let mut queue = VecDeque::from([self.source]);
        in_queue[self.source] = true;
        while let Some(u) = queue.pop_front() {
            in_queue[u] = false;
            if relax_count[u] > self.n {
                continue;
            }
            relax_count[u] += 1;
            let du = dist[u];
            let mut relax = |v: NodeId, w: f64, e: usize, dist: &mut [f64], queue: &mut VecDeque<NodeId>| {
                if du + w < dist[v] - 1e-13 {
                    dist[v] = du + w;
                    parent[v] = e;
                    if !in_queue[v] {
                        in_queue[v] = true;
                        queue.push_back(v);
                    }
                }
            };
            for &e in &self.adj[u] {
                if res[e] > EPS {
                    relax(self.edge_to(e), cost(e), e, dist, &mut queue);
                }
            }
            if let Some(f) = return_flow {
                if u == self.sink {
                    relax(self.source, -1.0, usize::MAX, dist, &mut queue);
                }
                if u == self.source && f > EPS {
                    relax(self.sink, 1.0, usize::MAX, dist, &mut queue);
                }
            }
        }
        if return_flow.is_some() {
            // The closing arcs pin d(t) - d(s) to exactly 1 whenever flow is positive.
            let shift = dist[self.source];
            if shift.is_finite() && shift != 0.0 {
                dist.iter_mut().for_each(|d| *d -= shift);
            }
        }
    }
}

/// Max s-t flow with arc capacities scaled by a binary availability vector.
pub fn max_flow(instance: &NetworkInstance, xi: &AvailabilityVector) -> Result<(f64, CutCertificate)> {
    xi.check(instance)?;
    if !xi.is_binary() {
        return Err(Error::argument("max_flow expects a binary availability vector"));
    }
    let sol = Network::new(instance).max_flow(xi.as_slice());
    Ok((sol.value, sol.certificate))
}

/// Penalty recourse: full capacities, each unit of flow on arc `k` costs `1 - xi_k`.
pub fn penalty_recourse(instance: &NetworkInstance, xi: &AvailabilityVector) -> Result<(f64, CutCertificate)> {
    xi.check(instance)?;
    let penalty: Vec<f64> = xi.as_slice().iter().map(|v| 1.0 - v).collect();
    let sol = Network::new(instance).penalty_flow(&penalty);
    Ok((sol.value, sol.certificate))
}

/// Mean-value recourse: max flow with fractional capacities `c_k * xi_k`.
pub fn mean_value_recourse(instance: &NetworkInstance, xi: &AvailabilityVector) -> Result<f64> {
    Ok(mean_value_with_certificate(instance, xi)?.0)
}

pub fn mean_value_with_certificate(instance: &NetworkInstance, xi: &AvailabilityVector) -> Result<(f64, CutCertificate)> {
    xi.check(instance)?;
    let sol = Network::new(instance).max_flow(xi.as_slice());
    Ok((sol.value, sol.certificate))
}
