//! Partition trees over the arc-state scenario space.
//!
//! Every node is a cell fixing the states of some failable arcs; the leaves
//! form the current partition. On a leaf, the mean-value recourse at the cell's
//! conditional mean bounds the conditional expected max flow from above and
//! the penalty recourse bounds it from below; the probability-weighted gap
//! between the two drives refinement.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Network;
use crate::instance::{Allocation, ArcId, NetworkInstance};
use crate::prob::{cell_mean_into, cell_prob_levels, StateProbabilityModel};

pub type CellId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub id: CellId,
    /// Fixed arc states (`true` = available).
    pub fixed: BTreeMap<ArcId, bool>,
    pub parent: Option<CellId>,
    pub children: Vec<CellId>,
    /// The fixing that created this cell from its parent.
    pub entry: Option<(ArcId, bool)>,
}

impl Cell {
    pub fn root() -> Self {
        Cell {
            id: 0,
            fixed: BTreeMap::new(),
            parent: None,
            children: Vec::new(),
            entry: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// A map cannot hold an arc twice, so the only way to be inconsistent is
    /// an entry fixing that disagrees with `fixed`.
    pub fn is_consistent(&self) -> bool {
        match self.entry {
            Some((k, s)) => self.fixed.get(&k) == Some(&s),
            None => true,
        }
    }

    /// Whether a full scenario (indexed by arc id) lies in this cell.
    pub fn contains(&self, scenario: &[bool]) -> bool {
        self.fixed.iter().all(|(&k, &s)| scenario[k] == s)
    }

    pub fn free_arcs<'a>(&'a self, instance: &'a NetworkInstance) -> impl Iterator<Item = ArcId> + 'a {
        instance
            .arcs
            .iter()
            .filter(move |a| a.failable && !self.fixed.contains_key(&a.id))
            .map(|a| a.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTree {
    nodes: Vec<Cell>,
}

impl Default for PartitionTree {
    fn default() -> Self {
        Self::new()
    }
}

impl PartitionTree {
    /// The trivial partition: one cell covering every scenario.
    pub fn new() -> Self {
        PartitionTree { nodes: vec![Cell::root()] }
    }

    pub fn root(&self) -> CellId {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.nodes[id]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.nodes
    }

    /// Leaf ids in ascending order.
    pub fn leaves(&self) -> Vec<CellId> {
        self.nodes.iter().filter(|c| c.is_leaf()).map(|c| c.id).collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|c| c.is_leaf()).count()
    }

    pub fn refinements(&self) -> usize {
        (self.nodes.len() - 1) / 2
    }

    /// Splits leaf `cell` on `arc`. Returns `(child0, child1)` fixing the arc
    /// to 0 and 1. The available child gets the smaller id.
    pub fn refine(&mut self, instance: &NetworkInstance, cell: CellId, arc: ArcId) -> Result<(CellId, CellId)> {
        let parent = self
            .nodes
            .get(cell)
            .ok_or_else(|| Error::argument(format!("no cell {cell}")))?;
        if !parent.is_leaf() {
            return Err(Error::argument(format!("cell {cell} is not a leaf")));
        }
        if arc >= instance.arc_count() || !instance.arcs[arc].failable {
            return Err(Error::argument(format!("arc {arc} is not failable")));
        }
        if parent.fixed.contains_key(&arc) {
            return Err(Error::argument(format!("arc {arc} is already fixed in cell {cell}")));
        }
        let base = parent.fixed.clone();
        let id1 = self.nodes.len();
        let id0 = id1 + 1;
        for (id, state) in [(id1, true), (id0, false)] {
            let mut fixed = base.clone();
            fixed.insert(arc, state);
            self.nodes.push(Cell {
                id,
                fixed,
                parent: Some(cell),
                children: Vec::new(),
                entry: Some((arc, state)),
            });
        }
        self.nodes[cell].children = vec![id1, id0];
        Ok((id0, id1))
    }

    /// The leaf containing a full scenario; `None` means the leaves do not cover it.
    pub fn leaf_of(&self, scenario: &[bool]) -> Option<CellId> {
        let mut node = self.root();
        loop {
            let c = &self.nodes[node];
            if c.is_leaf() {
                return c.contains(scenario).then_some(node);
            }
            node = *c.children.iter().find(|&&ch| {
                let (k, s) = self.nodes[ch].entry.expect("child has an entry fixing");
                scenario[k] == s
            })?;
        }
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|c| c.fixed.len()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementMode {
    /// Split on the contested arc minimising the children's total error.
    #[default]
    ExactArgmin,
    /// Split on the contested free arc with the smallest id.
    FirstContested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    Upper,
    Lower,
}

/// Bounds and error of one leaf at a fixed `(x, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBounds {
    pub prob: f64,
    pub upper: f64,
    pub lower: f64,
}

impl CellBounds {
    pub fn error(&self) -> f64 {
        (self.prob * (self.upper - self.lower)).max(0.0)
    }
}

/// Instance, probability model and residual network bundled for evaluation.
#[derive(Debug)]
pub struct Evaluator<'a> {
    pub instance: &'a NetworkInstance,
    pub model: &'a StateProbabilityModel,
    pub net: Network,
}

impl<'a> Evaluator<'a> {
    pub fn new(instance: &'a NetworkInstance, model: &'a StateProbabilityModel) -> Self {
        Evaluator {
            instance,
            model,
            net: Network::new(instance),
        }
    }

    pub fn cell_prob(&self, x: &[u8], v: &[u8], cell: &Cell) -> f64 {
        cell_prob_levels(self.model, x, v, cell)
    }

    pub fn cell_mean(&self, x: &[u8], v: &[u8], cell: &Cell) -> Vec<f64> {
        let mut xi = vec![1.0; self.instance.arc_count()];
        cell_mean_into(self.model, self.instance, x, v, cell, &mut xi);
        xi
    }

    pub fn mean_value(&self, xi: &[f64]) -> f64 {
        self.net.max_flow(xi).value
    }

    pub fn penalty_value(&self, xi: &[f64]) -> f64 {
        let p: Vec<f64> = xi.iter().map(|v| 1.0 - v).collect();
        self.net.penalty_flow(&p).value
    }

    /// Probability and both recourse bounds at the cell's conditional mean.
    /// Zero-probability cells skip the flow solves.
    pub fn cell_bounds(&self, x: &[u8], v: &[u8], cell: &Cell) -> CellBounds {
        let prob = self.cell_prob(x, v, cell);
        if prob == 0.0 {
            return CellBounds {
                prob,
                upper: 0.0,
                lower: 0.0,
            };
        }
        let xi = self.cell_mean(x, v, cell);
        CellBounds {
            prob,
            upper: self.mean_value(&xi),
            lower: self.penalty_value(&xi),
        }
    }

    /// `P(cell) * (mean-value bound - penalty bound)`.
    pub fn cell_error(&self, x: &[u8], v: &[u8], cell: &Cell) -> f64 {
        self.cell_bounds(x, v, cell).error()
    }

    pub fn contested_free_arcs(&self, x: &[u8], v: &[u8], cell: &Cell) -> Vec<ArcId> {
        cell.free_arcs(self.instance)
            .filter(|&k| self.model.is_contested(k, x[k], v[k]))
            .collect()
    }

    /// Error of the two children produced by splitting `cell` on `arc`.
    pub fn split_error(&self, x: &[u8], v: &[u8], cell: &Cell, arc: ArcId) -> f64 {
        [true, false]
            .into_iter()
            .map(|state| {
                let mut child = cell.clone();
                child.fixed.insert(arc, state);
                child.entry = Some((arc, state));
                self.cell_error(x, v, &child)
            })
            .sum()
    }

    /// Picks the arc to split `cell` on. Only contested free arcs qualify;
    /// ties go to the smallest arc id.
    pub fn select_refinement_arc(&self, x: &[u8], v: &[u8], cell: &Cell, mode: RefinementMode) -> Result<ArcId> {
        let candidates = self.contested_free_arcs(x, v, cell);
        if candidates.is_empty() {
            return Err(Error::NoContestedArc(cell.id));
        }
        if mode == RefinementMode::FirstContested {
            return Ok(candidates[0]);
        }
        let mut best = (f64::INFINITY, candidates[0]);
        for k in candidates {
            let e = self.split_error(x, v, cell, k);
            if e < best.0 - 1e-12 {
                best = (e, k);
            }
        }
        Ok(best.1)
    }

    /// Per-leaf bounds, keyed by leaf id.
    pub fn leaf_bounds(&self, x: &[u8], v: &[u8], tree: &PartitionTree) -> Vec<(CellId, CellBounds)> {
        tree.leaves()
            .into_iter()
            .map(|id| (id, self.cell_bounds(x, v, tree.cell(id))))
            .collect()
    }

    /// The leaf with the largest error (smallest id on ties) and that error.
    pub fn max_error_leaf(&self, x: &[u8], v: &[u8], tree: &PartitionTree) -> (CellId, f64) {
        let mut best = (tree.root(), f64::NEG_INFINITY);
        for (id, b) in self.leaf_bounds(x, v, tree) {
            let e = b.error();
            if e > best.1 {
                best = (id, e);
            }
        }
        best
    }

    /// Flat sum over leaves of `P(leaf) * g(mean(leaf))`.
    pub fn tree_bound(&self, x: &[u8], v: &[u8], tree: &PartitionTree, mode: BoundMode) -> f64 {
        self.leaf_bounds(x, v, tree)
            .into_iter()
            .map(|(_, b)| {
                b.prob
                    * match mode {
                        BoundMode::Upper => b.upper,
                        BoundMode::Lower => b.lower,
                    }
            })
            .sum()
    }

    /// Same bound through the edge-conditional recursion
    /// `theta(node) = sum_child P(child | node) * theta(child)`.
    pub fn tree_bound_recursive(&self, x: &[u8], v: &[u8], tree: &PartitionTree, mode: BoundMode) -> f64 {
        self.theta(x, v, tree, tree.root(), mode)
    }

    fn theta(&self, x: &[u8], v: &[u8], tree: &PartitionTree, node: CellId, mode: BoundMode) -> f64 {
        let cell = tree.cell(node);
        if cell.is_leaf() {
            let xi = self.cell_mean(x, v, cell);
            return match mode {
                BoundMode::Upper => self.mean_value(&xi),
                BoundMode::Lower => self.penalty_value(&xi),
            };
        }
        cell.children
            .iter()
            .map(|&ch| {
                let (k, s) = tree.cell(ch).entry.expect("child has an entry fixing");
                let rho = self.model.prob_of(k, s, x[k], v[k]);
                if rho == 0.0 {
                    0.0
                } else {
                    rho * self.theta(x, v, tree, ch, mode)
                }
            })
            .sum()
    }

    /// Indented text dump, one line per node:
    /// `id fixing P=.. ub=.. lb=.. err=..` (bounds only on leaves).
    pub fn dump_tree(&self, x: &[u8], v: &[u8], tree: &PartitionTree) -> String {
        let mut out = String::new();
        self.dump_node(x, v, tree, tree.root(), 0, &mut out);
        out
    }

    fn dump_node(&self, x: &[u8], v: &[u8], tree: &PartitionTree, node: CellId, depth: usize, out: &mut String) {
        let cell = tree.cell(node);
        let fixing = match cell.entry {
            Some((k, s)) => format!("ξ[{k}]={}", s as u8),
            None => "root".to_string(),
        };
        let b = self.cell_bounds(x, v, cell);
        let _ = write!(out, "{:indent$}{} {} P={:.6}", "", cell.id, fixing, b.prob, indent = depth * 2);
        if cell.is_leaf() {
            let _ = write!(out, " ub={:.6} lb={:.6} err={:.6}", b.upper, b.lower, b.error());
        }
        out.push('\n');
        for &ch in &cell.children {
            self.dump_node(x, v, tree, ch, depth + 1, out);
        }
    }
}

/// Free-function form of [`Evaluator::cell_error`].
pub fn cell_error(instance: &NetworkInstance, model: &StateProbabilityModel, x: &Allocation, v: &Allocation, cell: &Cell) -> f64 {
    Evaluator::new(instance, model).cell_error(x.levels(), v.levels(), cell)
}

pub fn select_refinement_arc(
    instance: &NetworkInstance,
    model: &StateProbabilityModel,
    x: &Allocation,
    v: &Allocation,
    cell: &Cell,
    mode: RefinementMode,
) -> Result<ArcId> {
    Evaluator::new(instance, model).select_refinement_arc(x.levels(), v.levels(), cell, mode)
}

pub fn tree_bound(
    instance: &NetworkInstance,
    model: &StateProbabilityModel,
    x: &Allocation,
    v: &Allocation,
    tree: &PartitionTree,
    mode: BoundMode,
) -> f64 {
    Evaluator::new(instance, model).tree_bound(x.levels(), v.levels(), tree, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_grid, Role};

    fn setup() -> (NetworkInstance, StateProbabilityModel) {
        let inst = generate_grid(2, 2, 2, 1, 3).unwrap();
        let model = StateProbabilityModel::for_instance(&inst);
        (inst, model)
    }

    #[test]
    fn refine_root() {
        let (inst, _) = setup();
        let mut tree = PartitionTree::new();
        let (c0, c1) = tree.refine(&inst, 0, 3).unwrap();
        assert_eq!(tree.leaves(), vec![1, 2]);
        assert_eq!(tree.cell(c0).fixed.get(&3), Some(&false));
        assert_eq!(tree.cell(c1).fixed.get(&3), Some(&true));
        assert!(tree.refine(&inst, 0, 4).is_err());
        assert!(tree.refine(&inst, c0, 3).is_err());
        let terminal = inst.arcs.iter().position(|a| !a.failable).unwrap();
        assert!(tree.refine(&inst, c0, terminal).is_err());
        assert_eq!(tree.refinements(), 1);
    }

    #[test]
    fn unrefined_unattacked_bounds_are_nominal() {
        let (inst, model) = setup();
        let ev = Evaluator::new(&inst, &model);
        let x = vec![0; inst.arc_count()];
        let tree = PartitionTree::new();
        let nominal = ev.mean_value(&vec![1.0; inst.arc_count()]);
        assert_eq!(ev.tree_bound(&x, &x, &tree, BoundMode::Upper), nominal);
        assert_eq!(ev.tree_bound(&x, &x, &tree, BoundMode::Lower), nominal);
    }

    #[test]
    fn fully_fixed_and_zero_probability_leaves_have_no_error() {
        let (inst, model) = setup();
        let ev = Evaluator::new(&inst, &model);
        let x = Allocation::from_pairs(&inst, Role::Defender, &[(0, 1)]).unwrap();
        let v = Allocation::from_pairs(&inst, Role::Attacker, &[(0, 1), (1, 1)]).unwrap();
        let mut cell = Cell::root();
        for k in inst.failable_arcs() {
            cell.fixed.insert(k, k % 3 != 0);
        }
        assert_eq!(ev.cell_error(x.levels(), v.levels(), &cell), 0.0);
        // arc 1 is attacked and undefended, so it cannot be available
        let mut dead = Cell::root();
        dead.fixed.insert(1, true);
        assert_eq!(ev.cell_prob(x.levels(), v.levels(), &dead), 0.0);
        assert_eq!(ev.cell_error(x.levels(), v.levels(), &dead), 0.0);
    }

    #[test]
    fn refinement_candidates_are_contested() {
        let (inst, model) = setup();
        let ev = Evaluator::new(&inst, &model);
        let x = Allocation::from_pairs(&inst, Role::Defender, &[(2, 1)]).unwrap();
        let v = Allocation::from_pairs(&inst, Role::Attacker, &[(2, 1), (5, 1)]).unwrap();
        let root = Cell::root();
        assert_eq!(ev.select_refinement_arc(x.levels(), v.levels(), &root, RefinementMode::ExactArgmin).unwrap(), 2);
        assert_eq!(ev.select_refinement_arc(x.levels(), v.levels(), &root, RefinementMode::FirstContested).unwrap(), 2);
        let v2 = Allocation::from_pairs(&inst, Role::Attacker, &[(5, 1)]).unwrap();
        assert!(matches!(
            ev.select_refinement_arc(x.levels(), v2.levels(), &root, RefinementMode::ExactArgmin),
            Err(Error::NoContestedArc(0))
        ));
    }

    #[test]
    fn children_probabilities_sum_to_parent() {
        let (inst, model) = setup();
        let ev = Evaluator::new(&inst, &model);
        let x = Allocation::from_pairs(&inst, Role::Defender, &[(2, 1), (4, 1)]).unwrap();
        let v = Allocation::from_pairs(&inst, Role::Attacker, &[(2, 1), (4, 1)]).unwrap();
        let mut tree = PartitionTree::new();
        let (a0, a1) = tree.refine(&inst, 0, 4).unwrap();
        let (b0, b1) = tree.refine(&inst, a1, 2).unwrap();
        let p = |id| ev.cell_prob(x.levels(), v.levels(), tree.cell(id));
        assert_eq!(p(b0) + p(b1), p(a1));
        assert_eq!(p(a0) + p(a1), 1.0);
        let dump = ev.dump_tree(x.levels(), v.levels(), &tree);
        assert_eq!(dump.lines().count(), 5);
        assert!(dump.contains("ξ[4]=1"));
    }
}
