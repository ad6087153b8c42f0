//! Network instances: data model, the seeded grid generator, and JSON persistence.
//!
//! Arc ids are dense and assigned in a canonical order by the generator:
//! interior nodes in row-major order, each emitting its outgoing grid arcs in
//! the order right, down, left, up; then the source arcs (leftmost column, top
//! to bottom); then the sink arcs (rightmost column, top to bottom).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type ArcId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub id: ArcId,
    pub tail: NodeId,
    pub head: NodeId,
    #[serde(serialize_with = "serialize_number")]
    pub capacity: f64,
    pub failable: bool,
}

/// Integral values are written without a fractional part so generated files
/// read naturally; everything else uses the shortest round-trip form.
fn serialize_number<S: Serializer>(value: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if value.fract() == 0.0 && value.abs() < 9.0e15 {
        s.serialize_i64(*value as i64)
    } else {
        s.serialize_f64(*value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    #[serde(rename = "nodes")]
    pub node_count: usize,
    pub source: NodeId,
    pub sink: NodeId,
    pub defender_budget: u32,
    pub attacker_budget: u32,
    pub defender_levels: u32,
    pub attacker_levels: u32,
    pub seed: u64,
    pub arcs: Vec<Arc>,
}

/// Which player an allocation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Defender,
    Attacker,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Defender => f.write_str("defender"),
            Role::Attacker => f.write_str("attacker"),
        }
    }
}

impl NetworkInstance {
    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// Ids of the failable arcs, ascending.
    pub fn failable_arcs(&self) -> Vec<ArcId> {
        self.arcs.iter().filter(|a| a.failable).map(|a| a.id).collect()
    }

    pub fn failable_count(&self) -> usize {
        self.arcs.iter().filter(|a| a.failable).count()
    }

    pub fn levels(&self, role: Role) -> u32 {
        match role {
            Role::Defender => self.defender_levels,
            Role::Attacker => self.attacker_levels,
        }
    }

    pub fn budget(&self, role: Role) -> u32 {
        match role {
            Role::Defender => self.defender_budget,
            Role::Attacker => self.attacker_budget,
        }
    }

    /// Total level units a player may spend: `levels * budget`.
    pub fn budget_units(&self, role: Role) -> u32 {
        self.levels(role) * self.budget(role)
    }

    pub fn total_failable_capacity(&self) -> f64 {
        self.arcs.iter().filter(|a| a.failable).map(|a| a.capacity).sum()
    }

    /// Checks every structural invariant, reporting the first violation with
    /// the JSON path of the offending field.
    pub fn validate(&self) -> Result<()> {
        let n = self.node_count;
        if n < 2 {
            return Err(Error::invariant("nodes", "need at least two nodes"));
        }
        if self.source >= n {
            return Err(Error::invariant("source", "not a valid node id"));
        }
        if self.sink >= n {
            return Err(Error::invariant("sink", "not a valid node id"));
        }
        if self.source == self.sink {
            return Err(Error::invariant("sink", "source and sink coincide"));
        }
        if self.defender_levels == 0 {
            return Err(Error::invariant("defender_levels", "must be at least 1"));
        }
        if self.attacker_levels == 0 {
            return Err(Error::invariant("attacker_levels", "must be at least 1"));
        }
        if self.defender_levels > u8::MAX as u32 || self.attacker_levels > u8::MAX as u32 {
            return Err(Error::invariant("defender_levels", "at most 255 levels supported"));
        }
        let big = self.total_failable_capacity() + 1.0;
        for (i, arc) in self.arcs.iter().enumerate() {
            let path = |field: &str| format!("arcs[{i}].{field}");
            if arc.id != i {
                return Err(Error::invariant(path("id"), format!("expected dense id {i}, found {}", arc.id)));
            }
            if arc.tail >= n {
                return Err(Error::invariant(path("tail"), "not a valid node id"));
            }
            if arc.head >= n {
                return Err(Error::invariant(path("head"), "not a valid node id"));
            }
            if arc.tail == arc.head {
                return Err(Error::invariant(path("head"), "self-loop"));
            }
            if !arc.capacity.is_finite() || arc.capacity <= 0.0 {
                return Err(Error::schema(path("capacity"), format!("arc {} capacity must be positive and finite", arc.id)));
            }
            let terminal = arc.tail == self.source
                || arc.head == self.source
                || arc.tail == self.sink
                || arc.head == self.sink;
            if terminal && arc.failable {
                return Err(Error::invariant(path("failable"), format!("arc {} touches the source or sink and cannot fail", arc.id)));
            }
            if terminal && arc.capacity < big {
                return Err(Error::invariant(
                    path("capacity"),
                    format!("source/sink arc {} needs capacity >= {big}", arc.id),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let inst: NetworkInstance = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::schema(path, e.into_inner().to_string())
        })?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Parameters of the random grid generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub budget: u32,
    pub levels: u32,
    pub seed: u64,
    pub capacity_min: u32,
    pub capacity_max: u32,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, budget: u32, levels: u32, seed: u64) -> Self {
        GridSpec {
            rows,
            cols,
            budget,
            levels,
            seed,
            capacity_min: 1,
            capacity_max: 10,
        }
    }

    pub fn generate(&self) -> Result<NetworkInstance> {
        let (rows, cols) = (self.rows, self.cols);
        if rows < 2 || cols < 2 {
            return Err(Error::argument(format!("grid must be at least 2x2, got {rows}x{cols}")));
        }
        if self.levels == 0 {
            return Err(Error::argument("levels must be at least 1"));
        }
        if self.capacity_min == 0 || self.capacity_min > self.capacity_max {
            return Err(Error::argument(format!(
                "capacity range [{}, {}] is invalid",
                self.capacity_min, self.capacity_max
            )));
        }
        let interior = rows * cols;
        let source = interior;
        let sink = interior + 1;
        let node = |r: usize, c: usize| r * cols + c;

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut arcs = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let u = node(r, c);
                let mut neighbours = Vec::with_capacity(4);
                if c + 1 < cols {
                    neighbours.push(node(r, c + 1));
                }
                if r + 1 < rows {
                    neighbours.push(node(r + 1, c));
                }
                if c > 0 {
                    neighbours.push(node(r, c - 1));
                }
                if r > 0 {
                    neighbours.push(node(r - 1, c));
                }
                for v in neighbours {
                    let cap = rng.gen_range(self.capacity_min..=self.capacity_max);
                    arcs.push(Arc {
                        id: arcs.len(),
                        tail: u,
                        head: v,
                        capacity: cap as f64,
                        failable: true,
                    });
                }
            }
        }
        let big = arcs.iter().map(|a| a.capacity).sum::<f64>() + 1.0;
        for r in 0..rows {
            arcs.push(Arc {
                id: arcs.len(),
                tail: source,
                head: node(r, 0),
                capacity: big,
                failable: false,
            });
        }
        for r in 0..rows {
            arcs.push(Arc {
                id: arcs.len(),
                tail: node(r, cols - 1),
                head: sink,
                capacity: big,
                failable: false,
            });
        }
        let inst = NetworkInstance {
            node_count: interior + 2,
            source,
            sink,
            defender_budget: self.budget,
            attacker_budget: self.budget,
            defender_levels: self.levels,
            attacker_levels: self.levels,
            seed: self.seed,
            arcs,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// Random `rows x cols` grid with equal defender/attacker budgets and levels
/// and failable capacities uniform on the integers 1..=10.
pub fn generate_grid(rows: usize, cols: usize, budget: u32, levels: u32, seed: u64) -> Result<NetworkInstance> {
    GridSpec::new(rows, cols, budget, levels, seed).generate()
}

/// Small random network for exhaustive cross-checks: `failable` arcs between
/// 3 or 4 interior nodes (at most 12), with non-failable source arcs into a
/// prefix of the interior nodes and sink arcs out of the rest.
pub fn random_network(seed: u64, failable: usize, budget: u32, levels: u32) -> Result<NetworkInstance> {
    if failable > 12 {
        return Err(Error::argument(format!("at most 12 failable arcs, got {failable}")));
    }
    if levels == 0 {
        return Err(Error::argument("levels must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior = if failable > 6 { 4 } else { rng.gen_range(3..=4usize) };
    let (source, sink) = (interior, interior + 1);
    let mut pairs: Vec<(NodeId, NodeId)> = (0..interior)
        .flat_map(|i| (0..interior).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    pairs.shuffle(&mut rng);
    let mut arcs: Vec<Arc> = pairs
        .iter()
        .take(failable)
        .enumerate()
        .map(|(id, &(tail, head))| Arc {
            id,
            tail,
            head,
            capacity: rng.gen_range(1..=10u32) as f64,
            failable: true,
        })
        .collect();
    let big = arcs.iter().map(|a| a.capacity).sum::<f64>() + 1.0;
    let entries = rng.gen_range(1..interior);
    for node in 0..interior {
        let (tail, head) = if node < entries { (source, node) } else { (node, sink) };
        arcs.push(Arc {
            id: arcs.len(),
            tail,
            head,
            capacity: big,
            failable: false,
        });
    }
    let inst = NetworkInstance {
        node_count: interior + 2,
        source,
        sink,
        defender_budget: budget,
        attacker_budget: budget,
        defender_levels: levels,
        attacker_levels: levels,
        seed,
        arcs,
    };
    inst.validate()?;
    Ok(inst)
}

/// Per-arc allocation levels for one player. Level 0 means no units.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    pub role: Role,
    levels: Vec<u8>,
}

impl Allocation {
    pub fn zero(instance: &NetworkInstance, role: Role) -> Self {
        Allocation {
            role,
            levels: vec![0; instance.arc_count()],
        }
    }

    /// Builds an allocation from a dense per-arc level vector.
    pub fn from_levels(role: Role, levels: Vec<u8>) -> Self {
        Allocation { role, levels }
    }

    /// Builds an allocation from `(arc, level)` pairs, checking feasibility.
    pub fn from_pairs(instance: &NetworkInstance, role: Role, pairs: &[(ArcId, u8)]) -> Result<Self> {
        let mut alloc = Allocation::zero(instance, role);
        for &(k, l) in pairs {
            if k >= instance.arc_count() {
                return Err(Error::argument(format!("arc {k} out of range")));
            }
            alloc.levels[k] = l;
        }
        alloc.check(instance)?;
        Ok(alloc)
    }

    pub fn level(&self, arc: ArcId) -> u8 {
        self.levels[arc]
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn units(&self) -> u32 {
        self.levels.iter().map(|&l| l as u32).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.levels.iter().all(|&l| l == 0)
    }

    /// Binary encoding: `x_{k,l} = 1` iff arc `k` carries exactly `l` units.
    pub fn indicator(&self, arc: ArcId, level: u8) -> bool {
        self.levels[arc] == level
    }

    /// Nonzero levels keyed by arc id.
    pub fn to_map(&self) -> BTreeMap<ArcId, u8> {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0)
            .map(|(k, &l)| (k, l))
            .collect()
    }

    pub fn check(&self, instance: &NetworkInstance) -> Result<()> {
        if self.levels.len() != instance.arc_count() {
            return Err(Error::argument(format!(
                "allocation covers {} arcs, instance has {}",
                self.levels.len(),
                instance.arc_count()
            )));
        }
        let max_level = instance.levels(self.role);
        for (k, &l) in self.levels.iter().enumerate() {
            if l as u32 > max_level {
                return Err(Error::invariant(format!("levels[{k}]"), format!("level {l} exceeds {max_level}")));
            }
            if l > 0 && !instance.arcs[k].failable {
                return Err(Error::invariant(format!("levels[{k}]"), "non-failable arcs take no units"));
            }
        }
        let cap = instance.budget_units(self.role);
        if self.units() > cap {
            return Err(Error::invariant(
                "levels",
                format!("{} uses {} units, budget allows {cap}", self.role, self.units()),
            ));
        }
        Ok(())
    }

    pub fn is_feasible(&self, instance: &NetworkInstance) -> bool {
        self.check(instance).is_ok()
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_map().iter().map(|(k, l)| format!("{k}:{l}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}
