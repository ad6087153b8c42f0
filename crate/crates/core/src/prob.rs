//! Decision-dependent arc state probabilities.
//!
//! The default model is the contest success function: with `l` defender and
//! `l'` attacker units on an arc, it survives with probability `l / (l + l')`
//! when attacked, always survives when not attacked, and always fails when
//! attacked but undefended. Per-arc override tables replace it arc by arc.

use std::collections::BTreeMap;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::AvailabilityVector;
use crate::instance::{Allocation, ArcId, NetworkInstance};
use crate::partition::Cell;

/// `f_k(state; l, l')` for one arc, indexed `[state][l][l']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub arc: ArcId,
    pub f: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTables {
    pub tables: Vec<ProbabilityTable>,
}

impl ProbabilityTables {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::schema(path, e.into_inner().to_string())
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateProbabilityModel {
    defender_levels: u32,
    attacker_levels: u32,
    /// Survival probabilities `f_k(1; l, l')` for overridden arcs, `[l][l']`.
    overrides: BTreeMap<ArcId, Vec<Vec<f64>>>,
}

impl StateProbabilityModel {
    pub fn contest(defender_levels: u32, attacker_levels: u32) -> Self {
        StateProbabilityModel {
            defender_levels,
            attacker_levels,
            overrides: BTreeMap::new(),
        }
    }

    pub fn for_instance(instance: &NetworkInstance) -> Self {
        Self::contest(instance.defender_levels, instance.attacker_levels)
    }

    /// Contest model with some arcs replaced by explicit tables. Each table
    /// must be `2 x (L+1) x (L'+1)` with complementary rows.
    pub fn with_tables(instance: &NetworkInstance, tables: &ProbabilityTables) -> Result<Self> {
        let mut model = Self::for_instance(instance);
        let (lx, lv) = (instance.defender_levels as usize, instance.attacker_levels as usize);
        for (i, t) in tables.tables.iter().enumerate() {
            let path = |s: &str| format!("tables[{i}].{s}");
            if t.arc >= instance.arc_count() {
                return Err(Error::invariant(path("arc"), format!("arc {} out of range", t.arc)));
            }
            if t.f.len() != 2 || t.f.iter().any(|rows| rows.len() != lx + 1 || rows.iter().any(|r| r.len() != lv + 1)) {
                return Err(Error::schema(path("f"), format!("expected shape 2 x {} x {}", lx + 1, lv + 1)));
            }
            for l in 0..=lx {
                for lp in 0..=lv {
                    let (p0, p1) = (t.f[0][l][lp], t.f[1][l][lp]);
                    if !(0.0..=1.0).contains(&p0) || !(0.0..=1.0).contains(&p1) || (p0 + p1 - 1.0).abs() > 1e-12 {
                        return Err(Error::invariant(
                            path(&format!("f[*][{l}][{lp}]")),
                            "state probabilities must lie in [0, 1] and sum to 1",
                        ));
                    }
                }
            }
            model.overrides.insert(t.arc, t.f[1].clone());
        }
        Ok(model)
    }

    pub fn defender_levels(&self) -> u32 {
        self.defender_levels
    }

    pub fn attacker_levels(&self) -> u32 {
        self.attacker_levels
    }

    pub fn has_overrides(&self) -> bool {
        !self.overrides.is_empty()
    }

    /// `f_k(1; l, l')` without range checks.
    #[inline]
    pub fn survival(&self, arc: ArcId, x_level: u8, v_level: u8) -> f64 {
        if let Some(t) = self.overrides.get(&arc) {
            return t[x_level as usize][v_level as usize];
        }
        contest_survival(x_level, v_level)
    }

    #[inline]
    pub fn prob_of(&self, arc: ArcId, state: bool, x_level: u8, v_level: u8) -> f64 {
        let s = self.survival(arc, x_level, v_level);
        if state {
            s
        } else {
            1.0 - s
        }
    }

    /// Exact survival probability; only available for contest arcs.
    pub fn survival_exact(&self, arc: ArcId, x_level: u8, v_level: u8) -> Option<Ratio<u64>> {
        if self.overrides.contains_key(&arc) {
            return None;
        }
        let (x, v) = (x_level as u64, v_level as u64);
        Some(if v == 0 { Ratio::one() } else { Ratio::new(x, x + v) })
    }

    /// `f_k(state; x_level, v_level)` with level range checks.
    pub fn state_prob(&self, arc: ArcId, state: bool, x_level: u32, v_level: u32) -> Result<f64> {
        if x_level > self.defender_levels {
            return Err(Error::argument(format!("defender level {x_level} exceeds {}", self.defender_levels)));
        }
        if v_level > self.attacker_levels {
            return Err(Error::argument(format!("attacker level {v_level} exceeds {}", self.attacker_levels)));
        }
        Ok(self.prob_of(arc, state, x_level as u8, v_level as u8))
    }

    /// True when the arc's state is random under the given levels.
    #[inline]
    pub fn is_contested(&self, arc: ArcId, x_level: u8, v_level: u8) -> bool {
        let s = self.survival(arc, x_level, v_level);
        s > 0.0 && s < 1.0
    }
}

#[inline]
fn contest_survival(x: u8, v: u8) -> f64 {
    if v == 0 {
        1.0
    } else {
        x as f64 / (x as f64 + v as f64)
    }
}

/// Probability of a binary scenario under independent arc failures.
pub fn scenario_prob(
    model: &StateProbabilityModel,
    instance: &NetworkInstance,
    x: &Allocation,
    v: &Allocation,
    scenario: &AvailabilityVector,
) -> Result<f64> {
    if !scenario.is_binary() {
        return Err(Error::argument("scenario must be binary"));
    }
    Ok(instance
        .failable_arcs()
        .into_iter()
        .map(|k| model.prob_of(k, scenario.get(k) == 1.0, x.level(k), v.level(k)))
        .product())
}

/// Exact rational scenario probability (contest arcs only).
pub fn scenario_prob_exact(
    model: &StateProbabilityModel,
    instance: &NetworkInstance,
    x: &Allocation,
    v: &Allocation,
    scenario: &AvailabilityVector,
) -> Result<BigRational> {
    if !scenario.is_binary() {
        return Err(Error::argument("scenario must be binary"));
    }
    let mut p = BigRational::one();
    for k in instance.failable_arcs() {
        let s = model
            .survival_exact(k, x.level(k), v.level(k))
            .ok_or_else(|| Error::argument(format!("arc {k} uses a floating-point override table")))?;
        let f = if scenario.get(k) == 1.0 { s } else { Ratio::one() - s };
        if f.is_zero() {
            return Ok(BigRational::zero());
        }
        p *= BigRational::new(BigInt::from(*f.numer()), BigInt::from(*f.denom()));
    }
    Ok(p)
}

fn check_cell(cell: &Cell) -> Result<()> {
    if cell.is_consistent() {
        Ok(())
    } else {
        Err(Error::invariant(format!("cell[{}]", cell.id), "arc fixed to both states"))
    }
}

/// Probability mass of a cell: the product of its fixed arcs' state probabilities.
pub fn cell_prob(model: &StateProbabilityModel, x: &Allocation, v: &Allocation, cell: &Cell) -> Result<f64> {
    check_cell(cell)?;
    Ok(cell_prob_levels(model, x.levels(), v.levels(), cell))
}

#[inline]
pub(crate) fn cell_prob_levels(model: &StateProbabilityModel, x: &[u8], v: &[u8], cell: &Cell) -> f64 {
    let mut p = 1.0;
    for (&k, &state) in cell.fixed.iter() {
        p *= model.prob_of(k, state, x[k], v[k]);
        if p == 0.0 {
            break;
        }
    }
    p
}

/// Conditional mean availability inside a cell.
pub fn cell_mean(
    model: &StateProbabilityModel,
    instance: &NetworkInstance,
    x: &Allocation,
    v: &Allocation,
    cell: &Cell,
) -> Result<AvailabilityVector> {
    check_cell(cell)?;
    let mut xi = vec![1.0; instance.arc_count()];
    cell_mean_into(model, instance, x.levels(), v.levels(), cell, &mut xi);
    AvailabilityVector::from_dense(instance, xi)
}

#[inline]
pub(crate) fn cell_mean_into(
    model: &StateProbabilityModel,
    instance: &NetworkInstance,
    x: &[u8],
    v: &[u8],
    cell: &Cell,
    xi: &mut [f64],
) {
    for a in &instance.arcs {
        xi[a.id] = if !a.failable {
            1.0
        } else if let Some(&state) = cell.fixed.get(&a.id) {
            if state {
                1.0
            } else {
                0.0
            }
        } else {
            model.survival(a.id, x[a.id], v[a.id])
        };
    }
}

/// `P(child | parent)`: the probability of the one state the child fixes on top of its parent.
pub fn edge_cond_prob(model: &StateProbabilityModel, x: &Allocation, v: &Allocation, parent: &Cell, child: &Cell) -> Result<f64> {
    let (k, state) = immediate_refinement(parent, child)?;
    Ok(model.prob_of(k, state, x.level(k), v.level(k)))
}

fn immediate_refinement(parent: &Cell, child: &Cell) -> Result<(ArcId, bool)> {
    if child.fixed.len() != parent.fixed.len() + 1 || parent.fixed.iter().any(|(k, s)| child.fixed.get(k) != Some(s)) {
        return Err(Error::argument(format!(
            "cell {} is not an immediate refinement of cell {}",
            child.id, parent.id
        )));
    }
    child
        .fixed
        .iter()
        .find(|(k, _)| !parent.fixed.contains_key(k))
        .map(|(&k, &s)| (k, s))
        .ok_or_else(|| Error::argument("child fixes no new arc"))
}
