#![allow(dead_code)]

use interdict::{Allocation, NetworkInstance, Role};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random feasible allocation, built arc by arc in random order.
pub fn random_allocation(rng: &mut impl Rng, inst: &NetworkInstance, role: Role) -> Allocation {
    let mut arcs = inst.failable_arcs();
    arcs.shuffle(rng);
    let mut levels = vec![0u8; inst.arc_count()];
    let mut left = inst.budget_units(role);
    let lmax = inst.levels(role);
    for k in arcs {
        let l = rng.gen_range(0..=lmax.min(left));
        levels[k] = l as u8;
        left -= l;
    }
    Allocation::from_levels(role, levels)
}
