mod common;

use interdict::oracle;
use interdict::partition::{Evaluator, PartitionTree};
use interdict::{random_network, Allocation, BoundMode, NetworkInstance, Role, StateProbabilityModel};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Draw {
    inst: NetworkInstance,
    x: Allocation,
    v: Allocation,
}

fn draw(seed: u64, failable: usize) -> Draw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = rng.gen_range(1..=2);
    let levels = rng.gen_range(1..=3);
    let inst = random_network(seed, failable, budget, levels).unwrap();
    let x = common::random_allocation(&mut rng, &inst, Role::Defender);
    let v = common::random_allocation(&mut rng, &inst, Role::Attacker);
    Draw { inst, x, v }
}

fn refine_randomly(rng: &mut impl Rng, tree: &mut PartitionTree, inst: &NetworkInstance) -> bool {
    let mut leaves = tree.leaves();
    leaves.shuffle(rng);
    for leaf in leaves {
        let free: Vec<_> = tree.cell(leaf).free_arcs(inst).collect();
        if let Some(&arc) = free.choose(rng) {
            tree.refine(inst, leaf, arc).unwrap();
            return true;
        }
    }
    false
}

fn refine_fully(tree: &mut PartitionTree, inst: &NetworkInstance) {
    loop {
        let next = tree
            .leaves()
            .into_iter()
            .find_map(|leaf| tree.cell(leaf).free_arcs(inst).next().map(|arc| (leaf, arc)));
        match next {
            Some((leaf, arc)) => {
                tree.refine(inst, leaf, arc).unwrap();
            }
            None => break,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn refinement_tightens_both_bounds(seed in 0u64..10_000, n in 1usize..=7, steps in 1usize..10) {
        let d = draw(seed, n);
        let model = StateProbabilityModel::for_instance(&d.inst);
        let ev = Evaluator::new(&d.inst, &model);
        let (x, v) = (d.x.levels(), d.v.levels());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut tree = PartitionTree::new();
        let mut ub = ev.tree_bound(x, v, &tree, BoundMode::Upper);
        let mut lb = ev.tree_bound(x, v, &tree, BoundMode::Lower);
        for _ in 0..steps {
            if !refine_randomly(&mut rng, &mut tree, &d.inst) {
                break;
            }
            let (u, l) = (ev.tree_bound(x, v, &tree, BoundMode::Upper), ev.tree_bound(x, v, &tree, BoundMode::Lower));
            prop_assert!(u <= ub + 1e-9 && l >= lb - 1e-9);
            prop_assert!(l <= u + 1e-9);
            ub = u;
            lb = l;
        }
    }

    #[test]
    fn recursive_and_flat_bounds_agree(seed in 0u64..10_000, n in 1usize..=7, steps in 0usize..12) {
        let d = draw(seed, n);
        let model = StateProbabilityModel::for_instance(&d.inst);
        let ev = Evaluator::new(&d.inst, &model);
        let (x, v) = (d.x.levels(), d.v.levels());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = PartitionTree::new();
        for _ in 0..steps {
            refine_randomly(&mut rng, &mut tree, &d.inst);
        }
        for mode in [BoundMode::Upper, BoundMode::Lower] {
            let flat = ev.tree_bound(x, v, &tree, mode);
            let rec = ev.tree_bound_recursive(x, v, &tree, mode);
            prop_assert!((flat - rec).abs() < 1e-9, "{flat} vs {rec}");
        }
    }

    #[test]
    fn leaves_partition_the_scenario_space(seed in 0u64..10_000, n in 1usize..=6, steps in 0usize..12) {
        let d = draw(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = PartitionTree::new();
        for _ in 0..steps {
            refine_randomly(&mut rng, &mut tree, &d.inst);
        }
        let failable = d.inst.failable_arcs();
        let leaves = tree.leaves();
        for mask in 0u32..(1 << failable.len()) {
            let mut scenario = vec![true; d.inst.arc_count()];
            for (j, &k) in failable.iter().enumerate() {
                scenario[k] = mask >> j & 1 == 1;
            }
            let holders = leaves.iter().filter(|&&l| tree.cell(l).contains(&scenario)).count();
            prop_assert_eq!(holders, 1);
            prop_assert!(tree.leaf_of(&scenario).is_some());
        }
    }

    #[test]
    fn refinement_count_tracks_tree_size(seed in 0u64..10_000, n in 1usize..=6, steps in 0usize..12) {
        let d = draw(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = PartitionTree::new();
        let mut done = 0;
        for _ in 0..steps {
            if refine_randomly(&mut rng, &mut tree, &d.inst) {
                done += 1;
            }
        }
        prop_assert_eq!(tree.refinements(), done);
        prop_assert_eq!(tree.leaf_count(), done + 1);
        prop_assert_eq!(tree.len(), 2 * done + 1);
    }
}

#[test]
fn full_refinement_recovers_the_exact_expectation() {
    for seed in 0..30u64 {
        let d = draw(seed, 1 + seed as usize % 6);
        let model = StateProbabilityModel::for_instance(&d.inst);
        let ev = Evaluator::new(&d.inst, &model);
        let mut tree = PartitionTree::new();
        refine_fully(&mut tree, &d.inst);
        let exact = oracle::to_f64(&oracle::expected_value(&d.inst, &d.x, &d.v).unwrap());
        let u = ev.tree_bound(d.x.levels(), d.v.levels(), &tree, BoundMode::Upper);
        let l = ev.tree_bound(d.x.levels(), d.v.levels(), &tree, BoundMode::Lower);
        assert!((u - exact).abs() < 1e-9 && (l - exact).abs() < 1e-9, "seed {seed}: {l} {u} {exact}");
    }
}

#[test]
fn refining_on_an_arc_twice_is_rejected() {
    let d = draw(3, 4);
    let mut tree = PartitionTree::new();
    let arc = d.inst.failable_arcs()[0];
    let (a, _) = tree.refine(&d.inst, 0, arc).unwrap();
    assert!(tree.refine(&d.inst, a, arc).is_err());
    assert!(tree.refine(&d.inst, 0, d.inst.failable_arcs()[1]).is_err());
}
