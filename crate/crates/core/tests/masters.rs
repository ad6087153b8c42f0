mod common;

use interdict::flow::{max_flow, AvailabilityVector};
use interdict::masters::{attacker_best_response, enumerate_allocations, solve_defender, solve_defender_with_model, AllocationSpace, MasterMode, SolverConfig};
use interdict::oracle::{self, to_f64};
use interdict::partition::{Evaluator, PartitionTree, RefinementMode};
use interdict::{generate_grid, random_network, Allocation, NetworkInstance, Role, StateProbabilityModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn nominal(inst: &NetworkInstance) -> f64 {
    max_flow(inst, &AvailabilityVector::all_available(inst)).unwrap().0
}

/// Counts allocations by dynamic programming over arcs, independently of
/// the enumerator.
fn dp_count(arcs: usize, max_level: usize, units: usize) -> u64 {
    let mut ways = vec![0u64; units + 1];
    ways[0] = 1;
    for _ in 0..arcs {
        let prev = ways.clone();
        for u in 0..=units {
            ways[u] = (0..=max_level.min(u)).map(|l| prev[u - l]).sum();
        }
    }
    ways.iter().sum()
}

#[test]
fn allocation_counts_match_dynamic_programming() {
    for (r, b, l) in [(2, 1, 1), (2, 2, 2), (3, 2, 2), (3, 1, 3)] {
        let inst = generate_grid(r, r, b, l, 0).unwrap();
        let n = enumerate_allocations(&inst, Role::Attacker).count() as u64;
        assert_eq!(n, dp_count(inst.failable_count(), l as usize, (b * l) as usize));
        assert_eq!(AllocationSpace::new(&inst, Role::Attacker).count(), n as u128);
    }
}

#[test]
fn allocations_are_lexicographic_and_feasible() {
    let inst = generate_grid(2, 2, 2, 2, 1).unwrap();
    let all: Vec<Allocation> = enumerate_allocations(&inst, Role::Defender).collect();
    assert!(all.iter().all(|a| a.is_feasible(&inst)));
    let arcs = inst.failable_arcs();
    let key = |a: &Allocation| arcs.iter().map(|&k| a.level(k)).collect::<Vec<_>>();
    assert!(all.windows(2).all(|w| key(&w[0]) < key(&w[1])));
}

#[test]
fn no_attack_budget_means_no_attack() {
    let mut inst = generate_grid(2, 2, 1, 2, 5).unwrap();
    inst.attacker_budget = 0;
    let model = StateProbabilityModel::for_instance(&inst);
    let x = Allocation::zero(&inst, Role::Defender);
    let mut tree = PartitionTree::new();
    let r = attacker_best_response(&inst, &model, &x, &mut tree, &SolverConfig::unlimited()).unwrap();
    assert!(r.v.is_zero());
    assert_eq!(r.value, nominal(&inst));
    assert_eq!(r.refinements, 0);

    let report = solve_defender(&inst, &SolverConfig::unlimited()).unwrap();
    assert_eq!(report.objective, Some(nominal(&inst)));
    assert_eq!(report.refinements, 0);
    assert_eq!(report.iterations, 1);
}

#[test]
fn cutting_every_source_arc_undefended_gives_zero() {
    // both rightward arcs out of the left column carry all the flow;
    // attacking them undefended disconnects the sink
    let inst = generate_grid(2, 2, 2, 1, 2).unwrap();
    let model = StateProbabilityModel::for_instance(&inst);
    let x = Allocation::zero(&inst, Role::Defender);
    let mut tree = PartitionTree::new();
    let r = attacker_best_response(&inst, &model, &x, &mut tree, &SolverConfig::unlimited()).unwrap();
    assert_eq!(r.value, 0.0);
}

#[test]
fn attacker_surrogate_is_within_tolerance_of_exact_best_response() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..25u64 {
        let inst = random_network(seed, 2 + seed as usize % 5, 1 + seed as u32 % 2, 1 + (seed / 2) as u32 % 2).unwrap();
        let model = StateProbabilityModel::for_instance(&inst);
        let x = common::random_allocation(&mut rng, &inst, Role::Defender);
        let config = SolverConfig::unlimited();
        let mut tree = PartitionTree::new();
        let r = attacker_best_response(&inst, &model, &x, &mut tree, &config).unwrap();
        let (_, exact) = oracle::best_response_exact(&inst, &x).unwrap();
        let exact = to_f64(&exact);
        let slack = tree.leaf_count() as f64 * config.epsilon_cell;
        assert!(r.value <= exact + 1e-9, "seed {seed}: surrogate {} above exact {exact}", r.value);
        assert!(r.value >= exact - slack - 1e-9, "seed {seed}: surrogate {} vs exact {exact}", r.value);
    }
}

#[test]
fn bounds_bracket_the_optimum_at_every_iteration() {
    for seed in 0..12u64 {
        let inst = random_network(seed, 3 + seed as usize % 4, 1 + seed as u32 % 2, 2).unwrap();
        let model = StateProbabilityModel::for_instance(&inst);
        let out = solve_defender_with_model(&inst, &model, &SolverConfig::unlimited()).unwrap();
        let (_, _, z) = oracle::trilevel_exact(&inst).unwrap();
        let z = to_f64(&z);
        let mut refinements = 0;
        for log in &out.history {
            assert!(log.lb <= z + 1e-9 && log.ub >= z - 1e-9, "seed {seed}: {} {z} {}", log.lb, log.ub);
            assert!(log.refinements >= refinements);
            refinements = log.refinements;
        }
        assert_eq!(out.pool.len(), out.report.iterations);
        assert_eq!(out.report.refinements, out.defender_tree.refinements());
    }
}

#[test]
fn stored_cuts_over_estimate_leaf_recourse() {
    for seed in 0..8u64 {
        let inst = random_network(seed, 5, 2, 2).unwrap();
        let model = StateProbabilityModel::for_instance(&inst);
        let out = solve_defender_with_model(&inst, &model, &SolverConfig::unlimited()).unwrap();
        let ev = Evaluator::new(&inst, &model);
        let x = Allocation::from_pairs(&inst, Role::Defender, &out.report.x.iter().map(|(&k, &l)| (k, l)).collect::<Vec<_>>()).unwrap();
        for plan in &out.pool.plans {
            for leaf in out.defender_tree.leaves() {
                let cell = out.defender_tree.cell(leaf);
                let exact = ev.mean_value(&ev.cell_mean(x.levels(), plan.v.levels(), cell));
                let cut = plan.leaf_cut(&ev, &out.defender_tree, leaf, x.levels());
                assert!(cut >= exact - 1e-9, "seed {seed} leaf {leaf}: cut {cut} below {exact}");
            }
        }
    }
}

#[test]
fn pure_interdiction_matches_bilevel_oracle() {
    for seed in 0..10u64 {
        let mut inst = random_network(seed, 4 + seed as usize % 3, 2, 2).unwrap();
        inst.defender_budget = 0;
        let report = solve_defender(&inst, &SolverConfig::unlimited()).unwrap();
        let (_, z) = oracle::best_response_exact(&inst, &Allocation::zero(&inst, Role::Defender)).unwrap();
        assert!((report.objective.unwrap() - to_f64(&z)).abs() < 1e-6);
    }
}

#[test]
fn master_modes_and_refinement_modes_agree() {
    for seed in 0..6u64 {
        let inst = random_network(seed, 6, 2, 2).unwrap();
        let base = solve_defender(&inst, &SolverConfig::unlimited()).unwrap();
        for (master, refine) in [
            (MasterMode::Enumerate, RefinementMode::ExactArgmin),
            (MasterMode::BranchAndBound, RefinementMode::FirstContested),
        ] {
            let config = SolverConfig {
                master_mode: master,
                refinement_mode: refine,
                ..SolverConfig::unlimited()
            };
            let r = solve_defender(&inst, &config).unwrap();
            assert!((r.objective.unwrap() - base.objective.unwrap()).abs() < 1e-6, "seed {seed}");
        }
    }
}

#[test]
fn enumerate_and_branch_and_bound_visit_the_same_iterates() {
    let inst = generate_grid(2, 2, 2, 2, 4).unwrap();
    let run = |mode| {
        let config = SolverConfig {
            master_mode: mode,
            ..SolverConfig::unlimited()
        };
        solve_defender(&inst, &config).unwrap()
    };
    let (a, b) = (run(MasterMode::Enumerate), run(MasterMode::BranchAndBound));
    assert_eq!(a.x, b.x);
    assert_eq!(a.v_pool, b.v_pool);
    assert_eq!(a.refinements, b.refinements);
}

#[test]
fn time_limit_yields_an_incomplete_report() {
    let inst = generate_grid(3, 3, 2, 3, 0).unwrap();
    let config = SolverConfig {
        time_limit: Some(0.0),
        ..SolverConfig::default()
    };
    let r = solve_defender(&inst, &config).unwrap();
    assert!(!r.is_solved());
}

#[test]
fn invalid_tolerances_are_rejected() {
    let inst = generate_grid(2, 2, 1, 1, 0).unwrap();
    let config = SolverConfig {
        epsilon_gap: 0.0,
        ..SolverConfig::default()
    };
    assert!(solve_defender(&inst, &config).is_err());
}
