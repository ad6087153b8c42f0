mod common;

use interdict::def_benchmark::{def_attacker_best_response, def_expected_value, def_solve, ScenarioSet};
use interdict::flow::{max_flow, AvailabilityVector};
use interdict::masters::{solve_defender, SolverConfig};
use interdict::oracle::{self, to_f64};
use interdict::prob::scenario_prob_exact;
use interdict::{generate_grid, random_network, Allocation, NetworkInstance, Role, StateProbabilityModel};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn nominal(inst: &NetworkInstance) -> f64 {
    max_flow(inst, &AvailabilityVector::all_available(inst)).unwrap().0
}

#[test]
fn def_expectation_matches_oracle_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for draw in 0..100u64 {
        let inst = random_network(draw, rng.gen_range(1..=8), rng.gen_range(1..=3), rng.gen_range(1..=3)).unwrap();
        let scenarios = ScenarioSet::build(&inst).unwrap();
        let x = common::random_allocation(&mut rng, &inst, Role::Defender);
        let v = common::random_allocation(&mut rng, &inst, Role::Attacker);
        let d = def_expected_value(&inst, &scenarios, &x, &v).unwrap();
        let o = to_f64(&oracle::expected_value(&inst, &x, &v).unwrap());
        assert!((d - o).abs() <= 1e-12 * o.max(1.0), "draw {draw}: {d} vs {o}");
    }
}

#[test]
fn single_contested_arc_averages_its_two_scenarios() {
    let inst = generate_grid(2, 2, 1, 1, 8).unwrap();
    let scenarios = ScenarioSet::build(&inst).unwrap();
    let k = inst.failable_arcs()[2];
    let x = Allocation::from_pairs(&inst, Role::Defender, &[(k, 1)]).unwrap();
    let v = Allocation::from_pairs(&inst, Role::Attacker, &[(k, 1)]).unwrap();
    let mut without = AvailabilityVector::all_available(&inst);
    without.set(k, 0.0);
    let q1 = nominal(&inst);
    let q0 = max_flow(&inst, &without).unwrap().0;
    assert_eq!(def_expected_value(&inst, &scenarios, &x, &v).unwrap(), 0.5 * q1 + 0.5 * q0);
}

#[test]
fn scenario_probabilities_sum_to_one_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for draw in 0..20u64 {
        let inst = random_network(draw, rng.gen_range(1..=7), 2, rng.gen_range(1..=3)).unwrap();
        let model = StateProbabilityModel::for_instance(&inst);
        let scenarios = ScenarioSet::build(&inst).unwrap();
        let x = common::random_allocation(&mut rng, &inst, Role::Defender);
        let v = common::random_allocation(&mut rng, &inst, Role::Attacker);
        let total = (0..scenarios.len()).fold(BigRational::zero(), |acc, s| {
            acc + scenario_prob_exact(&model, &inst, &x, &v, &scenarios.availability(&inst, s)).unwrap()
        });
        assert!(total.is_one());
    }
}

#[test]
fn def_best_response_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for draw in 0..15u64 {
        let inst = random_network(draw, rng.gen_range(2..=6), rng.gen_range(1..=2), rng.gen_range(1..=2)).unwrap();
        let scenarios = ScenarioSet::build(&inst).unwrap();
        let x = common::random_allocation(&mut rng, &inst, Role::Defender);
        let (v, val) = def_attacker_best_response(&inst, &scenarios, &x).unwrap();
        let (ov, oval) = oracle::best_response_exact(&inst, &x).unwrap();
        assert!((val - to_f64(&oval)).abs() < 1e-9);
        assert_eq!(v, ov, "draw {draw}");
    }
}

#[test]
fn no_attack_budget_is_nominal_for_every_method() {
    let mut inst = generate_grid(2, 2, 2, 1, 6).unwrap();
    inst.attacker_budget = 0;
    let scenarios = ScenarioSet::build(&inst).unwrap();
    let (v, _) = def_attacker_best_response(&inst, &scenarios, &Allocation::zero(&inst, Role::Defender)).unwrap();
    assert!(v.is_zero());
    let def = def_solve(&inst, &SolverConfig::unlimited()).unwrap();
    assert_eq!(def.objective, Some(nominal(&inst)));
    assert_eq!(def.iterations, 1);
    let (_, _, z) = oracle::trilevel_exact(&inst).unwrap();
    assert_eq!(to_f64(&z), nominal(&inst));
    inst.defender_budget = 0;
    let (_, _, z) = oracle::trilevel_exact(&inst).unwrap();
    assert_eq!(to_f64(&z), nominal(&inst));
}

#[test]
fn oracle_best_response_dominates_every_attack() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for draw in 0..5u64 {
        let inst = random_network(draw, 5, 2, 2).unwrap();
        let x = common::random_allocation(&mut rng, &inst, Role::Defender);
        let (_, best) = oracle::best_response_exact(&inst, &x).unwrap();
        for v in interdict::enumerate_allocations(&inst, Role::Attacker) {
            assert!(best <= oracle::expected_value(&inst, &x, &v).unwrap());
        }
    }
}

#[test]
fn full_cut_budget_against_no_defence_is_zero() {
    let inst = generate_grid(2, 2, 2, 1, 0).unwrap();
    let (_, value) = oracle::best_response_exact(&inst, &Allocation::zero(&inst, Role::Defender)).unwrap();
    assert!(value.is_zero());
}

#[test]
fn three_methods_agree_on_small_grids() {
    for seed in 0..3u64 {
        let inst = generate_grid(2, 2, 1, 1, seed).unwrap();
        let sra = solve_defender(&inst, &SolverConfig::unlimited()).unwrap();
        let def = def_solve(&inst, &SolverConfig::unlimited()).unwrap();
        let (_, _, z) = oracle::trilevel_exact(&inst).unwrap();
        let z = to_f64(&z);
        assert!((sra.objective.unwrap() - z).abs() < 1e-6);
        assert!((def.objective.unwrap() - z).abs() < 1e-9);
    }
}

#[test]
fn guards_refuse_oversized_instances() {
    let inst = generate_grid(3, 3, 1, 1, 0).unwrap();
    let x = Allocation::zero(&inst, Role::Defender);
    assert!(matches!(oracle::expected_value(&inst, &x, &Allocation::zero(&inst, Role::Attacker)), Err(interdict::Error::Capacity(_))));
    let big = generate_grid(3, 4, 1, 1, 0).unwrap();
    assert!(matches!(def_solve(&big, &SolverConfig::default()), Err(interdict::Error::Capacity(_))));
}
