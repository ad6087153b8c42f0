use interdict::flow::{max_flow, mean_value_recourse, penalty_recourse, AvailabilityVector};
use interdict::{generate_grid, random_network, NetworkInstance};
use proptest::prelude::*;

fn instance(seed: u64, failable: usize) -> NetworkInstance {
    random_network(seed, failable, 1, 1).unwrap()
}

fn fractional(inst: &NetworkInstance, raw: &[f64]) -> AvailabilityVector {
    let mut av = AvailabilityVector::all_available(inst);
    for (j, k) in inst.failable_arcs().into_iter().enumerate() {
        av.set(k, raw[j % raw.len()]);
    }
    av
}

fn mix(a: &AvailabilityVector, b: &AvailabilityVector, t: f64) -> Vec<f64> {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (1.0 - t) * x + t * y)
        .collect()
}

#[test]
fn penalty_matches_max_flow_on_every_vertex_of_a_grid() {
    let inst = generate_grid(2, 2, 1, 1, 17).unwrap();
    for mask in 0..(1u64 << inst.failable_count()) {
        let xi = AvailabilityVector::from_failable_bits(&inst, mask);
        let (q, _) = max_flow(&inst, &xi).unwrap();
        let (p, _) = penalty_recourse(&inst, &xi).unwrap();
        assert_eq!(q, p, "mask {mask:b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn penalty_never_exceeds_mean_value(seed in 0u64..1000, n in 1usize..=8, raw in prop::collection::vec(0.0f64..=1.0, 8)) {
        let inst = instance(seed, n);
        let xi = fractional(&inst, &raw);
        let upper = mean_value_recourse(&inst, &xi).unwrap();
        let (lower, _) = penalty_recourse(&inst, &xi).unwrap();
        prop_assert!(lower <= upper + 1e-9, "{lower} > {upper}");
        prop_assert!(lower >= -1e-12);
    }

    #[test]
    fn mean_value_is_concave_and_penalty_convex(
        seed in 0u64..1000,
        n in 1usize..=8,
        a in prop::collection::vec(0.0f64..=1.0, 8),
        b in prop::collection::vec(0.0f64..=1.0, 8),
        t in 0.0f64..=1.0,
    ) {
        let inst = instance(seed, n);
        let (xa, xb) = (fractional(&inst, &a), fractional(&inst, &b));
        let xm = AvailabilityVector::from_dense(&inst, mix(&xa, &xb, t)).unwrap();
        let q = |x: &AvailabilityVector| mean_value_recourse(&inst, x).unwrap();
        let p = |x: &AvailabilityVector| penalty_recourse(&inst, x).unwrap().0;
        prop_assert!(q(&xm) >= (1.0 - t) * q(&xa) + t * q(&xb) - 1e-9);
        prop_assert!(p(&xm) <= (1.0 - t) * p(&xa) + t * p(&xb) + 1e-9);
    }

    #[test]
    fn both_recourses_are_monotone(seed in 0u64..1000, n in 1usize..=8, raw in prop::collection::vec(0.0f64..=1.0, 8), bump in 0.0f64..=1.0) {
        let inst = instance(seed, n);
        let lo = fractional(&inst, &raw);
        let hi_raw: Vec<f64> = raw.iter().map(|r| (r + bump).min(1.0)).collect();
        let hi = fractional(&inst, &hi_raw);
        prop_assert!(mean_value_recourse(&inst, &lo).unwrap() <= mean_value_recourse(&inst, &hi).unwrap() + 1e-9);
        prop_assert!(penalty_recourse(&inst, &lo).unwrap().0 <= penalty_recourse(&inst, &hi).unwrap().0 + 1e-9);
    }

    #[test]
    fn min_cut_certificate_bounds_every_capacity_scaling(seed in 0u64..1000, n in 1usize..=8, a in prop::collection::vec(0.0f64..=1.0, 8), b in prop::collection::vec(0.0f64..=1.0, 8)) {
        let inst = instance(seed, n);
        let (xa, xb) = (fractional(&inst, &a), fractional(&inst, &b));
        let (qa, cert) = interdict::flow::mean_value_with_certificate(&inst, &xa).unwrap();
        prop_assert!((cert.scaled_objective(&inst, xa.as_slice()) - qa).abs() < 1e-9);
        let qb = mean_value_recourse(&inst, &xb).unwrap();
        prop_assert!(cert.scaled_objective(&inst, xb.as_slice()) >= qb - 1e-9);
    }

    #[test]
    fn penalty_certificate_is_dual_feasible(seed in 0u64..1000, n in 1usize..=8, raw in prop::collection::vec(0.0f64..=1.0, 8)) {
        let inst = instance(seed, n);
        let xi = fractional(&inst, &raw);
        let (value, cert) = penalty_recourse(&inst, &xi).unwrap();
        let penalty: Vec<f64> = xi.as_slice().iter().map(|x| 1.0 - x).collect();
        prop_assert!(cert.dual_violation(&inst, &penalty) < 1e-9);
        let dual: f64 = inst.arcs.iter().map(|a| a.capacity * cert.beta[a.id]).sum();
        prop_assert!((dual - value).abs() < 1e-7, "dual {dual} primal {value}");
    }
}
