//! Invariants checked over randomly generated inputs.

use dlza::algorithms::{AlgorithmVariant, Attractor, HyperParams, Strategy};
use dlza::experiments::{run_monte_carlo, scenario_43};
use dlza::network::{
    build_metropolis_combiner, build_uniform_combiner, random_geometric_topology, validate_combiner, Topology,
    COLUMN_SUM_TOL,
};
use dlza::rng::{seeded, StreamRole};
use dlza::signal::{Coloring, RegressorStream, SignalProfile};
use dlza::theory::{
    advance, expected_abs, expected_sign, is_mean_square_stable, mean_square_step_raw, trace_via_vec, GlobalMoments,
    StackedOperators,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::strategy::Strategy as _;

fn edges_strategy() -> impl proptest::strategy::Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..12).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..3 * n)))
}

proptest! {
    #[test]
    fn combiners_are_column_stochastic_on_the_graph((n, edges) in edges_strategy()) {
        let topology = Topology::from_edges(n, &edges).unwrap();
        for combiner in [build_uniform_combiner(&topology), build_metropolis_combiner(&topology)] {
            prop_assert!(combiner.max_column_sum_error() <= COLUMN_SUM_TOL);
            prop_assert!(validate_combiner(&combiner, &topology).unwrap().is_valid());
            for l in 0..n {
                for k in 0..n {
                    let w = combiner.weight(l, k);
                    prop_assert!(w >= 0.0);
                    if !topology.is_adjacent(l, k) {
                        prop_assert_eq!(w, 0.0);
                    }
                }
            }
        }
        let metropolis = build_metropolis_combiner(&topology);
        for l in 0..n {
            for k in 0..n {
                prop_assert_eq!(metropolis.weight(l, k), metropolis.weight(k, l));
            }
        }
    }

    #[test]
    fn edge_list_round_trips((n, edges) in edges_strategy()) {
        let topology = Topology::from_edges(n, &edges).unwrap();
        let text = topology.to_edge_list();
        prop_assert_eq!(Topology::parse_edge_list(&text).unwrap(), topology);
    }

    #[test]
    fn geometric_topology_depends_only_on_its_arguments(n in 1usize..30, radius in 0.05f64..1.4, seed in any::<u64>()) {
        let a = random_geometric_topology(n, radius, seed).unwrap();
        prop_assert_eq!(&a, &random_geometric_topology(n, radius, seed).unwrap());
        // a larger radius only adds links
        let wider = random_geometric_topology(n, (radius * 1.5).min(std::f64::consts::SQRT_2), seed).unwrap();
        for (l, k) in a.edges() {
            prop_assert!(wider.is_adjacent(l, k));
        }
    }

    #[test]
    fn sign_is_odd_and_abs_is_even(x in -5.0f64..5.0, var in 0.0f64..9.0) {
        prop_assert!((expected_sign(x, 0.0, var) + expected_sign(-x, 0.0, var)).abs() < 1e-15);
        prop_assert!((expected_abs(x, 0.0, var) - expected_abs(-x, 0.0, var)).abs() < 1e-15);
        prop_assert!(expected_sign(x, 0.0, var).abs() <= 1.0);
        // Jensen
        prop_assert!(expected_abs(x, 0.0, var) >= x.abs() - 1e-15);
    }

    #[test]
    fn moments_are_continuous_as_variance_vanishes(x in prop_oneof![-3.0f64..-0.01, 0.01f64..3.0]) {
        let tiny = 1e-12;
        prop_assert!((expected_sign(x, 0.0, tiny) - x.signum()).abs() < 1e-12);
        prop_assert!((expected_abs(x, 0.0, tiny) - x.abs()).abs() < 1e-6);
        // the mean error shifts the Gaussian center
        prop_assert_eq!(expected_abs(x, 0.5, tiny), expected_abs(x - 0.5, 0.0, tiny));
    }

    #[test]
    fn trace_identity(seed in any::<u64>(), n in 1usize..8) {
        use rand::Rng;
        let mut rng = seeded(seed, StreamRole::Sampler);
        let x = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        prop_assert!((trace_via_vec(&x, &y).unwrap() - (&x * &y).trace()).abs() <= 1e-12);
    }

    #[test]
    fn regressor_window_shifts_by_one(taps in 1usize..8, pole in -0.9f64..0.9, seed in any::<u64>()) {
        let mut stream = RegressorStream::new(taps, 1.5, Coloring::Ar1 { pole });
        let mut rng = seeded(seed, StreamRole::Input);
        let mut previous = stream.window().to_vec();
        prop_assert!(previous.iter().all(|&x| x == 0.0));
        for _ in 0..3 * taps {
            let current = stream.next_regressor(&mut rng).to_vec();
            prop_assert_eq!(&current[1..], &previous[..taps - 1]);
            previous = current;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn raw_second_moment_is_nearly_symmetric(
        (n, edges) in (1usize..4).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..4))),
        variances in prop::collection::vec(0.5f64..1.5, 3),
        w_o in prop::collection::vec(-1.0f64..1.0, 2),
        rza in any::<bool>(),
        leak in 0.0f64..0.05,
    ) {
        let topology = Topology::from_edges(n, &edges).unwrap();
        let profile = SignalProfile::new(variances[..n].to_vec(), vec![0.01; n], Coloring::White).unwrap();
        let attractor = if rza { Attractor::Rza } else { Attractor::Za };
        let variant = AlgorithmVariant::new(Strategy::Atc, attractor, HyperParams::new(0.05, leak, 0.002, 4.0).unwrap());
        let ops = StackedOperators::new(&build_metropolis_combiner(&topology), &profile, 2, &variant).unwrap();
        let mut state = GlobalMoments::zero_start(&ops, &w_o).unwrap();
        for _ in 0..20 {
            let raw = mean_square_step_raw(&state, &ops).unwrap();
            prop_assert!((&raw - raw.transpose()).amax() <= 1e-10);
            state = advance(&state, &ops).unwrap();
        }
    }

    #[test]
    fn stability_is_monotone_in_step_size(lo in 0.001f64..3.0, hi in 0.001f64..3.0) {
        let spec = scenario_43(7).unwrap();
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let stable = |mu| {
            let v = AlgorithmVariant::new(Strategy::Atc, Attractor::Za, HyperParams::new(mu, 0.001, 0.001, 1.0).unwrap());
            is_mean_square_stable(&StackedOperators::new(&spec.combiner, &spec.profile, 5, &v).unwrap()).unwrap()
        };
        prop_assert!(!stable(hi) || stable(lo));
    }
}

#[test]
fn monte_carlo_output_does_not_depend_on_thread_count() {
    let mut spec = scenario_43(11).unwrap();
    // more trials than one batch
    spec.trials = 70;
    spec.iterations = 150;
    let body = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let report = pool.install(|| run_monte_carlo(&spec)).unwrap();
        let mut buf = Vec::new();
        report.write_csv_body(&mut buf).unwrap();
        buf
    };
    assert_eq!(body(1), body(4));
}

#[test]
fn monte_carlo_depends_on_the_seed() {
    let mut spec = scenario_43(11).unwrap();
    spec.trials = 4;
    spec.iterations = 50;
    let a = run_monte_carlo(&spec).unwrap();
    spec.master_seed = 12;
    let b = run_monte_carlo(&spec).unwrap();
    assert_ne!(a.variants[0].msd, b.variants[0].msd);
}
