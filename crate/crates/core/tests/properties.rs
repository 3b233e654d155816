use pmm_core::classify::in_good_set;
use pmm_core::connect::{connected, plan_transport, validate_path};
use pmm_core::entropy::{alpha, beta, phi, WindowMeasure};
use pmm_core::exact::{check_detailed_balance, check_stationary, decompose, MarkovModel, Measure};
use pmm_core::hydro::PdeGrid;
use pmm_core::kmc::{SimState, StepOutcome};
use pmm_core::{Boundary, Configuration, ConstraintFamily};
use proptest::prelude::*;

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Empty), Just(Boundary::Periodic)]
}

fn window(max: usize) -> impl Strategy<Value = (usize, u64)> {
    (3..=max).prop_flat_map(|len| (Just(len), 0..1u64 << len))
}

fn positive_weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 1 << len).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn swap_structure((len, bits) in window(24), start in -10i64..10, b in boundary()) {
        let f = ConstraintFamily::pmm();
        let c = Configuration::from_bits(start, len, bits, b).unwrap();
        for x in c.bonds() {
            let s = c.swap(x).unwrap();
            prop_assert_eq!(s.swap(x).unwrap(), c);
            prop_assert_eq!(s.count(), c.count());
            prop_assert_eq!(f.rate(&s, x), f.rate(&c, x));
            let r = f.rate(&c, x);
            prop_assert!(r == 0.0 || r == 1.0 || r == 2.0);
            prop_assert_eq!(r > 0.0, c.get(x - 1) || c.get(x + 2));
        }
    }

    #[test]
    fn planner_replays(
        (n, a, order) in (4usize..=20).prop_flat_map(|n| (Just(n), 0..1u64 << n, Just((0..n).collect::<Vec<_>>()).prop_shuffle()))
    ) {
        let from = Configuration::from_bits(1, n, a, Boundary::Empty).unwrap();
        let to_bits = order.iter().take(from.count()).fold(0u64, |acc, &i| acc | 1 << i);
        let to = Configuration::from_bits(1, n, to_bits, Boundary::Empty).unwrap();
        prop_assume!(in_good_set(&from) && in_good_set(&to));
        let path = plan_transport(&from, &to).unwrap();
        prop_assert!(validate_path(&ConstraintFamily::pmm(), &path));
        prop_assert_eq!(path.end().unwrap(), to);
    }

    #[test]
    fn reachability_is_symmetric((len, a) in window(10), b in any::<u64>(), bd in boundary()) {
        let f = ConstraintFamily::pmm();
        let x = Configuration::from_bits(0, len, a, bd).unwrap();
        let y = Configuration::from_bits(0, len, b & ((1 << len) - 1), bd).unwrap();
        prop_assert_eq!(connected(&f, &x, &y, 24).unwrap(), connected(&f, &y, &x, 24).unwrap());
    }

    #[test]
    fn product_measures_are_reversible(len in 3usize..=9, rho in 0.05f64..0.95) {
        let model = MarkovModel::build(&ConstraintFamily::pmm(), 0, len, Boundary::Periodic, None).unwrap();
        prop_assert_eq!(model.asymmetry(), 0.0);
        let mu = Measure::product(&model, rho);
        prop_assert!(check_stationary(&model, &mu) <= 1e-12);
        prop_assert!(check_detailed_balance(&model, &mu) <= 1e-12);
    }

    #[test]
    fn decomposition_reassembles(len in 3usize..=7, seed in prop::collection::vec(0.0f64..1.0, 128)) {
        let model = MarkovModel::build(&ConstraintFamily::pmm(), 0, len, Boundary::Periodic, None).unwrap();
        let mut nu = Measure::new(seed[..model.num_states()].to_vec());
        prop_assume!(nu.total() > 0.0);
        nu.normalize();
        let d = decompose(&model, &nu);
        prop_assert!(d.reassemble().distance(&nu) <= 1e-12);
        prop_assert!((d.alpha_frozen + d.alpha_ergodic - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn simulation_conserves_and_repeats((len, bits) in window(40), seed in any::<u64>(), replica in 0u64..4) {
        let f = ConstraintFamily::pmm();
        let sites: Vec<u8> = (0..len).map(|i| ((bits >> i) & 1) as u8).collect();
        let count = sites.iter().filter(|&&s| s == 1).count();
        let mut a = SimState::new(&f, sites.clone(), seed, replica).unwrap();
        let mut b = SimState::new(&f, sites, seed, replica).unwrap();
        for _ in 0..500 {
            let oa = a.step();
            prop_assert_eq!(oa, b.step());
            prop_assert_eq!(a.particle_count(), count);
            prop_assert_eq!(a.sites().iter().filter(|&&s| s == 1).count(), count);
            if oa == StepOutcome::Absorbed {
                prop_assert_eq!(a.total_rate(), 0.0);
                break;
            }
        }
        prop_assert_eq!(a.sites(), b.sites());
        prop_assert_eq!(a.clock(), b.clock());
    }

    #[test]
    fn pde_conserves_mass_and_bounds(
        amps in prop::collection::vec(-0.1f64..0.1, 3),
        m in 16usize..=128,
        steps in 1usize..200,
    ) {
        let profile = |u: f64| {
            0.5 + amps.iter().enumerate()
                .map(|(k, a)| a * (2.0 * std::f64::consts::PI * (k + 1) as f64 * u).sin())
                .sum::<f64>()
        };
        let mut grid = PdeGrid::from_profile(m, profile).unwrap();
        let mass = grid.mass();
        let (lo, hi) = grid.bounds();
        for _ in 0..steps {
            let dt = 0.9 * grid.max_dt();
            grid.step(dt).unwrap();
            let (a, b) = grid.bounds();
            prop_assert!(a >= lo - 1e-12 && b <= hi + 1e-12);
            prop_assert!((grid.mass() - mass).abs() <= 1e-12);
        }
    }

    #[test]
    fn phi_properties(u in 0.0f64..10.0, v in 0.0f64..10.0, u2 in 0.0f64..10.0, v2 in 0.0f64..10.0, l in 0.01f64..100.0) {
        prop_assume!(u > 0.0 && v > 0.0 && u2 > 0.0 && v2 > 0.0);
        let p = phi(u, v).unwrap();
        prop_assert!(p >= 0.0);
        prop_assert!((phi(l * u, l * v).unwrap() - l * p).abs() <= 1e-9 * (1.0 + l * p));
        prop_assert!(phi(u + u2, v + v2).unwrap() <= p + phi(u2, v2).unwrap() + 1e-12);
        prop_assert_eq!(phi(u, u).unwrap(), 0.0);
        prop_assert_eq!(phi(0.0, 0.0).unwrap(), 0.0);
        prop_assert_eq!(p == 0.0, u == v);
    }

    #[test]
    fn beta_bounded_by_alpha(w in (4usize..=6).prop_flat_map(positive_weights)) {
        let f = ConstraintFamily::pmm();
        let len = w.len().trailing_zeros() as usize;
        let nu = WindowMeasure::new(0, len, w).unwrap();
        for x in nu.resolvable_bonds(&f) {
            let a = alpha(&f, &nu, x).unwrap();
            let b = beta(&f, &nu, x).unwrap();
            prop_assert!(a >= 0.0 && b >= 0.0);
            prop_assert!(b <= (f.c_max() * a).sqrt() + 1e-12);
        }
    }

    #[test]
    fn coarse_alpha_is_smaller(w in positive_weights(7)) {
        let f = ConstraintFamily::pmm();
        let fine = WindowMeasure::new(0, 7, w).unwrap();
        for (start, len) in [(0i64, 6usize), (1, 6), (1, 5), (2, 4)] {
            let coarse = fine.restrict(start, len).unwrap();
            for x in coarse.resolvable_bonds(&f) {
                prop_assert!(alpha(&f, &coarse, x).unwrap() <= alpha(&f, &fine, x).unwrap() + 1e-12);
            }
        }
    }
}
