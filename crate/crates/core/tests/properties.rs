use fbound::oracles::{binomial_price, bs_european_price, ExerciseStyle, LatticeConfig, OptionKind};
use fbound::pde::{eoc, transport_step};
use fbound::psi::psi;
use fbound::{BoundaryCurve, MarketParams, VolatilitySpec};
use proptest::prelude::*;

fn base() -> MarketParams {
    MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn nonlinear_models_stay_parabolic_for_convex_prices(
        p in 0.0f64..200.0,
        spot in 0.5f64..60.0,
        tau in 0.0f64..1.0,
        mu in 0.0f64..1.0,
        a in 0.0f64..0.5,
    ) {
        let params = base();
        let floor = params.sigma * params.sigma;
        for spec in [VolatilitySpec::Rapm { mu }, VolatilitySpec::BarlesSoner { a }] {
            let margin = spec.parabolicity_margin(&params, p, spot, tau).unwrap();
            prop_assert!(margin >= floor * (1.0 - 1e-12), "{spec:?} p={p} S={spot}: {margin}");
            let var = spec.sigma_squared(&params, p, spot, tau).unwrap();
            prop_assert!(var >= floor * (1.0 - 1e-12));
        }
    }

    #[test]
    fn psi_is_increasing(x in 0.0f64..50.0, dx in 1e-6f64..5.0) {
        let a = psi(x).unwrap();
        let b = psi(x + dx).unwrap();
        prop_assert!(b > a);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn exact_power_laws_have_constant_order(c in 0.01f64..10.0, order in 0.2f64..3.0) {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.02, 0.01].iter().map(|&h: &f64| (h, c * h.powf(order))).collect();
        for v in eoc(&pts).unwrap() {
            prop_assert!((v - order).abs() < 1e-9);
        }
    }

    #[test]
    fn transport_keeps_values_within_the_data_range(
        vals in proptest::collection::vec(0.0f64..1.0, 19),
        ratio in 0.9f64..1.1,
    ) {
        let p = base();
        let mut prev: Vec<f64> = vec![-p.strike];
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        prev.extend(sorted.iter().map(|v| -p.strike * (1.0 - v)));
        prev.push(0.0);
        let out = transport_step(&prev, 20.0, 20.0 * ratio, &p, 0.15, 1e-3);
        prop_assert!(out.iter().all(|v| *v >= -p.strike - 1e-12 && *v <= 1e-12));
        prop_assert!(out.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn american_lattice_dominates_european(spot in 5.0f64..30.0, tau in 0.05f64..2.0) {
        let p = MarketParams { expiry: tau, ..base() };
        let am = binomial_price(spot, &p, &LatticeConfig::american(OptionKind::Call, 200)).unwrap().price;
        let eu = binomial_price(spot, &p, &LatticeConfig { steps: 200, style: ExerciseStyle::European, kind: OptionKind::Call }).unwrap().price;
        prop_assert!(am >= eu - 1e-12);
        prop_assert!(am >= spot - p.strike - 1e-12);
        let bs = bs_european_price(spot, &p, tau, OptionKind::Call);
        prop_assert!((eu - bs).abs() < 0.05);
    }

    #[test]
    fn boundary_interpolation_stays_between_nodes(t in 0.0f64..1.0) {
        let c = BoundaryCurve::new(vec![0.0, 0.25, 0.5, 1.0], vec![20.0, 21.0, 21.5, 22.3]);
        let v = c.rho_at(t);
        prop_assert!((20.0..=22.3).contains(&v));
    }
}
