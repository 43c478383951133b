//! Operator-splitting solver on reduced meshes: cross-method agreement and
//! qualitative behaviour of the nonlinear models.

use fbound::integral_eq::{price_call_semi_explicit, solve_boundary, IntegralEqConfig};
use fbound::pde::{model_distances, recover_price, solve_free_boundary, PdeConfig};
use fbound::{MarketParams, VolatilitySpec};

fn benchmark() -> MarketParams {
    MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.2)
}

fn small() -> PdeConfig {
    PdeConfig {
        n: 100,
        m: 5000,
        snapshots: 2,
        ..PdeConfig::default()
    }
}

#[test]
fn ci_mesh_agrees_with_the_integral_equation() {
    let p = benchmark();
    let reference = solve_boundary(&p, &IntegralEqConfig::default()).unwrap();
    let s = solve_free_boundary(&p, &VolatilitySpec::Constant, &PdeConfig::fast()).unwrap();
    let rel = (s.boundary.last_rho() - reference.curve.last_rho()).abs() / reference.curve.last_rho();
    assert!(rel < 0.01, "relative deviation {rel}");
    // approaches from below
    assert!(s.boundary.last_rho() < reference.curve.last_rho());
}

#[test]
fn recovered_prices_match_the_semi_explicit_formula() {
    let p = benchmark();
    let reference = solve_boundary(&p, &IntegralEqConfig::default()).unwrap();
    let s = solve_free_boundary(&p, &VolatilitySpec::Constant, &PdeConfig::fast()).unwrap();
    for spot in [12.0, 15.0, 18.0, 20.0, 21.0] {
        let pde = recover_price(&s, spot, p.expiry).unwrap();
        let semi = price_call_semi_explicit(spot, p.expiry, &reference.curve, &p).unwrap();
        assert!((pde - semi).abs() / semi < 0.005, "S {spot}: {pde} vs {semi}");
    }
}

#[test]
fn every_model_keeps_the_structural_invariants() {
    let p = benchmark();
    let start = p.call_boundary_start();
    let specs = [
        VolatilitySpec::Constant,
        VolatilitySpec::Leland { le: 0.5 },
        VolatilitySpec::rapm_from_costs(0.01, 20.0).unwrap(),
        VolatilitySpec::BarlesSoner { a: 0.1 },
        VolatilitySpec::Avellaneda { sigma1: 0.15, sigma2: 0.25 },
        VolatilitySpec::FreyStremme { feedback: 0.02, lambda: 1.0 },
    ];
    for spec in specs {
        let s = solve_free_boundary(&p, &spec, &small()).unwrap();
        let d = &s.diagnostics;
        assert!(d.min_pi >= -p.strike - 1e-9 && d.max_pi <= 1e-9, "{spec:?}: {d:?}");
        assert!(s.boundary.rhos.iter().all(|&r| r >= start - 1e-9), "{spec:?}");
        assert!(s.boundary.is_nondecreasing(1e-9), "{spec:?}");
        for level in &s.snapshots {
            assert_eq!(level[0], -p.strike);
            assert_eq!(*level.last().unwrap(), 0.0);
        }
    }
}

#[test]
fn extra_volatility_pushes_the_boundary_up() {
    let p = benchmark();
    let specs = [
        VolatilitySpec::rapm_from_costs(0.01, 1.0).unwrap(),
        VolatilitySpec::rapm_from_costs(0.01, 10.0).unwrap(),
        VolatilitySpec::rapm_from_costs(0.01, 100.0).unwrap(),
        VolatilitySpec::BarlesSoner { a: 0.01 },
        VolatilitySpec::BarlesSoner { a: 0.05 },
        VolatilitySpec::BarlesSoner { a: 0.2 },
    ];
    let runs = model_distances(&p, &specs, &small()).unwrap();
    for w in [&runs[..3], &runs[3..]] {
        assert!(w.windows(2).all(|x| x[1].distance > x[0].distance));
    }
    let base = solve_free_boundary(&p, &VolatilitySpec::Constant, &small()).unwrap();
    for r in &runs {
        assert!(r.rho_final > base.boundary.last_rho());
    }
}

#[test]
fn boundary_values_match_ci_distance_scale() {
    // R = 1 and a = 0.01 on the CI mesh sit close to their full-mesh values (0.0605, 0.1437)
    let p = benchmark();
    let specs = [VolatilitySpec::rapm_from_costs(0.01, 1.0).unwrap(), VolatilitySpec::BarlesSoner { a: 0.01 }];
    let runs = model_distances(&p, &specs, &PdeConfig::fast()).unwrap();
    assert!((runs[0].distance - 0.0605).abs() < 0.003, "{}", runs[0].distance);
    assert!((runs[1].distance - 0.1437).abs() < 0.005, "{}", runs[1].distance);
}
