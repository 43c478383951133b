//! Independent checks of the integral-equation boundary.

use fbound::integral_eq::{price_call_semi_explicit, solve_boundary, IntegralEqConfig};
use fbound::numerics::{norm_cdf, CompositeGauss};
use fbound::oracles::{binomial_price, bs_european_price, LatticeConfig, OptionKind};
use fbound::MarketParams;

fn benchmark() -> MarketParams {
    MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.2)
}

/// Residual of the early-exercise premium representation of the call boundary,
///
/// ρ(τ) = E + ρ e^{-qτ} N(d) - E e^{-rτ} N(d - σ√τ)
///        + ∫_0^τ [q ρ e^{-qs} N(d_s) - r E e^{-rs} N(d_s - σ√s)] ds,
///
/// with `d_s = (ln(ρ(τ)/ρ(τ-s)) + (r - q + σ²/2) s)/(σ√s)` and `d` the same with `ρ(τ-s)` replaced by `E`.
fn premium_residual(rho: &dyn Fn(f64) -> f64, p: &MarketParams, tau: f64) -> f64 {
    let (r, q, s, e) = (p.rate, p.dividend, p.sigma, p.strike);
    let now = rho(tau);
    let drift = r - q + 0.5 * s * s;
    let d = ((now / e).ln() + drift * tau) / (s * tau.sqrt());
    let european = now * (-q * tau).exp() * norm_cdf(d) - e * (-r * tau).exp() * norm_cdf(d - s * tau.sqrt());
    // s = τ u² removes the square-root behaviour at both ends of the integrand
    let rule = CompositeGauss::new(0.0, 1.0, 200, 8);
    let premium = rule.integrate(|u| {
        let lag = tau * u * u;
        if lag == 0.0 {
            return 0.0;
        }
        let ds = ((now / rho(tau - lag)).ln() + drift * lag) / (s * lag.sqrt());
        let f = q * now * (-q * lag).exp() * norm_cdf(ds) - r * e * (-r * lag).exp() * norm_cdf(ds - s * lag.sqrt());
        f * 2.0 * tau * u
    });
    now - (e + european + premium)
}

#[test]
fn boundary_satisfies_the_premium_representation() {
    let p = benchmark();
    let sol = solve_boundary(&p, &IntegralEqConfig::default()).unwrap();
    let exact = |t: f64| sol.h.rho_at(t, &p);
    let off = |t: f64| sol.h.rho_at(t, &p) * (1.0 + 0.002 * t.sqrt());
    for tau in [0.05, 0.1, 0.25, 0.5, 0.75, 1.0] {
        let res = premium_residual(&exact, &p, tau);
        assert!(res.abs() < 1e-5, "tau {tau}: residual {res:e}");
        if tau < 0.25 {
            // the representation is degenerate as τ → 0 when r > q and barely sees the perturbation
            continue;
        }
        let perturbed = premium_residual(&off, &p, tau);
        assert!(perturbed.abs() > 100.0 * res.abs().max(1e-7), "tau {tau}: {perturbed:e}");
    }
}

#[test]
fn other_parameters_also_satisfy_it() {
    let p = MarketParams::new(0.08, 0.03, 1.0, 0.5, 0.35);
    let sol = solve_boundary(&p, &IntegralEqConfig::default()).unwrap();
    for tau in [0.1, 0.5] {
        let res = premium_residual(&|t| sol.h.rho_at(t, &p), &p, tau) / p.strike;
        assert!(res.abs() < 1e-5, "tau {tau}: {res:e}");
    }
}

#[test]
fn semi_explicit_prices_bracket_and_track_the_lattice() {
    let p = benchmark();
    let sol = solve_boundary(&p, &IntegralEqConfig::default()).unwrap();
    for tau in [0.25, 1.0] {
        for s in [12.0, 16.0, 19.0, 21.0] {
            let v = price_call_semi_explicit(s, tau, &sol.curve, &p).unwrap();
            let euro = bs_european_price(s, &p, tau, OptionKind::Call);
            assert!(v >= (s - p.strike).max(0.0) && v >= euro - 1e-6, "S {s} tau {tau}: {v} vs {euro}");
            let tree = binomial_price(s, &MarketParams { expiry: tau, ..p }, &LatticeConfig::american(OptionKind::Call, 2000))
                .unwrap()
                .price;
            assert!((v - tree).abs() < 0.01, "S {s} tau {tau}: {v} vs tree {tree}");
        }
    }
}
