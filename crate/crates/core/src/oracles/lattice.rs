use serde::{Deserialize, Serialize};

use super::{ExerciseStyle, OptionKind};
use crate::error::{Error, Result};
use crate::model::MarketParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub steps: usize,
    pub style: ExerciseStyle,
    pub kind: OptionKind,
}

impl LatticeConfig {
    pub fn american(kind: OptionKind, steps: usize) -> Self {
        LatticeConfig {
            steps,
            style: ExerciseStyle::American,
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeResult {
    pub price: f64,
    /// `(tau, S)` pairs: the exercised node closest to the continuation region
    /// at each level, where one exists.
    pub boundary: Vec<(f64, f64)>,
}

struct Tree {
    dt: f64,
    up: f64,
    disc_up: f64,
    disc_down: f64,
}

fn tree(params: &MarketParams, tau: f64, steps: usize) -> Result<Tree> {
    if steps == 0 {
        return Err(Error::invalid("lattice needs at least one step"));
    }
    let dt = tau / steps as f64;
    let up = (params.sigma * dt.sqrt()).exp();
    let down = 1.0 / up;
    let p = (((params.rate - params.dividend) * dt).exp() - down) / (up - down);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "risk-neutral probability {p} outside [0, 1]; increase the step count"
        )));
    }
    let disc = (-params.rate * dt).exp();
    Ok(Tree {
        dt,
        up,
        disc_up: disc * p,
        disc_down: disc * (1.0 - p),
    })
}

/// CRR lattice with `u = exp(σ sqrt(Δt))`, priced at time to expiry `params.expiry`.
pub fn binomial_price(spot: f64, params: &MarketParams, cfg: &LatticeConfig) -> Result<LatticeResult> {
    params.validate()?;
    let n = cfg.steps;
    let t = tree(params, params.expiry, n)?;
    let e = params.strike;
    let down = 1.0 / t.up;
    let mut s: Vec<f64> = (0..=n).map(|j| spot * t.up.powi(j as i32) * down.powi((n - j) as i32)).collect();
    let mut v: Vec<f64> = s.iter().map(|&x| cfg.kind.payoff(x, e)).collect();
    let american = cfg.style == ExerciseStyle::American;
    let mut boundary = Vec::new();
    for i in (0..n).rev() {
        let mut edge: Option<f64> = None;
        for j in 0..=i {
            s[j] *= t.up;
            let cont = t.disc_up * v[j + 1] + t.disc_down * v[j];
            let ex = cfg.kind.payoff(s[j], e);
            if american && ex > 0.0 && ex >= cont {
                v[j] = ex;
                edge = Some(match (cfg.kind, edge) {
                    (OptionKind::Call, None) => s[j],
                    (OptionKind::Call, Some(b)) => b.min(s[j]),
                    (OptionKind::Put, None) => s[j],
                    (OptionKind::Put, Some(b)) => b.max(s[j]),
                });
            } else {
                v[j] = cont;
            }
        }
        if let Some(b) = edge {
            boundary.push((params.expiry - i as f64 * t.dt, b));
        }
    }
    boundary.reverse();
    Ok(LatticeResult { price: v[0], boundary })
}

// Continuation minus exercise value at the root of a lattice rooted at `spot`.
fn root_premium(spot: f64, params: &MarketParams, tau: f64, kind: OptionKind, steps: usize) -> Result<f64> {
    let t = tree(params, tau, steps)?;
    let e = params.strike;
    let down = 1.0 / t.up;
    let mut s: Vec<f64> = (0..=steps)
        .map(|j| spot * t.up.powi(j as i32) * down.powi((steps - j) as i32))
        .collect();
    let mut v: Vec<f64> = s.iter().map(|&x| kind.payoff(x, e)).collect();
    for i in (1..steps).rev() {
        for j in 0..=i {
            s[j] *= t.up;
            let cont = t.disc_up * v[j + 1] + t.disc_down * v[j];
            v[j] = cont.max(kind.payoff(s[j], e));
        }
    }
    let cont = t.disc_up * v[1] + t.disc_down * v[0];
    Ok(cont - kind.payoff(spot, e))
}

/// Critical asset price at time to expiry `tau`, found by bisecting on the
/// root price of the lattice for the switch between holding and exercising.
pub fn lattice_critical_price(params: &MarketParams, tau: f64, kind: OptionKind, steps: usize) -> Result<f64> {
    params.validate()?;
    if tau <= 0.0 {
        return Err(Error::invalid("tau must be positive"));
    }
    let e = params.strike;
    // exercised side is below the boundary for puts, above for calls
    let (mut lo, mut hi) = match kind {
        OptionKind::Put => (1e-6 * e, e),
        OptionKind::Call => {
            if params.dividend <= 0.0 {
                return Err(Error::Domain("an American call without dividends is never exercised early".into()));
            }
            (e, 50.0 * e.max(params.call_boundary_start()))
        }
    };
    let exercised = |s: f64| -> Result<bool> { Ok(root_premium(s, params, tau, kind, steps)? <= 0.0) };
    match kind {
        OptionKind::Put => {
            if !exercised(lo)? {
                return Err(Error::Domain("no early exercise found for the put".into()));
            }
        }
        OptionKind::Call => {
            if !exercised(hi)? {
                return Err(Error::Domain("no early exercise found for the call".into()));
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let ex = exercised(mid)?;
        match (kind, ex) {
            (OptionKind::Put, true) | (OptionKind::Call, false) => lo = mid,
            _ => hi = mid,
        }
        if hi - lo < 1e-10 * e {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::bs_european_price;

    fn params() -> MarketParams {
        MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.2)
    }

    #[test]
    fn european_mode_converges_to_closed_form() {
        let p = params();
        let exact = bs_european_price(10.0, &p, 1.0, OptionKind::Call);
        let cfg = |n| LatticeConfig {
            steps: n,
            style: ExerciseStyle::European,
            kind: OptionKind::Call,
        };
        let e1 = (binomial_price(10.0, &p, &cfg(500)).unwrap().price - exact).abs();
        let e2 = binomial_price(10.0, &p, &cfg(5000)).unwrap().price - exact;
        assert!(e2.abs() < 1e-3, "{e2}");
        assert!(e2.abs() < e1);
    }

    #[test]
    fn american_dominates_european() {
        let p = params();
        for &s in &[8.0, 12.0, 18.0, 21.0] {
            for kind in [OptionKind::Call, OptionKind::Put] {
                let am = binomial_price(s, &p, &LatticeConfig::american(kind, 400)).unwrap().price;
                let eu = binomial_price(
                    s,
                    &p,
                    &LatticeConfig {
                        steps: 400,
                        style: ExerciseStyle::European,
                        kind,
                    },
                )
                .unwrap()
                .price;
                assert!(am >= eu - 1e-12, "{kind:?} S={s}");
            }
        }
    }

    #[test]
    fn call_boundary_estimate_sits_above_start_value() {
        let p = params();
        let res = binomial_price(20.0, &p, &LatticeConfig::american(OptionKind::Call, 1000)).unwrap();
        assert!(!res.boundary.is_empty());
        for &(_, b) in &res.boundary {
            assert!(b >= p.call_boundary_start() * 0.99);
        }
    }

    #[test]
    fn critical_call_price_brackets_lattice_boundary() {
        let p = params();
        let s = lattice_critical_price(&p, 1.0, OptionKind::Call, 400).unwrap();
        assert!(s > 20.0 && s < 25.0, "{s}");
    }
}
