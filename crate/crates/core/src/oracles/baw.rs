use super::{bs_european_price, OptionKind};
use crate::error::{Error, Result};
use crate::model::MarketParams;
use crate::numerics::{norm_cdf, norm_pdf};

struct Coeffs {
    b: f64,
    n: f64,
    m: f64,
    k: f64,
}

fn coeffs(params: &MarketParams, tau: f64) -> Coeffs {
    let s2 = params.sigma * params.sigma;
    let b = params.rate - params.dividend;
    Coeffs {
        b,
        n: 2.0 * b / s2,
        m: 2.0 * params.rate / s2,
        k: 1.0 - (-params.rate * tau).exp(),
    }
}

fn d1(spot: f64, params: &MarketParams, tau: f64) -> f64 {
    let s = params.sigma;
    ((spot / params.strike).ln() + (params.rate - params.dividend + 0.5 * s * s) * tau) / (s * tau.sqrt())
}

/// Critical price of the quadratic approximation, by Newton on value matching.
pub fn baw_critical_price(params: &MarketParams, tau: f64, kind: OptionKind) -> Result<f64> {
    let c = coeffs(params, tau);
    let e = params.strike;
    let st = params.sigma * tau.sqrt();
    let carry = ((c.b - params.rate) * tau).exp();
    let disc_root = ((c.n - 1.0).powi(2) + 4.0 * c.m / c.k).sqrt();
    let root_inf = ((c.n - 1.0).powi(2) + 4.0 * c.m).sqrt();
    let mut si = match kind {
        OptionKind::Call => {
            let q_inf = 0.5 * (-(c.n - 1.0) + root_inf);
            let s_inf = e / (1.0 - 1.0 / q_inf);
            let h = -(c.b * tau + 2.0 * st) * e / (s_inf - e);
            e + (s_inf - e) * (1.0 - h.exp())
        }
        OptionKind::Put => {
            let q_inf = 0.5 * (-(c.n - 1.0) - root_inf);
            let s_inf = e / (1.0 - 1.0 / q_inf);
            let h = (c.b * tau - 2.0 * st) * e / (e - s_inf);
            s_inf + (e - s_inf) * h.exp()
        }
    };
    for _ in 0..200 {
        let d = d1(si, params, tau);
        let next = match kind {
            OptionKind::Call => {
                let q2 = 0.5 * (-(c.n - 1.0) + disc_root);
                let rhs = bs_european_price(si, params, tau, kind) + (1.0 - carry * norm_cdf(d)) * si / q2;
                let slope = carry * norm_cdf(d) * (1.0 - 1.0 / q2) + (1.0 - carry * norm_pdf(d) / st) / q2;
                (e + rhs - slope * si) / (1.0 - slope)
            }
            OptionKind::Put => {
                let q1 = 0.5 * (-(c.n - 1.0) - disc_root);
                let rhs = bs_european_price(si, params, tau, kind) - (1.0 - carry * norm_cdf(-d)) * si / q1;
                let slope = -carry * norm_cdf(-d) * (1.0 - 1.0 / q1) - (1.0 + carry * norm_pdf(-d) / st) / q1;
                (e - rhs + slope * si) / (1.0 + slope)
            }
        };
        if !next.is_finite() || next <= 0.0 {
            break;
        }
        if (next - si).abs() < 1e-12 * e {
            return Ok(next);
        }
        si = next;
    }
    Err(Error::Convergence {
        what: "quadratic-approximation critical price",
        iterations: 200,
        residual: f64::NAN,
        history: Vec::new(),
    })
}

/// Barone-Adesi-Whaley quadratic approximation of the American value.
pub fn baw_price(spot: f64, params: &MarketParams, tau: f64, kind: OptionKind) -> Result<f64> {
    params.validate()?;
    if tau <= 0.0 {
        return Ok(kind.payoff(spot, params.strike));
    }
    let euro = bs_european_price(spot, params, tau, kind);
    let c = coeffs(params, tau);
    // without dividends the call is never exercised early
    if kind == OptionKind::Call && c.b >= params.rate {
        return Ok(euro);
    }
    let crit = baw_critical_price(params, tau, kind)?;
    let carry = ((c.b - params.rate) * tau).exp();
    let disc_root = ((c.n - 1.0).powi(2) + 4.0 * c.m / c.k).sqrt();
    let d = d1(crit, params, tau);
    Ok(match kind {
        OptionKind::Call => {
            if spot >= crit {
                spot - params.strike
            } else {
                let q2 = 0.5 * (-(c.n - 1.0) + disc_root);
                let a2 = crit / q2 * (1.0 - carry * norm_cdf(d));
                euro + a2 * (spot / crit).powf(q2)
            }
        }
        OptionKind::Put => {
            if spot <= crit {
                params.strike - spot
            } else {
                let q1 = 0.5 * (-(c.n - 1.0) - disc_root);
                let a1 = -crit / q1 * (1.0 - carry * norm_cdf(-d));
                euro + a1 * (spot / crit).powf(q1)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_dividend_call_is_european() {
        let p = MarketParams::new(0.08, 0.0, 100.0, 0.5, 0.3);
        let a = baw_price(95.0, &p, 0.5, OptionKind::Call).unwrap();
        let b = bs_european_price(95.0, &p, 0.5, OptionKind::Call);
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn exercise_region_returns_intrinsic() {
        let p = MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.2);
        let crit = baw_critical_price(&p, 1.0, OptionKind::Call).unwrap();
        let v = baw_price(crit + 1.0, &p, 1.0, OptionKind::Call).unwrap();
        assert!((v - (crit + 1.0 - 10.0)).abs() < 1e-12);
    }

    #[test]
    fn value_is_continuous_at_critical_price() {
        let p = MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.2);
        for kind in [OptionKind::Call, OptionKind::Put] {
            let crit = baw_critical_price(&p, 1.0, kind).unwrap();
            let a = baw_price(crit * (1.0 - 1e-9), &p, 1.0, kind).unwrap();
            let b = baw_price(crit * (1.0 + 1e-9), &p, 1.0, kind).unwrap();
            assert!((a - b).abs() < 1e-6, "{kind:?}: {a} vs {b}");
        }
    }
}
