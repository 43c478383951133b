use super::OptionKind;
use crate::model::MarketParams;
use crate::numerics::norm_cdf;

/// Closed-form European value with continuous dividend yield at time to expiry `tau`.
pub fn bs_european_price(spot: f64, params: &MarketParams, tau: f64, kind: OptionKind) -> f64 {
    let (r, q, e, sigma) = (params.rate, params.dividend, params.strike, params.sigma);
    let fwd_spot = spot * (-q * tau).exp();
    let disc_strike = e * (-r * tau).exp();
    let vol = sigma * tau.sqrt();
    if tau <= 0.0 || vol == 0.0 {
        return match kind {
            OptionKind::Call => (fwd_spot - disc_strike).max(0.0),
            OptionKind::Put => (disc_strike - fwd_spot).max(0.0),
        };
    }
    let d1 = ((spot / e).ln() + (r - q + 0.5 * sigma * sigma) * tau) / vol;
    let d2 = d1 - vol;
    match kind {
        OptionKind::Call => fwd_spot * norm_cdf(d1) - disc_strike * norm_cdf(d2),
        OptionKind::Put => disc_strike * norm_cdf(-d2) - fwd_spot * norm_cdf(-d1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_call_parity() {
        let p = MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.2);
        for &s in &[5.0, 10.0, 17.5, 30.0] {
            let c = bs_european_price(s, &p, 0.8, OptionKind::Call);
            let put = bs_european_price(s, &p, 0.8, OptionKind::Put);
            let rhs = s * (-0.05f64 * 0.8).exp() - 10.0 * (-0.1f64 * 0.8).exp();
            assert!((c - put - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_volatility_limit() {
        let p = MarketParams::new(0.1, 0.05, 10.0, 1.0, 1e-9);
        let c = bs_european_price(12.0, &p, 1.0, OptionKind::Call);
        let fwd = (12.0 * (-0.05f64).exp() - 10.0 * (-0.1f64).exp()).max(0.0);
        assert!((c - fwd).abs() < 1e-10);
    }
}
