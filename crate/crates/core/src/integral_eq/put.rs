use crate::error::{Error, Result};
use crate::model::MarketParams;

/// Near-expiry American put boundary for a non-dividend stock:
/// `ρ(τ) = E exp(-(r - σ²/2)τ + σ sqrt(2τ) η)` with
/// `η = -sqrt(-ln[(2r/σ) sqrt(2πτ) e^(rτ)])`.
///
/// Only meaningful while the log argument stays inside (0, 1).
pub fn put_boundary_asymptotic(tau: f64, params: &MarketParams) -> Result<f64> {
    params.validate()?;
    if params.dividend != 0.0 {
        return Err(Error::invalid("the put asymptotic assumes q = 0"));
    }
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    let (r, sigma) = (params.rate, params.sigma);
    let arg = 2.0 * r / sigma * (2.0 * std::f64::consts::PI * tau).sqrt() * (r * tau).exp();
    if arg >= 1.0 {
        return Err(Error::Domain(format!(
            "tau = {tau} is too far from expiry for the asymptotic formula (log argument {arg:.4} >= 1)"
        )));
    }
    let eta = -(-arg.ln()).sqrt();
    Ok(params.strike * (-(r - 0.5 * sigma * sigma) * tau + sigma * (2.0 * tau).sqrt() * eta).exp())
}
