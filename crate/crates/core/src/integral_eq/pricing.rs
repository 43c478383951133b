use crate::boundary::BoundaryCurve;
use crate::error::{Error, Result};
use crate::model::MarketParams;
use crate::numerics::adaptive_simpson;

const QUAD_TOL: f64 = 1e-10;
const QUAD_DEPTH: u32 = 40;

// erf(z) - erf(x), evaluated through erfc in the tails to avoid cancellation.
fn erf_diff(x: f64, z: f64) -> f64 {
    if x >= 0.0 && z >= 0.0 {
        libm::erfc(x) - libm::erfc(z)
    } else if x <= 0.0 && z <= 0.0 {
        libm::erfc(-z) - libm::erfc(-x)
    } else {
        libm::erf(z) - libm::erf(x)
    }
}

// M(x, y) = erf(x + y) - erf(x)
fn m(x: f64, y: f64) -> f64 {
    erf_diff(x, x + y)
}

/// Kernels `(I₁, I₂)(A, L, t)` of the semi-explicit price formula.
pub fn semi_explicit_kernels(a: f64, l: f64, t: f64, rate: f64, sigma: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let w = sigma * (2.0 * t).sqrt();
    let y = l / w;
    let growth = (-(rate - 0.5 * s2) * t).exp();
    let up = a.exp() * m((-a - s2 * t) / w, y);
    let down = (-a).exp() * m((a - s2 * t) / w, y);
    let i1 = 0.5 * growth * (up - down);
    let i2 = 0.5 * (-rate * t).exp() * l.exp() * m((a - l) / w, 2.0 * y) - 0.5 * growth * (up + down);
    (i1, i2)
}

/// American call value `V(S, T - τ)` from a solved boundary curve.
///
/// The s-integral is split at τ/2: `s = v²` on the left absorbs the `sqrt(s)`
/// start of the boundary, `s = τ - u²` on the right the square-root behaviour
/// of the kernels as `τ - s → 0`.
pub fn price_call_semi_explicit(spot: f64, tau: f64, curve: &BoundaryCurve, params: &MarketParams) -> Result<f64> {
    params.validate_call()?;
    if !(spot > 0.0) {
        return Err(Error::invalid(format!("S must be positive, got {spot}")));
    }
    if tau < 0.0 || tau > curve.last_tau() * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "tau = {tau} outside the solved range [0, {}]",
            curve.last_tau()
        )));
    }
    let e = params.strike;
    let rho = curve.rho_at(tau);
    if spot > rho {
        return Err(Error::ExerciseRegion {
            spot,
            boundary: rho,
            intrinsic: spot - e,
        });
    }
    if tau == 0.0 {
        return Ok((spot - e).max(0.0));
    }
    let (r, q, sigma) = (params.rate, params.dividend, params.sigma);
    let l = (rho / spot).ln();
    let drift = r - q - 0.5 * sigma * sigma;
    let big_a = |s: f64| (rho / curve.rho_at(s)).ln() + drift * (tau - s);
    let integrand = |s: f64| {
        let t = tau - s;
        if t <= 0.0 {
            return 0.0;
        }
        let (i1, i2) = semi_explicit_kernels(big_a(s), l, t, r, sigma);
        r * e * i2 + (r * e - q * curve.rho_at(s)) * i1
    };
    let half = (0.5 * tau).sqrt();
    let left = adaptive_simpson(|v| 2.0 * v * integrand(v * v), 0.0, half, QUAD_TOL, QUAD_DEPTH);
    let right = adaptive_simpson(|u| 2.0 * u * integrand(tau - u * u), 0.0, half, QUAD_TOL, QUAD_DEPTH);
    let (_, i2_start) = semi_explicit_kernels(big_a(0.0) + (r / q).ln(), l, tau, r, sigma);
    let v = spot - e + spot / rho * (e * i2_start + left + right);
    if !v.is_finite() {
        return Err(Error::numeric("integral_eq", format!("non-finite price at S = {spot}, tau = {tau}")));
    }
    Ok(v)
}
