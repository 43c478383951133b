//! Contract parameters and the catalogue of nonlinear volatility models.
//!
//! Every model is written as a variance `σ²(p, S, τ)` where `p = S² ∂²V/∂S²`
//! is the dollar curvature, `S` the asset price and `τ` the time to expiry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psi;

/// Contract and market constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Risk-free rate `r` (1/year).
    pub rate: f64,
    /// Continuous dividend yield `q` (1/year).
    pub dividend: f64,
    /// Strike `E`.
    pub strike: f64,
    /// Expiry `T` in years.
    pub expiry: f64,
    /// Base (historical) volatility `σ̂`.
    pub sigma: f64,
}

impl MarketParams {
    pub fn new(rate: f64, dividend: f64, strike: f64, expiry: f64, sigma: f64) -> Self {
        MarketParams {
            rate,
            dividend,
            strike,
            expiry,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.rate, self.dividend, self.strike, self.expiry, self.sigma]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("market parameters must be finite"));
        }
        if self.rate <= 0.0 {
            return Err(Error::invalid(format!("r must be positive, got {}", self.rate)));
        }
        if self.dividend < 0.0 {
            return Err(Error::invalid(format!("q must be non-negative, got {}", self.dividend)));
        }
        if self.strike <= 0.0 || self.expiry <= 0.0 || self.sigma <= 0.0 {
            return Err(Error::invalid("E, T and sigma must be positive"));
        }
        Ok(())
    }

    /// The call solvers need `0 < q < r`, which places the boundary start at `rE/q`.
    pub fn validate_call(&self) -> Result<()> {
        self.validate()?;
        if !(self.dividend > 0.0 && self.dividend < self.rate) {
            return Err(Error::invalid(format!(
                "American call solvers require 0 < q < r (got r = {}, q = {})",
                self.rate, self.dividend
            )));
        }
        Ok(())
    }

    /// Boundary position at expiry, `rE/q`.
    pub fn call_boundary_start(&self) -> f64 {
        self.rate * self.strike / self.dividend
    }
}

/// Tagged family of volatility functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum VolatilitySpec {
    Constant,
    /// Leland: `σ̂²(1 + Le sgn(Γ))`, with `sgn(0) = 0`.
    Leland { le: f64 },
    /// Avellaneda-Levy-Paras bounds, `σ1²` for Γ < 0 and `σ2²` for Γ > 0.
    Avellaneda { sigma1: f64, sigma2: f64 },
    /// Risk adjusted pricing: `σ̂²(1 + μ (S Γ)^(1/3))`.
    Rapm { mu: f64 },
    /// Barles-Soner: `σ̂²(1 + Ψ(a² e^(rτ) S² Γ))`.
    BarlesSoner { a: f64 },
    /// Frey-Stremme feedback with a constant liquidity factor `λ ≥ 1`.
    FreyStremme { feedback: f64, lambda: f64 },
}

impl VolatilitySpec {
    /// RAPM model from transaction cost `C` and risk premium `R`: `μ = 3 (C²R / 2π)^(1/3)`.
    pub fn rapm_from_costs(cost: f64, risk_premium: f64) -> Result<Self> {
        Ok(VolatilitySpec::Rapm {
            mu: rapm_mu(cost, risk_premium)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            VolatilitySpec::Constant => true,
            VolatilitySpec::Leland { le } => le >= 0.0,
            VolatilitySpec::Avellaneda { sigma1, sigma2 } => sigma1 > 0.0 && sigma1 <= sigma2,
            VolatilitySpec::Rapm { mu } => mu >= 0.0,
            VolatilitySpec::BarlesSoner { a } => a >= 0.0,
            VolatilitySpec::FreyStremme { feedback, lambda } => feedback >= 0.0 && lambda >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid volatility model {self:?}")))
        }
    }

    /// Whether σ² depends on the asset price `S`.
    pub fn depends_on_spot(&self) -> bool {
        matches!(self, VolatilitySpec::Rapm { .. } | VolatilitySpec::FreyStremme { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            VolatilitySpec::Constant => "constant",
            VolatilitySpec::Leland { .. } => "leland",
            VolatilitySpec::Avellaneda { .. } => "avellaneda",
            VolatilitySpec::Rapm { .. } => "rapm",
            VolatilitySpec::BarlesSoner { .. } => "barles-soner",
            VolatilitySpec::FreyStremme { .. } => "frey-stremme",
        }
    }

    /// Variance `σ²(p, S, τ)`.
    ///
    /// For Barles-Soner, negative curvature is clamped to zero before it is fed
    /// to Ψ (calls have `p ≥ 0`; tiny negatives come from rounding).
    pub fn sigma_squared(&self, params: &MarketParams, p: f64, spot: f64, tau: f64) -> Result<f64> {
        let base = params.sigma * params.sigma;
        match *self {
            VolatilitySpec::Constant => Ok(base),
            VolatilitySpec::Leland { le } => Ok(base * (1.0 + le * sign(p))),
            VolatilitySpec::Avellaneda { sigma1, sigma2 } => Ok(if p < 0.0 {
                sigma1 * sigma1
            } else if p > 0.0 {
                sigma2 * sigma2
            } else {
                0.5 * (sigma1 * sigma1 + sigma2 * sigma2)
            }),
            VolatilitySpec::Rapm { mu } => Ok(base * (1.0 + mu * signed_power(p / spot, 1.0 / 3.0))),
            VolatilitySpec::BarlesSoner { a } => {
                let z = a * a * (params.rate * tau).exp() * p.max(0.0);
                Ok(base * (1.0 + psi::psi(z)?))
            }
            VolatilitySpec::FreyStremme { feedback, lambda } => {
                let d = 1.0 - feedback * lambda * p / spot;
                if d <= 0.0 {
                    return Err(Error::SingularVolatility { denominator: d });
                }
                Ok(base / (d * d))
            }
        }
    }

    /// `σ² + p ∂σ²/∂p`; non-positive values mean parabolicity is lost.
    ///
    /// Closed-form derivatives throughout. At the kinks of Leland and
    /// Avellaneda (`p = 0`) the right limit is reported.
    pub fn parabolicity_margin(&self, params: &MarketParams, p: f64, spot: f64, tau: f64) -> Result<f64> {
        let base = params.sigma * params.sigma;
        match *self {
            VolatilitySpec::Constant => Ok(base),
            VolatilitySpec::Leland { le } => Ok(base * (1.0 + le * if p < 0.0 { -1.0 } else { 1.0 })),
            VolatilitySpec::Avellaneda { sigma1, sigma2 } => {
                Ok(if p < 0.0 { sigma1 * sigma1 } else { sigma2 * sigma2 })
            }
            VolatilitySpec::Rapm { mu } => {
                Ok(base * (1.0 + 4.0 / 3.0 * mu * signed_power(p / spot, 1.0 / 3.0)))
            }
            VolatilitySpec::BarlesSoner { a } => {
                let z = a * a * (params.rate * tau).exp() * p.max(0.0);
                if z == 0.0 {
                    return Ok(base);
                }
                let table = psi::table();
                Ok(base * (1.0 + table.eval(z)? + z * table.derivative(z)?))
            }
            VolatilitySpec::FreyStremme { feedback, lambda } => {
                let c = feedback * lambda / spot;
                let d = 1.0 - c * p;
                if d <= 0.0 {
                    return Err(Error::SingularVolatility { denominator: d });
                }
                Ok(base * (1.0 + c * p) / (d * d * d))
            }
        }
    }
}

/// `μ = 3 (C²R / 2π)^(1/3)`.
pub fn rapm_mu(cost: f64, risk_premium: f64) -> Result<f64> {
    if cost < 0.0 || risk_premium < 0.0 {
        return Err(Error::invalid("RAPM needs C >= 0 and R >= 0"));
    }
    Ok(3.0 * (cost * cost * risk_premium / (2.0 * std::f64::consts::PI)).cbrt())
}

/// Inverse of [`rapm_mu`] for a known `C > 0`.
pub fn rapm_risk_premium(mu: f64, cost: f64) -> f64 {
    let m = mu / 3.0;
    2.0 * std::f64::consts::PI * m * m * m / (cost * cost)
}

/// Signed power `|u|^(e-1) u`.
pub fn signed_power(u: f64, exponent: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    if exponent == 1.0 / 3.0 {
        return u.cbrt();
    }
    u.signum() * u.abs().powf(exponent)
}

fn sign(p: f64) -> f64 {
    if p > 0.0 {
        1.0
    } else if p < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `σ² + p ∂σ²/∂p` with a centered difference, step `max(1e-6, 1e-6 |p|)`.
pub fn parabolicity_margin_fd(spec: &VolatilitySpec, params: &MarketParams, p: f64, spot: f64, tau: f64) -> Result<f64> {
    let dp = (1e-6 * p.abs()).max(1e-6);
    let up = spec.sigma_squared(params, p + dp, spot, tau)?;
    let dn = spec.sigma_squared(params, p - dp, spot, tau)?;
    Ok(spec.sigma_squared(params, p, spot, tau)? + p * (up - dn) / (2.0 * dp))
}
