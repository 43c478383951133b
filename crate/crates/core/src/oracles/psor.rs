use serde::{Deserialize, Serialize};

use super::OptionKind;
use crate::error::{Error, Result};
use crate::model::MarketParams;
use crate::numerics::lerp_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsorConfig {
    /// Number of log-price intervals.
    pub space_steps: usize,
    pub time_steps: usize,
    /// Half-width of the log-price grid around `ln E`; `None` picks
    /// `max(8 σ sqrt(T), ln 4)`.
    pub half_width: Option<f64>,
    pub omega: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    /// Fully implicit steps before switching to Crank-Nicolson.
    pub rannacher_steps: usize,
}

impl Default for PsorConfig {
    fn default() -> Self {
        PsorConfig {
            space_steps: 800,
            time_steps: 800,
            half_width: None,
            omega: 1.2,
            tol: 1e-8,
            max_sweeps: 10_000,
            rannacher_steps: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsorResult {
    pub spots: Vec<f64>,
    pub prices: Vec<f64>,
    /// `(tau, S)` per time level: the exercised node nearest the hold region.
    pub boundary: Vec<(f64, f64)>,
    /// Largest nodewise `|min(A V - f, V - g)|` over the final level.
    pub complementarity_residual: f64,
    pub sweeps: usize,
}

impl PsorResult {
    pub fn price_at(&self, spot: f64) -> f64 {
        lerp_sorted(&self.spots, &self.prices, spot)
    }
}

/// American option by projected SOR on a log-price grid with a theta scheme.
pub fn psor_price(params: &MarketParams, kind: OptionKind, cfg: &PsorConfig) -> Result<PsorResult> {
    params.validate()?;
    if cfg.space_steps < 3 || cfg.time_steps < 1 {
        return Err(Error::invalid("PSOR grid too small"));
    }
    if !(cfg.omega > 0.0 && cfg.omega < 2.0) {
        return Err(Error::invalid("PSOR relaxation factor must lie in (0, 2)"));
    }
    let (r, q, e, sigma) = (params.rate, params.dividend, params.strike, params.sigma);
    let w = cfg
        .half_width
        .unwrap_or_else(|| (8.0 * sigma * params.expiry.sqrt()).max(4f64.ln()));
    let n = cfg.space_steps;
    let dx = 2.0 * w / n as f64;
    let x0 = e.ln() - w;
    let spots: Vec<f64> = (0..=n).map(|i| (x0 + i as f64 * dx).exp()).collect();
    let payoff: Vec<f64> = spots.iter().map(|&s| kind.payoff(s, e)).collect();
    let dt = params.expiry / cfg.time_steps as f64;

    // L V = a V_{i-1} + b V_i + c V_{i+1}
    let diff = 0.5 * sigma * sigma / (dx * dx);
    let conv = (r - q - 0.5 * sigma * sigma) / (2.0 * dx);
    let (la, lb, lc) = (diff - conv, -2.0 * diff - r, diff + conv);

    let mut v = payoff.clone();
    let mut boundary = Vec::with_capacity(cfg.time_steps);
    let mut total_sweeps = 0;
    let mut residual = 0.0;
    let mut rhs = vec![0.0; n + 1];
    for step in 1..=cfg.time_steps {
        let theta = if step <= cfg.rannacher_steps { 1.0 } else { 0.5 };
        let tau = step as f64 * dt;
        // implicit matrix: (1 - θ dt L)
        let (ia, ib, ic) = (-theta * dt * la, 1.0 - theta * dt * lb, -theta * dt * lc);
        let ex = (1.0 - theta) * dt;
        for i in 1..n {
            rhs[i] = v[i] + ex * (la * v[i - 1] + lb * v[i] + lc * v[i + 1]);
        }
        // Dirichlet ends: deep out of / in the money
        let (left, right) = match kind {
            OptionKind::Call => (0.0, payoff[n].max(spots[n] * (-q * tau).exp() - e * (-r * tau).exp())),
            OptionKind::Put => (payoff[0].max(e * (-r * tau).exp() - spots[0] * (-q * tau).exp()), 0.0),
        };
        v[0] = left;
        v[n] = right;
        let mut converged = false;
        for _ in 0..cfg.max_sweeps {
            total_sweeps += 1;
            let mut change = 0.0_f64;
            for i in 1..n {
                let gs = (rhs[i] - ia * v[i - 1] - ic * v[i + 1]) / ib;
                let next = (v[i] + cfg.omega * (gs - v[i])).max(payoff[i]);
                change = change.max((next - v[i]).abs());
                v[i] = next;
            }
            if change < cfg.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                what: "PSOR sweep",
                iterations: cfg.max_sweeps,
                residual: f64::NAN,
                history: Vec::new(),
            }
            .at_tau("psor", tau));
        }
        residual = 0.0;
        for i in 1..n {
            let av = ia * v[i - 1] + ib * v[i] + ic * v[i + 1] - rhs[i];
            residual = f64::max(residual, av.min(v[i] - payoff[i]).abs());
        }
        let edge = match kind {
            OptionKind::Call => (1..n).find(|&i| payoff[i] > 0.0 && v[i] - payoff[i] <= 1e-12).map(|i| spots[i]),
            OptionKind::Put => (1..n)
                .rev()
                .find(|&i| payoff[i] > 0.0 && v[i] - payoff[i] <= 1e-12)
                .map(|i| spots[i]),
        };
        if let Some(b) = edge {
            boundary.push((tau, b));
        }
    }
    Ok(PsorResult {
        spots,
        prices: v,
        boundary,
        complementarity_residual: residual,
        sweeps: total_sweeps,
    })
}
