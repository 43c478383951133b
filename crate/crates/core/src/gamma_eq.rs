//! Risk-adjusted pricing (RAPM): the optimal hedging interval, the Γ-equation
//! for `H = S ∂²V/∂S²`, European prices under the risk-adjusted equation,
//! bid-ask spreads and calibration of `(σ, R)` from a quote pair.
//!
//! With `x = ln(S/E)` and `τ = T - t` the Γ-equation reads
//!
//! ```text
//! H_τ = ∂²_x β(H) + ∂_x β(H) + r ∂_x H,   β(H) = (σ̂²/2)(1 + μ H^(1/3)) H,
//! ```
//!
//! with the first-order coefficient `r` taken as written (the V-equation
//! carries `r - q`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rapm_mu, rapm_risk_premium, signed_power, MarketParams};
use crate::numerics::{lerp_uniform, norm_pdf, solve_tridiagonal, trapezoid};

/// Transaction cost `C` and risk premium coefficient `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RapmParams {
    pub cost: f64,
    pub risk_premium: f64,
}

impl RapmParams {
    pub fn new(cost: f64, risk_premium: f64) -> Result<Self> {
        if !(cost >= 0.0 && risk_premium >= 0.0) || !cost.is_finite() || !risk_premium.is_finite() {
            return Err(Error::invalid(format!("RAPM needs C >= 0 and R >= 0 (got C = {cost}, R = {risk_premium})")));
        }
        Ok(RapmParams { cost, risk_premium })
    }

    /// `μ = 3 (C²R/2π)^(1/3)`.
    pub fn mu(&self) -> f64 {
        rapm_mu(self.cost, self.risk_premium).expect("validated at construction")
    }
}

/// Transaction-cost premium `r_TC(Δt) = C σ̂ S |Γ| / sqrt(2π Δt)`.
pub fn r_tc(cost: f64, sigma: f64, spot: f64, gamma: f64, dt: f64) -> f64 {
    cost * sigma * spot * gamma.abs() / (2.0 * std::f64::consts::PI * dt).sqrt()
}

/// Volatile-portfolio premium `r_VP(Δt) = ½ R σ̂⁴ S² Γ² Δt`.
pub fn r_vp(risk_premium: f64, sigma: f64, spot: f64, gamma: f64, dt: f64) -> f64 {
    0.5 * risk_premium * sigma.powi(4) * (spot * gamma).powi(2) * dt
}

/// Minimiser of `r_TC + r_VP` over the hedging interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgingOptimum {
    /// `K²/(σ̂² |SΓ|^(2/3))`; 0 when `C = 0`, infinite when `R = 0 < C`.
    pub dt: f64,
    pub r_tc: f64,
    pub r_vp: f64,
    /// `(3/2)(C²R/2π)^(1/3) σ̂² |SΓ|^(4/3)`.
    pub total: f64,
    /// True when `C = 0` or `R = 0`, where no interior minimum exists.
    pub degenerate: bool,
}

pub fn optimal_hedging_interval(rapm: &RapmParams, sigma: f64, spot: f64, gamma: f64) -> Result<HedgingOptimum> {
    if !(sigma > 0.0 && spot > 0.0) {
        return Err(Error::invalid("hedging interval needs sigma > 0 and S > 0"));
    }
    let sg = (spot * gamma).abs();
    if sg == 0.0 || !sg.is_finite() {
        return Err(Error::invalid("hedging interval needs a finite, non-zero S*Gamma"));
    }
    let (c, r) = (rapm.cost, rapm.risk_premium);
    if c == 0.0 || r == 0.0 {
        // C = 0: r_VP alone, minimised as Δt → 0. R = 0: r_TC alone, as Δt → ∞.
        return Ok(HedgingOptimum {
            dt: if c == 0.0 { 0.0 } else { f64::INFINITY },
            r_tc: 0.0,
            r_vp: 0.0,
            total: 0.0,
            degenerate: true,
        });
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let k = (c / (r * two_pi.sqrt())).cbrt();
    let dt = k * k / (sigma * sigma * sg.powf(2.0 / 3.0));
    Ok(HedgingOptimum {
        dt,
        r_tc: r_tc(c, sigma, spot, gamma, dt),
        r_vp: r_vp(r, sigma, spot, gamma, dt),
        total: 1.5 * (c * c * r / two_pi).cbrt() * sigma * sigma * sg.powf(4.0 / 3.0),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaConfig {
    /// Intervals on `[-X, X]`.
    pub n: usize,
    pub m: usize,
    /// Smoothing time `τ*` of the initial delta.
    pub tau_star: f64,
    /// `X`; defaults to `6 σ̂ sqrt(T)`.
    pub half_width: Option<f64>,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub snapshots: usize,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            n: 400,
            m: 2000,
            tau_star: 0.005,
            half_width: None,
            picard_tol: 1e-10,
            picard_max: 50,
            snapshots: 10,
        }
    }
}

impl GammaConfig {
    pub fn grid(&self, params: &MarketParams) -> Vec<f64> {
        let x_max = self.half_width.unwrap_or(6.0 * params.sigma * params.expiry.sqrt());
        let h = 2.0 * x_max / self.n as f64;
        (0..=self.n).map(|i| -x_max + i as f64 * h).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n < 4 || self.m == 0 || !(self.tau_star > 0.0) || self.picard_max == 0 || !(self.picard_tol > 0.0) {
            return Err(Error::invalid("Gamma solver needs n >= 4, m >= 1, tau* > 0 and a positive Picard tolerance"));
        }
        if let Some(x) = self.half_width {
            if !(x > 0.0) {
                return Err(Error::invalid("half width must be positive"));
            }
        }
        Ok(())
    }
}

/// `N′(d)/(σ sqrt(τ*))` with `d = (x + (r - q - σ²/2)τ*)/(σ sqrt(τ*))`: the
/// Black-Scholes `SΓ` shortly before expiry, standing in for `δ(x)`.
pub fn initial_gamma(params: &MarketParams, tau_star: f64, x: &[f64]) -> Vec<f64> {
    let s = params.sigma * tau_star.sqrt();
    let drift = (params.rate - params.dividend - 0.5 * params.sigma * params.sigma) * tau_star;
    x.iter().map(|&xi| norm_pdf((xi + drift) / s) / s).collect()
}

/// Exact solution of the Γ-equation for `μ = 0` started from [`initial_gamma`]:
/// the Gaussian spreads with variance `σ̂²(τ* + τ)` and travels left at speed `σ̂²/2 + r`.
pub fn gamma_closed_form(params: &MarketParams, tau_star: f64, x: f64, tau: f64) -> f64 {
    let s2 = params.sigma * params.sigma;
    let s = params.sigma * (tau_star + tau).sqrt();
    let shift = (params.rate - params.dividend - 0.5 * s2) * tau_star + (0.5 * s2 + params.rate) * tau;
    norm_pdf((x + shift) / s) / s
}

/// Γ-equation solution at selected levels with the mass history of every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaField {
    pub x: Vec<f64>,
    pub taus: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub tau_star: f64,
    /// `∫ H dx` at levels `0..=m`.
    pub mass: Vec<f64>,
    pub picard_max_used: usize,
}

impl GammaField {
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max)
    }
}

/// Implicit Euler in conservative form with `β(H) = b(H) H` and `b` lagged
/// (Picard) inside each level. Face fluxes are central where the cell Péclet
/// number is at most one and upwind otherwise, so the matrix keeps the
/// M-matrix sign pattern and `H ≥ 0` is preserved.
pub fn solve_gamma_equation(params: &MarketParams, rapm: &RapmParams, cfg: &GammaConfig) -> Result<GammaField> {
    solve_gamma_with_mu(params, rapm.mu(), cfg)
}

pub fn solve_gamma_with_mu(params: &MarketParams, mu: f64, cfg: &GammaConfig) -> Result<GammaField> {
    params.validate()?;
    cfg.validate()?;
    if !(mu >= 0.0) {
        return Err(Error::invalid(format!("mu must be non-negative, got {mu}")));
    }
    let x = cfg.grid(params);
    let n = cfg.n;
    let h = x[1] - x[0];
    let k = params.expiry / cfg.m as f64;
    let half_s2 = 0.5 * params.sigma * params.sigma;
    let b_of = |v: f64| half_s2 * (1.0 + mu * signed_power(v.max(0.0), 1.0 / 3.0));

    let mut prev = initial_gamma(params, cfg.tau_star, &x);
    prev[0] = 0.0;
    prev[n] = 0.0;
    let mut mass = vec![trapezoid(&x, &prev)];
    let snap_every = (cfg.m / cfg.snapshots.max(1)).max(1);
    let mut taus = vec![0.0];
    let mut values = vec![prev.clone()];
    let mut picard_max_used = 0;

    let interior = n - 1;
    let mut lower = vec![0.0; interior];
    let mut diag = vec![0.0; interior];
    let mut upper = vec![0.0; interior];
    let mut b = vec![0.0; n + 1];
    for j in 1..=cfg.m {
        let tau = j as f64 * k;
        let mut cur = prev.clone();
        let mut converged = false;
        let mut history = Vec::new();
        for sweep in 1..=cfg.picard_max {
            for (bi, &v) in b.iter_mut().zip(&cur) {
                *bi = b_of(v);
            }
            // face i+½ flux F = (b_{i+1}H_{i+1} - b_i H_i)/h + flux of (b + r)H
            // written as F = cr_i H_{i+1} + cl_i H_i
            let face = |i: usize| -> (f64, f64) {
                let (vl, vr) = (b[i] + params.rate, b[i + 1] + params.rate);
                let peclet = h * vl.max(vr) / (2.0 * b[i].min(b[i + 1]));
                if peclet <= 1.0 {
                    (-b[i] / h + 0.5 * vl, b[i + 1] / h + 0.5 * vr)
                } else {
                    (-b[i] / h, b[i + 1] / h + vr)
                }
            };
            let c = k / h;
            for i in 1..n {
                let (l_out, r_out) = face(i);
                let (l_in, r_in) = face(i - 1);
                let row = i - 1;
                // H_i - (k/h)(F_{i+½} - F_{i-½}) = H_i^{j-1}
                lower[row] = c * l_in;
                diag[row] = 1.0 - c * (l_out - r_in);
                upper[row] = -c * r_out;
            }
            let sol = solve_tridiagonal(&lower, &diag, &upper, &prev[1..n])
                .map_err(|e| e.at_tau("gamma_eq", tau))?;
            let mut change: f64 = 0.0;
            for (i, v) in sol.into_iter().enumerate() {
                change = change.max((v - cur[i + 1]).abs());
                cur[i + 1] = v;
            }
            history.push(change);
            if change < cfg.picard_tol {
                picard_max_used = picard_max_used.max(sweep);
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                what: "Gamma-equation Picard iteration",
                iterations: cfg.picard_max,
                residual: *history.last().unwrap_or(&f64::NAN),
                history,
            }
            .at_tau("gamma_eq", tau));
        }
        if let Some((i, v)) = cur.iter().enumerate().find(|(_, v)| **v < -1e-12) {
            return Err(Error::numeric("gamma_eq", format!("negative H = {v:.3e} at x = {}", x[i])).at_tau("gamma_eq", tau));
        }
        mass.push(trapezoid(&x, &cur));
        if j % snap_every == 0 || j == cfg.m {
            taus.push(tau);
            values.push(cur.clone());
        }
        prev = cur;
    }
    Ok(GammaField {
        x,
        taus,
        values,
        tau_star: cfg.tau_star,
        mass,
        picard_max_used,
    })
}

/// Mesh for the risk-adjusted European pricer in `x = ln(S/E)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RapmPriceConfig {
    pub n: usize,
    pub m: usize,
    /// Half width of the log-price window around the strike (before widening to cover the quotes).
    pub half_width: Option<f64>,
    pub inner_tol: f64,
    pub inner_max: usize,
}

impl Default for RapmPriceConfig {
    fn default() -> Self {
        RapmPriceConfig {
            n: 800,
            m: 400,
            half_width: None,
            inner_tol: 1e-8,
            inner_max: 50,
        }
    }
}

/// European call values under the risk-adjusted equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RapmPriceCurve {
    pub spots: Vec<f64>,
    pub prices: Vec<f64>,
    /// Asset prices `E e^{x_i}` of the underlying mesh and the values there.
    pub grid_spots: Vec<f64>,
    pub grid_prices: Vec<f64>,
    pub inner_sweeps_max: usize,
}

pub fn price_european_rapm(
    params: &MarketParams,
    rapm: &RapmParams,
    spots: &[f64],
    cfg: &RapmPriceConfig,
) -> Result<RapmPriceCurve> {
    price_european_mu(params, rapm.mu(), spots, cfg)
}

/// Crank-Nicolson (four implicit half steps at the start) for
/// `V_τ = (σ²/2)(V_xx - V_x) + (r - q)V_x - rV` with
/// `σ² = σ̂²(1 + μ (SΓ)^(1/3))`, `SΓ = (V_xx - V_x)/S`. The implicit-side
/// variance is lagged on the inner iterate.
pub fn price_european_mu(params: &MarketParams, mu: f64, spots: &[f64], cfg: &RapmPriceConfig) -> Result<RapmPriceCurve> {
    params.validate()?;
    if !(mu >= 0.0) {
        return Err(Error::invalid(format!("mu must be non-negative, got {mu}")));
    }
    if cfg.n < 4 || cfg.m == 0 || cfg.inner_max == 0 || !(cfg.inner_tol > 0.0) {
        return Err(Error::invalid("RAPM pricer needs n >= 4, m >= 1 and positive inner tolerance"));
    }
    if spots.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("asset prices must be positive"));
    }
    let e = params.strike;
    let (r, q) = (params.rate, params.dividend);
    let mut w = cfg
        .half_width
        .unwrap_or(6.0 * params.sigma * params.expiry.sqrt() + (r - q).abs() * params.expiry + 0.5);
    for s in spots {
        w = w.max((s / e).ln().abs() + 0.5);
    }
    let n = cfg.n;
    let h = 2.0 * w / n as f64;
    let x: Vec<f64> = (0..=n).map(|i| -w + i as f64 * h).collect();
    let grid_spots: Vec<f64> = x.iter().map(|xi| e * xi.exp()).collect();
    let mut v: Vec<f64> = grid_spots.iter().map(|s| (s - e).max(0.0)).collect();

    let s2 = params.sigma * params.sigma;
    let variance = |vals: &[f64], out: &mut [f64]| {
        for i in 1..n {
            let p = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (h * h) - (vals[i + 1] - vals[i - 1]) / (2.0 * h);
            out[i] = s2 * (1.0 + mu * signed_power(p / grid_spots[i], 1.0 / 3.0));
        }
    };
    // L_i V = a_i V_{i-1} + c_i V_i + d_i V_{i+1}
    let coeffs = |var: f64| {
        let diff = 0.5 * var / (h * h);
        let conv = (r - q - 0.5 * var) / (2.0 * h);
        (diff - conv, -2.0 * diff - r, diff + conv)
    };

    let k_full = params.expiry / cfg.m as f64;
    let mut steps: Vec<(f64, f64)> = Vec::new(); // (k, θ)
    let startup = cfg.m.min(2);
    for _ in 0..2 * startup {
        steps.push((0.5 * k_full, 1.0));
    }
    for _ in startup..cfg.m {
        steps.push((k_full, 0.5));
    }
    let mut tau = 0.0;
    let mut var_old = vec![s2; n + 1];
    let mut var_new = vec![s2; n + 1];
    let mut inner_sweeps_max = 0;
    let (mut lower, mut diag, mut upper, mut rhs) =
        (vec![0.0; n - 1], vec![0.0; n - 1], vec![0.0; n - 1], vec![0.0; n - 1]);
    for (level, &(k, theta)) in steps.iter().enumerate() {
        tau += k;
        variance(&v, &mut var_old);
        let right = grid_spots[n] * (-q * tau).exp() - e * (-r * tau).exp();
        let mut cur = v.clone();
        cur[0] = 0.0;
        cur[n] = right;
        let mut converged = false;
        for sweep in 1..=cfg.inner_max {
            variance(&cur, &mut var_new);
            for i in 1..n {
                let (a0, c0, d0) = coeffs(var_old[i]);
                let (a1, c1, d1) = coeffs(var_new[i]);
                let row = i - 1;
                lower[row] = -theta * k * a1;
                diag[row] = 1.0 - theta * k * c1;
                upper[row] = -theta * k * d1;
                rhs[row] = v[i] + (1.0 - theta) * k * (a0 * v[i - 1] + c0 * v[i] + d0 * v[i + 1]);
            }
            rhs[n - 2] -= upper[n - 2] * right;
            let sol = solve_tridiagonal(&lower, &diag, &upper, &rhs).map_err(|e| e.at_tau("gamma_eq", tau))?;
            let mut change: f64 = 0.0;
            for (i, val) in sol.into_iter().enumerate() {
                change = change.max((val - cur[i + 1]).abs());
                cur[i + 1] = val;
            }
            if mu == 0.0 || change < cfg.inner_tol {
                inner_sweeps_max = inner_sweeps_max.max(sweep);
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::numeric(
                "gamma_eq",
                format!("risk-adjusted inner sweeps did not converge at level {}", level + 1),
            )
            .at_tau("gamma_eq", tau));
        }
        v = cur;
    }
    let prices = spots.iter().map(|s| lerp_uniform(&v, h, (s / e).ln() + w)).collect();
    Ok(RapmPriceCurve {
        spots: spots.to_vec(),
        prices,
        grid_spots,
        grid_prices: v,
        inner_sweeps_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidAsk {
    pub bid: f64,
    pub mid: f64,
    pub ask: f64,
}

/// `V_ask = V(C, σ̂, R)`, `V_mid = V(C, σ̂, 0)`, `V_bid = 2V_mid - V_ask` at calendar time `t`.
pub fn bid_ask(params: &MarketParams, rapm: &RapmParams, spot: f64, t: f64, cfg: &RapmPriceConfig) -> Result<BidAsk> {
    let p = remaining(params, t)?;
    let ask = price_european_mu(&p, rapm.mu(), &[spot], cfg)?.prices[0];
    let mid = price_european_mu(&p, 0.0, &[spot], cfg)?.prices[0];
    Ok(BidAsk {
        bid: 2.0 * mid - ask,
        mid,
        ask,
    })
}

fn remaining(params: &MarketParams, t: f64) -> Result<MarketParams> {
    if !(t >= 0.0 && t < params.expiry) {
        return Err(Error::invalid(format!("t = {t} must lie in [0, T) with T = {}", params.expiry)));
    }
    Ok(MarketParams {
        expiry: params.expiry - t,
        ..*params
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RapmCalibration {
    pub sigma: f64,
    pub risk_premium: f64,
    pub mu: f64,
    pub iterations: usize,
    /// `max(|V_mid - model|, |V_ask - model|)` at the solution.
    pub residual: f64,
}

/// Solves `V_ask = V(S, t; C, σ, R)`, `V_mid = V(S, t; C, σ, 0)` for `(σ, R)`.
///
/// Damped Newton with a forward-difference Jacobian, iterating on `(σ, μ)`
/// rather than `(σ, R)`: `R ∝ μ³`, so `∂V/∂R` is unbounded at `R = 0` while
/// `∂V/∂μ` is not. `R` is recovered as `2π (μ/3)³ / C²`.
pub fn calibrate_rapm(
    v_mid: f64,
    v_ask: f64,
    cost: f64,
    params: &MarketParams,
    spot: f64,
    t: f64,
    cfg: &RapmPriceConfig,
) -> Result<RapmCalibration> {
    const MAX_ITERS: usize = 50;
    let p = remaining(params, t)?;
    if !(cost > 0.0) {
        return Err(Error::invalid("calibration needs a positive transaction cost C"));
    }
    if !(v_mid > 0.0) || !(v_ask >= v_mid) {
        return Err(Error::invalid(format!(
            "quotes are infeasible for the model (need 0 < V_mid <= V_ask, got mid {v_mid}, ask {v_ask})"
        )));
    }
    let tol = 1e-6 * p.strike;
    let price = |sigma: f64, mu: f64| -> Result<f64> {
        let q = MarketParams { sigma, ..p };
        Ok(price_european_mu(&q, mu, &[spot], cfg)?.prices[0])
    };
    let residual = |sigma: f64, mu: f64| -> Result<[f64; 2]> {
        let mid = price(sigma, 0.0)?;
        let ask = if mu == 0.0 { mid } else { price(sigma, mu)? };
        Ok([mid - v_mid, ask - v_ask])
    };
    let norm = |f: &[f64; 2]| f[0].abs().max(f[1].abs());

    let mut sigma = p.sigma;
    let mut mu = if v_ask > v_mid { 0.1 } else { 0.0 };
    let mut f = residual(sigma, mu)?;
    let mut history = vec![norm(&f)];
    for iter in 1..=MAX_ITERS {
        if norm(&f) < tol {
            return Ok(RapmCalibration {
                sigma,
                risk_premium: rapm_risk_premium(mu, cost),
                mu,
                iterations: iter - 1,
                residual: norm(&f),
            });
        }
        let ds = 1e-6 * sigma.max(1e-2);
        let fs = residual(sigma + ds, mu)?;
        let (j00, j10) = ((fs[0] - f[0]) / ds, (fs[1] - f[1]) / ds);
        let (dsig, dmu) = if v_ask == v_mid {
            (-f[0] / j00, 0.0)
        } else {
            let dm = 1e-6 * mu.max(1e-2);
            let fm = residual(sigma, mu + dm)?;
            let (j01, j11) = ((fm[0] - f[0]) / dm, (fm[1] - f[1]) / dm);
            let det = j00 * j11 - j01 * j10;
            if det == 0.0 || !det.is_finite() {
                return Err(Error::Convergence {
                    what: "RAPM calibration (singular Jacobian)",
                    iterations: iter,
                    residual: norm(&f),
                    history,
                });
            }
            ((-f[0] * j11 + f[1] * j01) / det, (-f[1] * j00 + f[0] * j10) / det)
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=10 {
            let s_try = sigma + lambda * dsig;
            let m_try = (mu + lambda * dmu).max(0.0);
            if s_try > 0.0 {
                let f_try = residual(s_try, m_try)?;
                if norm(&f_try) < norm(&f) {
                    accepted = Some((s_try, m_try, f_try));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((s_new, m_new, f_new)) = accepted else {
            return Err(Error::Convergence {
                what: "RAPM calibration (no descent step)",
                iterations: iter,
                residual: norm(&f),
                history,
            });
        };
        (sigma, mu, f) = (s_new, m_new, f_new);
        history.push(norm(&f));
    }
    Err(Error::Convergence {
        what: "RAPM calibration",
        iterations: MAX_ITERS,
        residual: norm(&f),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{bs_european_price, OptionKind};

    #[test]
    fn optimum_satisfies_first_order_condition() {
        let rapm = RapmParams::new(0.01, 30.0).unwrap();
        let o = optimal_hedging_interval(&rapm, 0.3, 10.0, 0.1).unwrap();
        assert!((o.r_tc - 2.0 * o.r_vp).abs() <= 1e-12 * o.r_tc);
        assert!((o.r_tc + o.r_vp - o.total).abs() <= 1e-12 * o.total);
        let closed = 1.5 * (0.01f64 * 0.01 * 30.0 / (2.0 * std::f64::consts::PI)).cbrt() * 0.09;
        assert!((o.total - closed).abs() <= 1e-12 * closed);
        // strict minimum
        for f in [0.9, 1.1] {
            let t = f * o.dt;
            assert!(r_tc(0.01, 0.3, 10.0, 0.1, t) + r_vp(30.0, 0.3, 10.0, 0.1, t) > o.total);
        }
    }

    #[test]
    fn degenerate_costs_have_no_premium() {
        let o = optimal_hedging_interval(&RapmParams::new(0.0, 5.0).unwrap(), 0.3, 10.0, 0.1).unwrap();
        assert!(o.degenerate && o.total == 0.0 && o.dt == 0.0);
        let o = optimal_hedging_interval(&RapmParams::new(0.01, 0.0).unwrap(), 0.3, 10.0, 0.1).unwrap();
        assert!(o.degenerate && o.dt.is_infinite());
        assert!(RapmParams::new(-0.1, 1.0).is_err());
    }

    #[test]
    fn initial_gamma_is_a_unit_bump() {
        let p = MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.3);
        let x: Vec<f64> = (0..=4000).map(|i| -0.5 + i as f64 * 2.5e-4).collect();
        let h = initial_gamma(&p, 0.005, &x);
        assert!((trapezoid(&x, &h) - 1.0).abs() < 1e-3);
        assert!(h.iter().all(|v| *v >= 0.0));
        let peak = x[h.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
        let expected = -(0.1 - 0.05 - 0.045) * 0.005;
        assert!((peak - expected).abs() <= 2.5e-4);
    }

    #[test]
    fn linear_gamma_equation_matches_closed_form() {
        let p = MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.3);
        let cfg = GammaConfig::default();
        let field = solve_gamma_with_mu(&p, 0.0, &cfg).unwrap();
        let last = field.values.last().unwrap();
        let err = field
            .x
            .iter()
            .zip(last)
            .map(|(x, v)| (v - gamma_closed_form(&p, cfg.tau_star, *x, 1.0)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
        assert!(field.max_mass_drift() < 1e-3);
    }

    #[test]
    fn nonlinear_gamma_conserves_mass_and_spreads_faster() {
        let p = MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.3);
        let cfg = GammaConfig {
            m: 500,
            ..GammaConfig::default()
        };
        let lin = solve_gamma_with_mu(&p, 0.0, &cfg).unwrap();
        let non = solve_gamma_with_mu(&p, 0.2, &cfg).unwrap();
        assert!(non.max_mass_drift() < 1e-3);
        assert!(non.values.iter().flatten().all(|v| *v >= -1e-12));
        let peak = |v: &Vec<f64>| v.iter().copied().fold(0.0, f64::max);
        assert!(peak(non.values.last().unwrap()) < peak(lin.values.last().unwrap()));
    }

    #[test]
    fn linear_pricer_matches_black_scholes() {
        let p = MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.3);
        let curve = price_european_mu(&p, 0.0, &[8.0, 10.0, 12.0], &RapmPriceConfig::default()).unwrap();
        for (s, v) in curve.spots.iter().zip(&curve.prices) {
            let bs = bs_european_price(*s, &p, 1.0, OptionKind::Call);
            assert!((v - bs).abs() <= 1e-3 * bs, "S = {s}: {v} vs {bs}");
        }
    }

    #[test]
    fn risk_adjustment_raises_prices_and_keeps_convexity() {
        let p = MarketParams::new(0.011, 0.0, 25.0, 1.0, 0.3);
        let cfg = RapmPriceConfig::default();
        let lin = price_european_mu(&p, 0.0, &[25.0], &cfg).unwrap();
        let non = price_european_mu(&p, 0.2, &[25.0], &cfg).unwrap();
        for (a, b) in non.grid_prices.iter().zip(&lin.grid_prices) {
            assert!(a + 1e-6 >= *b);
        }
        let (s, v) = (&non.grid_spots, &non.grid_prices);
        for i in 1..s.len() - 1 {
            let left = (v[i] - v[i - 1]) / (s[i] - s[i - 1]);
            let right = (v[i + 1] - v[i]) / (s[i + 1] - s[i]);
            assert!(right - left >= -1e-8, "convexity lost at S = {}", s[i]);
        }
    }

    #[test]
    fn spread_grows_with_risk_premium() {
        let p = MarketParams::new(0.011, 0.0, 25.0, 1.0, 0.3);
        let cfg = RapmPriceConfig::default();
        let zero = bid_ask(&p, &RapmParams::new(0.01, 0.0).unwrap(), 25.0, 0.0, &cfg).unwrap();
        assert_eq!(zero.bid, zero.ask);
        let mut last = 0.0;
        for r in [1.0, 5.0, 20.0] {
            let q = bid_ask(&p, &RapmParams::new(0.01, r).unwrap(), 25.0, 0.0, &cfg).unwrap();
            assert!(q.ask >= q.mid && q.mid >= q.bid);
            assert!(q.ask - q.bid > last);
            last = q.ask - q.bid;
        }
    }

    #[test]
    fn calibration_round_trip() {
        let p = MarketParams::new(0.011, 0.0, 25.0, 1.0, 0.25);
        let cfg = RapmPriceConfig::default();
        let truth = MarketParams { sigma: 0.3, ..p };
        let q = bid_ask(&truth, &RapmParams::new(0.01, 5.0).unwrap(), 25.0, 0.0, &cfg).unwrap();
        let cal = calibrate_rapm(q.mid, q.ask, 0.01, &p, 25.0, 0.0, &cfg).unwrap();
        assert!((cal.sigma - 0.3).abs() <= 1e-3 * 0.3, "{cal:?}");
        assert!((cal.risk_premium - 5.0).abs() <= 1e-3 * 5.0, "{cal:?}");
    }

    #[test]
    fn calibration_edge_cases() {
        let p = MarketParams::new(0.011, 0.0, 25.0, 1.0, 0.25);
        let cfg = RapmPriceConfig::default();
        let mid = price_european_mu(&MarketParams { sigma: 0.3, ..p }, 0.0, &[25.0], &cfg).unwrap().prices[0];
        let cal = calibrate_rapm(mid, mid, 0.01, &p, 25.0, 0.0, &cfg).unwrap();
        assert_eq!(cal.risk_premium, 0.0);
        assert!((cal.sigma - 0.3).abs() < 1e-5);
        assert!(calibrate_rapm(mid, mid - 0.1, 0.01, &p, 25.0, 0.0, &cfg).is_err());
    }
}
