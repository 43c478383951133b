//! Constant-volatility American call through its boundary integral equation.
//!
//! The boundary is written as `ρ(τ) = (rE/q)(1 + σ√2 H(√τ))`, and `H` solves
//!
//! ```text
//! H(ξ) = f_H(ξ) + π^(-1/2) ∫_0^{π/2} [ξ cos θ - 2 cot θ H(ξ cos θ) g_H(ξ, θ)]
//!                                 · exp(-r ξ² sin²θ - g_H(ξ, θ)²) dθ
//! ```
//!
//! with `g_H` the scaled log-ratio of the boundary between `ξ cos θ` and `ξ`.
//! [`iterate_boundary`] applies the right-hand side once at every node.
//! [`solve_boundary`] solves the same discrete equations by Gauss-Seidel
//! sweeps in ξ, which settle in about three sweeps; the plain map does not
//! converge on fine meshes (see [`sweep_boundary`]).

mod pricing;
mod put;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryCurve;
use crate::error::{Error, Result};
use crate::model::MarketParams;
use crate::numerics::CompositeGauss;

pub use pricing::{price_call_semi_explicit, semi_explicit_kernels};
pub use put::put_boundary_asymptotic;

/// Slope of the first-order approximation `H(ξ) ≈ h₁ ξ` used as the starting iterate.
pub const INITIAL_SLOPE: f64 = 0.451381;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralEqConfig {
    /// Number of ξ intervals on `[0, sqrt(T)]`.
    pub nodes: usize,
    pub panels: usize,
    pub order: usize,
    /// Below this angle `cot θ · g_H` is replaced by its θ → 0 limit.
    pub eps: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Fixed-point relaxation `H ← ω T(H) + (1 - ω) H`; 1 means none.
    pub relaxation: f64,
}

impl Default for IntegralEqConfig {
    fn default() -> Self {
        IntegralEqConfig {
            nodes: 100,
            panels: 64,
            order: 8,
            eps: 1e-5,
            tol: 1e-8,
            max_iters: 20,
            relaxation: 1.0,
        }
    }
}

impl IntegralEqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 || self.panels == 0 || self.order == 0 {
            return Err(Error::invalid("integral equation needs nodes >= 2 and a non-empty quadrature"));
        }
        if !(self.eps > 0.0 && self.eps < 0.1) {
            return Err(Error::invalid("eps must lie in (0, 0.1)"));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::invalid("tol must be positive and max_iters at least 1"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::invalid("relaxation must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Auxiliary function `H` on the uniform grid `ξ_i = i sqrt(T)/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunctionH {
    pub xi: Vec<f64>,
    pub values: Vec<f64>,
    /// `Λ = (r - q)/σ - σ/2`.
    pub lambda: f64,
}

impl BoundaryFunctionH {
    pub fn initial(params: &MarketParams, nodes: usize) -> Self {
        let step = params.expiry.sqrt() / nodes as f64;
        let xi: Vec<f64> = (0..=nodes).map(|i| i as f64 * step).collect();
        let values = xi.iter().map(|x| INITIAL_SLOPE * x).collect();
        BoundaryFunctionH {
            xi,
            values,
            lambda: lambda(params),
        }
    }

    pub fn step(&self) -> f64 {
        self.xi[1] - self.xi[0]
    }

    /// H′ at node `i`: centered inside, three-point one-sided at the ends.
    pub fn derivative(&self, i: usize) -> f64 {
        derivative_at(&self.values, self.step(), i)
    }

    /// `ρ(τ_i)` at `τ_i = ξ_i²`.
    pub fn to_curve(&self, params: &MarketParams) -> BoundaryCurve {
        let start = params.call_boundary_start();
        let a = params.sigma * std::f64::consts::SQRT_2;
        BoundaryCurve::new(
            self.xi.iter().map(|x| x * x).collect(),
            self.values.iter().map(|h| start * (1.0 + a * h)).collect(),
        )
    }

    /// `ρ(τ)` with `H` interpolated linearly in `ξ = sqrt(τ)`, which keeps the
    /// square-root start of the boundary exact between nodes.
    pub fn rho_at(&self, tau: f64, params: &MarketParams) -> f64 {
        let h = crate::numerics::lerp_uniform(&self.values, self.step(), tau.max(0.0).sqrt());
        params.call_boundary_start() * (1.0 + params.sigma * std::f64::consts::SQRT_2 * h)
    }

    pub fn max_change(&self, other: &BoundaryFunctionH) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn lambda(params: &MarketParams) -> f64 {
    (params.rate - params.dividend) / params.sigma - 0.5 * params.sigma
}

/// `f_H(ξ)`; vanishes faster than any power at ξ = 0.
pub fn source_term(h_xi: f64, xi: f64, params: &MarketParams) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    let a = params.sigma * std::f64::consts::SQRT_2;
    let g = (a * h_xi).ln_1p() / (a * xi) + lambda(params) * xi / std::f64::consts::SQRT_2;
    let shift = g + (params.rate / params.dividend).ln() / (a * xi);
    let r = params.rate;
    (-r * xi * xi - shift * shift).exp() / (2.0 * r * std::f64::consts::PI.sqrt() * xi)
}

struct NodeIntegrand<'a> {
    values: &'a [f64],
    step: f64,
    i: usize,
    xi: f64,
    a: f64,
    rate: f64,
    lambda: f64,
}

impl NodeIntegrand<'_> {
    fn eval(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let xc = self.xi * c;
        let vals = self.values;
        let k = ((xc / self.step).floor() as usize).min(self.i - 1);
        let t = xc / self.step - k as f64;
        let h_c = vals[k] + t * (vals[k + 1] - vals[k]);
        // H(ξ) - H(ξ cos θ) without cancellation when ξ cos θ shares ξ's segment
        let diff = if k == self.i - 1 {
            let half = (0.5 * theta).sin();
            (vals[self.i] - vals[k]) / self.step * 2.0 * self.xi * half * half
        } else {
            vals[self.i] - h_c
        };
        let log_ratio = (self.a * diff / (1.0 + self.a * h_c)).ln_1p();
        let g = log_ratio / (self.a * self.xi * s) + self.lambda * self.xi * s / std::f64::consts::SQRT_2;
        (self.xi * c - 2.0 * (c / s) * h_c * g) * (-self.rate * self.xi * self.xi * s * s - g * g).exp()
    }

    // θ → 0 limit of the integrand with cot θ · g_H replaced by its limit.
    fn limit(&self) -> f64 {
        let h_xi = self.values[self.i];
        let cot_g = 0.5 * derivative_at(self.values, self.step, self.i) / (1.0 + self.a * h_xi)
            + self.lambda * self.xi / std::f64::consts::SQRT_2;
        self.xi - 2.0 * h_xi * cot_g
    }
}

fn derivative_at(v: &[f64], h: f64, i: usize) -> f64 {
    let n = v.len() - 1;
    if i == 0 {
        (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    } else if i == n {
        (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h)
    } else {
        (v[i + 1] - v[i - 1]) / (2.0 * h)
    }
}

// Right-hand side of the integral equation at node `i`, reading H from `values`.
fn operator_at(
    values: &[f64],
    step: f64,
    i: usize,
    params: &MarketParams,
    lambda: f64,
    eps: f64,
    rule: &CompositeGauss,
) -> Result<f64> {
    if i == 0 {
        return Ok(0.0);
    }
    let xi = i as f64 * step;
    let integrand = NodeIntegrand {
        values,
        step,
        i,
        xi,
        a: params.sigma * std::f64::consts::SQRT_2,
        rate: params.rate,
        lambda,
    };
    let body = rule.integrate(|t| integrand.eval(t)) + eps * integrand.limit();
    let v = source_term(values[i], xi, params) + body / std::f64::consts::PI.sqrt();
    if !v.is_finite() {
        return Err(Error::numeric("integral_eq", format!("non-finite quadrature at xi = {xi}")));
    }
    Ok(v)
}

/// One application of the integral operator, `H^{n+1} = T(H^n)`, at every node.
pub fn iterate_boundary(h: &BoundaryFunctionH, params: &MarketParams, cfg: &IntegralEqConfig) -> Result<BoundaryFunctionH> {
    let rule = CompositeGauss::new(cfg.eps, std::f64::consts::FRAC_PI_2, cfg.panels, cfg.order);
    let step = h.step();
    let values: Vec<f64> = (0..h.xi.len())
        .into_par_iter()
        .map(|i| operator_at(&h.values, step, i, params, h.lambda, cfg.eps, &rule))
        .collect::<Result<_>>()?;
    Ok(BoundaryFunctionH {
        xi: h.xi.clone(),
        values,
        lambda: h.lambda,
    })
}

/// One nonlinear Gauss-Seidel sweep: nodes are visited in increasing ξ and
/// `H_i = T_i(H_0, ..., H_i)` is solved exactly (secant) at each, with
/// already-updated values to the left.
///
/// The operator reads `H` only on `[0, ξ_i]` apart from the centered `H′` in
/// the ε-patch, so a sweep is very nearly a direct solve. Solving for the
/// node's own value matters: the kernel acts on `H(ξ) - H(ξ cos θ)` like a
/// half derivative, and the plain map amplifies node-scale oscillations.
pub fn sweep_boundary(h: &BoundaryFunctionH, params: &MarketParams, cfg: &IntegralEqConfig) -> Result<BoundaryFunctionH> {
    let rule = CompositeGauss::new(cfg.eps, std::f64::consts::FRAC_PI_2, cfg.panels, cfg.order);
    sweep_with(h, params, cfg, &rule)
}

fn sweep_with(
    h: &BoundaryFunctionH,
    params: &MarketParams,
    cfg: &IntegralEqConfig,
    rule: &CompositeGauss,
) -> Result<BoundaryFunctionH> {
    let step = h.step();
    let mut values = h.values.clone();
    for i in 1..values.len() {
        let residual = |trial: f64, vals: &mut Vec<f64>| -> Result<f64> {
            vals[i] = trial;
            Ok(operator_at(vals, step, i, params, h.lambda, cfg.eps, rule)? - trial)
        };
        let mut x0 = values[i];
        let mut f0 = residual(x0, &mut values)?;
        // the residual falls steeply in the node value; start the secant from a
        // small perturbation rather than the plain fixed-point step
        let mut x1 = x0 + 1e-6 * x0.abs().max(1e-3);
        let mut converged = f0 == 0.0;
        if converged {
            x1 = x0;
        }
        let mut iters = 0;
        while !converged && iters < 50 {
            iters += 1;
            let f1 = residual(x1, &mut values)?;
            if f1 == 0.0 || f1 == f0 {
                converged = true;
                break;
            }
            let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
            (x0, f0, x1) = (x1, f1, x2);
            converged = (x1 - x0).abs() <= 1e-12 * x1.abs().max(1e-3);
        }
        if !converged || !x1.is_finite() {
            return Err(Error::numeric(
                "integral_eq",
                format!("node equation did not converge at xi = {}", i as f64 * step),
            ));
        }
        values[i] = x1;
    }
    Ok(BoundaryFunctionH {
        xi: h.xi.clone(),
        values,
        lambda: h.lambda,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralSolution {
    pub h: BoundaryFunctionH,
    pub curve: BoundaryCurve,
    pub iterations: usize,
    /// Max-node change after each sweep.
    pub history: Vec<f64>,
    /// Whether every sweep moved every node up (to rounding).
    pub monotone: bool,
}

/// Gauss-Seidel sweeps from `H⁰ = 0.451381 ξ` until the max-node change drops below `cfg.tol`.
pub fn solve_boundary(params: &MarketParams, cfg: &IntegralEqConfig) -> Result<IntegralSolution> {
    params.validate_call()?;
    cfg.validate()?;
    let rule = CompositeGauss::new(cfg.eps, std::f64::consts::FRAC_PI_2, cfg.panels, cfg.order);
    let mut h = BoundaryFunctionH::initial(params, cfg.nodes);
    let mut history = Vec::new();
    let mut monotone = true;
    for iter in 1..=cfg.max_iters {
        let mut next = sweep_with(&h, params, cfg, &rule)?;
        if cfg.relaxation < 1.0 {
            for (n, o) in next.values.iter_mut().zip(&h.values) {
                *n = cfg.relaxation * *n + (1.0 - cfg.relaxation) * o;
            }
        }
        monotone &= next.values.iter().zip(&h.values).all(|(n, o)| *n >= o - 1e-12);
        let change = next.max_change(&h);
        history.push(change);
        h = next;
        if change < cfg.tol {
            let curve = h.to_curve(params);
            return Ok(IntegralSolution {
                h,
                curve,
                iterations: iter,
                history,
                monotone,
            });
        }
    }
    Err(Error::Convergence {
        what: "boundary integral equation",
        iterations: cfg.max_iters,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench() -> MarketParams {
        MarketParams::new(0.1, 0.05, 10.0, 1.0, 0.2)
    }

    #[test]
    fn boundary_starts_at_re_over_q() {
        let sol = solve_boundary(&bench(), &IntegralEqConfig::default()).unwrap();
        assert_eq!(sol.curve.rhos[0], 20.0);
        assert!(sol.curve.is_nondecreasing(0.0));
    }

    #[test]
    fn zero_input_gives_positive_output() {
        let p = bench();
        let mut h = BoundaryFunctionH::initial(&p, 20);
        h.values.iter_mut().for_each(|v| *v = 0.0);
        let next = iterate_boundary(&h, &p, &IntegralEqConfig::default()).unwrap();
        assert!(next.values[1..].iter().all(|v| *v > 0.0));
        // with H = 0 the integrand is ξ cos θ exp(-r ξ² sin²θ - Λ² ξ² sin²θ / 2)
        let lam = lambda(&p);
        let xi = next.xi[20];
        let fine = CompositeGauss::new(0.0, std::f64::consts::FRAC_PI_2, 640, 8);
        let direct = fine.integrate(|t| {
            let s = t.sin();
            xi * t.cos() * (-(p.rate + 0.5 * lam * lam) * xi * xi * s * s).exp()
        }) / std::f64::consts::PI.sqrt()
            + source_term(0.0, xi, &p);
        assert!((next.values[20] - direct).abs() < 1e-9, "{} vs {direct}", next.values[20]);
    }

    #[test]
    fn source_term_is_flat_at_origin() {
        let p = bench();
        assert_eq!(source_term(0.0, 0.0, &p), 0.0);
        for &xi in &[1e-3, 1e-2] {
            assert!(source_term(INITIAL_SLOPE * xi, xi, &p) < xi.powi(6));
        }
    }

    #[test]
    fn solution_is_a_fixed_point_of_the_plain_map() {
        let p = bench();
        let cfg = IntegralEqConfig::default();
        let sol = solve_boundary(&p, &cfg).unwrap();
        assert!(sol.iterations <= 10);
        let again = iterate_boundary(&sol.h, &p, &cfg).unwrap();
        // only the centered H′ inside the ε-patch separates the two
        assert!(again.max_change(&sol.h) < 1e-8, "{}", again.max_change(&sol.h));
    }

    #[test]
    fn first_plain_iterate_stays_positive_and_bounded() {
        let p = bench();
        let h0 = BoundaryFunctionH::initial(&p, 50);
        let h1 = iterate_boundary(&h0, &p, &IntegralEqConfig::default()).unwrap();
        for (a, b) in h1.values.iter().zip(&h0.values).skip(1) {
            assert!(*a > 0.0 && *a < 1.5 * b);
        }
    }

    #[test]
    fn quadrature_refinement_barely_moves_the_end_value() {
        let p = bench();
        let coarse = solve_boundary(&p, &IntegralEqConfig::default()).unwrap();
        let fine = solve_boundary(
            &p,
            &IntegralEqConfig {
                panels: 128,
                ..IntegralEqConfig::default()
            },
        )
        .unwrap();
        let (a, b) = (coarse.curve.last_rho(), fine.curve.last_rho());
        assert!((a - b).abs() / b < 1e-4);
    }

    #[test]
    fn invalid_rates_are_rejected() {
        let p = MarketParams::new(0.05, 0.08, 10.0, 1.0, 0.2);
        assert!(matches!(
            solve_boundary(&p, &IntegralEqConfig::default()),
            Err(Error::InvalidParams(_))
        ));
    }
}
