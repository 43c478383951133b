//! American floating-strike Asian call (arithmetic average `A`).
//!
//! In the similarity variable `x = S/A` and then `ξ = ln(ρ(τ)/x)`,
//! `Π = W - x W_x`, the problem becomes
//!
//! ```text
//! Π_τ + a(ξ, τ) Π_ξ - (σ²/2) Π_ξξ + (r + 1/(T - τ)) Π = 0,
//! a = ρ̇/ρ + r - q - σ²/2 - (ρ e^{-ξ} - 1)/(T - τ),
//! ρ(τ) = (1 + r(T - τ) + (T - τ)(σ²/2) Π_ξ(0, τ)) / (1 + q(T - τ)),
//! Π(0, τ) = -1,  Π(∞, τ) = 0,  ρ(0) = (1 + rT)/(1 + qT).
//! ```
//!
//! The ρ̇/ρ + r - q part of `a` is handled by the transport step and the
//! ξ-dependent rest by the implicit diffusion step. The coefficients blow up
//! as τ → T, so the march stops one step short of expiry.

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryCurve;
use crate::error::{Error, Result};
use crate::model::MarketParams;
use crate::numerics::solve_tridiagonal_into;
use crate::pde::{transport_into, StepResult};

/// Largest boundary move accepted within one time level.
const BLOW_UP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsianConfig {
    pub n: usize,
    pub m: usize,
    pub length: f64,
    pub micro_tol: f64,
    pub micro_max: usize,
    /// Secant update of ρ across micro-iterates (see [`crate::pde::PdeConfig::secant`]).
    pub secant: bool,
    pub snapshots: usize,
}

impl Default for AsianConfig {
    fn default() -> Self {
        AsianConfig {
            n: 100,
            m: 100_000,
            length: 3.0,
            micro_tol: 1e-7,
            micro_max: 50,
            secant: true,
            snapshots: 10,
        }
    }
}

impl AsianConfig {
    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    fn validate(&self, params: &MarketParams) -> Result<()> {
        if self.n < 2 || self.m < 2 {
            return Err(Error::invalid("need n >= 2 and m >= 2"));
        }
        if !(self.micro_tol > 0.0) || self.micro_max == 0 {
            return Err(Error::invalid("micro_tol must be positive and micro_max at least 1"));
        }
        let jump = asian_initial_boundary(params).ln();
        if !(self.length > jump) {
            return Err(Error::invalid(format!("L = {} must exceed ln rho(0) = {jump:.4}", self.length)));
        }
        Ok(())
    }
}

fn validate_asian(params: &MarketParams) -> Result<()> {
    params.validate()?;
    if !(params.rate > params.dividend) {
        return Err(Error::invalid(format!(
            "the Asian call solver requires r > q >= 0 (got r = {}, q = {})",
            params.rate, params.dividend
        )));
    }
    Ok(())
}

/// `ρ(0) = (1 + rT)/(1 + qT)`.
pub fn asian_initial_boundary(params: &MarketParams) -> f64 {
    (1.0 + params.rate * params.expiry) / (1.0 + params.dividend * params.expiry)
}

/// `ρ = (1 + r(T-τ) + (T-τ)(σ²/2)(Π_1 - Π_0)/h) / (1 + q(T-τ))`.
pub fn asian_boundary_constraint(level: &[f64], params: &MarketParams, tau: f64, h: f64) -> Result<f64> {
    let left = params.expiry - tau;
    if !(left > 0.0) {
        return Err(Error::Domain(format!(
            "the boundary constraint degenerates at tau = T (tau = {tau}); rho(T) = 1 is a limit"
        )));
    }
    let d = (level[1] - level[0]) / h;
    Ok((1.0 + params.rate * left + left * 0.5 * params.sigma * params.sigma * d) / (1.0 + params.dividend * left))
}

/// Level-0 data: `Π = -1` for `ξ_i < ln ρ(0)`, else 0.
pub fn asian_initial_portfolio(params: &MarketParams, cfg: &AsianConfig) -> Vec<f64> {
    let h = cfg.h();
    let jump = asian_initial_boundary(params).ln();
    (0..=cfg.n).map(|i| if (i as f64) * h < jump { -1.0 } else { 0.0 }).collect()
}

/// Values and boundary at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct AsianLevel {
    pub tau: f64,
    pub values: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsianLevelOutcome {
    pub state: AsianLevel,
    pub micro_iterations: usize,
    /// Largest positive off-diagonal entry of the diffusion matrix, if any.
    pub dominance_warning: Option<(usize, f64)>,
}

struct Buffers {
    current: Vec<f64>,
    next: Vec<f64>,
    half: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    sol: Vec<f64>,
    scratch: Vec<f64>,
    decay: Vec<f64>,
}

impl Buffers {
    fn new(n: usize, h: f64) -> Self {
        let m = n - 1;
        Buffers {
            current: vec![0.0; n + 1],
            next: vec![0.0; n + 1],
            half: vec![0.0; n + 1],
            lower: vec![0.0; m],
            diag: vec![0.0; m],
            upper: vec![0.0; m],
            rhs: vec![0.0; m],
            sol: vec![0.0; m],
            scratch: vec![0.0; m],
            decay: (0..=n).map(|i| (-(i as f64) * h).exp()).collect(),
        }
    }

    // Diffusion step into `self.next` from `self.half` with boundary `rho` at `tau`.
    fn diffuse(&mut self, rho: f64, params: &MarketParams, h: f64, k: f64, tau: f64) -> Result<Option<(usize, f64)>> {
        let n = self.current.len() - 1;
        let half_s2 = 0.5 * params.sigma * params.sigma;
        let left = params.expiry - tau;
        let diff = k * half_s2 / (h * h);
        let conv = k / (2.0 * h);
        let reaction = (params.rate + 1.0 / left) * k;
        let mut warning: Option<(usize, f64)> = None;
        for i in 1..n {
            let w = half_s2 + (rho * self.decay[i] - 1.0) / left;
            let alpha = -diff + conv * w;
            let gamma = -diff - conv * w;
            let row = i - 1;
            self.lower[row] = alpha;
            self.upper[row] = gamma;
            self.diag[row] = 1.0 + reaction - alpha - gamma;
            self.rhs[row] = self.half[i];
            let worst = alpha.max(gamma);
            if worst > 0.0 && warning.is_none_or(|(_, v)| worst > v) {
                warning = Some((i, worst));
            }
        }
        self.rhs[0] += self.lower[0];
        solve_tridiagonal_into(&self.lower, &self.diag, &self.upper, &self.rhs, &mut self.sol, &mut self.scratch)
            .map_err(|row| Error::numeric("asian", format!("singular tridiagonal system at row {} (tau = {tau})", row + 1)))?;
        self.next[0] = -1.0;
        self.next[1..n].copy_from_slice(&self.sol);
        self.next[n] = 0.0;
        Ok(warning)
    }

    // Micro-iterations for one level; on success `self.current` holds Π^j.
    #[allow(clippy::too_many_arguments)]
    fn advance(
        &mut self,
        prev: &[f64],
        rho_prev: f64,
        tau: f64,
        params: &MarketParams,
        cfg: &AsianConfig,
        h: f64,
        k: f64,
    ) -> Result<StepResult> {
        let drift = params.rate - params.dividend;
        self.current.copy_from_slice(prev);
        let mut rho = rho_prev;
        let mut history = Vec::new();
        let mut last: Option<(f64, f64)> = None;
        let mut rho_next = asian_boundary_constraint(&self.current, params, tau, h)?;
        for p in 1..=cfg.micro_max {
            if !rho_next.is_finite() || (rho_next - rho_prev).abs() > BLOW_UP {
                return Err(Error::numeric(
                    "asian",
                    format!("boundary jumped from {rho_prev} to {rho_next} within one level"),
                )
                .at_tau("asian", tau));
            }
            transport_into(prev, rho_prev, rho_next, drift, 1.0, h, k, &mut self.half);
            let warning = self.diffuse(rho_next, params, h, k, tau)?;
            let mut change = (rho_next - rho).abs();
            for (a, b) in self.next.iter().zip(&self.current) {
                change = change.max((a - b).abs());
            }
            std::mem::swap(&mut self.current, &mut self.next);
            rho = rho_next;
            history.push(change);
            if change < cfg.micro_tol {
                return Ok((rho, p, warning));
            }
            let image = asian_boundary_constraint(&self.current, params, tau, h)?;
            let g = image - rho;
            rho_next = match last {
                Some((r0, g0)) if cfg.secant && g != g0 => rho - g * (rho - r0) / (g - g0),
                _ => image,
            };
            last = Some((rho, g));
        }
        Err(Error::Convergence {
            what: "micro-iteration",
            iterations: cfg.micro_max,
            residual: *history.last().unwrap_or(&f64::NAN),
            history,
        }
        .at_tau("asian", tau))
    }
}

/// One time level: `ρ` from the constraint, transport with shift
/// `ln(ρ^j/ρ^{j-1}) + (r-q)k`, then the implicit solve with drift
/// `σ²/2 + (ρ e^{-ξ_i} - 1)/(T - τ_j)` and reaction `r + 1/(T - τ_j)`.
pub fn asian_advance(prev: &AsianLevel, params: &MarketParams, cfg: &AsianConfig) -> Result<AsianLevelOutcome> {
    let h = cfg.h();
    let k = params.expiry / cfg.m as f64;
    let tau = prev.tau + k;
    if tau >= params.expiry * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("tau = {tau} reaches the singular horizon T = {}", params.expiry)));
    }
    let mut buf = Buffers::new(cfg.n, h);
    let (rho, micro, warning) = buf.advance(&prev.values, prev.rho, tau, params, cfg, h, k)?;
    Ok(AsianLevelOutcome {
        state: AsianLevel {
            tau,
            values: buf.current,
            rho,
        },
        micro_iterations: micro,
        dominance_warning: warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsianDiagnostics {
    pub min_pi: f64,
    pub max_pi: f64,
    /// Levels whose discrete `b = ln(ρ^j/ρ^{j-1})/k + r - q` was negative (out-flowing boundary).
    pub outflow_levels: usize,
    pub dominance_warnings: usize,
    pub micro_mean: f64,
    pub micro_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsianSolution {
    pub h: f64,
    pub n: usize,
    pub snapshot_taus: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    /// `ρ(τ_j)` for `j = 0..m-1`.
    pub boundary: BoundaryCurve,
    pub diagnostics: AsianDiagnostics,
}

impl AsianSolution {
    /// `(t, 1/x_f(t))` with `t = T - τ`, in increasing `t`.
    pub fn reciprocal_table(&self, expiry: f64) -> Vec<(f64, f64)> {
        let mut rows: Vec<(f64, f64)> = self.boundary.points().map(|(tau, rho)| (expiry - tau, 1.0 / rho)).collect();
        rows.reverse();
        rows
    }
}

/// Marches `j = 1..m-1`, stopping at `τ = T(1 - 1/m)`.
pub fn asian_solve(params: &MarketParams, cfg: &AsianConfig) -> Result<AsianSolution> {
    validate_asian(params)?;
    cfg.validate(params)?;
    let h = cfg.h();
    let k = params.expiry / cfg.m as f64;
    let mut prev = asian_initial_portfolio(params, cfg);
    let mut rho = asian_initial_boundary(params);
    let mut buf = Buffers::new(cfg.n, h);
    let last = cfg.m - 1;
    let snap_every = (last / cfg.snapshots.max(1)).max(1);
    let mut snapshot_taus = vec![0.0];
    let mut snapshots = vec![prev.clone()];
    let mut taus = vec![0.0];
    let mut rhos = vec![rho];
    let mut diag = AsianDiagnostics {
        min_pi: -1.0,
        max_pi: 0.0,
        outflow_levels: 0,
        dominance_warnings: 0,
        micro_mean: 0.0,
        micro_max: 0,
    };
    let mut micro_total = 0;
    for j in 1..=last {
        let tau = j as f64 * k;
        let (rho_new, p, warning) = buf.advance(&prev, rho, tau, params, cfg, h, k)?;
        std::mem::swap(&mut prev, &mut buf.current);
        if (rho_new / rho).ln() + (params.rate - params.dividend) * k < 0.0 {
            diag.outflow_levels += 1;
        }
        rho = rho_new;
        taus.push(tau);
        rhos.push(rho);
        micro_total += p;
        diag.micro_max = diag.micro_max.max(p);
        if warning.is_some() {
            diag.dominance_warnings += 1;
        }
        for &v in &prev {
            diag.min_pi = diag.min_pi.min(v);
            diag.max_pi = diag.max_pi.max(v);
        }
        if j % snap_every == 0 || j == last {
            snapshot_taus.push(tau);
            snapshots.push(prev.clone());
        }
    }
    diag.micro_mean = micro_total as f64 / last as f64;
    Ok(AsianSolution {
        h,
        n: cfg.n,
        snapshot_taus,
        snapshots,
        boundary: BoundaryCurve::new(taus, rhos),
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn long_dated() -> MarketParams {
        MarketParams::new(0.06, 0.04, 1.0, 50.0, 0.2)
    }

    #[test]
    fn initial_boundary_values() {
        assert!((asian_initial_boundary(&long_dated()) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(asian_initial_boundary(&MarketParams::new(0.05, 0.05, 1.0, 3.0, 0.2)), 1.0);
        assert!((asian_initial_boundary(&MarketParams::new(0.05, 0.0, 1.0, 1.0, 0.2)) - 1.05).abs() < 1e-15);
    }

    #[test]
    fn constraint_limits() {
        let p = long_dated();
        let flat = vec![-1.0; 5];
        assert!((asian_boundary_constraint(&flat, &p, 0.0, 0.1).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let near = asian_boundary_constraint(&flat, &p, 50.0 - 1e-9, 0.1).unwrap();
        assert!((near - 1.0).abs() < 1e-9);
        assert!(matches!(asian_boundary_constraint(&flat, &p, 50.0, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn single_step_keeps_the_bounds() {
        let p = long_dated();
        let cfg = AsianConfig::default();
        let start = AsianLevel {
            tau: 0.0,
            values: asian_initial_portfolio(&p, &cfg),
            rho: asian_initial_boundary(&p),
        };
        let out = asian_advance(&start, &p, &cfg).unwrap();
        assert!(out.state.values.iter().all(|v| (-1.0..=0.0).contains(v)));
        assert_eq!(out.state.values[0], -1.0);
        assert_eq!(out.state.values[cfg.n], 0.0);
    }

    #[test]
    fn frozen_boundary_without_drift_transports_identically() {
        let prev: Vec<f64> = (0..=20).map(|i| -1.0 + i as f64 / 20.0).collect();
        let mut out = vec![0.0; 21];
        transport_into(&prev, 1.2, 1.2, 0.0, 1.0, 0.15, 1e-3, &mut out);
        assert_eq!(out, prev);
    }

    #[test]
    fn half_steps_agree_with_a_full_step() {
        // two levels of k/2 against one of k from the same smooth data
        let p = long_dated();
        let coarse = AsianConfig { m: 2000, ..AsianConfig::default() };
        let fine = AsianConfig { m: 4000, ..coarse };
        let x: Vec<f64> = (0..=coarse.n).map(|i| i as f64 * coarse.h()).collect();
        let values: Vec<f64> = x.iter().map(|x| -(-3.0 * x).exp() * (1.0 - x / 3.0)).collect();
        let rho = asian_boundary_constraint(&values, &p, 1.0, coarse.h()).unwrap();
        let start = AsianLevel { tau: 1.0, values, rho };
        let one = asian_advance(&start, &p, &coarse).unwrap().state;
        let mid = asian_advance(&start, &p, &fine).unwrap().state;
        let two = asian_advance(&mid, &p, &fine).unwrap().state;
        let k = 50.0 / 2000.0;
        let gap = one.values.iter().zip(&two.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let moved = one.values.iter().zip(&start.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 0.2 * moved + k * k, "gap {gap}, move {moved}");
    }

    #[test]
    fn short_run_respects_invariants() {
        let p = long_dated();
        let cfg = AsianConfig { m: 10_000, ..AsianConfig::default() };
        let s = asian_solve(&p, &cfg).unwrap();
        assert_eq!(s.boundary.rhos[0], 4.0 / 3.0);
        assert!(s.boundary.rhos.iter().all(|&r| r >= 1.0));
        assert!(s.diagnostics.min_pi >= -1.0 - 1e-3 && s.diagnostics.max_pi <= 1e-3);
        assert_eq!(s.boundary.len(), cfg.m);
        let t = s.reciprocal_table(p.expiry);
        assert!(t[0].0 > 0.0 && (t.last().unwrap().1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rates_must_favour_the_average() {
        let p = MarketParams::new(0.04, 0.06, 1.0, 1.0, 0.2);
        assert!(asian_solve(&p, &AsianConfig::default()).is_err());
    }
}
