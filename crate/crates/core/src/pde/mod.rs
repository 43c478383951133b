//! American call under a (possibly nonlinear) volatility model, solved in the
//! fixed-domain variables `x = ln(ρ(τ)/S)`, `Π = V - S ∂V/∂S`:
//!
//! ```text
//! Π_τ + (b(τ) - σ²/2) Π_x - ½ (σ² Π_x)_x + r Π = 0,   0 < x < L,
//! Π(0, τ) = -E,  Π(L, τ) = 0,  Π(x, 0) = -E 1{x < ln(r/q)},
//! ρ(τ) = rE/q + σ²(Π_x(0, τ), ρ(τ), τ) Π_x(0, τ) / (2q),
//! ```
//!
//! with `b = ρ̇/ρ + r - q` and `σ = σ(Π_x, ρ e^{-x}, τ)`; note `Π_x = S² V_SS`.
//! Each time level splits into an exact transport step along characteristics
//! and an implicit diffusion step, and the coupling with `ρ` is resolved by
//! micro-iterations.

mod study;

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryCurve;
use crate::error::{Error, Result};
use crate::model::{MarketParams, VolatilitySpec};
use crate::numerics::{solve_tridiagonal_into, trapezoid};

/// Boundary after one level, micro-iterations used, and the worst row (index,
/// `α_i`) where the diffusion matrix lost the M-matrix property, if any.
pub(crate) type StepResult = (f64, usize, Option<(usize, f64)>);

pub use study::{boundary_errors, convergence_study, eoc, model_distances, power_law_exponent, EocRow, ModelDistance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    /// Spatial intervals on `[0, L]`.
    pub n: usize,
    /// Time steps on `[0, T]`.
    pub m: usize,
    /// Domain length `L`.
    pub length: f64,
    pub micro_tol: f64,
    pub micro_max: usize,
    /// Secant update of ρ from the last two micro-iterates instead of plain
    /// substitution. The plain map has gain ≈ -(ρ - rE/q)/(ρh) and stops
    /// converging once that exceeds one in magnitude.
    pub secant: bool,
    /// Number of evenly spaced levels (besides the last) kept in the surface.
    pub snapshots: usize,
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig {
            n: 750,
            m: 225_000,
            length: 3.0,
            micro_tol: 1e-7,
            micro_max: 50,
            secant: true,
            snapshots: 10,
        }
    }
}

impl PdeConfig {
    /// Reduced mesh for quick runs and CI.
    pub fn fast() -> Self {
        PdeConfig {
            n: 200,
            m: 20_000,
            ..PdeConfig::default()
        }
    }

    /// Mesh with spatial step `h` on `[0, 3]` and time step from `σ̂² k / h² = 1/2`.
    pub fn cfl_matched(h: f64, params: &MarketParams) -> Self {
        let length = 3.0;
        let n = (length / h).round() as usize;
        let h = length / n as f64;
        let k = 0.5 * h * h / (params.sigma * params.sigma);
        let m = (params.expiry / k).round().max(1.0) as usize;
        PdeConfig {
            n,
            m,
            length,
            ..PdeConfig::default()
        }
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn validate(&self, params: &MarketParams) -> Result<()> {
        if self.n < 2 || self.m < 2 {
            return Err(Error::invalid("need n >= 2 and m >= 2"));
        }
        if !(self.micro_tol > 0.0) || self.micro_max == 0 {
            return Err(Error::invalid("micro_tol must be positive and micro_max at least 1"));
        }
        let jump = (params.rate / params.dividend).ln();
        if !(self.length > jump) {
            return Err(Error::invalid(format!("L = {} must exceed ln(r/q) = {jump:.4}", self.length)));
        }
        Ok(())
    }
}

/// Level-0 data: `Π = -E` for `x_i < ln(r/q)`, else 0, and `ρ⁰ = rE/q`.
pub fn initial_portfolio(params: &MarketParams, cfg: &PdeConfig) -> (Vec<f64>, f64) {
    let h = cfg.h();
    let jump = (params.rate / params.dividend).ln();
    let values = (0..=cfg.n)
        .map(|i| if (i as f64) * h < jump { -params.strike } else { 0.0 })
        .collect();
    (values, params.call_boundary_start())
}

/// Transport half-step: `Π^{j-½}_i = Π^{j-1}(x_i - ln(ρ_new/ρ_prev) - (r-q)k)`,
/// linear interpolation inside, `-E` left of the origin and 0 right of `L`.
pub fn transport_step(prev: &[f64], rho_prev: f64, rho_new: f64, params: &MarketParams, h: f64, k: f64) -> Vec<f64> {
    let mut out = vec![0.0; prev.len()];
    transport_into(prev, rho_prev, rho_new, params.rate - params.dividend, params.strike, h, k, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn transport_into(prev: &[f64], rho_prev: f64, rho_new: f64, drift: f64, strike: f64, h: f64, k: f64, out: &mut [f64]) {
    let n = prev.len() - 1;
    let shift = (rho_new / rho_prev).ln() + drift * k;
    let s = shift / h;
    for (i, o) in out.iter_mut().enumerate() {
        let pos = i as f64 - s;
        *o = if pos <= 0.0 {
            -strike
        } else if pos >= n as f64 {
            prev[n]
        } else {
            let c = pos.floor() as usize;
            let w = pos - c as f64;
            prev[c] + w * (prev[c + 1] - prev[c])
        };
    }
    out[0] = -strike;
    out[n] = 0.0;
}

/// Outcome of one implicit diffusion solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOutcome {
    pub values: Vec<f64>,
    /// Worst row (index, `α_i`) where `α_i > 0`, i.e. the M-matrix property
    /// is lost, if any.
    pub dominance_warning: Option<(usize, f64)>,
}

/// Diffusion half-step: `α_i Π_{i-1} + β_i Π_i + γ_i Π_{i+1} = Π^{j-½}_i` with
/// `σ_i` evaluated on the lagged level `lagged` and boundary `rho`.
#[allow(clippy::too_many_arguments)]
pub fn diffusion_step(
    half: &[f64],
    lagged: &[f64],
    rho: f64,
    params: &MarketParams,
    spec: &VolatilitySpec,
    h: f64,
    k: f64,
    tau: f64,
) -> Result<DiffusionOutcome> {
    let n = half.len() - 1;
    let mut ws = Workspace::new(n);
    let mut out = vec![0.0; n + 1];
    let warning = diffusion_into(half, lagged, rho, params, spec, h, k, tau, &mut ws, &mut out)?;
    Ok(DiffusionOutcome {
        values: out,
        dominance_warning: warning,
    })
}

/// Scratch buffers reused across time levels.
struct Workspace {
    sigma2: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    sol: Vec<f64>,
    scratch: Vec<f64>,
    spot_factor: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let interior = n.saturating_sub(1);
        Workspace {
            sigma2: vec![0.0; n],
            lower: vec![0.0; interior],
            diag: vec![0.0; interior],
            upper: vec![0.0; interior],
            rhs: vec![0.0; interior],
            sol: vec![0.0; interior],
            scratch: vec![0.0; interior],
            spot_factor: Vec::new(),
        }
    }

    fn with_grid(n: usize, h: f64) -> Self {
        let mut ws = Workspace::new(n);
        ws.spot_factor = (0..n).map(|i| (-(i as f64) * h).exp()).collect();
        ws
    }
}

#[allow(clippy::too_many_arguments)]
fn diffusion_into(
    half: &[f64],
    lagged: &[f64],
    rho: f64,
    params: &MarketParams,
    spec: &VolatilitySpec,
    h: f64,
    k: f64,
    tau: f64,
    ws: &mut Workspace,
    out: &mut [f64],
) -> Result<Option<(usize, f64)>> {
    let n = half.len() - 1;
    let e = params.strike;
    match spec {
        VolatilitySpec::Constant => {
            let s2 = params.sigma * params.sigma;
            ws.sigma2.iter_mut().for_each(|v| *v = s2);
        }
        _ => {
            for i in 0..n {
                let p = (lagged[i + 1] - lagged[i]) / h;
                let spot = if ws.spot_factor.is_empty() {
                    rho * (-(i as f64) * h).exp()
                } else {
                    rho * ws.spot_factor[i]
                };
                ws.sigma2[i] = spec.sigma_squared(params, p, spot, tau).map_err(|err| err.at_tau("pde", tau))?;
            }
        }
    }
    let diff = k / (2.0 * h * h);
    let conv = k / (4.0 * h);
    let mut warning: Option<(usize, f64)> = None;
    for i in 1..n {
        let alpha = -diff * ws.sigma2[i - 1] + conv * ws.sigma2[i];
        let gamma = -diff * ws.sigma2[i] - conv * ws.sigma2[i];
        let row = i - 1;
        ws.lower[row] = alpha;
        ws.upper[row] = gamma;
        ws.diag[row] = 1.0 + params.rate * k - (alpha + gamma);
        ws.rhs[row] = half[i];
        if alpha > 0.0 && warning.is_none_or(|(_, worst)| alpha > worst) {
            warning = Some((i, alpha));
        }
    }
    // Dirichlet ends Π_0 = -E, Π_n = 0
    ws.rhs[0] -= ws.lower[0] * -e;
    solve_tridiagonal_into(&ws.lower, &ws.diag, &ws.upper, &ws.rhs, &mut ws.sol, &mut ws.scratch)
        .map_err(|row| Error::numeric("pde", format!("singular tridiagonal system at row {} (tau = {tau})", row + 1)))?;
    out[0] = -e;
    out[1..n].copy_from_slice(&ws.sol);
    out[n] = 0.0;
    Ok(warning)
}

/// `ρ = rE/q + σ²(d, ρ_lag, τ) d / (2q)` with `d = (Π_1 - Π_0)/h`.
pub fn boundary_constraint(
    level: &[f64],
    rho_lag: f64,
    params: &MarketParams,
    spec: &VolatilitySpec,
    tau: f64,
    h: f64,
) -> Result<f64> {
    let d = (level[1] - level[0]) / h;
    let s2 = spec.sigma_squared(params, d, rho_lag, tau)?;
    Ok(params.call_boundary_start() + s2 * d / (2.0 * params.dividend))
}

/// Values and boundary at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelState {
    pub tau: f64,
    pub values: Vec<f64>,
    pub rho: f64,
}

/// Result of [`advance_time_level`].
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOutcome {
    pub state: LevelState,
    pub micro_iterations: usize,
    pub dominance_warning: Option<(usize, f64)>,
}

/// Micro-iterates `ρ^{p+1} = F(Π^p, ρ^p)`, `Π^{j-½} = T(Π^{j-1}; ρ^{p+1})`,
/// `A(Π^p, ρ^{p+1}) Π^{p+1} = Π^{j-½}` until both changes drop below `micro_tol`.
pub fn advance_time_level(prev: &LevelState, params: &MarketParams, spec: &VolatilitySpec, cfg: &PdeConfig) -> Result<LevelOutcome> {
    let h = cfg.h();
    let k = params.expiry / cfg.m as f64;
    let mut ws = Workspace::with_grid(cfg.n, h);
    let mut stepper = Stepper::new(cfg.n);
    let tau = prev.tau + k;
    let (rho, micro, warning) = stepper.advance(&prev.values, prev.rho, tau, params, spec, cfg, h, k, &mut ws)?;
    Ok(LevelOutcome {
        state: LevelState {
            tau,
            values: stepper.current.clone(),
            rho,
        },
        micro_iterations: micro,
        dominance_warning: warning,
    })
}

struct Stepper {
    current: Vec<f64>,
    next: Vec<f64>,
    half: Vec<f64>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Stepper {
            current: vec![0.0; n + 1],
            next: vec![0.0; n + 1],
            half: vec![0.0; n + 1],
        }
    }

    // On success `self.current` holds the new level.
    #[allow(clippy::too_many_arguments)]
    fn advance(
        &mut self,
        prev: &[f64],
        rho_prev: f64,
        tau: f64,
        params: &MarketParams,
        spec: &VolatilitySpec,
        cfg: &PdeConfig,
        h: f64,
        k: f64,
        ws: &mut Workspace,
    ) -> Result<StepResult> {
        let drift = params.rate - params.dividend;
        self.current.copy_from_slice(prev);
        let mut rho = rho_prev;
        let mut history = Vec::new();
        // (ρ used for the solve, F(Π(ρ)) - ρ) from the previous micro-iterate
        let mut last: Option<(f64, f64)> = None;
        let mut rho_next =
            boundary_constraint(&self.current, rho, params, spec, tau, h).map_err(|e| e.at_tau("pde", tau))?;
        for p in 1..=cfg.micro_max {
            if !rho_next.is_finite() || rho_next <= 0.0 {
                return Err(Error::numeric("pde", format!("boundary position {rho_next} at tau = {tau}")));
            }
            transport_into(prev, rho_prev, rho_next, drift, params.strike, h, k, &mut self.half);
            let warning = diffusion_into(&self.half, &self.current, rho_next, params, spec, h, k, tau, ws, &mut self.next)?;
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
            let image =
                boundary_constraint(&self.current, rho, params, spec, tau, h).map_err(|e| e.at_tau("pde", tau))?;
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
        .at_tau("pde", tau))
    }
}

/// Summary statistics gathered during a march.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeDiagnostics {
    pub min_pi: f64,
    pub max_pi: f64,
    /// Levels on which `Π_i` decreased somewhere in `i` (beyond 1e-12).
    pub nonmonotone_levels: usize,
    pub dominance_warnings: usize,
    /// `(τ, row, α)` for the largest positive `α` seen.
    pub worst_row: Option<(f64, usize, f64)>,
    pub micro_mean: f64,
    pub micro_max: usize,
}

/// Π on the fixed grid at selected levels, plus the full boundary curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSurface {
    pub h: f64,
    pub n: usize,
    pub strike: f64,
    pub snapshot_taus: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub boundary: BoundaryCurve,
    /// Micro-iterations used at each level `j = 1..m`.
    pub micro_iterations: Vec<u16>,
    pub diagnostics: PdeDiagnostics,
}

impl PortfolioSurface {
    pub fn x(&self) -> Vec<f64> {
        (0..=self.n).map(|i| i as f64 * self.h).collect()
    }

    pub fn final_values(&self) -> &[f64] {
        self.snapshots.last().expect("surface without levels")
    }

    fn snapshot_at(&self, tau: f64) -> Option<&[f64]> {
        let scale = self.boundary.last_tau().max(1.0);
        self.snapshot_taus
            .iter()
            .position(|t| (t - tau).abs() <= 1e-9 * scale)
            .map(|j| self.snapshots[j].as_slice())
    }
}

/// Marches `j = 1..m` from the level-0 data.
pub fn solve_free_boundary(params: &MarketParams, spec: &VolatilitySpec, cfg: &PdeConfig) -> Result<PortfolioSurface> {
    params.validate_call()?;
    spec.validate()?;
    cfg.validate(params)?;
    let h = cfg.h();
    let k = params.expiry / cfg.m as f64;
    let (mut prev, rho0) = initial_portfolio(params, cfg);
    let mut rho = rho0;
    let mut ws = Workspace::with_grid(cfg.n, h);
    let mut stepper = Stepper::new(cfg.n);

    let snap_every = (cfg.m / cfg.snapshots.max(1)).max(1);
    let mut snapshot_taus = vec![0.0];
    let mut snapshots = vec![prev.clone()];
    let mut taus = Vec::with_capacity(cfg.m + 1);
    let mut rhos = Vec::with_capacity(cfg.m + 1);
    taus.push(0.0);
    rhos.push(rho);
    let mut micro = Vec::with_capacity(cfg.m);
    let mut diag = PdeDiagnostics {
        min_pi: -params.strike,
        max_pi: 0.0,
        nonmonotone_levels: 0,
        dominance_warnings: 0,
        worst_row: None,
        micro_mean: 0.0,
        micro_max: 0,
    };
    let mut micro_total = 0usize;
    for j in 1..=cfg.m {
        let tau = if j == cfg.m { params.expiry } else { j as f64 * k };
        let (rho_new, p, warning) = stepper.advance(&prev, rho, tau, params, spec, cfg, h, k, &mut ws)?;
        std::mem::swap(&mut prev, &mut stepper.current);
        rho = rho_new;
        taus.push(tau);
        rhos.push(rho);
        micro.push(p.min(u16::MAX as usize) as u16);
        micro_total += p;
        diag.micro_max = diag.micro_max.max(p);
        if let Some((row, alpha)) = warning {
            diag.dominance_warnings += 1;
            if diag.worst_row.is_none_or(|(_, _, a)| alpha > a) {
                diag.worst_row = Some((tau, row, alpha));
            }
        }
        let mut monotone = true;
        for w in prev.windows(2) {
            diag.min_pi = diag.min_pi.min(w[0]);
            diag.max_pi = diag.max_pi.max(w[0]);
            monotone &= w[1] >= w[0] - 1e-12;
        }
        if !monotone {
            diag.nonmonotone_levels += 1;
        }
        if j % snap_every == 0 || j == cfg.m {
            snapshot_taus.push(tau);
            snapshots.push(prev.clone());
        }
    }
    diag.micro_mean = micro_total as f64 / cfg.m as f64;
    Ok(PortfolioSurface {
        h,
        n: cfg.n,
        strike: params.strike,
        snapshot_taus,
        snapshots,
        boundary: BoundaryCurve::new(taus, rhos),
        micro_iterations: micro,
        diagnostics: diag,
    })
}

/// `V(S, T - τ) = (S/ρ)(ρ - E + ∫_0^{ln(ρ/S)} e^x Π(x, τ) dx)` on a stored level.
pub fn recover_price(surface: &PortfolioSurface, spot: f64, tau: f64) -> Result<f64> {
    let values = surface.snapshot_at(tau).ok_or_else(|| {
        Error::invalid(format!(
            "tau = {tau} is not a stored level (stored: {:?})",
            surface.snapshot_taus
        ))
    })?;
    let rho = surface.boundary.rho_at(tau);
    let e = surface.strike;
    if !(spot > 0.0) {
        return Err(Error::invalid(format!("S must be positive, got {spot}")));
    }
    if spot > rho {
        return Err(Error::ExerciseRegion {
            spot,
            boundary: rho,
            intrinsic: spot - e,
        });
    }
    let upper = (rho / spot).ln().min(surface.n as f64 * surface.h);
    let full = (upper / surface.h).floor() as usize;
    let xs: Vec<f64> = (0..=full).map(|i| i as f64 * surface.h).collect();
    let ys: Vec<f64> = (0..=full).map(|i| xs[i].exp() * values[i]).collect();
    let mut integral = trapezoid(&xs, &ys);
    if full < surface.n {
        let w = (upper - xs[full]) / surface.h;
        let pi_end = values[full] + w * (values[full + 1] - values[full]);
        integral += 0.5 * (upper - xs[full]) * (ys[full] + upper.exp() * pi_end);
    }
    Ok(spot / rho * (rho - e + integral))
}
