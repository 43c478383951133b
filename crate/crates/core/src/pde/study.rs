use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_free_boundary, PdeConfig};
use crate::boundary::BoundaryCurve;
use crate::error::{Error, Result};
use crate::integral_eq::BoundaryFunctionH;
use crate::model::{MarketParams, VolatilitySpec};

/// Consecutive-pair orders `ln(e_i/e_{i-1}) / ln(h_i/h_{i-1})` for `(h, err)` entries.
pub fn eoc(entries: &[(f64, f64)]) -> Result<Vec<f64>> {
    if entries.len() < 2 {
        return Err(Error::invalid("eoc needs at least two (h, err) entries"));
    }
    for &(h, e) in entries {
        if !(h > 0.0) || !(e > 0.0) || !h.is_finite() || !e.is_finite() {
            return Err(Error::invalid(format!("degenerate eoc entry (h = {h}, err = {e})")));
        }
    }
    entries
        .windows(2)
        .map(|w| {
            let (h0, e0) = w[0];
            let (h1, e1) = w[1];
            if h0 == h1 {
                return Err(Error::invalid(format!("repeated mesh size h = {h0}")));
            }
            Ok((e1 / e0).ln() / (h1 / h0).ln())
        })
        .collect()
}

/// One row of a mesh-refinement table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EocRow {
    pub h: f64,
    pub err_linf: f64,
    pub eoc_linf: Option<f64>,
    pub err_l2: f64,
    pub eoc_l2: Option<f64>,
}

/// Constant-volatility boundary errors against an integral-equation reference
/// on CFL-matched meshes (`σ̂² k/h² = 1/2`, `L = 3`).
///
/// Both norms are taken over the reference nodes `τ_i = ξ_i²`, with the PDE
/// boundary interpolated linearly in τ. The L² error is the discrete
/// `(h Σ_i |ρ_h(τ_i) - ρ(τ_i)|²)^{1/2}`, weighted by the spatial step `h`;
/// this is the normalisation under which published refinement tables show an
/// L² error above the L∞ error on coarse meshes. Meshes are solved in parallel.
pub fn convergence_study(params: &MarketParams, hs: &[f64], reference: &BoundaryFunctionH) -> Result<Vec<EocRow>> {
    if hs.is_empty() {
        return Err(Error::invalid("convergence study needs at least one mesh size"));
    }
    let reference_curve = reference.to_curve(params);
    let errors: Vec<(f64, f64, f64)> = hs
        .par_iter()
        .map(|&h| {
            let cfg = PdeConfig {
                snapshots: 1,
                ..PdeConfig::cfl_matched(h, params)
            };
            let surface = solve_free_boundary(params, &VolatilitySpec::Constant, &cfg)?;
            let (linf, l2) = boundary_errors(&surface.boundary, &reference_curve, cfg.h());
            Ok((cfg.h(), linf, l2))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<EocRow> = errors
        .iter()
        .map(|&(h, linf, l2)| EocRow {
            h,
            err_linf: linf,
            eoc_linf: None,
            err_l2: l2,
            eoc_l2: None,
        })
        .collect();
    if rows.len() > 1 {
        let linf = eoc(&errors.iter().map(|e| (e.0, e.1)).collect::<Vec<_>>())?;
        let l2 = eoc(&errors.iter().map(|e| (e.0, e.2)).collect::<Vec<_>>())?;
        for (i, row) in rows.iter_mut().enumerate().skip(1) {
            row.eoc_linf = Some(linf[i - 1]);
            row.eoc_l2 = Some(l2[i - 1]);
        }
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn power_law_exponent(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("a power-law fit needs at least two points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::invalid("a power-law fit needs positive finite data"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("a power-law fit needs distinct abscissae"));
    }
    Ok(logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Boundary of one nonlinear model and its sup-distance from the constant-volatility boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDistance {
    pub spec: VolatilitySpec,
    pub distance: f64,
    pub rho_final: f64,
    pub micro_max: usize,
    pub boundary: BoundaryCurve,
}

/// Solves the constant-volatility problem and every model in `specs` on the
/// same mesh (in parallel) and reports `max_τ |ρ_model(τ) - ρ_0(τ)|`.
pub fn model_distances(params: &MarketParams, specs: &[VolatilitySpec], cfg: &PdeConfig) -> Result<Vec<ModelDistance>> {
    let cfg = PdeConfig { snapshots: 1, ..*cfg };
    let mut all = vec![VolatilitySpec::Constant];
    all.extend_from_slice(specs);
    let mut solved: Vec<BoundarySolve> = all
        .par_iter()
        .map(|spec| {
            let s = solve_free_boundary(params, spec, &cfg)?;
            Ok((s.boundary, s.diagnostics.micro_max))
        })
        .collect::<Result<_>>()?;
    let (base, _) = solved.remove(0);
    Ok(specs
        .iter()
        .zip(solved)
        .map(|(spec, (boundary, micro_max))| ModelDistance {
            spec: *spec,
            distance: boundary.max_distance(&base),
            rho_final: boundary.last_rho(),
            micro_max,
            boundary,
        })
        .collect())
}

type BoundarySolve = (BoundaryCurve, usize);

/// `(L∞, h-weighted ℓ²)` distance of `computed` from `reference` at the reference times.
pub fn boundary_errors(computed: &BoundaryCurve, reference: &BoundaryCurve, h: f64) -> (f64, f64) {
    let mut linf: f64 = 0.0;
    let mut sum = 0.0;
    for (t, r) in reference.points() {
        let e = (computed.rho_at(t) - r).abs();
        linf = linf.max(e);
        sum += e * e;
    }
    (linf, (h * sum).sqrt())
}
