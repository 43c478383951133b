use std::fs;
use std::path::Path;

use fbound::asian::{asian_solve, AsianConfig};
use fbound::gamma_eq::{
    calibrate_rapm, price_european_mu, solve_gamma_equation, GammaConfig, RapmParams, RapmPriceConfig,
};
use fbound::integral_eq::{price_call_semi_explicit, put_boundary_asymptotic, solve_boundary, IntegralEqConfig};
use fbound::oracles::{
    baw_price, binomial_price, bs_european_price, lattice_critical_price, psor_price, ExerciseStyle, LatticeConfig,
    OptionKind, PsorConfig,
};
use fbound::pde::{
    convergence_study, model_distances, power_law_exponent, recover_price, solve_free_boundary, PdeConfig,
};
use fbound::{BoundaryCurve, Error, MarketParams, VolatilitySpec};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::output::{num, opt, Run, Table};
use crate::{CliError, Command, Kind, Model, ModelArgs, OracleMethod, PdeArgs, PriceMethod, Style, SweepModel};

const CALL: MarketParams = MarketParams {
    rate: 0.1,
    dividend: 0.05,
    strike: 10.0,
    expiry: 1.0,
    sigma: 0.2,
};
const ASIAN: MarketParams = MarketParams {
    rate: 0.06,
    dividend: 0.04,
    strike: 1.0,
    expiry: 50.0,
    sigma: 0.2,
};
const PUT: MarketParams = MarketParams {
    rate: 0.1,
    dividend: 0.0,
    strike: 10.0,
    expiry: 1.0,
    sigma: 0.25,
};
const RAPM: MarketParams = MarketParams {
    rate: 0.011,
    dividend: 0.0,
    strike: 25.0,
    expiry: 1.0,
    sigma: 0.3,
};

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::SolveLinear {
            market,
            nodes,
            tol,
            max_iters,
            out,
        } => {
            let params = market.resolve(CALL);
            let cfg = IntegralEqConfig {
                nodes,
                tol,
                max_iters,
                ..IntegralEqConfig::default()
            };
            let mut run = Run::start("solve-linear");
            let sol = solve_boundary(&params, &cfg)?;
            run.emit(&curve_table(&sol.curve, "tau", "rho"), out.as_deref())?;
            let diag = json!({
                "iterations": sol.iterations,
                "history": sol.history,
                "monotone_iterates": sol.monotone,
                "rho_T": sol.curve.last_rho(),
            });
            run.finish(out.as_deref(), json!(params), json!(cfg), diag)
        }
        Command::Price {
            market,
            method,
            spots,
            nodes,
            pde,
            model,
            out,
        } => {
            let params = market.resolve(CALL);
            let mut run = Run::start("price");
            let tau = params.expiry;
            let mut table = Table::new(&["S", "price", "region"]);
            let (cfg, diag) = match method {
                PriceMethod::SemiExplicit => {
                    if model.model != Model::Constant {
                        return Err(CliError::Usage(
                            "the semi-explicit formula holds for constant volatility only; use --method pde".into(),
                        ));
                    }
                    let cfg = IntegralEqConfig {
                        nodes,
                        ..IntegralEqConfig::default()
                    };
                    let sol = solve_boundary(&params, &cfg)?;
                    for &s in &spots {
                        push_price(&mut table, s, price_call_semi_explicit(s, tau, &sol.curve, &params))?;
                    }
                    (json!(cfg), json!({"iterations": sol.iterations, "rho_T": sol.curve.last_rho()}))
                }
                PriceMethod::Pde => {
                    let spec = volatility(&model)?;
                    let cfg = PdeConfig {
                        snapshots: 1,
                        ..pde_config(&pde)
                    };
                    let surface = solve_free_boundary(&params, &spec, &cfg)?;
                    for &s in &spots {
                        push_price(&mut table, s, recover_price(&surface, s, tau))?;
                    }
                    (
                        json!({"pde": cfg, "spec": spec}),
                        json!({"rho_T": surface.boundary.last_rho(), "pde": surface.diagnostics}),
                    )
                }
            };
            run.emit(&table, out.as_deref())?;
            run.finish(out.as_deref(), json!(params), cfg, diag)
        }
        Command::SolvePde {
            market,
            model,
            pde,
            snapshots,
            out,
            surface_out,
        } => {
            let params = market.resolve(CALL);
            let spec = volatility(&model)?;
            let cfg = PdeConfig {
                snapshots,
                ..pde_config(&pde)
            };
            let mut run = Run::start("solve-pde");
            let surface = solve_free_boundary(&params, &spec, &cfg)?;
            run.emit(&curve_table(&surface.boundary, "tau", "rho"), out.as_deref())?;
            if let Some(path) = surface_out.as_deref() {
                let mut t = Table::new(&["tau", "x", "pi"]);
                let x = surface.x();
                for (tau, level) in surface.snapshot_taus.iter().zip(&surface.snapshots) {
                    for (xi, v) in x.iter().zip(level) {
                        t.push(vec![num(*tau), num(*xi), num(*v)]);
                    }
                }
                run.emit(&t, Some(path))?;
            }
            let diag = json!({"rho_T": surface.boundary.last_rho(), "pde": surface.diagnostics});
            run.finish(out.as_deref(), json!(params), json!({"pde": cfg, "spec": spec}), diag)
        }
        Command::SolveAsian {
            market,
            n,
            m,
            length,
            micro_tol,
            out,
            inv_out,
        } => {
            let params = market.resolve(ASIAN);
            let cfg = AsianConfig {
                n,
                m,
                length,
                micro_tol,
                ..AsianConfig::default()
            };
            let mut run = Run::start("solve-asian");
            let sol = asian_solve(&params, &cfg)?;
            run.emit(&curve_table(&sol.boundary, "tau", "rho"), out.as_deref())?;
            if let Some(path) = inv_out.as_deref() {
                let mut t = Table::new(&["t", "inv_xf"]);
                for (tt, inv) in sol.reciprocal_table(params.expiry) {
                    t.push(vec![num(tt), num(inv)]);
                }
                run.emit(&t, Some(path))?;
            }
            let diag = json!({
                "rho_0": sol.boundary.rhos[0],
                "rho_last": sol.boundary.last_rho(),
                "tau_last": sol.boundary.last_tau(),
                "asian": sol.diagnostics,
            });
            run.finish(out.as_deref(), json!(params), json!(cfg), diag)
        }
        Command::GammaSolve {
            market,
            cost,
            risk_premium,
            n,
            m,
            tau_star,
            snapshots,
            out,
        } => {
            let params = market.resolve(RAPM);
            let rapm = RapmParams::new(cost, risk_premium)?;
            let cfg = GammaConfig {
                n,
                m,
                tau_star,
                snapshots,
                ..GammaConfig::default()
            };
            let mut run = Run::start("gamma-solve");
            let field = solve_gamma_equation(&params, &rapm, &cfg)?;
            let mut t = Table::new(&["tau", "x", "gamma"]);
            for (tau, level) in field.taus.iter().zip(&field.values) {
                for (x, g) in field.x.iter().zip(level) {
                    t.push(vec![num(*tau), num(*x), num(*g)]);
                }
            }
            run.emit(&t, out.as_deref())?;
            let diag = json!({
                "mu": rapm.mu(),
                "mass": field.mass,
                "max_mass_drift": field.max_mass_drift(),
                "picard_max_used": field.picard_max_used,
            });
            run.finish(out.as_deref(), json!({"market": params, "rapm": rapm}), json!(cfg), diag)
        }
        Command::RapmPrice {
            market,
            cost,
            risk_premium,
            spots,
            t,
            n,
            m,
            out,
        } => {
            let params = market.resolve(RAPM);
            let rapm = RapmParams::new(cost, risk_premium)?;
            if !(t >= 0.0 && t < params.expiry) {
                return Err(CliError::Usage(format!("--t {t} must lie in [0, T) with T = {}", params.expiry)));
            }
            let left = MarketParams {
                expiry: params.expiry - t,
                ..params
            };
            let cfg = RapmPriceConfig {
                n,
                m,
                ..RapmPriceConfig::default()
            };
            let mut run = Run::start("rapm-price");
            let ask = price_european_mu(&left, rapm.mu(), &spots, &cfg)?;
            let mid = price_european_mu(&left, 0.0, &spots, &cfg)?;
            let mut table = Table::new(&["S", "bid", "mid", "ask"]);
            for (i, s) in spots.iter().enumerate() {
                let (a, md) = (ask.prices[i], mid.prices[i]);
                table.push(vec![num(*s), num(2.0 * md - a), num(md), num(a)]);
            }
            run.emit(&table, out.as_deref())?;
            let diag = json!({"mu": rapm.mu(), "inner_sweeps_max": ask.inner_sweeps_max.max(mid.inner_sweeps_max)});
            run.finish(out.as_deref(), json!({"market": params, "rapm": rapm, "t": t}), json!(cfg), diag)
        }
        Command::RapmCalibrate {
            market,
            cost,
            input,
            n,
            m,
            out,
        } => calibrate(market.resolve(RAPM), cost, &input, n, m, out.as_deref()),
        Command::Oracle {
            market,
            method,
            kind,
            style,
            spots,
            steps,
            space_steps,
            time_steps,
            out,
        } => {
            let params = market.resolve(CALL);
            params.validate()?;
            let kind = match kind {
                Kind::Call => OptionKind::Call,
                Kind::Put => OptionKind::Put,
            };
            let style = match style {
                Style::American => ExerciseStyle::American,
                Style::European => ExerciseStyle::European,
            };
            let mut run = Run::start("oracle");
            let tau = params.expiry;
            let mut table = Table::new(&["S", "price"]);
            let cfg = match method {
                OracleMethod::Binomial => {
                    let cfg = LatticeConfig { steps, style, kind };
                    for &s in &spots {
                        table.push(vec![num(s), num(binomial_price(s, &params, &cfg)?.price)]);
                    }
                    json!(cfg)
                }
                OracleMethod::Psor => {
                    american_only(style, "psor")?;
                    let cfg = PsorConfig {
                        space_steps,
                        time_steps,
                        ..PsorConfig::default()
                    };
                    let res = psor_price(&params, kind, &cfg)?;
                    for &s in &spots {
                        table.push(vec![num(s), num(res.price_at(s))]);
                    }
                    json!(cfg)
                }
                OracleMethod::Baw => {
                    american_only(style, "baw")?;
                    for &s in &spots {
                        table.push(vec![num(s), num(baw_price(s, &params, tau, kind)?)]);
                    }
                    json!({})
                }
                OracleMethod::Bs => {
                    if style == ExerciseStyle::American {
                        return Err(CliError::Usage("the bs oracle prices European options; pass --style european".into()));
                    }
                    for &s in &spots {
                        table.push(vec![num(s), num(bs_european_price(s, &params, tau, kind))]);
                    }
                    json!({})
                }
            };
            run.emit(&table, out.as_deref())?;
            let info = json!({"method": format!("{method:?}").to_lowercase(), "kind": kind, "style": style});
            run.finish(out.as_deref(), json!(params), json!({"oracle": info, "cfg": cfg}), json!({}))
        }
        Command::Eoc {
            market,
            reference: _,
            meshes,
            ref_nodes,
            out,
        } => {
            let params = market.resolve(CALL);
            let ref_cfg = IntegralEqConfig {
                nodes: ref_nodes,
                ..IntegralEqConfig::default()
            };
            let mut run = Run::start("eoc");
            let reference = solve_boundary(&params, &ref_cfg)?;
            let rows = convergence_study(&params, &meshes, &reference.h)?;
            let mut table = Table::new(&["h", "err_linf", "eoc_linf", "err_l2", "eoc_l2"]);
            for r in &rows {
                table.push(vec![num(r.h), num(r.err_linf), opt(r.eoc_linf), num(r.err_l2), opt(r.eoc_l2)]);
            }
            run.emit(&table, out.as_deref())?;
            let diag = json!({"reference_rho_T": reference.curve.last_rho(), "reference_iterations": reference.iterations});
            run.finish(out.as_deref(), json!(params), json!({"reference": ref_cfg, "meshes": meshes}), diag)
        }
        Command::Sweep {
            market,
            model,
            values,
            cost,
            pde,
            fit_max,
            out,
            boundaries_dir,
        } => {
            let params = market.resolve(CALL);
            let specs = values
                .iter()
                .map(|&v| match model {
                    SweepModel::Rapm => VolatilitySpec::rapm_from_costs(cost, v),
                    SweepModel::BarlesSoner => Ok(VolatilitySpec::BarlesSoner { a: v }),
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let cfg = pde_config(&pde);
            let mut run = Run::start("sweep");
            let runs = model_distances(&params, &specs, &cfg)?;
            let mut table = Table::new(&["param", "dist_linf", "rho_T"]);
            for (v, r) in values.iter().zip(&runs) {
                table.push(vec![num(*v), num(r.distance), num(r.rho_final)]);
            }
            if let Some(dir) = boundaries_dir.as_deref() {
                fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
                let tag = match model {
                    SweepModel::Rapm => "rapm_R",
                    SweepModel::BarlesSoner => "barles_soner_a",
                };
                for (v, r) in values.iter().zip(&runs) {
                    let path = dir.join(format!("{tag}_{v}.csv"));
                    run.emit(&curve_table(&r.boundary, "tau", "rho"), Some(&path))?;
                }
            }
            run.emit(&table, out.as_deref())?;
            let fit: Vec<(f64, f64)> = values
                .iter()
                .zip(&runs)
                .filter(|(v, _)| fit_max.is_none_or(|m| **v <= m))
                .map(|(v, r)| (*v, r.distance))
                .collect();
            let exponent = if fit.len() >= 2 { Some(power_law_exponent(&fit)?) } else { None };
            let diag = json!({
                "fitted_exponent": exponent,
                "fit_points": fit.len(),
                "micro_max": runs.iter().map(|r| r.micro_max).max(),
            });
            let cfg = json!({"pde": cfg, "model": format!("{model:?}").to_lowercase(), "C": cost, "values": values});
            run.finish(out.as_deref(), json!(params), cfg, diag)
        }
        Command::PutAsymptotic {
            market,
            taus,
            steps,
            out,
        } => {
            let params = market.resolve(PUT);
            let mut run = Run::start("put-asymptotic");
            let mut table = Table::new(&["tau", "rho_asym", "rho_binomial"]);
            for &tau in &taus {
                let asym = put_boundary_asymptotic(tau, &params)?;
                let lattice = if steps > 0 {
                    Some(lattice_critical_price(&params, tau, OptionKind::Put, steps)?)
                } else {
                    None
                };
                table.push(vec![num(tau), num(asym), opt(lattice)]);
            }
            run.emit(&table, out.as_deref())?;
            run.finish(out.as_deref(), json!(params), json!({"taus": taus, "steps": steps}), json!({}))
        }
    }
}

fn american_only(style: ExerciseStyle, method: &str) -> Result<(), CliError> {
    if style == ExerciseStyle::European {
        return Err(CliError::Usage(format!("the {method} oracle prices American options only")));
    }
    Ok(())
}

fn pde_config(a: &PdeArgs) -> PdeConfig {
    PdeConfig {
        n: a.n,
        m: a.m,
        length: a.length,
        micro_tol: a.micro_tol,
        micro_max: a.micro_max,
        secant: !a.plain,
        ..PdeConfig::default()
    }
}

fn need(v: Option<f64>, flag: &str, model: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--model {model} needs --{flag}")))
}

fn volatility(a: &ModelArgs) -> Result<VolatilitySpec, CliError> {
    let spec = match a.model {
        Model::Constant => VolatilitySpec::Constant,
        Model::Leland => VolatilitySpec::Leland {
            le: need(a.le, "le", "leland")?,
        },
        Model::Rapm => match a.mu {
            Some(mu) => VolatilitySpec::Rapm { mu },
            None => VolatilitySpec::rapm_from_costs(need(a.cost, "C", "rapm")?, need(a.risk_premium, "R", "rapm")?)?,
        },
        Model::BarlesSoner => VolatilitySpec::BarlesSoner {
            a: need(a.a, "a", "barles-soner")?,
        },
        Model::Avellaneda => VolatilitySpec::Avellaneda {
            sigma1: need(a.sigma1, "sigma1", "avellaneda")?,
            sigma2: need(a.sigma2, "sigma2", "avellaneda")?,
        },
        Model::FreyStremme => VolatilitySpec::FreyStremme {
            feedback: need(a.feedback, "feedback", "frey-stremme")?,
            lambda: need(a.lambda, "lambda", "frey-stremme")?,
        },
    };
    spec.validate()?;
    Ok(spec)
}

fn curve_table(curve: &BoundaryCurve, t: &'static str, v: &'static str) -> Table {
    let mut table = Table::new(&[t, v]);
    for (tau, rho) in curve.points() {
        table.push(vec![num(tau), num(rho)]);
    }
    table
}

// Spots beyond the boundary are reported at intrinsic value.
fn push_price(table: &mut Table, spot: f64, price: fbound::Result<f64>) -> Result<(), CliError> {
    match price {
        Ok(v) => table.push(vec![num(spot), num(v), "hold".into()]),
        Err(Error::ExerciseRegion { intrinsic, .. }) => table.push(vec![num(spot), num(intrinsic), "exercise".into()]),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

#[derive(Deserialize)]
struct Quote {
    timestamp: String,
    #[serde(rename = "S")]
    spot: f64,
    #[serde(rename = "E")]
    strike: f64,
    #[serde(rename = "T")]
    expiry: f64,
    #[serde(rename = "V_bid")]
    bid: f64,
    #[serde(rename = "V_ask")]
    ask: f64,
}

fn calibrate(start: MarketParams, cost: f64, input: &Path, n: usize, m: usize, out: Option<&Path>) -> Result<(), CliError> {
    let mut reader = csv::Reader::from_path(input)
        .map_err(|e| CliError::Usage(format!("cannot read quotes {}: {e}", input.display())))?;
    let quotes: Vec<Quote> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("quotes {} must have columns timestamp,S,E,T,V_bid,V_ask: {e}", input.display())))?;
    let cfg = RapmPriceConfig {
        n,
        m,
        ..RapmPriceConfig::default()
    };
    let mut run = Run::start("rapm-calibrate");
    let mut table = Table::new(&["timestamp", "sigma_rapm", "R", "resid"]);
    let mut failures = Vec::new();
    let mut iterations = Vec::new();
    for q in &quotes {
        let params = MarketParams {
            strike: q.strike,
            expiry: q.expiry,
            ..start
        };
        let mid = 0.5 * (q.bid + q.ask);
        match calibrate_rapm(mid, q.ask, cost, &params, q.spot, 0.0, &cfg) {
            Ok(c) => {
                table.push(vec![q.timestamp.clone(), num(c.sigma), num(c.risk_premium), num(c.residual)]);
                iterations.push(c.iterations);
            }
            Err(e) => {
                table.push(vec![q.timestamp.clone(), num(f64::NAN), num(f64::NAN), num(f64::NAN)]);
                failures.push(json!({"timestamp": q.timestamp, "error": e.to_string()}));
            }
        }
    }
    run.emit(&table, out)?;
    let failed = failures.len();
    let diag: Value = json!({"rows": quotes.len(), "iterations": iterations, "failures": failures});
    run.finish(out, json!({"market": start, "C": cost}), json!(cfg), diag)?;
    if failed > 0 {
        return Err(CliError::Io(format!("calibration failed on {failed} of {} rows (see the manifest)", quotes.len())));
    }
    Ok(())
}
