//! C ABI over the `fbound` solvers.
//!
//! Conventions: every fallible function returns an [`FbStatus`]; results go
//! through out-pointers, which are left untouched on failure (the exercise
//! region case of [`fb_boundary_price`] aside). The message of
//! the last failure on the calling thread is available from
//! [`fb_last_error`]. Boundaries are opaque [`FbBoundary`] handles that must
//! be released with [`fb_boundary_free`]. Panics never cross the boundary;
//! they surface as `FB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fbound::asian::{asian_solve, AsianConfig};
use fbound::gamma_eq::{price_european_mu, RapmParams, RapmPriceConfig};
use fbound::integral_eq::{price_call_semi_explicit, put_boundary_asymptotic, solve_boundary, IntegralEqConfig};
use fbound::oracles::{baw_price, binomial_price, bs_european_price, ExerciseStyle, LatticeConfig, OptionKind};
use fbound::pde::{recover_price, solve_free_boundary, PdeConfig, PortfolioSurface};
use fbound::{BoundaryCurve, Error, MarketParams, VolatilitySpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbStatus {
    Ok = 0,
    /// A parameter violates the solver's assumptions.
    InvalidArgument = 1,
    NullPointer = 2,
    /// Input outside the domain of a formula (e.g. too far from expiry).
    Domain = 3,
    Convergence = 4,
    Numeric = 5,
    /// The spot lies in the exercise region; the intrinsic value was written.
    ExerciseRegion = 6,
    /// The operation is not available for this handle.
    Unsupported = 7,
    Panic = 8,
}

/// Contract and market constants.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FbMarket {
    pub rate: f64,
    pub dividend: f64,
    pub strike: f64,
    pub expiry: f64,
    pub sigma: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbModelKind {
    Constant = 0,
    /// `p1` = Leland number.
    Leland = 1,
    /// `p1` = transaction cost C, `p2` = risk premium R.
    Rapm = 2,
    /// `p1` = a.
    BarlesSoner = 3,
    /// `p1` = σ1, `p2` = σ2.
    Avellaneda = 4,
    /// `p1` = feedback, `p2` = liquidity factor λ.
    FreyStremme = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FbModel {
    pub kind: FbModelKind,
    pub p1: f64,
    pub p2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FbPdeConfig {
    pub n: u32,
    pub m: u32,
    pub length: f64,
    pub micro_tol: f64,
    pub micro_max: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbOptionKind {
    Call = 0,
    Put = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbOracle {
    /// American, CRR lattice with `steps` levels.
    Binomial = 0,
    /// American, Barone-Adesi-Whaley.
    Baw = 1,
    /// European, closed form.
    BlackScholes = 2,
}

enum Source {
    Integral,
    Pde(Box<PortfolioSurface>),
    Asian,
}

/// Solved early-exercise boundary.
pub struct FbBoundary {
    params: MarketParams,
    curve: BoundaryCurve,
    source: Source,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FbStatus {
    match e.root() {
        Error::InvalidParams(_) => FbStatus::InvalidArgument,
        Error::Domain(_) => FbStatus::Domain,
        Error::Convergence { .. } => FbStatus::Convergence,
        Error::ExerciseRegion { .. } => FbStatus::ExerciseRegion,
        _ => FbStatus::Numeric,
    }
}

fn fail(e: Error) -> FbStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn guard(f: impl FnOnce() -> FbStatus) -> FbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic".into());
            FbStatus::Panic
        }
    }
}

fn null(what: &str) -> FbStatus {
    set_error(format!("{what} is NULL"));
    FbStatus::NullPointer
}

impl From<FbMarket> for MarketParams {
    fn from(m: FbMarket) -> Self {
        MarketParams::new(m.rate, m.dividend, m.strike, m.expiry, m.sigma)
    }
}

fn model_spec(m: &FbModel) -> Result<VolatilitySpec, Error> {
    Ok(match m.kind {
        FbModelKind::Constant => VolatilitySpec::Constant,
        FbModelKind::Leland => VolatilitySpec::Leland { le: m.p1 },
        FbModelKind::Rapm => VolatilitySpec::rapm_from_costs(m.p1, m.p2)?,
        FbModelKind::BarlesSoner => VolatilitySpec::BarlesSoner { a: m.p1 },
        FbModelKind::Avellaneda => VolatilitySpec::Avellaneda {
            sigma1: m.p1,
            sigma2: m.p2,
        },
        FbModelKind::FreyStremme => VolatilitySpec::FreyStremme {
            feedback: m.p1,
            lambda: m.p2,
        },
    })
}

fn kind_of(k: FbOptionKind) -> OptionKind {
    match k {
        FbOptionKind::Call => OptionKind::Call,
        FbOptionKind::Put => OptionKind::Put,
    }
}

fn emit(out: *mut *mut FbBoundary, b: FbBoundary) -> FbStatus {
    // SAFETY: callers checked `out` for NULL.
    unsafe { *out = Box::into_raw(Box::new(b)) };
    FbStatus::Ok
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn fb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a NUL-terminated string.
#[no_mangle]
pub extern "C" fn fb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Constant-volatility call boundary from the integral equation on `nodes` ξ intervals.
///
/// # Safety
/// `market` must point to a valid `FbMarket`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_solve_integral(market: *const FbMarket, nodes: u32, out: *mut *mut FbBoundary) -> FbStatus {
    guard(|| {
        if market.is_null() || out.is_null() {
            return null("market or out");
        }
        let params: MarketParams = (*market).into();
        let cfg = IntegralEqConfig {
            nodes: nodes as usize,
            ..IntegralEqConfig::default()
        };
        match solve_boundary(&params, &cfg) {
            Ok(s) => emit(
                out,
                FbBoundary {
                    params,
                    curve: s.curve,
                    source: Source::Integral,
                },
            ),
            Err(e) => fail(e),
        }
    })
}

/// Call boundary from the operator-splitting scheme; `cfg` may be NULL for the default mesh.
///
/// # Safety
/// `market` and `model` must be valid; `cfg` valid or NULL; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_solve_pde(
    market: *const FbMarket,
    model: *const FbModel,
    cfg: *const FbPdeConfig,
    out: *mut *mut FbBoundary,
) -> FbStatus {
    guard(|| {
        if market.is_null() || model.is_null() || out.is_null() {
            return null("market, model or out");
        }
        let params: MarketParams = (*market).into();
        let spec = match model_spec(&*model) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let mut pde = PdeConfig {
            snapshots: 1,
            ..PdeConfig::default()
        };
        if let Some(c) = cfg.as_ref() {
            pde.n = c.n as usize;
            pde.m = c.m as usize;
            pde.length = c.length;
            pde.micro_tol = c.micro_tol;
            pde.micro_max = c.micro_max as usize;
        }
        match solve_free_boundary(&params, &spec, &pde) {
            Ok(s) => emit(
                out,
                FbBoundary {
                    params,
                    curve: s.boundary.clone(),
                    source: Source::Pde(Box::new(s)),
                },
            ),
            Err(e) => fail(e),
        }
    })
}

/// Floating-strike Asian call boundary `ρ(τ)` (in units of the running average).
///
/// # Safety
/// `market` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_solve_asian(market: *const FbMarket, n: u32, m: u32, out: *mut *mut FbBoundary) -> FbStatus {
    guard(|| {
        if market.is_null() || out.is_null() {
            return null("market or out");
        }
        let params: MarketParams = (*market).into();
        let cfg = AsianConfig {
            n: n as usize,
            m: m as usize,
            ..AsianConfig::default()
        };
        match asian_solve(&params, &cfg) {
            Ok(s) => emit(
                out,
                FbBoundary {
                    params,
                    curve: s.boundary,
                    source: Source::Asian,
                },
            ),
            Err(e) => fail(e),
        }
    })
}

/// Releases a boundary. NULL is ignored.
///
/// # Safety
/// `b` must come from one of the solve functions and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fb_boundary_free(b: *mut FbBoundary) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Number of `(τ, ρ)` samples; 0 for NULL.
///
/// # Safety
/// `b` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fb_boundary_len(b: *const FbBoundary) -> usize {
    b.as_ref().map_or(0, |b| b.curve.len())
}

/// Copies up to `len` samples into `taus` and `rhos`.
///
/// # Safety
/// `b` live; `taus` and `rhos` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fb_boundary_copy(b: *const FbBoundary, taus: *mut f64, rhos: *mut f64, len: usize) -> FbStatus {
    guard(|| {
        let Some(b) = b.as_ref() else {
            return null("boundary");
        };
        if taus.is_null() || rhos.is_null() {
            return null("taus or rhos");
        }
        let k = len.min(b.curve.len());
        ptr::copy_nonoverlapping(b.curve.taus.as_ptr(), taus, k);
        ptr::copy_nonoverlapping(b.curve.rhos.as_ptr(), rhos, k);
        FbStatus::Ok
    })
}

/// `ρ(τ)` by linear interpolation.
///
/// # Safety
/// `b` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_boundary_rho_at(b: *const FbBoundary, tau: f64, out: *mut f64) -> FbStatus {
    guard(|| {
        let Some(b) = b.as_ref() else {
            return null("boundary");
        };
        if out.is_null() {
            return null("out");
        }
        let last = b.curve.last_tau();
        if !(tau >= 0.0 && tau <= last) {
            set_error(format!("tau = {tau} outside the solved range [0, {last}]"));
            return FbStatus::InvalidArgument;
        }
        *out = b.curve.rho_at(tau);
        FbStatus::Ok
    })
}

/// American call value at time to expiry `T` (the full horizon).
///
/// Integral-equation handles use the semi-explicit formula, PDE handles the
/// recovered portfolio. Spots beyond the boundary write the intrinsic value
/// and return `FB_STATUS_EXERCISE_REGION`.
///
/// # Safety
/// `b` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_boundary_price(b: *const FbBoundary, spot: f64, out: *mut f64) -> FbStatus {
    guard(|| {
        let Some(b) = b.as_ref() else {
            return null("boundary");
        };
        if out.is_null() {
            return null("out");
        }
        let tau = b.params.expiry;
        let r = match &b.source {
            Source::Integral => price_call_semi_explicit(spot, tau, &b.curve, &b.params),
            Source::Pde(s) => recover_price(s, spot, tau),
            Source::Asian => {
                set_error("prices are not available for Asian boundaries".into());
                return FbStatus::Unsupported;
            }
        };
        match r {
            Ok(v) => {
                *out = v;
                FbStatus::Ok
            }
            Err(e) => {
                if let Error::ExerciseRegion { intrinsic, .. } = e {
                    *out = intrinsic;
                }
                fail(e)
            }
        }
    })
}

/// Near-expiry American put boundary (`q = 0`).
///
/// # Safety
/// `market` valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_put_asymptotic(market: *const FbMarket, tau: f64, out: *mut f64) -> FbStatus {
    guard(|| {
        if market.is_null() || out.is_null() {
            return null("market or out");
        }
        match put_boundary_asymptotic(tau, &(*market).into()) {
            Ok(v) => {
                *out = v;
                FbStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Reference price at time to expiry `market.expiry`. `steps` is used by the lattice only.
///
/// # Safety
/// `market` valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_oracle_price(
    market: *const FbMarket,
    oracle: FbOracle,
    kind: FbOptionKind,
    spot: f64,
    steps: u32,
    out: *mut f64,
) -> FbStatus {
    guard(|| {
        if market.is_null() || out.is_null() {
            return null("market or out");
        }
        let p: MarketParams = (*market).into();
        let kind = kind_of(kind);
        let r = match oracle {
            FbOracle::Binomial => binomial_price(
                spot,
                &p,
                &LatticeConfig {
                    steps: steps as usize,
                    style: ExerciseStyle::American,
                    kind,
                },
            )
            .map(|r| r.price),
            FbOracle::Baw => baw_price(spot, &p, p.expiry, kind),
            FbOracle::BlackScholes => p.validate().map(|_| bs_european_price(spot, &p, p.expiry, kind)),
        };
        match r {
            Ok(v) => {
                *out = v;
                FbStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// European call bid, mid and ask under the risk-adjusted model at `t = 0`.
///
/// # Safety
/// `market` valid; `bid`, `mid`, `ask` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_rapm_bid_ask(
    market: *const FbMarket,
    cost: f64,
    risk_premium: f64,
    spot: f64,
    bid: *mut f64,
    mid: *mut f64,
    ask: *mut f64,
) -> FbStatus {
    guard(|| {
        if market.is_null() || bid.is_null() || mid.is_null() || ask.is_null() {
            return null("market, bid, mid or ask");
        }
        let p: MarketParams = (*market).into();
        let cfg = RapmPriceConfig::default();
        let r = RapmParams::new(cost, risk_premium).and_then(|rapm| {
            let a = price_european_mu(&p, rapm.mu(), &[spot], &cfg)?.prices[0];
            let m = price_european_mu(&p, 0.0, &[spot], &cfg)?.prices[0];
            Ok((a, m))
        });
        match r {
            Ok((a, m)) => {
                *ask = a;
                *mid = m;
                *bid = 2.0 * m - a;
                FbStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
