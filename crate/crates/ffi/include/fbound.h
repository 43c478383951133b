#ifndef FBOUND_H
#define FBOUND_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FbStatus {
  FB_STATUS_OK = 0,
  /**
   * A parameter violates the solver's assumptions.
   */
  FB_STATUS_INVALID_ARGUMENT = 1,
  FB_STATUS_NULL_POINTER = 2,
  /**
   * Input outside the domain of a formula (e.g. too far from expiry).
   */
  FB_STATUS_DOMAIN = 3,
  FB_STATUS_CONVERGENCE = 4,
  FB_STATUS_NUMERIC = 5,
  /**
   * The spot lies in the exercise region; the intrinsic value was written.
   */
  FB_STATUS_EXERCISE_REGION = 6,
  /**
   * The operation is not available for this handle.
   */
  FB_STATUS_UNSUPPORTED = 7,
  FB_STATUS_PANIC = 8,
} FbStatus;

typedef enum FbModelKind {
  FB_MODEL_KIND_CONSTANT = 0,
  /**
   * `p1` = Leland number.
   */
  FB_MODEL_KIND_LELAND = 1,
  /**
   * `p1` = transaction cost C, `p2` = risk premium R.
   */
  FB_MODEL_KIND_RAPM = 2,
  /**
   * `p1` = a.
   */
  FB_MODEL_KIND_BARLES_SONER = 3,
  /**
   * `p1` = σ1, `p2` = σ2.
   */
  FB_MODEL_KIND_AVELLANEDA = 4,
  /**
   * `p1` = feedback, `p2` = liquidity factor λ.
   */
  FB_MODEL_KIND_FREY_STREMME = 5,
} FbModelKind;

typedef enum FbOracle {
  /**
   * American, CRR lattice with `steps` levels.
   */
  FB_ORACLE_BINOMIAL = 0,
  /**
   * American, Barone-Adesi-Whaley.
   */
  FB_ORACLE_BAW = 1,
  /**
   * European, closed form.
   */
  FB_ORACLE_BLACK_SCHOLES = 2,
} FbOracle;

typedef enum FbOptionKind {
  FB_OPTION_KIND_CALL = 0,
  FB_OPTION_KIND_PUT = 1,
} FbOptionKind;

/**
 * Solved early-exercise boundary.
 */
typedef struct FbBoundary FbBoundary;

/**
 * Contract and market constants.
 */
typedef struct FbMarket {
  double rate;
  double dividend;
  double strike;
  double expiry;
  double sigma;
} FbMarket;

typedef struct FbModel {
  enum FbModelKind kind;
  double p1;
  double p2;
} FbModel;

typedef struct FbPdeConfig {
  uint32_t n;
  uint32_t m;
  double length;
  double micro_tol;
  uint32_t micro_max;
} FbPdeConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * failing call on the same thread.
 */
const char *fb_last_error(void);

/**
 * Library version as a NUL-terminated string.
 */
const char *fb_version(void);

/**
 * Constant-volatility call boundary from the integral equation on `nodes` ξ intervals.
 *
 * # Safety
 * `market` must point to a valid `FbMarket`; `out` must be writable.
 */
enum FbStatus fb_solve_integral(const struct FbMarket *market,
                                uint32_t nodes,
                                struct FbBoundary **out);

/**
 * Call boundary from the operator-splitting scheme; `cfg` may be NULL for the default mesh.
 *
 * # Safety
 * `market` and `model` must be valid; `cfg` valid or NULL; `out` writable.
 */
enum FbStatus fb_solve_pde(const struct FbMarket *market,
                           const struct FbModel *model,
                           const struct FbPdeConfig *cfg,
                           struct FbBoundary **out);

/**
 * Floating-strike Asian call boundary `ρ(τ)` (in units of the running average).
 *
 * # Safety
 * `market` must be valid; `out` writable.
 */
enum FbStatus fb_solve_asian(const struct FbMarket *market,
                             uint32_t n,
                             uint32_t m,
                             struct FbBoundary **out);

/**
 * Releases a boundary. NULL is ignored.
 *
 * # Safety
 * `b` must come from one of the solve functions and not be used afterwards.
 */
void fb_boundary_free(struct FbBoundary *b);

/**
 * Number of `(τ, ρ)` samples; 0 for NULL.
 *
 * # Safety
 * `b` must be a live handle or NULL.
 */
size_t fb_boundary_len(const struct FbBoundary *b);

/**
 * Copies up to `len` samples into `taus` and `rhos`.
 *
 * # Safety
 * `b` live; `taus` and `rhos` must hold `len` doubles.
 */
enum FbStatus fb_boundary_copy(const struct FbBoundary *b, double *taus, double *rhos, size_t len);

/**
 * `ρ(τ)` by linear interpolation.
 *
 * # Safety
 * `b` live; `out` writable.
 */
enum FbStatus fb_boundary_rho_at(const struct FbBoundary *b, double tau, double *out);

/**
 * American call value at time to expiry `T` (the full horizon).
 *
 * Integral-equation handles use the semi-explicit formula, PDE handles the
 * recovered portfolio. Spots beyond the boundary write the intrinsic value
 * and return `FB_STATUS_EXERCISE_REGION`.
 *
 * # Safety
 * `b` live; `out` writable.
 */
enum FbStatus fb_boundary_price(const struct FbBoundary *b, double spot, double *out);

/**
 * Near-expiry American put boundary (`q = 0`).
 *
 * # Safety
 * `market` valid; `out` writable.
 */
enum FbStatus fb_put_asymptotic(const struct FbMarket *market, double tau, double *out);

/**
 * Reference price at time to expiry `market.expiry`. `steps` is used by the lattice only.
 *
 * # Safety
 * `market` valid; `out` writable.
 */
enum FbStatus fb_oracle_price(const struct FbMarket *market,
                              enum FbOracle oracle,
                              enum FbOptionKind kind,
                              double spot,
                              uint32_t steps,
                              double *out);

/**
 * European call bid, mid and ask under the risk-adjusted model at `t = 0`.
 *
 * # Safety
 * `market` valid; `bid`, `mid`, `ask` writable.
 */
enum FbStatus fb_rapm_bid_ask(const struct FbMarket *market,
                              double cost,
                              double risk_premium,
                              double spot,
                              double *bid,
                              double *mid,
                              double *ask);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FBOUND_H */
