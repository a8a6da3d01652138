#ifndef FXINSURE_H
#define FXINSURE_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Market variant selector.
 */
typedef enum {
  FX_MARKET_FOREIGN_OU = 0,
  FX_MARKET_FOREIGN_GBM = 1,
  FX_MARKET_DOMESTIC_ONLY = 2,
} FxMarket;

/**
 * Status codes returned by every fallible function of this API.
 */
typedef enum {
  FX_STATUS_OK = 0,
  FX_STATUS_NULL_POINTER = 1,
  FX_STATUS_INVALID_UTF8 = 2,
  FX_STATUS_PARSE_ERROR = 3,
  FX_STATUS_VALIDATION_ERROR = 4,
  FX_STATUS_DOMAIN_ERROR = 5,
  FX_STATUS_NUMERIC_ERROR = 6,
} FxStatus;

/**
 * Strategy selector for simulation; `param` carries the scale factor or
 * constant amount where applicable.
 */
typedef enum {
  FX_STRATEGY_OPTIMAL = 0,
  FX_STRATEGY_SCALED_OPTIMAL = 1,
  FX_STRATEGY_CONSTANT_AMOUNT = 2,
  FX_STRATEGY_ZERO_INVESTMENT = 3,
} FxStrategy;

/**
 * Opaque handle: a validated configuration plus its closed-form solution.
 */
typedef struct FxModel FxModel;

/**
 * Monte Carlo estimate of the expected terminal utility.
 */
typedef struct {
  double estimate;
  double std_error;
} FxSimResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent error on this thread; valid until the next
 * failing call on the same thread.
 */
const char *fx_last_error_message(void);

/**
 * Builds a model from a flat JSON parameter document (same schema as the
 * CLI config file) and a market variant. `grid_points` of 0 selects the
 * default coefficient-table resolution. On success `*out` owns the handle;
 * release it with `fx_model_free`.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
FxStatus fx_model_new_from_json(const char *json,
                                FxMarket market,
                                uint32_t grid_points,
                                FxModel **out);

/**
 * Releases a model handle. Passing NULL is a no-op.
 *
 * # Safety
 * `model` must be NULL or a pointer returned by `fx_model_new_from_json`
 * that has not been freed yet.
 */
void fx_model_free(FxModel *model);

/**
 * Excess return A_1 = u_f + u_Q - r_d of the model's parameters.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
FxStatus fx_model_a1(const FxModel *model, double *out);

/**
 * Value function V(t, x, m); m is ignored for the degenerate variants.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
FxStatus fx_model_value(const FxModel *model, double t, double x, double m, double *out);

/**
 * Optimal amount invested in the risky asset at (t, m).
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
FxStatus fx_model_strategy(const FxModel *model, double t, double m, double *out);

/**
 * Monte Carlo estimate of E[u(X_T)] under the selected strategy.
 * Deterministic in (seed, paths, steps) regardless of worker count.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
FxStatus fx_model_simulate(const FxModel *model,
                           uint64_t paths,
                           uint32_t steps,
                           uint64_t seed,
                           FxStrategy strategy,
                           double strategy_param,
                           FxSimResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FXINSURE_H */
