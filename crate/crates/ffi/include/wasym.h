#ifndef WASYM_H
#define WASYM_H

/* Generated by cbindgen. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. `WASYM_STATUS_OK` is zero; everything else is a failure.
 */
typedef enum WasymStatus {
  WASYM_STATUS_OK = 0,
  WASYM_STATUS_NULL_ARGUMENT = 1,
  WASYM_STATUS_INVALID_UTF8 = 2,
  /**
   * The module failed to parse, validate or link.
   */
  WASYM_STATUS_LOAD_ERROR = 3,
  /**
   * A bad option, model text or replay model.
   */
  WASYM_STATUS_CONFIG_ERROR = 4,
  /**
   * The exploration failed internally.
   */
  WASYM_STATUS_ENGINE_ERROR = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  WASYM_STATUS_PANIC = 6,
} WasymStatus;

/**
 * A loaded, linked module. Opaque.
 */
typedef struct WasymModule WasymModule;

/**
 * The outcome of a run. Opaque.
 */
typedef struct WasymReport WasymReport;

/**
 * Options for [`wasym_sym`]. Zero fields take their defaults.
 */
typedef struct WasymSymOptions {
  /**
   * Worker threads; 0 means 1.
   */
  uint32_t workers;
  /**
   * Instruction budget per path; 0 means the default.
   */
  uint64_t fuel;
  /**
   * Wall-clock limit in milliseconds; 0 means none.
   */
  uint64_t timeout_ms;
  bool fail_fast;
  bool assertion_only;
  /**
   * Disable periodic yields.
   */
  bool deterministic;
  /**
   * Use the built-in enumeration backend instead of an external solver.
   */
  bool brute_force;
  /**
   * Solver command line, or NULL for the default.
   */
  const char *solver_command;
} WasymSymOptions;

/**
 * Description of the last failure on this thread, or an empty string.
 */
const char *wasym_last_error(void);

/**
 * Parse, validate and link WebAssembly text.
 *
 * # Safety
 * `wat` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WasymStatus wasym_module_load(const char *wat, struct WasymModule **out);

/**
 * Release a module. NULL is ignored.
 *
 * # Safety
 * `module` must come from [`wasym_module_load`] and not be used afterwards.
 */
void wasym_module_free(struct WasymModule *module);

/**
 * Whether the module imports symbol intrinsics.
 *
 * # Safety
 * `module` must be a live handle or NULL.
 */
bool wasym_module_uses_symbols(const struct WasymModule *module);

/**
 * Run `main` concretely. `model` is the text of a replay model, or NULL.
 * `fuel` 0 takes the default budget.
 *
 * # Safety
 * `module` must be a live handle, `model` NULL or a NUL-terminated string,
 * and `out` a valid pointer.
 */
enum WasymStatus wasym_run(const struct WasymModule *module,
                           const char *model,
                           uint64_t fuel,
                           struct WasymReport **out);

/**
 * Default option values.
 */
struct WasymSymOptions wasym_sym_options_default(void);

/**
 * Explore every path of `main`.
 *
 * # Safety
 * `module` must be a live handle, `options` NULL or valid, and `out` a
 * valid pointer.
 */
enum WasymStatus wasym_sym(const struct WasymModule *module,
                           const struct WasymSymOptions *options,
                           struct WasymReport **out);

/**
 * The report stream text. Valid until the report is freed.
 *
 * # Safety
 * `report` must be a live handle or NULL.
 */
const char *wasym_report_text(const struct WasymReport *report);

/**
 * The exit code the command line tool would return: 0 or 13.
 *
 * # Safety
 * `report` must be a live handle or NULL.
 */
int32_t wasym_report_exit_code(const struct WasymReport *report);

/**
 * # Safety
 * `report` must be a live handle or NULL.
 */
size_t wasym_report_findings(const struct WasymReport *report);

/**
 * Release a report. NULL is ignored.
 *
 * # Safety
 * `report` must come from this library and not be used afterwards.
 */
void wasym_report_free(struct WasymReport *report);

#endif  /* WASYM_H */
