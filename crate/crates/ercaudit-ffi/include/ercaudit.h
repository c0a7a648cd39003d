/* C interface to the ercaudit smart-contract compliance engine. */

#ifndef ERCAUDIT_H
#define ERCAUDIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum ErcauditStatus {
  ERCAUDIT_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ERCAUDIT_STATUS_NULL_ARG = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  ERCAUDIT_STATUS_BAD_UTF8 = 2,
  /**
   * The rules document did not parse or failed validation.
   */
  ERCAUDIT_STATUS_BAD_RULES = 3,
  /**
   * The contract source did not parse or could not be modeled.
   */
  ERCAUDIT_STATUS_BAD_CONTRACT = 4,
  /**
   * The engine panicked; details via `ercaudit_last_error`.
   */
  ERCAUDIT_STATUS_INTERNAL = 5,
} ErcauditStatus;

/**
 * Opaque handle to the result of a contract check.
 */
typedef struct ErcauditReport ErcauditReport;

/**
 * Opaque handle to a loaded rule set.
 */
typedef struct ErcauditRules ErcauditRules;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ercaudit_last_error(void);

/**
 * Crate version as a static string.
 */
const char *ercaudit_version(void);

/**
 * Parse a rules document (either a full rule-set document or a bare rule
 * array) into a handle. On success `*out` owns the handle; release it with
 * `ercaudit_rules_free`.
 */
enum ErcauditStatus ercaudit_rules_parse(const char *json, struct ErcauditRules **out);

/**
 * Number of formal rules held by the handle; 0 for a null handle.
 */
uintptr_t ercaudit_rules_count(const struct ErcauditRules *rules);

void ercaudit_rules_free(struct ErcauditRules *rules);

/**
 * Check contract source against the rule set. `loop_bound` of 0 selects the
 * default bound. On success `*out` owns a report handle.
 */
enum ErcauditStatus ercaudit_check(const struct ErcauditRules *rules,
                                   const char *source,
                                   uint32_t loop_bound,
                                   struct ErcauditReport **out);

/**
 * True when the report contains at least one violating verdict.
 */
bool ercaudit_report_has_violations(const struct ErcauditReport *report);

/**
 * Report serialized as JSON. The returned string is owned by the caller and
 * must be released with `ercaudit_string_free`; null on null input.
 */
char *ercaudit_report_to_json(const struct ErcauditReport *report);

void ercaudit_report_free(struct ErcauditReport *report);

/**
 * Release a string returned by this library.
 */
void ercaudit_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ERCAUDIT_H */
