#ifndef DISCONNECT_H
#define DISCONNECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DcStatus {
  DC_STATUS_OK = 0,
  DC_STATUS_NULL_POINTER = 1,
  DC_STATUS_INVALID_UTF8 = 2,
  DC_STATUS_INVALID_PROBLEM = 3,
  DC_STATUS_INVALID_ARGUMENT = 4,
  DC_STATUS_SOLVER_FAILURE = 5,
  DC_STATUS_NOT_FEASIBLE = 6,
  DC_STATUS_FINGERPRINT_MISMATCH = 7,
  DC_STATUS_PANIC = 8,
  DC_STATUS_OTHER = 9,
} DcStatus;

typedef enum DcSdpStatus {
  DC_SDP_STATUS_FEASIBLE = 0,
  DC_SDP_STATUS_INFEASIBLE = 1,
  DC_SDP_STATUS_UNKNOWN = 2,
} DcSdpStatus;

typedef enum DcVerdict {
  DC_VERDICT_VERIFIED = 0,
  DC_VERDICT_MARGIN_VIOLATION = 1,
  DC_VERDICT_RESIDUAL_VIOLATION = 2,
} DcVerdict;

typedef enum DcRunVerdict {
  DC_RUN_VERDICT_DISCONNECTED = 0,
  DC_RUN_VERDICT_RELAXATION_FEASIBLE = 1,
  DC_RUN_VERDICT_EXHAUSTED = 2,
} DcRunVerdict;

/**
 * Opaque certificate handle.
 */
typedef struct DcCertificate DcCertificate;

/**
 * Opaque problem handle.
 */
typedef struct DcProblem DcProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. The pointer stays valid
 * until the next failing call on the same thread; do not free it.
 */
const char *dc_last_error_message(void);

/**
 * Parses a JSON problem document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DcStatus dc_problem_from_json(const char *json, struct DcProblem **out);

/**
 * # Safety
 * `p` must come from [`dc_problem_from_json`] and not be used afterwards.
 */
void dc_problem_free(struct DcProblem *p);

/**
 * State dimension of a problem, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live problem handle.
 */
size_t dc_problem_dimension(const struct DcProblem *p);

/**
 * Solves the barrier program of order `order`. `cert` receives a
 * certificate when `status` is `Feasible` and null otherwise.
 *
 * # Safety
 * `problem` must be a live handle; `status` and `cert` valid pointers.
 */
enum DcStatus dc_disconnect(const struct DcProblem *problem,
                            uint32_t order,
                            bool eliminate_controls,
                            enum DcSdpStatus *status,
                            struct DcCertificate **cert);

/**
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DcStatus dc_certificate_from_json(const char *json, struct DcCertificate **out);

/**
 * Serializes a certificate. Release the string with [`dc_string_free`].
 *
 * # Safety
 * `cert` must be a live handle and `out` a valid pointer.
 */
enum DcStatus dc_certificate_to_json(const struct DcCertificate *cert, char **out);

/**
 * Evaluates `v(t, x)` at `point = (t, x₁, …, xₙ)` of length `len`.
 *
 * # Safety
 * `cert` must be a live handle, `point` must hold `len` doubles and `out`
 * be a valid pointer.
 */
enum DcStatus dc_certificate_evaluate(const struct DcCertificate *cert,
                                      const double *point,
                                      size_t len,
                                      double *out);

/**
 * # Safety
 * `c` must come from this library and not be used afterwards.
 */
void dc_certificate_free(struct DcCertificate *c);

/**
 * Re-checks a certificate by sampling and by its algebraic identities.
 *
 * # Safety
 * Handles must be live and `verdict` a valid pointer.
 */
enum DcStatus dc_verify(const struct DcCertificate *cert,
                        const struct DcProblem *problem,
                        size_t samples,
                        uint64_t seed,
                        double tau,
                        enum DcVerdict *verdict);

/**
 * Alternates barrier and moment programs for orders `d0..=d_max`.
 * `order` receives the deciding order, or 0 when exhausted.
 *
 * # Safety
 * `problem` must be a live handle; `verdict` and `order` valid pointers.
 */
enum DcStatus dc_meta_algorithm(const struct DcProblem *problem,
                                uint32_t d0,
                                uint32_t d_max,
                                enum DcRunVerdict *verdict,
                                uint32_t *order);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum DcStatus dc_kurdyka_time_bound(uint32_t n, uint32_t deg, double *out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void dc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISCONNECT_H */
