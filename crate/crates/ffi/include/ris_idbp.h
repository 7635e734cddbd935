#ifndef RIS_IDBP_H
#define RIS_IDBP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes shared by every function.
 */
typedef enum RisStatus {
  RIS_STATUS_OK = 0,
  RIS_STATUS_NULL_POINTER = 1,
  RIS_STATUS_INVALID_ARGUMENT = 2,
  RIS_STATUS_RANK_DEFICIENT = 3,
  RIS_STATUS_SINGULAR = 4,
  RIS_STATUS_ALPHABET_VIOLATION = 5,
  RIS_STATUS_SPACE_TOO_LARGE = 6,
  RIS_STATUS_BUFFER_TOO_SMALL = 7,
  RIS_STATUS_NUMERICAL = 8,
  RIS_STATUS_PARSE = 9,
  RIS_STATUS_PANIC = 10,
} RisStatus;

/**
 * System parameters.
 */
typedef struct RisConfig RisConfig;

/**
 * A first-order Markov prior over phase indices.
 */
typedef struct RisPrior RisPrior;

/**
 * One channel draw with designed transceivers.
 */
typedef struct RisProblem RisProblem;

/**
 * Link metrics for a phase sequence.
 */
typedef struct RisMetrics {
  double mse;
  double rate_bits;
  double energy_eff;
  double objective;
} RisMetrics;

/**
 * Search outcome written by the optimizers.
 */
typedef struct RisSearchResult {
  double objective;
  uint64_t leaf_evals;
} RisSearchResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ris_version(void);

/**
 * Copy the last error message of this thread into `buf`, NUL-terminated and
 * truncated to `len` bytes. Returns the full message length.
 *
 * # Safety
 * `buf` must be null or valid for `len` writable bytes.
 */
size_t ris_last_error(char *buf, size_t len);

/**
 * Reference configuration for an RIS with `n_ris` elements.
 *
 * # Safety
 * `out` must be a valid pointer; the handle is released with [`ris_config_free`].
 */
enum RisStatus ris_config_reference(size_t n_ris, struct RisConfig **out);

/**
 * Set SNR in dB, ADC bits and seed on a configuration.
 *
 * # Safety
 * `cfg` must come from [`ris_config_reference`].
 */
enum RisStatus ris_config_set(struct RisConfig *cfg,
                              double snr_db,
                              uint32_t adc_bits,
                              uint64_t seed);

/**
 * Parse a configuration from a NUL-terminated TOML string.
 *
 * # Safety
 * `text` must be a valid C string and `out` a valid pointer.
 */
enum RisStatus ris_config_parse(const char *text, struct RisConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void ris_config_free(struct RisConfig *cfg);

/**
 * Draw a channel from `seed` and design the transceivers for it.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum RisStatus ris_problem_new(const struct RisConfig *cfg, uint64_t seed, struct RisProblem **out);

/**
 * Number of RIS elements of the problem, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t ris_problem_elements(const struct RisProblem *problem);

/**
 * Alphabet size of the problem, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t ris_problem_alphabet(const struct RisProblem *problem);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void ris_problem_free(struct RisProblem *problem);

/**
 * Objective value of a phase sequence.
 *
 * # Safety
 * `phases` must hold `len` values and `out` must be valid.
 */
enum RisStatus ris_objective(const struct RisProblem *problem,
                             const uint32_t *phases,
                             size_t len,
                             double *out);

/**
 * MSE, rate, energy efficiency and objective of a phase sequence.
 *
 * # Safety
 * `phases` must hold `len` values and `out` must be valid.
 */
enum RisStatus ris_metrics(const struct RisProblem *problem,
                           const uint32_t *phases,
                           size_t len,
                           struct RisMetrics *out);

/**
 * Exhaustive search over all sequences.
 *
 * # Safety
 * `out_phases` must hold `len` values and `out` must be valid.
 */
enum RisStatus ris_exhaustive(const struct RisProblem *problem,
                              uint32_t *out_phases,
                              size_t len,
                              struct RisSearchResult *out);

/**
 * Trace-maximization heuristic.
 *
 * # Safety
 * `out_phases` must hold `len` values and `out` must be valid.
 */
enum RisStatus ris_tmh(const struct RisProblem *problem,
                       uint32_t *out_phases,
                       size_t len,
                       struct RisSearchResult *out);

/**
 * Estimate a prior from the `pool_size` best of `budget` candidates.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum RisStatus ris_prior_from_pool(const struct RisProblem *problem,
                                   size_t budget,
                                   size_t pool_size,
                                   uint64_t seed,
                                   struct RisPrior **out);

/**
 * Parse a prior from its plain-text matrix form.
 *
 * # Safety
 * `text` must be a valid C string and `out` a valid pointer.
 */
enum RisStatus ris_prior_parse(const char *text, struct RisPrior **out);

/**
 * Write the prior as text into `buf`. Returns the length needed excluding the
 * NUL, or 0 for a null handle.
 *
 * # Safety
 * `buf` must be null or valid for `len` writable bytes.
 */
size_t ris_prior_text(const struct RisPrior *prior, char *buf, size_t len);

/**
 * # Safety
 * `prior` must be null or a handle not yet freed.
 */
void ris_prior_free(struct RisPrior *prior);

/**
 * Prior-guided tree search keeping `k_best` children per branching node.
 *
 * # Safety
 * Handles must be live, `out_phases` must hold `len` values and `out` must be valid.
 */
enum RisStatus ris_idbp(const struct RisProblem *problem,
                        const struct RisPrior *prior,
                        size_t k_best,
                        uint32_t *out_phases,
                        size_t len,
                        struct RisSearchResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIS_IDBP_H */
