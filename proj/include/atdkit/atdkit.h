/* atdkit shared-library interface.
 *
 * Plain C surface over the detection toolkit: declarative experiment runs,
 * checkpointed models, detection scores, and score-targeted attacks. All
 * functions are thread-compatible; handles must not be shared across threads
 * without external synchronization. Failure details for the most recent
 * error on the calling thread come from atdk_last_error().
 */
#ifndef ATDKIT_H
#define ATDKIT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum atdk_status {
  ATDK_OK = 0,
  ATDK_ERR_INVALID_ARGUMENT = 1,
  ATDK_ERR_CONFIG = 2,
  ATDK_ERR_IO = 3,
  ATDK_ERR_NUMERIC = 4,
  ATDK_ERR_CONTRACT = 5,
  ATDK_ERR_INTERNAL = 6
} atdk_status;

/* Library version, e.g. "0.1.0". */
const char* atdk_version(void);

/* Stable name for a status value, e.g. "config". */
const char* atdk_status_name(atdk_status status);

/* Message of the most recent failure on this thread; "" if none. The
 * returned pointer stays valid until the next failing call on the thread. */
const char* atdk_last_error(void);

/* --- declarative runs --- */

/* Parses and validates a JSON run config without executing it. */
atdk_status atdk_config_check(const char* config_path);

/* Executes the run described by config_path, writing artifacts and
 * run_manifest.json into the output directory. seed_override >= 0 replaces
 * the config's seed before parsing; out_dir, when non-NULL and non-empty,
 * replaces the config's output directory. */
atdk_status atdk_run(const char* config_path, int64_t seed_override,
                     const char* out_dir);

/* --- metrics --- */

/* Area under the ROC curve of in-scores vs out-scores (in-distribution is
 * the positive class; ties count half). Both lists must be nonempty. */
atdk_status atdk_auroc(const double* in_scores, size_t n_in,
                       const double* out_scores, size_t n_out, double* result);

/* --- classifier checkpoints --- */

typedef struct atdk_model atdk_model;

/* NULL on failure; see atdk_last_error(). */
atdk_model* atdk_model_load(const char* checkpoint_path);
void atdk_model_free(atdk_model* model);

atdk_status atdk_model_input_size(const atdk_model* model, size_t* size);
atdk_status atdk_model_num_classes(const atdk_model* model, size_t* classes);

/* Logits for n row-major samples of input_size values each; out receives
 * n * num_classes doubles, row-major. */
atdk_status atdk_model_logits(atdk_model* model, const double* inputs,
                              size_t n, size_t input_size, double* out);

/* --- detectors --- */

typedef struct atdk_detector atdk_detector;

/* kind selects the score and what `path` points at:
 *   "msp"            classifier checkpoint
 *   "md", "rmd",
 *   "openmax"        detector.json written by a train-baseline run
 *   "discriminator"  bundle directory written by a train-atd run
 * NULL on failure. */
atdk_detector* atdk_detector_open(const char* kind, const char* path);
void atdk_detector_free(atdk_detector* detector);

atdk_status atdk_detector_input_size(const atdk_detector* detector,
                                     size_t* size);

/* Per-sample detection scores, higher = more in-distribution; out receives
 * n doubles. */
atdk_status atdk_detector_score(atdk_detector* detector, const double* inputs,
                                size_t n, size_t input_size, double* out);

/* Iterated sign attack against the detector's own score under an L-infinity
 * budget. role_in != 0 treats the samples as in-distribution (scores pushed
 * down), otherwise as out-of-distribution (scores pushed up). clamp_lo <
 * clamp_hi bounds the input box; pass clamp_lo >= clamp_hi for an unbounded
 * space. out receives the perturbed inputs, same layout as inputs. */
atdk_status atdk_detector_attack(atdk_detector* detector,
                                 const double* inputs, size_t n,
                                 size_t input_size, double epsilon, int steps,
                                 int role_in, double clamp_lo, double clamp_hi,
                                 uint64_t seed, double* out);

#ifdef __cplusplus
}
#endif

#endif /* ATDKIT_H */
