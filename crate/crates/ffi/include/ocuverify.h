#ifndef OCUVERIFY_H
#define OCUVERIFY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Model variant codes, as stored in model files and database records.
 */
#define OCV_TAG_PRE_PRE 0

#define OCV_TAG_POST_POST 1

#define OCV_TAG_PRE_POST 2

/**
 * Image phase for duplicate checks.
 */
#define OCV_PHASE_PRE 0

#define OCV_PHASE_POST 1

/**
 * Result code of every fallible call.
 */
typedef enum OcvStatus {
  OCV_STATUS_OK = 0,
  OCV_STATUS_NULL_ARGUMENT = 1,
  OCV_STATUS_INVALID_ARGUMENT = 2,
  OCV_STATUS_IO = 3,
  OCV_STATUS_DECODE = 4,
  OCV_STATUS_MODEL_FORMAT = 5,
  OCV_STATUS_CORRUPTION = 6,
  OCV_STATUS_REJECTED_WRITE = 7,
  OCV_STATUS_BUFFER_TOO_SMALL = 8,
  OCV_STATUS_INTERNAL = 9,
} OcvStatus;

typedef enum OcvOutcome {
  OCV_OUTCOME_ACCEPTED = 0,
  OCV_OUTCOME_REJECTED_FORGERY = 1,
  OCV_OUTCOME_REJECTED_DISTANCE = 2,
} OcvOutcome;

/**
 * An embedding database, in memory or file backed.
 */
typedef struct OcvDb OcvDb;

/**
 * A trained embedding network.
 */
typedef struct OcvModel OcvModel;

/**
 * The three models plus the run configuration used for verification.
 */
typedef struct OcvVerifier OcvVerifier;

typedef struct OcvVerdict {
  enum OcvOutcome outcome;
  /**
   * False when rejected as a forgery; `distance` is then 0.
   */
  bool has_distance;
  double distance;
} OcvVerdict;

typedef struct OcvElaResult {
  bool forged;
  size_t suspect_blocks;
  double median_block_mean;
  double max_block_mean;
} OcvElaResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * Valid until the next call on this thread.
 */
const char *ocv_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ocv_version(void);

enum OcvStatus ocv_model_load(const char *path, struct OcvModel **out_model);

enum OcvStatus ocv_model_load_bytes(const uint8_t *data, size_t len, struct OcvModel **out_model);

enum OcvStatus ocv_model_save(const struct OcvModel *model, const char *path);

void ocv_model_free(struct OcvModel *model);

/**
 * Embedding dimension, or 0 for a null handle.
 */
size_t ocv_model_embedding_dim(const struct OcvModel *model);

/**
 * One of the `OCV_TAG_*` values.
 */
enum OcvStatus ocv_model_tag(const struct OcvModel *model, uint32_t *out_tag);

/**
 * Embeds a JPEG as is (no background removal). `out_len` receives the
 * dimension; if `cap` is smaller nothing is written and
 * `BufferTooSmall` is returned.
 */
enum OcvStatus ocv_model_embed_jpeg(const struct OcvModel *model,
                                    const uint8_t *jpeg,
                                    size_t jpeg_len,
                                    float *out_vec,
                                    size_t cap,
                                    size_t *out_len);

/**
 * Builds a verifier from copies of the three models, with default settings.
 */
enum OcvStatus ocv_verifier_new(const struct OcvModel *pre_pre,
                                const struct OcvModel *post_post,
                                const struct OcvModel *pre_post,
                                struct OcvVerifier **out_verifier);

/**
 * Sets one configuration key, using the same keys and value syntax as the
 * command-line `--set KEY=VALUE`.
 */
enum OcvStatus ocv_verifier_set(struct OcvVerifier *verifier, const char *key, const char *value);

void ocv_verifier_free(struct OcvVerifier *verifier);

enum OcvStatus ocv_verify_pair(const struct OcvVerifier *verifier,
                               const uint8_t *pre,
                               size_t pre_len,
                               const uint8_t *post,
                               size_t post_len,
                               struct OcvVerdict *out_verdict);

/**
 * Error level analysis with the verifier's settings, or the defaults when
 * `verifier` is null.
 */
enum OcvStatus ocv_ela_check(const struct OcvVerifier *verifier,
                             const uint8_t *jpeg,
                             size_t jpeg_len,
                             struct OcvElaResult *out_result);

enum OcvStatus ocv_db_new_in_memory(struct OcvDb **out_db);

/**
 * Opens or creates a file-backed database; every insert is appended.
 */
enum OcvStatus ocv_db_open(const char *path, struct OcvDb **out_db);

/**
 * Record count, or 0 for a null handle.
 */
size_t ocv_db_len(const struct OcvDb *db);

void ocv_db_free(struct OcvDb *db);

/**
 * Duplicate lookup for one image of `phase` (`OCV_PHASE_*`). Matching
 * record ids go to `out_ids` (at most `cap`; `out_count` receives the full
 * count) and the id of the newly stored record to `out_new_record`.
 */
enum OcvStatus ocv_check_duplicates(const struct OcvVerifier *verifier,
                                    struct OcvDb *db,
                                    const uint8_t *jpeg,
                                    size_t jpeg_len,
                                    uint32_t phase,
                                    const char *identity_hint,
                                    int64_t created_at,
                                    uint64_t *out_ids,
                                    size_t cap,
                                    size_t *out_count,
                                    uint64_t *out_new_record);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OCUVERIFY_H */
