#ifndef HYPOGRAPH_H
#define HYPOGRAPH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HgStatus {
  HG_STATUS_OK = 0,
  HG_STATUS_NULL_POINTER = 1,
  HG_STATUS_INVALID_UTF8 = 2,
  HG_STATUS_PARSE = 3,
  HG_STATUS_DATA = 4,
  HG_STATUS_INTERNAL = 5,
} HgStatus;

/*
 Parsed dataset.
 */
typedef struct HgDataset HgDataset;

/*
 Fingerprints of one dataset.
 */
typedef struct HgFeatures HgFeatures;

/*
 Trained ensemble together with the fingerprint radius it expects.
 */
typedef struct HgModel HgModel;

typedef struct HgTrainConfig {
  uint32_t stages;
  double shrinkage;
  uint32_t max_depth;
  uint32_t min_leaf;
  uint64_t seed;
} HgTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *hg_last_error(void);

/*
 Library version, a static string.
 */
const char *hg_version(void);

/*
 Frees a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not be freed twice.
 */
void hg_string_free(char *s);

/*
 Entanglement size `log2(d1 d2 d3)` from three Schmidt ranks.

 # Safety
 `out` must be valid for writes.
 */
enum HgStatus hg_n_qubits(uint32_t d1, uint32_t d2, uint32_t d3, double *out);

/*
 Parses JSON-lines graph records.

 # Safety
 `jsonl` must be a NUL-terminated string; `out` valid for writes.
 */
enum HgStatus hg_dataset_from_jsonl(const char *jsonl, struct HgDataset **out);

/*
 Parses a molecule file: one line-notation string and target per line.

 # Safety
 `text_in` must be a NUL-terminated string; `out` valid for writes.
 */
enum HgStatus hg_dataset_from_molecules(const char *text_in, struct HgDataset **out);

/*
 Number of samples; 0 for null.

 # Safety
 `ds` must be null or a live dataset handle.
 */
size_t hg_dataset_len(const struct HgDataset *ds);

/*
 # Safety
 `ds` must be null or a dataset handle not yet freed.
 */
void hg_dataset_free(struct HgDataset *ds);

/*
 Fingerprints every graph up to `radius` hops.

 # Safety
 `ds` must be a live dataset handle; `out` valid for writes.
 */
enum HgStatus hg_featurize(const struct HgDataset *ds, uint32_t radius, struct HgFeatures **out);

/*
 Distinct feature ids before alias collapse; 0 for null.

 # Safety
 `f` must be null or a live features handle.
 */
size_t hg_features_count(const struct HgFeatures *f);

/*
 # Safety
 `f` must be null or a features handle not yet freed.
 */
void hg_features_free(struct HgFeatures *f);

struct HgTrainConfig hg_train_config_default(void);

/*
 Fits the ensemble on all samples. A null `config` means defaults.

 # Safety
 Handles must be live and built from the same dataset; `out` valid for writes.
 */
enum HgStatus hg_train(const struct HgDataset *ds,
                       const struct HgFeatures *features,
                       const struct HgTrainConfig *config,
                       struct HgModel **out);

/*
 Predicts the target of one graph given as a JSON record.

 # Safety
 `model` must be live; `graph_json` NUL-terminated; `out` valid for writes.
 */
enum HgStatus hg_model_predict(const struct HgModel *model, const char *graph_json, double *out);

/*
 Serialized model; free with [`hg_string_free`].

 # Safety
 `model` must be live; `out` valid for writes.
 */
enum HgStatus hg_model_to_json(const struct HgModel *model, char **out);

/*
 # Safety
 `model` must be null or a model handle not yet freed.
 */
void hg_model_free(struct HgModel *model);

/*
 Ranked hypotheses as a JSON array; free with [`hg_string_free`].

 # Safety
 Handles must be live and consistent; `out` valid for writes.
 */
enum HgStatus hg_hypotheses_json(const struct HgDataset *ds,
                                 const struct HgFeatures *features,
                                 const struct HgModel *model,
                                 uint32_t top_k,
                                 double d_min,
                                 char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPOGRAPH_H */
