#ifndef HIBEHRT_H
#define HIBEHRT_H

/* C API for the hibehrt library.
 *
 * Every command returns a status code:
 *   0  success
 *   2  configuration error (bad key, bad value, invalid geometry)
 *   3  data error (missing/corrupt file, malformed record)
 *   4  numeric failure (non-finite values, undefined metric, ...)
 * On failure hib_last_error() describes the problem (thread-local).
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct hib_config hib_config;

const char* hib_version(void);
const char* hib_last_error(void);

/* Configuration handles hold the full key=value run configuration with
 * reference defaults. */
hib_config* hib_config_create(void);
void hib_config_destroy(hib_config* cfg);
int hib_config_load_file(hib_config* cfg, const char* path);
int hib_config_set(hib_config* cfg, const char* key, const char* value);
/* Copies the value into buf (NUL-terminated, truncated to buflen). */
int hib_config_get(const hib_config* cfg, const char* key, char* buf, size_t buflen);
/* Sorted "key=value\n" dump of every key; pointer owned by the handle and
 * valid until the next call on it. */
const char* hib_config_text(hib_config* cfg);

/* Generate a synthetic cohort: writes dataset.jsonl + manifest.json under
 * out_dir. */
int hib_cmd_gen_data(hib_config* cfg, unsigned long long seed, const char* out_dir);

/* Build a vocabulary file from a dataset. */
int hib_cmd_build_vocab(hib_config* cfg, const char* dataset_path, const char* vocab_out);

/* BYOL pretraining: writes pretrain.ckpt + pretrain_loss.csv under
 * out_dir. */
int hib_cmd_pretrain(hib_config* cfg, const char* dataset_path, const char* vocab_path,
                     unsigned long long seed, const char* out_dir);

/* Supervised training on the train/tune splits: writes model.ckpt +
 * train_metrics.csv + eval.csv under out_dir. init_checkpoint may be NULL
 * (fresh weights), a pretraining checkpoint (encoder transferred), or a
 * supervised checkpoint (fine-tuning). train_fraction_percent in (0,100]
 * subsamples the training split. */
int hib_cmd_train(hib_config* cfg, const char* dataset_path, const char* vocab_path,
                  unsigned long long seed, const char* init_checkpoint,
                  double train_fraction_percent, const char* out_dir);

/* Fine-tuning is training that requires an initial checkpoint. */
int hib_cmd_finetune(hib_config* cfg, const char* dataset_path, const char* vocab_path,
                     unsigned long long seed, const char* init_checkpoint,
                     double train_fraction_percent, const char* out_dir);

/* Evaluate a checkpoint. split is one of all|train|tune|validation (the
 * split is recomputed from patient ids and split_seed). strata may be NULL
 * or a ';'-separated list of "length:<T>", "age:<lo>-<hi>,<lo>-<hi>,...",
 * "modality:<M>+<M>+...". match_prevalence < 0 disables positive-case
 * downsampling. Writes a CSV table to out_csv. */
int hib_cmd_evaluate(hib_config* cfg, const char* dataset_path, const char* vocab_path,
                     const char* checkpoint_path, const char* split, unsigned long long split_seed,
                     const char* strata, double match_prevalence, unsigned long long seed,
                     const char* out_csv);

/* Learning-curve sweep over training fractions x seeds (window_stride
 * NULL), or a window/stride grid sweep ("50:30,50:50,...", one run per
 * pair). Writes a CSV table to out_csv. */
int hib_cmd_sweep(hib_config* cfg, const char* dataset_path, const char* vocab_path,
                  const char* seeds_csv, const char* window_stride, const char* out_csv);

/* Flat vs hierarchical attention cost table over a range of sequence
 * lengths. Writes a CSV table to out_csv. */
int hib_cmd_complexity(hib_config* cfg, int l_min, int l_max, int l_step, const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif /* HIBEHRT_H */
