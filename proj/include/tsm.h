/* Temporal-spatial mapping library: C interface.
 *
 * All functions return tsm_status; on failure tsm_last_error() carries a
 * thread-local description of what went wrong. Objects returned through
 * out-parameters are owned by the caller and released with the matching
 * *_free function.
 */
#ifndef TSM_H
#define TSM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tsm_status {
  TSM_OK = 0,
  TSM_ERR_ARGUMENT = 1,
  TSM_ERR_DIMENSION = 2,
  TSM_ERR_FORMAT = 3,
  TSM_ERR_INDEX = 4,
  TSM_ERR_STATE = 5,
  TSM_ERR_NUMERIC = 6,
  TSM_ERR_IO = 7,
} tsm_status;

const char* tsm_version(void);
const char* tsm_last_error(void);

typedef struct tsm_dataset tsm_dataset;
typedef struct tsm_model tsm_model;
typedef struct tsm_report tsm_report;
typedef struct tsm_scores tsm_scores;

/* ---- synthetic task generation and dataset files ---- */

typedef enum tsm_task_kind {
  TSM_TASK_ORDER = 0,
  TSM_TASK_NOISE_FRAMES = 1,
  TSM_TASK_SPARSE_EVENT = 2,
} tsm_task_kind;

typedef struct tsm_task_spec {
  tsm_task_kind kind;
  int32_t frames;       /* T */
  int32_t feature_dim;  /* L */
  int32_t classes;      /* K */
  int32_t n_train;
  int32_t n_test;
  double noise_sigma;
  uint64_t seed;
} tsm_task_spec;

tsm_status tsm_dataset_generate(const tsm_task_spec* spec, tsm_dataset** train,
                                tsm_dataset** test);
tsm_status tsm_dataset_save(const tsm_dataset* train, const tsm_dataset* test,
                            const char* dir, int force);
/* split: "train", "test" or NULL for every sequence */
tsm_status tsm_dataset_open(const char* dir, const char* split, tsm_dataset** out);
tsm_status tsm_dataset_open_file(const char* path, tsm_dataset** out);

int32_t tsm_dataset_size(const tsm_dataset* ds);
int32_t tsm_dataset_feature_dim(const tsm_dataset* ds);
int32_t tsm_dataset_classes(const tsm_dataset* ds);
int32_t tsm_dataset_label(const tsm_dataset* ds, int32_t item);
int32_t tsm_dataset_frames(const tsm_dataset* ds, int32_t item);
const char* tsm_dataset_id(const tsm_dataset* ds, int32_t item);
/* copies frames x feature_dim doubles; capacity is in doubles */
tsm_status tsm_dataset_copy_values(const tsm_dataset* ds, int32_t item, double* out,
                                   size_t capacity);
void tsm_dataset_free(tsm_dataset* ds);

/* ---- models ---- */

typedef struct tsm_model_config {
  int32_t t_fixed;
  int32_t feature_dim;
  int32_t classes;
  int32_t widths[3];
  int32_t attention_widths[2];
  /* bit 0: A0 on the input, bit 1: A1 after block 1, bit 2: A2 after block 2 */
  uint32_t attention_mask;
  uint64_t seed;
} tsm_model_config;

tsm_status tsm_model_create(const tsm_model_config* config, tsm_model** out);
tsm_status tsm_model_save(const tsm_model* model, const char* path);
tsm_status tsm_model_load(const char* path, tsm_model** out);
tsm_status tsm_model_get_config(const tsm_model* model, tsm_model_config* out);
uint64_t tsm_model_iteration(const tsm_model* model);
void tsm_model_free(tsm_model* model);

/* ---- training ---- */

typedef struct tsm_train_config {
  double base_lr;
  double decay_factor;
  int32_t decay_interval;
  int32_t batch_size;
  int32_t max_epochs;
  double momentum;
  double weight_decay;
  int32_t workers; /* 0 picks from the hardware */
  uint64_t seed;
} tsm_train_config;

void tsm_train_config_defaults(tsm_train_config* out);

/* Trains in place on the "train"-tagged sequences of the dataset. log_path
 * (optional) receives the per-epoch log; log_note (optional) is written as a
 * leading comment line. */
tsm_status tsm_model_train(tsm_model* model, const tsm_dataset* train,
                           const tsm_train_config* config, const char* log_path,
                           const char* log_note);

/* ---- evaluation, baseline, fusion ---- */

/* t_test > 0 subsamples each sequence to t_test frames first; 0 keeps the
 * native density. Either out-pointer may be NULL. */
tsm_status tsm_evaluate(const tsm_model* model, const tsm_dataset* items, int32_t t_test,
                        tsm_report** report, tsm_scores** scores);
tsm_status tsm_mean_pool_baseline(const tsm_dataset* train, const tsm_dataset* test,
                                  tsm_report** report, tsm_scores** scores);

double tsm_report_accuracy(const tsm_report* report);
int32_t tsm_report_classes(const tsm_report* report);
double tsm_report_class_accuracy(const tsm_report* report, int32_t label);
int64_t tsm_report_confusion(const tsm_report* report, int32_t truth, int32_t predicted);
tsm_status tsm_report_write(const tsm_report* report, const char* report_path,
                            const char* confusion_path, const char* note);
void tsm_report_free(tsm_report* report);

tsm_status tsm_scores_save(const tsm_scores* scores, const char* path, const char* note);
tsm_status tsm_scores_load(const char* path, tsm_scores** out);
tsm_status tsm_fuse(const tsm_scores* a, const tsm_scores* b, double weight_a,
                    double weight_b, tsm_report** out);
void tsm_scores_free(tsm_scores* scores);

/* ---- temporal response maps ---- */

/* Gradient-weighted temporal response of one item, upsampled to the model's
 * map height. class_index < 0 uses the predicted class. Writes the response
 * length to out_len; capacity is in doubles. */
tsm_status tsm_response_map(const tsm_model* model, const tsm_dataset* items,
                            int32_t item, int32_t class_index, double* out,
                            size_t capacity, int32_t* out_len);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* TSM_H */
