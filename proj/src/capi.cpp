#include "tsm.h"

#include <cstring>
#include <string>
#include <vector>

#include "tsm/checkpoint.hpp"
#include "tsm/error.hpp"
#include "tsm/eval.hpp"
#include "tsm/feature_io.hpp"
#include "tsm/model.hpp"
#include "tsm/synthetic.hpp"
#include "tsm/train.hpp"

struct tsm_dataset {
  std::vector<tsm::FeatureSequence> items;
};

struct tsm_model {
  tsm::HeadModel model;
};

struct tsm_report {
  tsm::EvalReport report;
};

struct tsm_scores {
  tsm::ScoreTable scores;
};

namespace {

thread_local std::string g_last_error;

tsm_status status_of(tsm::ErrorKind kind) {
  switch (kind) {
    case tsm::ErrorKind::Argument: return TSM_ERR_ARGUMENT;
    case tsm::ErrorKind::Dimension: return TSM_ERR_DIMENSION;
    case tsm::ErrorKind::Format: return TSM_ERR_FORMAT;
    case tsm::ErrorKind::Index: return TSM_ERR_INDEX;
    case tsm::ErrorKind::State: return TSM_ERR_STATE;
    case tsm::ErrorKind::Numeric: return TSM_ERR_NUMERIC;
    case tsm::ErrorKind::Io: return TSM_ERR_IO;
  }
  return TSM_ERR_STATE;
}

template <typename Fn>
tsm_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return TSM_OK;
  } catch (const tsm::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TSM_ERR_STATE;
  }
}

tsm_status fail(tsm_status status, const char* message) {
  g_last_error = message;
  return status;
}

tsm::TaskSpec to_spec(const tsm_task_spec& spec) {
  tsm::TaskSpec out;
  switch (spec.kind) {
    case TSM_TASK_ORDER: out.kind = tsm::TaskKind::Order; break;
    case TSM_TASK_NOISE_FRAMES: out.kind = tsm::TaskKind::NoiseFrames; break;
    case TSM_TASK_SPARSE_EVENT: out.kind = tsm::TaskKind::SparseEvent; break;
    default: throw tsm::Error(tsm::ErrorKind::Argument, "unknown task kind");
  }
  out.frames = spec.frames;
  out.feature_dim = spec.feature_dim;
  out.classes = spec.classes;
  out.n_train = spec.n_train;
  out.n_test = spec.n_test;
  out.noise_sigma = spec.noise_sigma;
  out.seed = spec.seed;
  return out;
}

tsm::ModelConfig to_config(const tsm_model_config& cfg) {
  tsm::ModelConfig out;
  out.t_fixed = cfg.t_fixed;
  out.feature_dim = cfg.feature_dim;
  out.classes = cfg.classes;
  out.widths = {cfg.widths[0], cfg.widths[1], cfg.widths[2]};
  out.attention_widths = {cfg.attention_widths[0], cfg.attention_widths[1]};
  out.attention = {(cfg.attention_mask & 1u) != 0, (cfg.attention_mask & 2u) != 0,
                   (cfg.attention_mask & 4u) != 0};
  out.seed = cfg.seed;
  return out;
}

const tsm::FeatureSequence& item_at(const tsm_dataset* ds, int32_t item) {
  const auto& items = ds->items;
  if (item < 0 || static_cast<std::size_t>(item) >= items.size()) {
    throw tsm::Error(tsm::ErrorKind::Index, "dataset item out of range");
  }
  return items[static_cast<std::size_t>(item)];
}

}  // namespace

extern "C" {

const char* tsm_version(void) { return "0.1.0"; }

const char* tsm_last_error(void) { return g_last_error.c_str(); }

tsm_status tsm_dataset_generate(const tsm_task_spec* spec, tsm_dataset** train,
                                tsm_dataset** test) {
  if (!spec || !train || !test) return fail(TSM_ERR_ARGUMENT, "null pointer");
  *train = nullptr;
  *test = nullptr;
  return guarded([&]() {
    tsm::TaskData data = tsm::generate_task(to_spec(*spec));
    auto* tr = new tsm_dataset;
    tr->items = std::move(data.train);
    auto* te = new tsm_dataset;
    te->items = std::move(data.test);
    *train = tr;
    *test = te;
  });
}

tsm_status tsm_dataset_save(const tsm_dataset* train, const tsm_dataset* test,
                            const char* dir, int force) {
  if (!train || !test || !dir) return fail(TSM_ERR_ARGUMENT, "null pointer");
  return guarded([&]() {
    tsm::TaskData data;
    data.train = train->items;
    data.test = test->items;
    tsm::write_dataset_dir(data, dir, force != 0);
  });
}

tsm_status tsm_dataset_open(const char* dir, const char* split, tsm_dataset** out) {
  if (!dir || !out) return fail(TSM_ERR_ARGUMENT, "null pointer");
  *out = nullptr;
  return guarded([&]() {
    auto* ds = new tsm_dataset;
    ds->items = tsm::read_dataset_dir(dir, split ? split : "");
    *out = ds;
  });
}

tsm_status tsm_dataset_open_file(const char* path, tsm_dataset** out) {
  if (!path || !out) return fail(TSM_ERR_ARGUMENT, "null pointer");
  *out = nullptr;
  return guarded([&]() {
    auto* ds = new tsm_dataset;
    ds->items.push_back(tsm::read_sequence_file(path));
    *out = ds;
  });
}

int32_t tsm_dataset_size(const tsm_dataset* ds) {
  return ds ? static_cast<int32_t>(ds->items.size()) : 0;
}

int32_t tsm_dataset_feature_dim(const tsm_dataset* ds) {
  if (!ds || ds->items.empty()) return 0;
  return ds->items.front().feature_dim;
}

int32_t tsm_dataset_classes(const tsm_dataset* ds) {
  if (!ds) return 0;
  int32_t classes = 0;
  for (const auto& seq : ds->items) classes = std::max(classes, seq.label + 1);
  return classes;
}

int32_t tsm_dataset_label(const tsm_dataset* ds, int32_t item) {
  if (!ds || item < 0 || static_cast<std::size_t>(item) >= ds->items.size()) return -1;
  return ds->items[static_cast<std::size_t>(item)].label;
}

int32_t tsm_dataset_frames(const tsm_dataset* ds, int32_t item) {
  if (!ds || item < 0 || static_cast<std::size_t>(item) >= ds->items.size()) return -1;
  return ds->items[static_cast<std::size_t>(item)].frames;
}

const char* tsm_dataset_id(const tsm_dataset* ds, int32_t item) {
  if (!ds) return nullptr;
  if (item < 0 || static_cast<std::size_t>(item) >= ds->items.size()) return nullptr;
  return ds->items[static_cast<std::size_t>(item)].id.c_str();
}

tsm_status tsm_dataset_copy_values(const tsm_dataset* ds, int32_t item, double* out,
                                   size_t capacity) {
  if (!ds || !out) return fail(TSM_ERR_ARGUMENT, "null pointer");
  return guarded([&]() {
    const tsm::FeatureSequence& seq = item_at(ds, item);
    if (capacity < seq.values.size()) {
      throw tsm::Error(tsm::ErrorKind::Argument, "output buffer too small");
    }
    std::memcpy(out, seq.values.data(), seq.values.size() * sizeof(double));
  });
}

void tsm_dataset_free(tsm_dataset* ds) { delete ds; }

tsm_status tsm_model_create(const tsm_model_config* config, tsm_model** out) {
  if (!config || !out) return fail(TSM_ERR_ARGUMENT, "null pointer");
  *out = nullptr;
  return guarded([&]() {
    auto* m = new tsm_model{tsm::init_parameters(to_config(*config))};
    *out = m;
  });
}

tsm_status tsm_model_save(const tsm_model* model, const char* path) {
  if (!model || !path) return fail(TSM_ERR_ARGUMENT, "null pointer");
  return guarded([&]() { tsm::save_checkpoint(model->model, path); });
}

tsm_status tsm_model_load(const char* path, tsm_model** out) {
  if (!path || !out) return fail(TSM_ERR_ARGUMENT, "null pointer");
  *out = nullptr;
  return guarded([&]() {
    auto* m = new tsm_model{tsm::load_checkpoint(path)};
    *out = m;
  });
}

tsm_status tsm_model_get_config(const tsm_model* model, tsm_model_config* out) {
  if (!model || !out) return fail(TSM_ERR_ARGUMENT, "null pointer");
  const tsm::ModelConfig& cfg = model->model.config;
  out->t_fixed = cfg.t_fixed;
  out->feature_dim = cfg.feature_dim;
  out->classes = cfg.classes;
  for (int i = 0; i < 3; ++i) out->widths[i] = cfg.widths[static_cast<std::size_t>(i)];
  for (int i = 0; i < 2; ++i) {
    out->attention_widths[i] = cfg.attention_widths[static_cast<std::size_t>(i)];
  }
  out->attention_mask = (cfg.attention.a0 ? 1u : 0u) | (cfg.attention.a1 ? 2u : 0u) |
                        (cfg.attention.a2 ? 4u : 0u);
  out->seed = cfg.seed;
  return TSM_OK;
}

uint64_t tsm_model_iteration(const tsm_model* model) {
  return model ? model->model.iteration : 0;
}

void tsm_model_free(tsm_model* model) { delete model; }

void tsm_train_config_defaults(tsm_train_config* out) {
  if (!out) return;
  const tsm::TrainConfig d;
  out->base_lr = d.base_lr;
  out->decay_factor = d.decay_factor;
  out->decay_interval = d.decay_interval;
  out->batch_size = d.batch_size;
  out->max_epochs = d.max_epochs;
  out->momentum = d.momentum;
  out->weight_decay = d.weight_decay;
  out->workers = d.workers;
  out->seed = d.seed;
}

tsm_status tsm_model_train(tsm_model* model, const tsm_dataset* train,
                           const tsm_train_config* config, const char* log_path,
                           const char* log_note) {
  if (!model || !train || !config) return fail(TSM_ERR_ARGUMENT, "null pointer");
  return guarded([&]() {
    tsm::TrainConfig cfg;
    cfg.base_lr = config->base_lr;
    cfg.decay_factor = config->decay_factor;
    cfg.decay_interval = config->decay_interval;
    cfg.batch_size = config->batch_size;
    cfg.max_epochs = config->max_epochs;
    cfg.momentum = config->momentum;
    cfg.weight_decay = config->weight_decay;
    cfg.workers = config->workers;
    cfg.seed = config->seed;
    const std::vector<tsm::VideoMap> maps =
        tsm::prepare_maps(train->items, model->model.config.t_fixed);
    const tsm::TrainLog log = tsm::train(model->model, maps, cfg);
    if (log_path) {
      tsm::write_train_log(log, log_path, log_note ? log_note : "");
    }
  });
}

tsm_status tsm_evaluate(const tsm_model* model, const tsm_dataset* items, int32_t t_test,
                        tsm_report** report, tsm_scores** scores) {
  if (!model || !items) return fail(TSM_ERR_ARGUMENT, "null pointer");
  if (report) *report = nullptr;
  if (scores) *scores = nullptr;
  return guarded([&]() {
    tsm::EvalResult result = tsm::evaluate(model->model, items->items, t_test);
    if (report) *report = new tsm_report{std::move(result.report)};
    if (scores) *scores = new tsm_scores{std::move(result.scores)};
  });
}

tsm_status tsm_mean_pool_baseline(const tsm_dataset* train, const tsm_dataset* test,
                                  tsm_report** report, tsm_scores** scores) {
  if (!train || !test) return fail(TSM_ERR_ARGUMENT, "null pointer");
  if (report) *report = nullptr;
  if (scores) *scores = nullptr;
  return guarded([&]() {
    tsm::EvalResult result = tsm::mean_pool_baseline(train->items, test->items);
    if (report) *report = new tsm_report{std::move(result.report)};
    if (scores) *scores = new tsm_scores{std::move(result.scores)};
  });
}

double tsm_report_accuracy(const tsm_report* report) {
  return report ? report->report.accuracy : -1.0;
}

int32_t tsm_report_classes(const tsm_report* report) {
  return report ? report->report.classes : 0;
}

double tsm_report_class_accuracy(const tsm_report* report, int32_t label) {
  if (!report || label < 0 || label >= report->report.classes) return -1.0;
  return report->report.per_class_accuracy[static_cast<std::size_t>(label)];
}

int64_t tsm_report_confusion(const tsm_report* report, int32_t truth, int32_t predicted) {
  if (!report) return -1;
  int64_t value = -1;
  guarded([&]() { value = report->report.confusion_at(truth, predicted); });
  return value;
}

tsm_status tsm_report_write(const tsm_report* report, const char* report_path,
                            const char* confusion_path, const char* note) {
  if (!report) return fail(TSM_ERR_ARGUMENT, "null pointer");
  return guarded([&]() {
    if (report_path) tsm::write_report(report->report, report_path, note ? note : "");
    if (confusion_path) tsm::write_confusion(report->report, confusion_path);
  });
}

void tsm_report_free(tsm_report* report) { delete report; }

tsm_status tsm_scores_save(const tsm_scores* scores, const char* path, const char* note) {
  if (!scores || !path) return fail(TSM_ERR_ARGUMENT, "null pointer");
  return guarded([&]() { tsm::write_scores(scores->scores, path, note ? note : ""); });
}

tsm_status tsm_scores_load(const char* path, tsm_scores** out) {
  if (!path || !out) return fail(TSM_ERR_ARGUMENT, "null pointer");
  *out = nullptr;
  return guarded([&]() {
    auto* s = new tsm_scores{tsm::read_scores(path)};
    *out = s;
  });
}

tsm_status tsm_fuse(const tsm_scores* a, const tsm_scores* b, double weight_a,
                    double weight_b, tsm_report** out) {
  if (!a || !b || !out) return fail(TSM_ERR_ARGUMENT, "null pointer");
  *out = nullptr;
  return guarded([&]() {
    auto* r = new tsm_report{tsm::fuse_streams(a->scores, b->scores, weight_a, weight_b)};
    *out = r;
  });
}

void tsm_scores_free(tsm_scores* scores) { delete scores; }

tsm_status tsm_response_map(const tsm_model* model, const tsm_dataset* items,
                            int32_t item, int32_t class_index, double* out,
                            size_t capacity, int32_t* out_len) {
  if (!model || !items || !out || !out_len) return fail(TSM_ERR_ARGUMENT, "null pointer");
  *out_len = 0;
  return guarded([&]() {
    const tsm::FeatureSequence& seq = item_at(items, item);
    const tsm::VideoMap map =
        tsm::resample_temporal(tsm::build_videomap(seq), model->model.config.t_fixed);
    int target = class_index;
    if (target < 0) {
      const tsm::Tensor logits = tsm::head_forward(map.matrix, model->model);
      target = tsm::argmax_index(logits.values());
    }
    const std::vector<double> response =
        tsm::temporal_response_map(map.matrix, model->model, target);
    const std::vector<double> up =
        tsm::upsample_nearest(response, model->model.config.t_fixed);
    if (capacity < up.size()) {
      throw tsm::Error(tsm::ErrorKind::Argument, "output buffer too small");
    }
    std::memcpy(out, up.data(), up.size() * sizeof(double));
    *out_len = static_cast<int32_t>(up.size());
  });
}

}  // extern "C"
