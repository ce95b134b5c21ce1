// Command-line front end for the temporal-spatial mapping library. Talks to
// the core exclusively through the C API in tsm.h.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tsm.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// exit codes: 0 success, 1 usage, 2 data/format error, 3 numerical failure
int exit_code_of(tsm_status status) {
  switch (status) {
    case TSM_OK: return 0;
    case TSM_ERR_ARGUMENT: return 1;
    case TSM_ERR_NUMERIC: return 3;
    default: return 2;
  }
}

struct CliError {
  int code;
  std::string message;
};

void check(tsm_status status) {
  if (status != TSM_OK) throw CliError{exit_code_of(status), tsm_last_error()};
}

[[noreturn]] void usage_error(const std::string& message) {
  throw CliError{1, message};
}

struct RunConfig {
  tsm_task_spec task{TSM_TASK_ORDER, 64, 16, 2, 400, 200, 0.1, 0};
  tsm_model_config model{64, 0, 0, {16, 32, 32}, {16, 32}, 7u, 0};
  tsm_train_config train{};
  std::string data_dir;
  std::string checkpoint;
  std::string out_dir;
  std::vector<int> sweep_frames{8, 16, 32, 64};
  std::vector<double> fuse_weights{0.5, 0.5};
  int eval_frames = 0;
};

tsm_task_kind parse_kind(const std::string& name) {
  if (name == "order") return TSM_TASK_ORDER;
  if (name == "noise-frames") return TSM_TASK_NOISE_FRAMES;
  if (name == "sparse-event") return TSM_TASK_SPARSE_EVENT;
  usage_error("unknown task kind '" + name + "' (expected order, noise-frames, sparse-event)");
}

const char* format_kind(tsm_task_kind kind) {
  switch (kind) {
    case TSM_TASK_ORDER: return "order";
    case TSM_TASK_NOISE_FRAMES: return "noise-frames";
    case TSM_TASK_SPARSE_EVENT: return "sparse-event";
  }
  return "order";
}

uint32_t parse_attention_mask(const std::string& name) {
  if (name == "none") return 0u;
  if (name == "a0") return 1u;
  if (name == "a12") return 6u;
  if (name == "a012") return 7u;
  usage_error("unknown attention variant '" + name + "' (expected none, a0, a12, a012)");
}

const char* format_attention_mask(uint32_t mask) {
  switch (mask & 7u) {
    case 0u: return "none";
    case 1u: return "a0";
    case 6u: return "a12";
    case 7u: return "a012";
  }
  return "custom";
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      usage_error("unknown key '" + key + "' in config section '" + where + "'");
    }
  }
}

template <typename T>
void read_key(const json& obj, const char* key, T& slot) {
  if (obj.contains(key)) slot = obj.at(key).get<T>();
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  tsm_train_config_defaults(&cfg.train);
  if (path.empty()) return cfg;

  std::ifstream in(path);
  if (!in) throw CliError{2, "cannot open config '" + path + "'"};
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw CliError{2, "config '" + path + "' is not valid JSON: " + e.what()};
  }
  if (!doc.is_object()) throw CliError{2, "config root must be an object"};
  reject_unknown_keys(doc, {"task", "model", "train", "paths", "eval"}, "<root>");

  if (doc.contains("task")) {
    const json& t = doc["task"];
    reject_unknown_keys(t, {"kind", "frames", "feature_dim", "classes", "n_train",
                            "n_test", "noise_sigma", "seed"}, "task");
    if (t.contains("kind")) cfg.task.kind = parse_kind(t["kind"].get<std::string>());
    read_key(t, "frames", cfg.task.frames);
    read_key(t, "feature_dim", cfg.task.feature_dim);
    read_key(t, "classes", cfg.task.classes);
    read_key(t, "n_train", cfg.task.n_train);
    read_key(t, "n_test", cfg.task.n_test);
    read_key(t, "noise_sigma", cfg.task.noise_sigma);
    read_key(t, "seed", cfg.task.seed);
  }
  if (doc.contains("model")) {
    const json& m = doc["model"];
    reject_unknown_keys(m, {"t_fixed", "feature_dim", "classes", "widths",
                            "attention_widths", "attention", "seed"}, "model");
    read_key(m, "t_fixed", cfg.model.t_fixed);
    read_key(m, "feature_dim", cfg.model.feature_dim);
    read_key(m, "classes", cfg.model.classes);
    if (m.contains("widths")) {
      const auto widths = m["widths"].get<std::vector<int>>();
      if (widths.size() != 3) usage_error("model.widths must list three block widths");
      for (int i = 0; i < 3; ++i) cfg.model.widths[i] = widths[static_cast<size_t>(i)];
    }
    if (m.contains("attention_widths")) {
      const auto widths = m["attention_widths"].get<std::vector<int>>();
      if (widths.size() != 2) usage_error("model.attention_widths must list two widths");
      for (int i = 0; i < 2; ++i) cfg.model.attention_widths[i] = widths[static_cast<size_t>(i)];
    }
    if (m.contains("attention")) {
      cfg.model.attention_mask = parse_attention_mask(m["attention"].get<std::string>());
    }
    read_key(m, "seed", cfg.model.seed);
  }
  if (doc.contains("train")) {
    const json& t = doc["train"];
    reject_unknown_keys(t, {"base_lr", "decay_factor", "decay_interval", "batch_size",
                            "max_epochs", "momentum", "weight_decay", "workers", "seed"},
                        "train");
    read_key(t, "base_lr", cfg.train.base_lr);
    read_key(t, "decay_factor", cfg.train.decay_factor);
    read_key(t, "decay_interval", cfg.train.decay_interval);
    read_key(t, "batch_size", cfg.train.batch_size);
    read_key(t, "max_epochs", cfg.train.max_epochs);
    read_key(t, "momentum", cfg.train.momentum);
    read_key(t, "weight_decay", cfg.train.weight_decay);
    read_key(t, "workers", cfg.train.workers);
    read_key(t, "seed", cfg.train.seed);
  }
  if (doc.contains("paths")) {
    const json& p = doc["paths"];
    reject_unknown_keys(p, {"data", "checkpoint", "out"}, "paths");
    read_key(p, "data", cfg.data_dir);
    read_key(p, "checkpoint", cfg.checkpoint);
    read_key(p, "out", cfg.out_dir);
  }
  if (doc.contains("eval")) {
    const json& e = doc["eval"];
    reject_unknown_keys(e, {"frames", "sweep_frames", "fuse_weights"}, "eval");
    read_key(e, "frames", cfg.eval_frames);
    read_key(e, "sweep_frames", cfg.sweep_frames);
    if (e.contains("fuse_weights")) {
      cfg.fuse_weights = e["fuse_weights"].get<std::vector<double>>();
      if (cfg.fuse_weights.size() != 2) usage_error("eval.fuse_weights must list two weights");
    }
  }
  return cfg;
}

// FNV-1a over the canonical serialized effective config; reports reference it
std::string config_hash(const RunConfig& cfg) {
  json doc;
  doc["task"] = {{"kind", format_kind(cfg.task.kind)},
                 {"frames", cfg.task.frames},
                 {"feature_dim", cfg.task.feature_dim},
                 {"classes", cfg.task.classes},
                 {"n_train", cfg.task.n_train},
                 {"n_test", cfg.task.n_test},
                 {"noise_sigma", cfg.task.noise_sigma},
                 {"seed", cfg.task.seed}};
  doc["model"] = {{"t_fixed", cfg.model.t_fixed},
                  {"feature_dim", cfg.model.feature_dim},
                  {"classes", cfg.model.classes},
                  {"widths", {cfg.model.widths[0], cfg.model.widths[1], cfg.model.widths[2]}},
                  {"attention_widths",
                   {cfg.model.attention_widths[0], cfg.model.attention_widths[1]}},
                  {"attention", format_attention_mask(cfg.model.attention_mask)},
                  {"seed", cfg.model.seed}};
  doc["train"] = {{"base_lr", cfg.train.base_lr},
                  {"decay_factor", cfg.train.decay_factor},
                  {"decay_interval", cfg.train.decay_interval},
                  {"batch_size", cfg.train.batch_size},
                  {"max_epochs", cfg.train.max_epochs},
                  {"momentum", cfg.train.momentum},
                  {"weight_decay", cfg.train.weight_decay},
                  {"seed", cfg.train.seed}};
  doc["eval"] = {{"frames", cfg.eval_frames},
                 {"sweep_frames", cfg.sweep_frames},
                 {"fuse_weights", cfg.fuse_weights}};
  const std::string text = doc.dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ensure_out_dir(const std::string& dir) {
  if (dir.empty()) usage_error("an output directory is required (--out or paths.out)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError{2, "cannot create '" + dir + "': " + ec.message()};
}

struct DatasetHandle {
  tsm_dataset* ptr = nullptr;
  ~DatasetHandle() { tsm_dataset_free(ptr); }
};
struct ModelHandle {
  tsm_model* ptr = nullptr;
  ~ModelHandle() { tsm_model_free(ptr); }
};
struct ReportHandle {
  tsm_report* ptr = nullptr;
  ~ReportHandle() { tsm_report_free(ptr); }
};
struct ScoresHandle {
  tsm_scores* ptr = nullptr;
  ~ScoresHandle() { tsm_scores_free(ptr); }
};

ModelHandle load_model(const std::string& checkpoint) {
  if (checkpoint.empty()) {
    usage_error("a model checkpoint is required (--checkpoint or paths.checkpoint)");
  }
  ModelHandle model;
  check(tsm_model_load(checkpoint.c_str(), &model.ptr));
  return model;
}

DatasetHandle open_split(const std::string& dir, const char* split) {
  if (dir.empty()) usage_error("a dataset directory is required (--data or paths.data)");
  DatasetHandle ds;
  check(tsm_dataset_open(dir.c_str(), split, &ds.ptr));
  if (tsm_dataset_size(ds.ptr) == 0) {
    throw CliError{2, "no '" + std::string(split ? split : "") + "' sequences in '" + dir + "'"};
  }
  return ds;
}

int cmd_gen(const RunConfig& cfg, bool force) {
  if (cfg.out_dir.empty()) usage_error("gen needs an output directory (--out or paths.out)");
  DatasetHandle train, test;
  check(tsm_dataset_generate(&cfg.task, &train.ptr, &test.ptr));
  check(tsm_dataset_save(train.ptr, test.ptr, cfg.out_dir.c_str(), force ? 1 : 0));
  std::printf("wrote %d train / %d test %s sequences to %s (config %s)\n",
              tsm_dataset_size(train.ptr), tsm_dataset_size(test.ptr),
              format_kind(cfg.task.kind), cfg.out_dir.c_str(), config_hash(cfg).c_str());
  return 0;
}

int cmd_train(RunConfig& cfg, const std::string& resume) {
  DatasetHandle train = open_split(cfg.data_dir, "train");

  ModelHandle model;
  if (!resume.empty()) {
    check(tsm_model_load(resume.c_str(), &model.ptr));
    check(tsm_model_get_config(model.ptr, &cfg.model));
  } else {
    if (cfg.model.feature_dim <= 0) cfg.model.feature_dim = tsm_dataset_feature_dim(train.ptr);
    if (cfg.model.classes <= 0) cfg.model.classes = tsm_dataset_classes(train.ptr);
    check(tsm_model_create(&cfg.model, &model.ptr));
  }

  ensure_out_dir(cfg.out_dir);
  const std::string hash = config_hash(cfg);
  const std::string log_path = (fs::path(cfg.out_dir) / "train_log.tsv").string();
  const std::string note = "config " + hash;
  check(tsm_model_train(model.ptr, train.ptr, &cfg.train, log_path.c_str(), note.c_str()));

  const std::string ckpt = cfg.checkpoint.empty()
                               ? (fs::path(cfg.out_dir) / "model.tsmc").string()
                               : cfg.checkpoint;
  check(tsm_model_save(model.ptr, ckpt.c_str()));
  std::printf("trained to iteration %llu; checkpoint %s, log %s (config %s)\n",
              static_cast<unsigned long long>(tsm_model_iteration(model.ptr)), ckpt.c_str(),
              log_path.c_str(), hash.c_str());
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  ModelHandle model = load_model(cfg.checkpoint);
  DatasetHandle test = open_split(cfg.data_dir, "test");
  ensure_out_dir(cfg.out_dir);

  ReportHandle report;
  ScoresHandle scores;
  check(tsm_evaluate(model.ptr, test.ptr, cfg.eval_frames, &report.ptr, &scores.ptr));

  const std::string hash = config_hash(cfg);
  const std::string note = "config " + hash;
  const fs::path out(cfg.out_dir);
  check(tsm_report_write(report.ptr, (out / "report.tsv").string().c_str(),
                         (out / "confusion.txt").string().c_str(), note.c_str()));
  check(tsm_scores_save(scores.ptr, (out / "scores.tsv").string().c_str(), note.c_str()));
  std::printf("accuracy %.4f over %d items (config %s)\n", tsm_report_accuracy(report.ptr),
              tsm_dataset_size(test.ptr), hash.c_str());
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  if (cfg.sweep_frames.empty()) usage_error("sweep needs at least one density");
  ModelHandle model = load_model(cfg.checkpoint);
  DatasetHandle test = open_split(cfg.data_dir, "test");
  ensure_out_dir(cfg.out_dir);

  const std::string hash = config_hash(cfg);
  const fs::path out(cfg.out_dir);
  std::ofstream table(out / "sweep.tsv", std::ios::trunc);
  if (!table) throw CliError{2, "cannot open sweep.tsv for writing"};
  table << "# config " << hash << "\nt_test\taccuracy\n";

  std::vector<std::pair<int, double>> rows;
  for (int frames : cfg.sweep_frames) {
    ReportHandle report;
    check(tsm_evaluate(model.ptr, test.ptr, frames, &report.ptr, nullptr));
    const double acc = tsm_report_accuracy(report.ptr);
    rows.emplace_back(frames, acc);
    char line[64];
    std::snprintf(line, sizeof(line), "%d\t%.6f\n", frames, acc);
    table << line;
    std::printf("t_test %4d -> accuracy %.4f\n", frames, acc);
  }
  table.close();

  // a small line chart next to the table
  std::ofstream svg(out / "sweep.svg", std::ios::trunc);
  if (svg) {
    const double w = 480, h = 320, m = 48;
    int tmin = rows.front().first, tmax = rows.front().first;
    for (auto& [t, a] : rows) {
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    const double span = tmax > tmin ? double(tmax - tmin) : 1.0;
    auto px = [&](int t) { return m + (w - 2 * m) * (t - tmin) / span; };
    auto py = [&](double a) { return h - m - (h - 2 * m) * a; };
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n<polyline fill='none' "
           "stroke='steelblue' stroke-width='2' points='";
    for (auto& [t, a] : rows) svg << px(t) << ',' << py(a) << ' ';
    svg << "'/>\n";
    for (auto& [t, a] : rows) {
      svg << "<circle cx='" << px(t) << "' cy='" << py(a) << "' r='3' fill='steelblue'/>\n"
          << "<text x='" << px(t) << "' y='" << h - m + 16
          << "' text-anchor='middle' font-size='10'>" << t << "</text>\n";
    }
    svg << "</svg>\n";
  }
  std::printf("sweep table %s (config %s)\n", (out / "sweep.tsv").string().c_str(),
              hash.c_str());
  return 0;
}

int cmd_fuse(const RunConfig& cfg, const std::string& scores_a, const std::string& scores_b) {
  if (scores_a.empty() || scores_b.empty()) {
    usage_error("fuse needs two score files (--scores-a, --scores-b)");
  }
  ScoresHandle a, b;
  check(tsm_scores_load(scores_a.c_str(), &a.ptr));
  check(tsm_scores_load(scores_b.c_str(), &b.ptr));
  ReportHandle fused;
  check(tsm_fuse(a.ptr, b.ptr, cfg.fuse_weights[0], cfg.fuse_weights[1], &fused.ptr));

  ensure_out_dir(cfg.out_dir);
  const std::string hash = config_hash(cfg);
  const std::string note = "config " + hash;
  const fs::path out(cfg.out_dir);
  check(tsm_report_write(fused.ptr, (out / "fused_report.tsv").string().c_str(),
                         (out / "fused_confusion.txt").string().c_str(), note.c_str()));
  std::printf("fused accuracy %.4f (weights %.3f/%.3f, config %s)\n",
              tsm_report_accuracy(fused.ptr), cfg.fuse_weights[0], cfg.fuse_weights[1],
              hash.c_str());
  return 0;
}

int cmd_viz(const RunConfig& cfg, std::vector<int> items, int class_index) {
  ModelHandle model = load_model(cfg.checkpoint);
  DatasetHandle test = open_split(cfg.data_dir, "test");
  ensure_out_dir(cfg.out_dir);

  const int count = tsm_dataset_size(test.ptr);
  if (items.empty()) {
    for (int i = 0; i < count; ++i) items.push_back(i);
  }
  tsm_model_config mc;
  check(tsm_model_get_config(model.ptr, &mc));
  std::vector<double> response(static_cast<size_t>(mc.t_fixed));
  const std::string hash = config_hash(cfg);
  for (int item : items) {
    if (item < 0 || item >= count) throw CliError{2, "item index out of range"};
    int32_t len = 0;
    check(tsm_response_map(model.ptr, test.ptr, item, class_index, response.data(),
                           response.size(), &len));
    const char* id = tsm_dataset_id(test.ptr, item);
    const fs::path path = fs::path(cfg.out_dir) / ("response_" + std::string(id) + ".txt");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw CliError{2, "cannot open '" + path.string() + "' for writing"};
    out << "# config " << hash << "\n# item " << id << " class "
        << (class_index < 0 ? std::string("predicted") : std::to_string(class_index)) << "\n";
    char line[40];
    for (int32_t i = 0; i < len; ++i) {
      std::snprintf(line, sizeof(line), "%.10g\n", response[static_cast<size_t>(i)]);
      out << line;
    }
  }
  std::printf("wrote %zu response maps to %s (config %s)\n", items.size(),
              cfg.out_dir.c_str(), hash.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal-spatial mapping for sequence classification"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, checkpoint, resume;
  std::string attention, scores_a, scores_b, items_text;
  uint64_t seed = 0;
  bool seed_set = false, force = false;
  int frames = -1, class_index = -1;
  double weight_a = -1.0, weight_b = -1.0;
  std::vector<int> frames_list;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed, "override every seed in the config")
        ->each([&](const std::string&) { seed_set = true; });
    cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset directory");
  add_common(gen);
  gen->add_flag("--force", force, "overwrite an existing dataset directory");

  CLI::App* train = app.add_subcommand("train", "train a head model on a dataset");
  add_common(train);
  train->add_option("--data", data_dir, "dataset directory");
  train->add_option("--checkpoint", checkpoint, "checkpoint path to write");
  train->add_option("--resume", resume, "continue training from a checkpoint");
  train->add_option("--attention", attention, "attention variant: none, a0, a12, a012");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval);
  eval->add_option("--data", data_dir, "dataset directory");
  eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");
  eval->add_option("--frames", frames, "test-time sampling density");

  CLI::App* sweep = app.add_subcommand("sweep", "accuracy across sampling densities");
  add_common(sweep);
  sweep->add_option("--data", data_dir, "dataset directory");
  sweep->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");
  sweep->add_option("--frames-list", frames_list, "densities to sweep")->delimiter(',');

  CLI::App* fuse = app.add_subcommand("fuse", "late-fuse two score files");
  add_common(fuse);
  fuse->add_option("--scores-a", scores_a, "first stream score file");
  fuse->add_option("--scores-b", scores_b, "second stream score file");
  fuse->add_option("--wa", weight_a, "weight of stream a");
  fuse->add_option("--wb", weight_b, "weight of stream b");

  CLI::App* viz = app.add_subcommand("viz", "temporal response maps for test items");
  add_common(viz);
  viz->add_option("--data", data_dir, "dataset directory");
  viz->add_option("--checkpoint", checkpoint, "checkpoint to inspect");
  viz->add_option("--items", items_text, "comma-separated item indices (default: all)");
  viz->add_option("--class", class_index, "class index (default: predicted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (seed_set) {
      cfg.task.seed = seed;
      cfg.model.seed = seed;
      cfg.train.seed = seed;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    if (frames >= 0) cfg.eval_frames = frames;
    if (!frames_list.empty()) cfg.sweep_frames = frames_list;
    if (!attention.empty()) cfg.model.attention_mask = parse_attention_mask(attention);
    if (weight_a >= 0.0) cfg.fuse_weights[0] = weight_a;
    if (weight_b >= 0.0) cfg.fuse_weights[1] = weight_b;

    if (gen->parsed()) return cmd_gen(cfg, force);
    if (train->parsed()) return cmd_train(cfg, resume);
    if (eval->parsed()) return cmd_eval(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (fuse->parsed()) return cmd_fuse(cfg, scores_a, scores_b);
    if (viz->parsed()) {
      std::vector<int> items;
      if (!items_text.empty()) {
        std::string token;
        std::istringstream stream(items_text);
        while (std::getline(stream, token, ',')) {
          if (!token.empty()) items.push_back(std::stoi(token));
        }
      }
      return cmd_viz(cfg, items, class_index);
    }
    usage_error("no subcommand given");
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
