#include "tsm/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "tsm/ops.hpp"
#include "tsm/rng.hpp"

namespace tsm {

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.base_lr <= 0.0) throw Error(ErrorKind::Argument, "base_lr must be positive");
  if (cfg.decay_factor <= 1.0) throw Error(ErrorKind::Argument, "decay_factor must be > 1");
  if (cfg.decay_interval < 1) throw Error(ErrorKind::Argument, "decay_interval must be >= 1");
  if (cfg.batch_size < 1) throw Error(ErrorKind::Argument, "batch_size must be >= 1");
  if (cfg.max_epochs < 1) throw Error(ErrorKind::Argument, "max_epochs must be >= 1");
  if (cfg.momentum < 0.0) throw Error(ErrorKind::Argument, "momentum must be >= 0");
  if (cfg.weight_decay < 0.0) throw Error(ErrorKind::Argument, "weight_decay must be >= 0");
}

HeadModel init_parameters(const ModelConfig& config) {
  validate_model_config(config);
  HeadModel model;
  model.config = config;

  Rng rng(config.seed);
  const std::vector<std::vector<int>> shapes = parameter_shapes(config);
  auto params = model.named_parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::vector<int>& shape = shapes[p];
    Tensor t(shape, /*requires_grad=*/true);
    const bool is_bias = shape.size() == 1;
    if (!is_bias) {
      // fan_in: k*k*Cin for conv kernels, D for fully-connected weights
      int fan_in = 1;
      for (std::size_t axis = 0; axis + 1 < shape.size(); ++axis) {
        fan_in *= shape[axis];
      }
      const double scale = std::sqrt(2.0 / fan_in);
      for (double& v : t.values()) v = rng.normal(0.0, scale);
    }
    *params[p].second = t;
  }
  return model;
}

double lr_at(std::uint64_t iteration, const TrainConfig& cfg) {
  const std::uint64_t decays = iteration / static_cast<std::uint64_t>(cfg.decay_interval);
  return cfg.base_lr / std::pow(cfg.decay_factor, static_cast<double>(decays));
}

SgdState::SgdState(const HeadModel& model) {
  for (const auto& [name, t] : model.named_parameters()) {
    velocity_.emplace_back(static_cast<std::size_t>(t->size()), 0.0);
  }
}

void SgdState::step(HeadModel& model, double lr, double momentum, double weight_decay) {
  auto params = model.named_parameters();
  if (params.size() != velocity_.size()) {
    throw Error(ErrorKind::Dimension, "optimizer state does not match the model");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p].second;
    std::vector<double>& v = velocity_[p];
    if (v.size() != static_cast<std::size_t>(t.size())) {
      throw Error(ErrorKind::Dimension, "velocity shape does not match parameter");
    }
    std::span<double> theta = t.values();
    std::span<const double> g = t.grad();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double grad = g[i] + weight_decay * theta[i];
      v[i] = momentum * v[i] - lr * grad;
      theta[i] += v[i];
    }
  }
}

namespace {

struct ExampleResult {
  double loss = 0.0;
  bool correct = false;
  std::vector<std::vector<double>> grads;  // one buffer per parameter
};

ExampleResult example_gradient(HeadModel& model, const VideoMap& map) {
  model.zero_grads();
  Tape tape;
  Tensor logits = head_forward(map.matrix, model, &tape);
  Tensor loss = softmax_cross_entropy(logits, map.label, &tape);
  tape.backward(loss);

  ExampleResult res;
  res.loss = loss.item();
  res.correct = argmax_index(logits.values()) == map.label;
  auto params = model.named_parameters();
  res.grads.reserve(params.size());
  for (auto& [name, t] : params) {
    res.grads.emplace_back(t->grad().begin(), t->grad().end());
  }
  return res;
}

int pick_worker_count(const TrainConfig& cfg, int batch) {
  int w = cfg.workers;
  if (w <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    w = hw == 0 ? 1 : static_cast<int>(hw);
  }
  if (w > batch) w = batch;
  return w < 1 ? 1 : w;
}

}  // namespace

std::vector<VideoMap> prepare_maps(const std::vector<FeatureSequence>& seqs, int t_fixed) {
  std::vector<VideoMap> maps;
  maps.reserve(seqs.size());
  for (const FeatureSequence& seq : seqs) {
    maps.push_back(resample_temporal(build_videomap(seq), t_fixed));
  }
  return maps;
}

TrainLog train(HeadModel& model, const std::vector<VideoMap>& dataset,
               const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (dataset.empty()) throw Error(ErrorKind::Argument, "training set is empty");
  for (const VideoMap& map : dataset) {
    if (map.height() != model.config.t_fixed || map.width() != model.config.feature_dim) {
      throw Error(ErrorKind::Dimension, "dataset map '" + map.source_id +
                                            "' does not match the model input shape");
    }
    if (map.label < 0 || map.label >= model.config.classes) {
      throw Error(ErrorKind::Index, "dataset label out of range in '" + map.source_id + "'");
    }
  }

  const std::size_t n = dataset.size();
  Rng rng(cfg.seed);
  SgdState sgd(model);
  TrainLog log;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  auto params = model.named_parameters();
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_correct = 0;

    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t batch = std::min(static_cast<std::size_t>(cfg.batch_size), n - start);
      std::vector<ExampleResult> results(batch);

      const int workers = pick_worker_count(cfg, static_cast<int>(batch));
      if (workers == 1) {
        for (std::size_t e = 0; e < batch; ++e) {
          results[e] = example_gradient(model, dataset[order[start + e]]);
        }
      } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
          pool.emplace_back([&, w]() {
            HeadModel local = model.clone();
            for (std::size_t e = static_cast<std::size_t>(w); e < batch;
                 e += static_cast<std::size_t>(workers)) {
              results[e] = example_gradient(local, dataset[order[start + e]]);
            }
          });
        }
        for (std::thread& t : pool) t.join();
      }

      // reduce in example order: the bytes do not depend on the worker count
      model.zero_grads();
      double batch_loss = 0.0;
      for (std::size_t e = 0; e < batch; ++e) {
        batch_loss += results[e].loss;
        epoch_correct += results[e].correct ? 1 : 0;
        for (std::size_t p = 0; p < params.size(); ++p) {
          std::span<double> g = params[p].second->grad();
          const std::vector<double>& src = results[e].grads[p];
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
        }
      }
      const double inv = 1.0 / static_cast<double>(batch);
      for (auto& [name, t] : params) {
        for (double& g : t->grad()) g *= inv;
      }
      batch_loss *= inv;
      epoch_loss += batch_loss * static_cast<double>(batch);

      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorKind::Numeric, "loss diverged (NaN/Inf) at iteration " +
                                            std::to_string(model.iteration));
      }

      sgd.step(model, lr_at(model.iteration, cfg), cfg.momentum, cfg.weight_decay);
      ++model.iteration;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.iteration = model.iteration;
    stats.lr = lr_at(model.iteration, cfg);
    stats.loss = epoch_loss / static_cast<double>(n);
    stats.accuracy = static_cast<double>(epoch_correct) / static_cast<double>(n);
    log.epochs.push_back(stats);
  }
  return log;
}

void write_train_log(const TrainLog& log, const std::string& path, const std::string& note) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  if (!note.empty()) out << "# " << note << "\n";
  out << "epoch\titeration\tlr\tloss\taccuracy\n";
  char line[160];
  for (const EpochStats& s : log.epochs) {
    std::snprintf(line, sizeof(line), "%d\t%llu\t%.10g\t%.10g\t%.6f\n", s.epoch,
                  static_cast<unsigned long long>(s.iteration), s.lr, s.loss, s.accuracy);
    out << line;
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing log to '" + path + "'");
}

}  // namespace tsm
