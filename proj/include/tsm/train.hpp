#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsm/model.hpp"
#include "tsm/videomap.hpp"

namespace tsm {

struct TrainConfig {
  double base_lr = 0.01;
  double decay_factor = 10.0;
  int decay_interval = 500;  // iterations between decays
  int batch_size = 32;
  int max_epochs = 100;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int workers = 0;  // per-batch example parallelism; 0 picks from the hardware
  std::uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& cfg);

// Scaled zero-mean normal kernels (stddev sqrt(2 / fan_in)), zero biases;
// bitwise reproducible from the config seed.
HeadModel init_parameters(const ModelConfig& config);

// base_lr / decay_factor^floor(iteration / decay_interval)
double lr_at(std::uint64_t iteration, const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  std::uint64_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
};

// SGD with momentum: v <- mu*v - lr*g, theta <- theta + v. Velocities are
// bound to one model's parameter list.
class SgdState {
 public:
  explicit SgdState(const HeadModel& model);
  void step(HeadModel& model, double lr, double momentum, double weight_decay);

 private:
  std::vector<std::vector<double>> velocity_;
};

// Mini-batch SGD with the step-decay schedule. Per-example gradients inside a
// batch may be computed by several workers; they are reduced in example order
// so the result does not depend on the worker count.
TrainLog train(HeadModel& model, const std::vector<VideoMap>& dataset,
               const TrainConfig& cfg);

// One row per epoch: epoch, iteration, lr, loss, accuracy (tab-separated).
void write_train_log(const TrainLog& log, const std::string& path,
                     const std::string& note = "");

std::vector<VideoMap> prepare_maps(const std::vector<FeatureSequence>& seqs, int t_fixed);

}  // namespace tsm
