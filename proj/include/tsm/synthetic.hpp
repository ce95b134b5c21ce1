#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsm/videomap.hpp"

namespace tsm {

enum class TaskKind { Order, NoiseFrames, SparseEvent };

TaskKind parse_task_kind(const std::string& name);
std::string format_task_kind(TaskKind kind);

struct TaskSpec {
  TaskKind kind = TaskKind::Order;
  int frames = 64;        // T
  int feature_dim = 16;   // L
  int classes = 2;        // K
  int n_train = 400;
  int n_test = 200;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
};

struct TaskData {
  std::vector<FeatureSequence> train;
  std::vector<FeatureSequence> test;
};

// Two-class time-order task: class 0 is a random smooth trajectory anchored
// at zero, class 1 its exact row reversal. Every example is paired, so row
// multisets match between the classes and any order-invariant aggregator is
// at chance by construction.
TaskData gen_order_task(const TaskSpec& spec);

// Each sequence carries a class-specific segment over a random ceil(T/4)
// window; the remaining frames come from a class-independent noise process.
// The window is recorded in the relevance mask.
TaskData gen_noise_frame_task(const TaskSpec& spec);

// The class evidence is a 2-frame spike (amplitude >= 3x the background
// sigma) at a random position; subsampling below the spike scale destroys it.
// Spike frames are recorded in the relevance mask.
TaskData gen_sparse_event_task(const TaskSpec& spec);

TaskData generate_task(const TaskSpec& spec);

// Aligned pair of streams over the same items: stream A is informative only
// for the first half of the classes, stream B only for the second half.
struct TwoStreamData {
  TaskData stream_a;
  TaskData stream_b;
};

TwoStreamData gen_two_stream_task(const TaskSpec& spec);

}  // namespace tsm
