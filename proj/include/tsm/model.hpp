#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsm/ops.hpp"
#include "tsm/tensor.hpp"
#include "tsm/videomap.hpp"

namespace tsm {

// Which attention insertion points are active: A0 gates the input map, A1 and
// A2 gate the outputs of the first and second convolution blocks.
struct AttentionLevels {
  bool a0 = true;
  bool a1 = true;
  bool a2 = true;

  bool any() const { return a0 || a1 || a2; }
  bool operator==(const AttentionLevels&) const = default;
};

// Parses "none", "a0", "a12" or "a012"; throws an argument error otherwise.
AttentionLevels parse_attention_levels(const std::string& name);
std::string format_attention_levels(const AttentionLevels& levels);

struct ModelConfig {
  int t_fixed = 64;      // map height the model is built for
  int feature_dim = 16;  // L
  int classes = 2;       // K
  std::array<int, 3> widths{16, 32, 32};           // head block channels
  std::array<int, 2> attention_widths{16, 32};     // attention block channels
  AttentionLevels attention;
  std::uint64_t seed = 0;

  bool operator==(const ModelConfig&) const = default;
};

// Temporal and feature extents entering each stage: index 0 is the input map,
// index i the output of block i. Conv layers keep extents ("same" padding);
// each 3x3 stride-2 ceil-mode pool halves them.
struct ShapeChain {
  std::array<int, 4> t{};
  std::array<int, 4> l{};
};

ShapeChain head_shape_chain(int t_fixed, int feature_dim);

void validate_model_config(const ModelConfig& config);

// Shape of every named parameter for a config, in named_parameters() order.
std::vector<std::vector<int>> parameter_shapes(const ModelConfig& config);

// Parameters of the head ConvNet: three conv blocks (5x5 kernels, ReLU, 3x3
// stride-2 ceil-mode max pooling), a flatten + fully-connected classifier, and
// the attention subnetwork (two such blocks plus a fully-connected layer that
// emits a T-length vector squashed by a sigmoid).
struct HeadModel {
  ModelConfig config;

  Tensor conv1_w, conv1_b;
  Tensor conv2_w, conv2_b;
  Tensor conv3_w, conv3_b;
  Tensor fc_w, fc_b;

  Tensor attn1_w, attn1_b;
  Tensor attn2_w, attn2_b;
  Tensor attn_fc_w, attn_fc_b;

  std::uint64_t iteration = 0;  // optimizer steps applied so far

  // Stable name -> parameter listing; the checkpoint format and the optimizer
  // both rely on this order.
  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;

  HeadModel clone() const;
  HeadModel detached() const;  // clone with gradient tracking off
  void zero_grads();
};

// The frame-wise attention responses a0 in (0,1)^T computed from the raw map.
Tensor attention_vector(const Tensor& map, const HeadModel& model, Tape* tape = nullptr);

// Stride-2 ceil-mode max pooling of an attention vector; a lone tail element
// passes through.
Tensor downsample_attention(const Tensor& a_prev, Tape* tape = nullptr);

// F~[t, ...] = a[t] * F[t, ...]: the column-wise (and channel-wise) repeat of
// the attention vector multiplied in.
Tensor apply_attention(const Tensor& features, const Tensor& attention, Tape* tape = nullptr);

struct HeadForward {
  Tensor logits;
  Tensor a0;      // undefined when no attention level is active
  Tensor block3;  // final block output, the response-map layer
};

HeadForward head_forward_trace(const Tensor& map, const HeadModel& model,
                               Tape* tape = nullptr, const Tensor* a0_override = nullptr);

Tensor head_forward(const Tensor& map, const HeadModel& model, Tape* tape = nullptr);

// Gradient-weighted class activation response over the time axis, computed at
// the block-3 output: nonnegative, length t[3] of the shape chain.
std::vector<double> temporal_response_map(const Tensor& map, const HeadModel& model,
                                          int class_index);

std::vector<double> upsample_nearest(const std::vector<double>& v, int target_len);

int argmax_index(std::span<const double> v);

}  // namespace tsm
