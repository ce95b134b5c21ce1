#include "tsm/model.hpp"

#include <cmath>
#include <utility>

namespace tsm {

namespace {

constexpr int kConvKernel = 5;
constexpr int kPoolKernel = 3;
constexpr int kPoolStride = 2;

Tensor conv_block(const Tensor& x, const Tensor& w, const Tensor& b, Tape* tape) {
  Tensor y = conv2d(x, w, b, Padding::Same, tape);
  y = relu(y, tape);
  return maxpool2d(y, kPoolKernel, kPoolKernel, kPoolStride, kPoolStride,
                   /*ceil_mode=*/true, tape);
}

int ceil_half(int n) { return (n + 1) / 2; }

}  // namespace

AttentionLevels parse_attention_levels(const std::string& name) {
  if (name == "none") return {false, false, false};
  if (name == "a0") return {true, false, false};
  if (name == "a12") return {false, true, true};
  if (name == "a012") return {true, true, true};
  throw Error(ErrorKind::Argument,
              "unknown attention variant '" + name + "' (expected none, a0, a12 or a012)");
}

std::string format_attention_levels(const AttentionLevels& levels) {
  if (!levels.any()) return "none";
  if (levels.a0 && !levels.a1 && !levels.a2) return "a0";
  if (!levels.a0 && levels.a1 && levels.a2) return "a12";
  if (levels.a0 && levels.a1 && levels.a2) return "a012";
  std::string s;
  if (levels.a0) s += "0";
  if (levels.a1) s += "1";
  if (levels.a2) s += "2";
  return "a" + s;
}

ShapeChain head_shape_chain(int t_fixed, int feature_dim) {
  ShapeChain chain;
  chain.t[0] = t_fixed;
  chain.l[0] = feature_dim;
  for (int i = 1; i < 4; ++i) {
    chain.t[i] = pooled_extent(chain.t[i - 1], kPoolKernel, kPoolStride, true);
    chain.l[i] = pooled_extent(chain.l[i - 1], kPoolKernel, kPoolStride, true);
  }
  return chain;
}

void validate_model_config(const ModelConfig& config) {
  if (config.t_fixed < 1 || config.feature_dim < 1) {
    throw Error(ErrorKind::Dimension, "map height and width must be >= 1");
  }
  if (config.classes < 2) {
    throw Error(ErrorKind::Argument, "need at least two classes");
  }
  for (int w : config.widths) {
    if (w < 1) throw Error(ErrorKind::Argument, "block widths must be >= 1");
  }
  for (int w : config.attention_widths) {
    if (w < 1) throw Error(ErrorKind::Argument, "attention widths must be >= 1");
  }
  // The attention chain halves with ceil at every level; the feature pools
  // match that only while the temporal extent stays even, so reject heights
  // where an enabled level would misalign.
  const ShapeChain chain = head_shape_chain(config.t_fixed, config.feature_dim);
  if (config.attention.a1 && chain.t[1] != ceil_half(config.t_fixed)) {
    throw Error(ErrorKind::Dimension,
                "attention level A1 misaligned: pooled height " + std::to_string(chain.t[1]) +
                    " != ceil(T/2) for T=" + std::to_string(config.t_fixed));
  }
  if (config.attention.a2 && chain.t[2] != ceil_half(ceil_half(config.t_fixed))) {
    throw Error(ErrorKind::Dimension,
                "attention level A2 misaligned: pooled height " + std::to_string(chain.t[2]) +
                    " != ceil(T/4) for T=" + std::to_string(config.t_fixed));
  }
}

std::vector<std::vector<int>> parameter_shapes(const ModelConfig& cfg) {
  const ShapeChain chain = head_shape_chain(cfg.t_fixed, cfg.feature_dim);
  const int w1 = cfg.widths[0], w2 = cfg.widths[1], w3 = cfg.widths[2];
  const int aw1 = cfg.attention_widths[0], aw2 = cfg.attention_widths[1];
  const int k = kConvKernel;
  const int flat = chain.t[3] * chain.l[3] * w3;
  const int attn_flat = chain.t[2] * chain.l[2] * aw2;
  return {
      {k, k, 1, w1},   {w1},
      {k, k, w1, w2},  {w2},
      {k, k, w2, w3},  {w3},
      {flat, cfg.classes}, {cfg.classes},
      {k, k, 1, aw1},  {aw1},
      {k, k, aw1, aw2}, {aw2},
      {attn_flat, cfg.t_fixed}, {cfg.t_fixed},
  };
}

std::vector<std::pair<std::string, Tensor*>> HeadModel::named_parameters() {
  return {
      {"conv1.weight", &conv1_w}, {"conv1.bias", &conv1_b},
      {"conv2.weight", &conv2_w}, {"conv2.bias", &conv2_b},
      {"conv3.weight", &conv3_w}, {"conv3.bias", &conv3_b},
      {"fc.weight", &fc_w},       {"fc.bias", &fc_b},
      {"attn1.weight", &attn1_w}, {"attn1.bias", &attn1_b},
      {"attn2.weight", &attn2_w}, {"attn2.bias", &attn2_b},
      {"attn_fc.weight", &attn_fc_w}, {"attn_fc.bias", &attn_fc_b},
  };
}

std::vector<std::pair<std::string, const Tensor*>> HeadModel::named_parameters() const {
  auto mut = const_cast<HeadModel*>(this)->named_parameters();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

HeadModel HeadModel::clone() const {
  HeadModel copy;
  copy.config = config;
  copy.iteration = iteration;
  auto src = named_parameters();
  auto dst = copy.named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->clone();
  return copy;
}

HeadModel HeadModel::detached() const {
  HeadModel copy = clone();
  for (auto& [name, t] : copy.named_parameters()) t->set_requires_grad(false);
  return copy;
}

void HeadModel::zero_grads() {
  for (auto& [name, t] : named_parameters()) t->zero_grad();
}

Tensor attention_vector(const Tensor& map, const HeadModel& model, Tape* tape) {
  if (map.rank() != 2 || map.dim(0) != model.config.t_fixed ||
      map.dim(1) != model.config.feature_dim) {
    throw Error(ErrorKind::Dimension, "attention input does not match the trained map shape");
  }
  Tensor x = reshape(map, {map.dim(0), map.dim(1), 1}, tape);
  x = conv_block(x, model.attn1_w, model.attn1_b, tape);
  x = conv_block(x, model.attn2_w, model.attn2_b, tape);
  x = reshape(x, {x.size()}, tape);
  x = fully_connected(x, model.attn_fc_w, model.attn_fc_b, tape);
  return sigmoid(x, tape);
}

Tensor downsample_attention(const Tensor& a_prev, Tape* tape) {
  if (a_prev.rank() != 1 || a_prev.dim(0) < 1) {
    throw Error(ErrorKind::Dimension, "attention vector must be a non-empty rank-1 tensor");
  }
  const int n = a_prev.dim(0);
  Tensor column = reshape(a_prev, {n, 1, 1}, tape);
  Tensor pooled = maxpool2d(column, 2, 1, 2, 1, /*ceil_mode=*/true, tape);
  return reshape(pooled, {pooled.dim(0)}, tape);
}

Tensor apply_attention(const Tensor& features, const Tensor& attention, Tape* tape) {
  if (attention.rank() != 1) {
    throw Error(ErrorKind::Dimension, "attention must be a rank-1 vector");
  }
  if (features.rank() < 1 || features.dim(0) != attention.dim(0)) {
    throw Error(ErrorKind::Dimension,
                "attention length does not match the temporal extent of the features");
  }
  std::vector<int> bshape(static_cast<std::size_t>(features.rank()), 1);
  bshape[0] = attention.dim(0);
  Tensor broadcast = reshape(attention, std::move(bshape), tape);
  return mul_broadcast(features, broadcast, tape);
}

HeadForward head_forward_trace(const Tensor& map, const HeadModel& model, Tape* tape,
                               const Tensor* a0_override) {
  const ModelConfig& cfg = model.config;
  if (map.rank() != 2 || map.dim(0) != cfg.t_fixed || map.dim(1) != cfg.feature_dim) {
    throw Error(ErrorKind::Dimension,
                "head input: expected " + std::to_string(cfg.t_fixed) + " x " +
                    std::to_string(cfg.feature_dim) + " map");
  }

  HeadForward fwd;
  const bool need_attention = cfg.attention.any() || a0_override != nullptr;
  Tensor a1, a2;
  if (need_attention) {
    fwd.a0 = a0_override ? *a0_override : attention_vector(map, model, tape);
    if (cfg.attention.a1 || cfg.attention.a2) a1 = downsample_attention(fwd.a0, tape);
    if (cfg.attention.a2) a2 = downsample_attention(a1, tape);
  }

  Tensor x = reshape(map, {cfg.t_fixed, cfg.feature_dim, 1}, tape);
  if (cfg.attention.a0) x = apply_attention(x, fwd.a0, tape);
  x = conv_block(x, model.conv1_w, model.conv1_b, tape);
  if (cfg.attention.a1) x = apply_attention(x, a1, tape);
  x = conv_block(x, model.conv2_w, model.conv2_b, tape);
  if (cfg.attention.a2) x = apply_attention(x, a2, tape);
  x = conv_block(x, model.conv3_w, model.conv3_b, tape);
  fwd.block3 = x;

  Tensor flat = reshape(x, {x.size()}, tape);
  fwd.logits = fully_connected(flat, model.fc_w, model.fc_b, tape);
  return fwd;
}

Tensor head_forward(const Tensor& map, const HeadModel& model, Tape* tape) {
  return head_forward_trace(map, model, tape).logits;
}

std::vector<double> temporal_response_map(const Tensor& map, const HeadModel& model,
                                          int class_index) {
  if (class_index < 0 || class_index >= model.config.classes) {
    throw Error(ErrorKind::Index, "class index out of range");
  }
  // Gradients are needed only along the input -> block3 -> logit path, so run
  // on a detached copy of the parameters.
  const HeadModel frozen = model.detached();
  Tensor x = map.clone();
  x.set_requires_grad(true);
  Tape tape;
  HeadForward fwd = head_forward_trace(x, frozen, &tape);
  Tensor picked = select(fwd.logits, class_index, &tape);
  tape.backward(picked);

  const int t3 = fwd.block3.dim(0), l3 = fwd.block3.dim(1), c3 = fwd.block3.dim(2);
  const double* acts = fwd.block3.values().data();
  const double* grads = fwd.block3.grad().data();

  // channel weights: spatially averaged gradients
  std::vector<double> weight(static_cast<std::size_t>(c3), 0.0);
  for (int i = 0; i < t3 * l3; ++i) {
    const double* g = grads + static_cast<std::size_t>(i) * c3;
    for (int ch = 0; ch < c3; ++ch) weight[static_cast<std::size_t>(ch)] += g[ch];
  }
  for (double& wv : weight) wv /= static_cast<double>(t3 * l3);

  std::vector<double> response(static_cast<std::size_t>(t3), 0.0);
  for (int t = 0; t < t3; ++t) {
    double acc = 0.0;
    for (int l = 0; l < l3; ++l) {
      const double* cell = acts + (static_cast<std::size_t>(t) * l3 + l) * c3;
      double s = 0.0;
      for (int ch = 0; ch < c3; ++ch) s += weight[static_cast<std::size_t>(ch)] * cell[ch];
      acc += s > 0.0 ? s : 0.0;
    }
    response[static_cast<std::size_t>(t)] = acc / l3;
  }
  return response;
}

std::vector<double> upsample_nearest(const std::vector<double>& v, int target_len) {
  if (v.empty()) throw Error(ErrorKind::Dimension, "cannot upsample an empty vector");
  const std::vector<int> idx = resample_indices(static_cast<int>(v.size()), target_len);
  std::vector<double> out(static_cast<std::size_t>(target_len));
  for (int i = 0; i < target_len; ++i) {
    out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
  }
  return out;
}

int argmax_index(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace tsm
