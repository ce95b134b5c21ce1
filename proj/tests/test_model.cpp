#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "tsm/checkpoint.hpp"
#include "tsm/model.hpp"
#include "tsm/train.hpp"

using namespace tsm;

namespace {

ModelConfig tiny_config(int t, int l, int k) {
  ModelConfig cfg;
  cfg.t_fixed = t;
  cfg.feature_dim = l;
  cfg.classes = k;
  cfg.widths = {2, 3, 3};
  cfg.attention_widths = {2, 3};
  cfg.seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("shape chain halves extents with ceil") {
  for (int t : {8, 16, 32, 64}) {
    const ShapeChain chain = head_shape_chain(t, 16);
    CHECK(chain.t[0] == t);
    CHECK(chain.t[1] == (t + 1) / 2);
    CHECK(chain.t[2] == (t + 3) / 4);
    CHECK(chain.t[3] == (t + 7) / 8);
  }
  const ShapeChain chain = head_shape_chain(64, 16);
  CHECK(chain.l[1] == 8);
  CHECK(chain.l[2] == 4);
  CHECK(chain.l[3] == 2);
}

TEST_CASE("attention levels parse and format") {
  CHECK(parse_attention_levels("none") == AttentionLevels{false, false, false});
  CHECK(parse_attention_levels("a0") == AttentionLevels{true, false, false});
  CHECK(parse_attention_levels("a12") == AttentionLevels{false, true, true});
  CHECK(parse_attention_levels("a012") == AttentionLevels{true, true, true});
  CHECK_THROWS_AS((void)parse_attention_levels("a1"), Error);
  CHECK(format_attention_levels({true, true, true}) == "a012");
  CHECK(format_attention_levels({false, false, false}) == "none");
}

TEST_CASE("attention_vector sigmoid of zero weights is one half") {
  ModelConfig cfg = tiny_config(8, 6, 2);
  HeadModel model = init_parameters(cfg);
  // zero the attention FC: sigmoid(0) = 0.5 regardless of the conv blocks
  for (double& v : model.attn_fc_w.values()) v = 0.0;
  for (double& v : model.attn_fc_b.values()) v = 0.0;
  Rng rng(1);
  Tensor map = oracle::random_tensor(rng, {8, 6});
  Tensor a0 = attention_vector(map, model);
  REQUIRE(a0.dim(0) == 8);
  for (double v : a0.values()) CHECK(v == 0.5);
}

TEST_CASE("attention_vector output length equals the map height") {
  Rng rng(2);
  for (int t : {8, 25, 64}) {
    ModelConfig cfg = tiny_config(t, 6, 2);
    cfg.attention = {false, false, false};  // odd heights stay valid without A1/A2
    HeadModel model = init_parameters(cfg);
    Tensor map = oracle::random_tensor(rng, {t, 6});
    CHECK(attention_vector(map, model).dim(0) == t);
  }
  ModelConfig cfg = tiny_config(8, 6, 2);
  HeadModel model = init_parameters(cfg);
  Tensor wrong = oracle::random_tensor(rng, {9, 6});
  CHECK_THROWS_AS((void)attention_vector(wrong, model), Error);
}

TEST_CASE("attention_vector gradient w.r.t. map entries") {
  ModelConfig cfg = tiny_config(8, 6, 2);
  HeadModel model = init_parameters(cfg);
  Rng rng(3);
  Tensor map = oracle::random_tensor(rng, {8, 6}, 1.0, true);
  Tape tape;
  Tensor a0 = attention_vector(map, model, &tape);
  Tensor loss = sum(a0, &tape);
  tape.backward(loss);
  const HeadModel frozen = model.detached();
  const double worst = oracle::gradcheck(
      [&]() { return sum(attention_vector(map, frozen)).item(); }, {map});
  CHECK(worst < 1e-3);
}

TEST_CASE("downsample_attention pairwise max with ceil tail") {
  Tensor a = Tensor::from_data({4}, {0.1, 0.9, 0.3, 0.5});
  Tensor d = downsample_attention(a);
  REQUIRE(d.dim(0) == 2);
  CHECK(d.values()[0] == 0.9);
  CHECK(d.values()[1] == 0.5);

  Tensor odd = Tensor::from_data({5}, {0.1, 0.2, 0.3, 0.4, 0.9});
  Tensor dodd = downsample_attention(odd);
  REQUIRE(dodd.dim(0) == 3);
  CHECK(dodd.values()[0] == 0.2);
  CHECK(dodd.values()[1] == 0.4);
  CHECK(dodd.values()[2] == 0.9);

  Tensor constant = Tensor::full({6}, 0.7);
  Tensor dc = downsample_attention(constant);
  REQUIRE(dc.dim(0) == 3);
  for (double v : dc.values()) CHECK(v == 0.7);

  Tensor lone = Tensor::from_data({1}, {0.42});
  CHECK(downsample_attention(lone).values()[0] == 0.42);
}

TEST_CASE("apply_attention scales rows") {
  Rng rng(4);
  Tensor f = oracle::random_tensor(rng, {4, 3, 2});

  Tensor ones = Tensor::full({4}, 1.0);
  Tensor same = apply_attention(f, ones);
  for (int i = 0; i < f.size(); ++i) {
    CHECK(same.values()[static_cast<std::size_t>(i)] ==
          f.values()[static_cast<std::size_t>(i)]);
  }

  Tensor onehot = Tensor::from_data({4}, {0, 0, 1, 0});
  Tensor gated = apply_attention(f, onehot);
  for (int t = 0; t < 4; ++t) {
    for (int l = 0; l < 3; ++l) {
      for (int c = 0; c < 2; ++c) {
        const double expect = t == 2 ? f.at({t, l, c}) : 0.0;
        CHECK(gated.at({t, l, c}) == expect);
      }
    }
  }

  Tensor weights = Tensor::from_data({4}, {0.5, 0.25, 1.0, 0.0});
  Tensor scaled = apply_attention(f, weights);
  const std::vector<double> expected = oracle::broadcast_multiply_reference(
      {f.values().begin(), f.values().end()}, {4, 3, 2},
      {weights.values().begin(), weights.values().end()}, {4, 1, 1});
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(scaled.values()[i] == expected[i]);
  }

  Tensor short_a = Tensor::full({3}, 1.0);
  CHECK_THROWS_AS((void)apply_attention(f, short_a), Error);
}

TEST_CASE("monotone damping: shrinking one gate never grows that row") {
  Rng rng(14);
  Tensor f = oracle::random_tensor(rng, {4, 3, 2});
  Tensor gates = Tensor::from_data({4}, {0.9, 0.8, 0.7, 0.6});
  Tensor damped_gates = gates.clone();
  damped_gates.values()[2] = 0.35;
  Tensor base = apply_attention(f, gates);
  Tensor damped = apply_attention(f, damped_gates);
  for (int l = 0; l < 3; ++l) {
    for (int c = 0; c < 2; ++c) {
      CHECK(std::fabs(damped.at({2, l, c})) <= std::fabs(base.at({2, l, c})));
    }
  }
}

TEST_CASE("head_forward logits length and stage errors") {
  Rng rng(5);
  for (int k : {2, 5, 51}) {
    ModelConfig cfg = tiny_config(16, 8, k);
    HeadModel model = init_parameters(cfg);
    Tensor map = oracle::random_tensor(rng, {16, 8});
    CHECK(head_forward(map, model).dim(0) == k);
  }
  ModelConfig cfg = tiny_config(16, 8, 2);
  HeadModel model = init_parameters(cfg);
  Tensor wrong = oracle::random_tensor(rng, {16, 9});
  CHECK_THROWS_WITH_AS((void)head_forward(wrong, model),
                       doctest::Contains("head input"), Error);
}

TEST_CASE("identity attention equals the attention-disabled path") {
  Rng rng(6);
  ModelConfig with = tiny_config(16, 8, 3);
  HeadModel model = init_parameters(with);

  HeadModel disabled = model.clone();
  disabled.config.attention = {false, false, false};

  Tensor map = oracle::random_tensor(rng, {16, 8});
  Tensor ones = Tensor::full({16}, 1.0);

  // forcing a0 = 1 (hence a1 = a2 = 1) in the attention-enabled model
  HeadForward forced = head_forward_trace(map, model, nullptr, &ones);
  Tensor plain = head_forward(map, disabled);
  REQUIRE(forced.logits.dim(0) == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(forced.logits.values()[static_cast<std::size_t>(i)] ==
          doctest::Approx(plain.values()[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }

  // all levels disabled plus an all-ones substitution: the skip path agrees
  HeadForward skip = head_forward_trace(map, disabled, nullptr, &ones);
  for (int i = 0; i < 3; ++i) {
    CHECK(skip.logits.values()[static_cast<std::size_t>(i)] ==
          plain.values()[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("head_forward is sensitive to row reversal") {
  Rng rng(7);
  int distinguished = 0;
  for (int trial = 0; trial < 5; ++trial) {
    ModelConfig cfg = tiny_config(16, 8, 2);
    cfg.seed = 1000 + static_cast<std::uint64_t>(trial);
    HeadModel model = init_parameters(cfg);
    Tensor map = oracle::random_tensor(rng, {16, 8});
    Tensor reversed({16, 8});
    for (int t = 0; t < 16; ++t) {
      for (int l = 0; l < 8; ++l) {
        reversed.values()[static_cast<std::size_t>(t) * 8 + l] = map.at({15 - t, l});
      }
    }
    const Tensor a = head_forward(map, model);
    const Tensor b = head_forward(reversed, model);
    double diff = 0.0;
    for (int i = 0; i < 2; ++i) {
      diff += std::fabs(a.values()[static_cast<std::size_t>(i)] -
                        b.values()[static_cast<std::size_t>(i)]);
    }
    if (diff > 1e-9) ++distinguished;
  }
  CHECK(distinguished == 5);
}

TEST_CASE("full head gradient matches finite differences") {
  ModelConfig cfg = tiny_config(16, 8, 3);
  HeadModel model = init_parameters(cfg);
  Rng rng(8);
  Tensor map = oracle::random_tensor(rng, {16, 8});
  const int label = 1;

  Tape tape;
  Tensor logits = head_forward(map, model, &tape);
  Tensor loss = softmax_cross_entropy(logits, label, &tape);
  tape.backward(loss);

  std::vector<Tensor> params;
  for (auto& [name, t] : model.named_parameters()) params.push_back(*t);
  const double worst = oracle::gradcheck(
      [&]() {
        return softmax_cross_entropy(head_forward(map, model), label).item();
      },
      params);
  CHECK(worst < 1e-3);
}

TEST_CASE("misaligned attention heights are rejected at construction") {
  ModelConfig cfg = tiny_config(25, 8, 2);  // pool(25) = 12 != ceil(25/2)
  CHECK_THROWS_AS((void)init_parameters(cfg), Error);
  cfg.attention = {true, false, false};  // A0 alone has no alignment constraint
  CHECK_NOTHROW((void)init_parameters(cfg));
}

TEST_CASE("checkpoint serialization round trip") {
  ModelConfig cfg = tiny_config(16, 8, 3);
  cfg.attention = {true, false, true};
  HeadModel model = init_parameters(cfg);
  model.iteration = 1234;

  const std::vector<std::uint8_t> bytes = serialize_checkpoint(model);
  HeadModel loaded = parse_checkpoint(bytes);
  CHECK(loaded.config == model.config);
  CHECK(loaded.iteration == 1234);

  // byte-identical re-serialization of an unmodified model
  const std::vector<std::uint8_t> again = serialize_checkpoint(loaded);
  CHECK(again == bytes);

  // values survive exactly
  Rng rng(9);
  Tensor map = oracle::random_tensor(rng, {16, 8});
  const Tensor a = head_forward(map, model);
  const Tensor b = head_forward(map, loaded);
  for (int i = 0; i < a.size(); ++i) {
    CHECK(a.values()[static_cast<std::size_t>(i)] ==
          b.values()[static_cast<std::size_t>(i)]);
  }

  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + bytes.size() / 2);
  CHECK_THROWS_AS((void)parse_checkpoint(truncated), Error);

  std::vector<std::uint8_t> corrupt = bytes;
  corrupt[0] = 'X';
  CHECK_THROWS_AS((void)parse_checkpoint(corrupt), Error);
}

TEST_CASE("temporal response map is nonnegative and sized by the chain") {
  ModelConfig cfg = tiny_config(16, 8, 3);
  HeadModel model = init_parameters(cfg);
  Rng rng(10);
  Tensor map = oracle::random_tensor(rng, {16, 8});
  const std::vector<double> response = temporal_response_map(map, model, 1);
  CHECK(static_cast<int>(response.size()) == head_shape_chain(16, 8).t[3]);
  for (double v : response) CHECK(v >= 0.0);

  const std::vector<double> up = upsample_nearest(response, 16);
  CHECK(up.size() == 16);

  CHECK_THROWS_AS((void)temporal_response_map(map, model, 3), Error);
}

TEST_CASE("temporal response map is zero when block 3 is dead") {
  ModelConfig cfg = tiny_config(16, 8, 3);
  HeadModel model = init_parameters(cfg);
  // large negative conv-3 bias kills every ReLU in the final block
  for (double& v : model.conv3_b.values()) v = -1e6;
  Rng rng(11);
  Tensor map = oracle::random_tensor(rng, {16, 8});
  for (int k = 0; k < 3; ++k) {
    for (double v : temporal_response_map(map, model, k)) CHECK(v == 0.0);
  }
}
