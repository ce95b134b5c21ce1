#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "tsm/ops.hpp"
#include "tsm/tensor.hpp"

using namespace tsm;

TEST_CASE("tensor basics") {
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.at({1, 2}) == 6.0);
  CHECK(t.all_finite());
  CHECK_THROWS_AS((void)Tensor::from_data({2, 2}, {1, 2, 3}), Error);
  CHECK_THROWS_AS((void)t.at({2, 0}), Error);

  Tensor bad = Tensor::from_data({2}, {1.0, std::nan("")});
  CHECK_FALSE(bad.all_finite());

  Tensor g({2, 2}, true);
  CHECK(g.requires_grad());
  CHECK(g.grad().size() == 4);
  CHECK_THROWS_AS((void)t.grad(), Error);
}

TEST_CASE("conv2d scalar product") {
  Tensor input = Tensor::from_data({1, 1, 1}, {2.0});
  Tensor kernel = Tensor::from_data({1, 1, 1, 1}, {3.0});
  Tensor bias = Tensor::from_data({1}, {0.0});
  Tensor out = conv2d(input, kernel, bias, Padding::Same);
  CHECK(out.item() == doctest::Approx(6.0));
}

TEST_CASE("conv2d zero input passes bias through") {
  Tensor input = Tensor::zeros({5, 5, 2});
  Rng rng(11);
  Tensor kernels = oracle::random_tensor(rng, {3, 3, 2, 2});
  Tensor bias = Tensor::from_data({2}, {1.0, -1.0});
  Tensor out = conv2d(input, kernels, bias, Padding::Same);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      CHECK(out.at({i, j, 0}) == 1.0);
      CHECK(out.at({i, j, 1}) == -1.0);
    }
  }
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 3 + rng.below_int(6);
    const int w = 3 + rng.below_int(6);
    const int cin = 1 + rng.below_int(3);
    const int cout = 1 + rng.below_int(3);
    const int k = trial % 2 == 0 ? 3 : 5;
    const bool same = trial % 3 != 0 || h < k || w < k;
    Tensor input = oracle::random_tensor(rng, {h, w, cin});
    Tensor kernels = oracle::random_tensor(rng, {k, k, cin, cout});
    Tensor bias = oracle::random_tensor(rng, {cout});
    if (!same && (h < k || w < k)) continue;
    Tensor out = conv2d(input, kernels, bias, same ? Padding::Same : Padding::Valid);
    const std::vector<double> expected = oracle::conv2d_reference(
        {input.values().begin(), input.values().end()}, h, w, cin,
        {kernels.values().begin(), kernels.values().end()}, k, cout,
        {bias.values().begin(), bias.values().end()}, same);
    REQUIRE(out.size() == static_cast<int>(expected.size()));
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(out.values()[i] == doctest::Approx(expected[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("conv2d dimension errors") {
  Tensor input = Tensor::zeros({4, 4, 2});
  Tensor kernels = Tensor::zeros({3, 3, 3, 1});  // Cin mismatch
  Tensor bias = Tensor::zeros({1});
  CHECK_THROWS_AS((void)conv2d(input, kernels, bias, Padding::Same), Error);

  Tensor even = Tensor::zeros({2, 2, 2, 1});
  CHECK_THROWS_AS((void)conv2d(input, even, bias, Padding::Same), Error);

  Tensor big = Tensor::zeros({5, 5, 2, 1});
  Tensor small = Tensor::zeros({3, 3, 2});
  CHECK_THROWS_AS((void)conv2d(small, big, bias, Padding::Valid), Error);
}

TEST_CASE("maxpool2d basic windows") {
  Tensor square = Tensor::from_data({2, 2, 1}, {1, 2, 3, 4});
  Tensor pooled = maxpool2d(square, 2, 2, 2, 2, false);
  CHECK(pooled.size() == 1);
  CHECK(pooled.item() == 4.0);

  Tensor row = Tensor::from_data({1, 4, 1}, {0.1, 0.9, 0.3, 0.5});
  Tensor out = maxpool2d(row, 1, 2, 1, 2, false);
  CHECK(out.at({0, 0, 0}) == 0.9);
  CHECK(out.at({0, 1, 0}) == 0.5);
}

TEST_CASE("maxpool2d matches the window-scan oracle") {
  Rng rng(7);
  Tensor input = oracle::random_tensor(rng, {7, 7, 3});
  Tensor out = maxpool2d(input, 3, 3, 2, 2, true);
  int oh = 0, ow = 0;
  const std::vector<double> expected = oracle::maxpool_reference(
      {input.values().begin(), input.values().end()}, 7, 7, 3, 3, 3, 2, 2, true, &oh, &ow);
  REQUIRE(out.dim(0) == oh);
  REQUIRE(out.dim(1) == ow);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(out.values()[i] == expected[i]);
  }

  for (int trial = 0; trial < 20; ++trial) {
    const int h = 1 + rng.below_int(9);
    const int w = 1 + rng.below_int(9);
    const int c = 1 + rng.below_int(3);
    const int k = 1 + rng.below_int(3);
    const int s = 1 + rng.below_int(3);
    Tensor x = oracle::random_tensor(rng, {h, w, c});
    Tensor y = maxpool2d(x, k, k, s, s, true);
    int eh = 0, ew = 0;
    const std::vector<double> ref = oracle::maxpool_reference(
        {x.values().begin(), x.values().end()}, h, w, c, k, k, s, s, true, &eh, &ew);
    REQUIRE(y.dim(0) == eh);
    REQUIRE(y.dim(1) == ew);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.values()[i] == ref[i]);
  }
}

TEST_CASE("maxpool2d kernel larger than input") {
  Tensor input = Tensor::zeros({2, 2, 1});
  CHECK_THROWS_AS((void)maxpool2d(input, 3, 3, 1, 1, false), Error);
  // ceil mode truncates the window instead
  Tensor out = maxpool2d(input, 3, 3, 2, 2, true);
  CHECK(out.size() == 1);
}

TEST_CASE("maxpool2d window permutation invariance and identity") {
  Rng rng(13);
  Tensor input = oracle::random_tensor(rng, {4, 4, 2});
  Tensor pooled = maxpool2d(input, 2, 2, 2, 2, false);

  // permute inside each 2x2 window: swap the two rows of every window
  Tensor permuted = input.clone();
  for (int i = 0; i < 4; i += 2) {
    for (int j = 0; j < 4; ++j) {
      for (int c = 0; c < 2; ++c) {
        std::swap(permuted.values()[(static_cast<std::size_t>(i) * 4 + j) * 2 + c],
                  permuted.values()[(static_cast<std::size_t>(i + 1) * 4 + j) * 2 + c]);
      }
    }
  }
  Tensor pooled_permuted = maxpool2d(permuted, 2, 2, 2, 2, false);
  for (int i = 0; i < pooled.size(); ++i) {
    CHECK(pooled.values()[static_cast<std::size_t>(i)] ==
          pooled_permuted.values()[static_cast<std::size_t>(i)]);
  }

  // 1x1 stride-1 pooling is the identity
  Tensor identity = maxpool2d(input, 1, 1, 1, 1, false);
  for (int i = 0; i < input.size(); ++i) {
    CHECK(identity.values()[static_cast<std::size_t>(i)] ==
          input.values()[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("relu forward and gradient") {
  Tensor x = Tensor::from_data({3}, {-1, 0, 2});
  Tensor y = relu(x);
  CHECK(y.values()[0] == 0.0);
  CHECK(y.values()[1] == 0.0);
  CHECK(y.values()[2] == 2.0);

  Tensor negative = Tensor::full({4}, -3.0);
  Tensor zeros = relu(negative);
  for (double v : zeros.values()) CHECK(v == 0.0);

  // gradient: 1 at x=2, 0 at x=-1, checked against finite differences
  Tensor tracked = Tensor::from_data({2}, {2.0, -1.0}, true);
  Tape tape;
  Tensor loss = sum(relu(tracked, &tape), &tape);
  tape.backward(loss);
  CHECK(tracked.grad()[0] == 1.0);
  CHECK(tracked.grad()[1] == 0.0);
  const double worst = oracle::gradcheck(
      [&]() { return sum(relu(tracked)).item(); }, {tracked});
  CHECK(worst < 1e-3);
}

TEST_CASE("fully_connected basics and oracle") {
  Tensor identity = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor x = Tensor::from_data({2}, {1, 2});
  Tensor zero_b = Tensor::zeros({2});
  Tensor y = fully_connected(x, identity, zero_b);
  CHECK(y.values()[0] == 1.0);
  CHECK(y.values()[1] == 2.0);

  Tensor zero_w = Tensor::zeros({2, 2});
  Tensor b = Tensor::from_data({2}, {5, -5});
  Tensor yb = fully_connected(x, zero_w, b);
  CHECK(yb.values()[0] == 5.0);
  CHECK(yb.values()[1] == -5.0);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor xv = oracle::random_tensor(rng, {8});
    Tensor w = oracle::random_tensor(rng, {8, 3});
    Tensor bias = oracle::random_tensor(rng, {3});
    Tensor out = fully_connected(xv, w, bias);
    const std::vector<double> expected =
        oracle::fc_reference({xv.values().begin(), xv.values().end()},
                             {w.values().begin(), w.values().end()},
                             {bias.values().begin(), bias.values().end()}, 8, 3);
    for (int j = 0; j < 3; ++j) {
      CHECK(out.values()[static_cast<std::size_t>(j)] ==
            doctest::Approx(expected[static_cast<std::size_t>(j)]).epsilon(1e-12));
    }
  }

  Tensor wrong = Tensor::zeros({3, 2});
  CHECK_THROWS_AS((void)fully_connected(x, wrong, zero_b), Error);
}

TEST_CASE("softmax cross entropy values") {
  Tensor uniform = Tensor::from_data({2}, {0.0, 0.0});
  CHECK(softmax_cross_entropy(uniform, 0).item() ==
        doctest::Approx(0.6931471805599453).epsilon(1e-12));

  Tensor spiked = Tensor::from_data({2}, {1000.0, 0.0});
  Tensor loss = softmax_cross_entropy(spiked, 0);
  CHECK(loss.all_finite());
  CHECK(loss.item() >= 0.0);
  CHECK(loss.item() < 1e-12);

  CHECK_THROWS_AS((void)softmax_cross_entropy(uniform, 2), Error);
  CHECK_THROWS_AS((void)softmax_cross_entropy(uniform, -1), Error);

  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = oracle::random_tensor(rng, {5}, 3.0);
    const int label = rng.below_int(5);
    const double expected = oracle::softmax_ce_reference(
        {logits.values().begin(), logits.values().end()}, label);
    CHECK(softmax_cross_entropy(logits, label).item() ==
          doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("broadcast multiply") {
  Rng rng(9);
  Tensor a = oracle::random_tensor(rng, {3, 4});
  Tensor ones = Tensor::full({3, 4}, 1.0);
  Tensor same = mul_broadcast(a, ones);
  for (int i = 0; i < a.size(); ++i) {
    CHECK(same.values()[static_cast<std::size_t>(i)] ==
          a.values()[static_cast<std::size_t>(i)]);
  }

  Tensor m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor column = Tensor::from_data({2, 1}, {2, 0});
  Tensor scaled = mul_broadcast(m, column);
  CHECK(scaled.at({0, 0}) == 2.0);
  CHECK(scaled.at({0, 1}) == 4.0);
  CHECK(scaled.at({1, 0}) == 0.0);
  CHECK(scaled.at({1, 1}) == 0.0);

  Tensor a3 = oracle::random_tensor(rng, {4, 3, 2});
  Tensor b3 = oracle::random_tensor(rng, {4, 1, 1});
  Tensor out = mul_broadcast(a3, b3);
  const std::vector<double> expected = oracle::broadcast_multiply_reference(
      {a3.values().begin(), a3.values().end()}, {4, 3, 2},
      {b3.values().begin(), b3.values().end()}, {4, 1, 1});
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(out.values()[i] == expected[i]);
  }

  Tensor incompatible = Tensor::zeros({3, 1, 1});
  CHECK_THROWS_AS((void)mul_broadcast(a3, incompatible), Error);
}

TEST_CASE("backward on simple graphs") {
  Tensor x = Tensor::from_data({3}, {1.5, -2.0, 0.25}, true);
  {
    Tape tape;
    Tensor loss = sum(x, &tape);
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  x.zero_grad();
  {
    // loss = sum(x * x): x appears twice, gradients accumulate at the fan-out
    Tensor y = Tensor::from_data({2}, {1.0, -2.0}, true);
    Tape tape;
    Tensor loss = sum(mul_broadcast(y, y, &tape), &tape);
    tape.backward(loss);
    CHECK(y.grad()[0] == 2.0);
    CHECK(y.grad()[1] == -4.0);
  }

  Tensor untracked = Tensor::from_data({1}, {3.0});
  Tape tape;
  CHECK_THROWS_AS(tape.backward(untracked), Error);

  Tensor foreign = Tensor::from_data({1}, {3.0}, true);
  CHECK_THROWS_AS(tape.backward(foreign), Error);
}

TEST_CASE("gradients match finite differences per operation") {
  Rng rng(21);

  SUBCASE("conv2d") {
    Tensor input = oracle::random_tensor(rng, {5, 4, 2}, 1.0, true);
    Tensor kernels = oracle::random_tensor(rng, {3, 3, 2, 3}, 0.5, true);
    Tensor bias = oracle::random_tensor(rng, {3}, 0.5, true);
    Tape tape;
    Tensor loss = sum(conv2d(input, kernels, bias, Padding::Same, &tape), &tape);
    tape.backward(loss);
    const double worst = oracle::gradcheck(
        [&]() { return sum(conv2d(input, kernels, bias, Padding::Same)).item(); },
        {input, kernels, bias});
    CHECK(worst < 1e-3);
  }

  SUBCASE("maxpool2d") {
    Tensor input = oracle::random_tensor(rng, {6, 5, 2}, 1.0, true);
    Tape tape;
    Tensor loss = sum(maxpool2d(input, 3, 3, 2, 2, true, &tape), &tape);
    tape.backward(loss);
    const double worst = oracle::gradcheck(
        [&]() { return sum(maxpool2d(input, 3, 3, 2, 2, true)).item(); }, {input});
    CHECK(worst < 1e-3);
  }

  SUBCASE("sigmoid") {
    Tensor input = oracle::random_tensor(rng, {6}, 2.0, true);
    Tape tape;
    Tensor loss = sum(sigmoid(input, &tape), &tape);
    tape.backward(loss);
    const double worst =
        oracle::gradcheck([&]() { return sum(sigmoid(input)).item(); }, {input});
    CHECK(worst < 1e-3);
  }

  SUBCASE("fully_connected") {
    Tensor x = oracle::random_tensor(rng, {6}, 1.0, true);
    Tensor w = oracle::random_tensor(rng, {6, 4}, 0.5, true);
    Tensor b = oracle::random_tensor(rng, {4}, 0.5, true);
    Tape tape;
    Tensor loss = sum(fully_connected(x, w, b, &tape), &tape);
    tape.backward(loss);
    const double worst = oracle::gradcheck(
        [&]() { return sum(fully_connected(x, w, b)).item(); }, {x, w, b});
    CHECK(worst < 1e-3);
  }

  SUBCASE("softmax_cross_entropy") {
    Tensor logits = oracle::random_tensor(rng, {5}, 2.0, true);
    Tape tape;
    Tensor loss = softmax_cross_entropy(logits, 2, &tape);
    tape.backward(loss);
    const double worst = oracle::gradcheck(
        [&]() { return softmax_cross_entropy(logits, 2).item(); }, {logits});
    CHECK(worst < 1e-3);
  }

  SUBCASE("mul_broadcast") {
    Tensor a = oracle::random_tensor(rng, {4, 3, 2}, 1.0, true);
    Tensor b = oracle::random_tensor(rng, {4, 1, 1}, 1.0, true);
    Tape tape;
    Tensor loss = sum(mul_broadcast(a, b, &tape), &tape);
    tape.backward(loss);
    const double worst = oracle::gradcheck(
        [&]() { return sum(mul_broadcast(a, b)).item(); }, {a, b});
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("select and reshape") {
  Tensor x = Tensor::from_data({3}, {5.0, 7.0, 9.0}, true);
  Tape tape;
  Tensor picked = select(x, 1, &tape);
  CHECK(picked.item() == 7.0);
  tape.backward(picked);
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
  CHECK_THROWS_AS((void)select(x, 3), Error);

  Tensor r = reshape(x, {3, 1});
  CHECK(r.dim(0) == 3);
  CHECK_THROWS_AS((void)reshape(x, {2, 2}), Error);
}
