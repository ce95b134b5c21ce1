#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "tsm/rng.hpp"
#include "tsm/videomap.hpp"

using namespace tsm;

namespace {

FeatureSequence make_sequence(std::vector<std::vector<double>> frames, int label = 0) {
  FeatureSequence seq;
  seq.id = "seq";
  seq.label = label;
  seq.frames = static_cast<int>(frames.size());
  seq.feature_dim = static_cast<int>(frames.front().size());
  for (const auto& f : frames) seq.values.insert(seq.values.end(), f.begin(), f.end());
  return seq;
}

}  // namespace

TEST_CASE("vectorize_feature_maps averages each channel") {
  Tensor ones = Tensor::full({2, 2, 3}, 1.0);
  const std::vector<double> v = vectorize_feature_maps(ones);
  REQUIRE(v.size() == 3);
  for (double x : v) CHECK(x == 1.0);

  // one channel with plane [[1,3],[5,7]] -> mean 4
  Tensor vol({2, 2, 2});
  vol.values()[0] = 1.0;  // (0,0,ch0)
  vol.values()[2] = 3.0;  // (0,1,ch0)
  vol.values()[4] = 5.0;  // (1,0,ch0)
  vol.values()[6] = 7.0;  // (1,1,ch0)
  CHECK(vectorize_feature_maps(vol)[0] == doctest::Approx(4.0));

  CHECK_THROWS_AS((void)vectorize_feature_maps(Tensor::zeros({4})), Error);
}

TEST_CASE("vectorize_feature_maps matches the per-channel summation oracle") {
  Rng rng(17);
  Tensor vol = oracle::random_tensor(rng, {7, 7, 16});
  const std::vector<double> got = vectorize_feature_maps(vol);
  for (int ch = 0; ch < 16; ++ch) {
    double acc = 0.0;
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 7; ++j) acc += vol.at({i, j, ch});
    }
    CHECK(got[static_cast<std::size_t>(ch)] ==
          doctest::Approx(acc / 49.0).epsilon(1e-12));
  }
}

TEST_CASE("vectorize_feature_maps is linear") {
  Rng rng(19);
  Tensor s1 = oracle::random_tensor(rng, {4, 5, 3});
  Tensor s2 = oracle::random_tensor(rng, {4, 5, 3});
  const double a = 2.5, b = -1.25;
  Tensor mix({4, 5, 3});
  for (int i = 0; i < mix.size(); ++i) {
    mix.values()[static_cast<std::size_t>(i)] =
        a * s1.values()[static_cast<std::size_t>(i)] +
        b * s2.values()[static_cast<std::size_t>(i)];
  }
  const std::vector<double> vm = vectorize_feature_maps(mix);
  const std::vector<double> v1 = vectorize_feature_maps(s1);
  const std::vector<double> v2 = vectorize_feature_maps(s2);
  for (std::size_t ch = 0; ch < vm.size(); ++ch) {
    CHECK(vm[ch] == doctest::Approx(a * v1[ch] + b * v2[ch]).epsilon(1e-12));
  }
}

TEST_CASE("build_videomap stacks frames in order") {
  FeatureSequence seq = make_sequence({{1, 2}, {3, 4}, {5, 6}});
  VideoMap map = build_videomap(seq);
  CHECK(map.height() == 3);
  CHECK(map.width() == 2);
  CHECK(map.matrix.at({0, 0}) == 1.0);
  CHECK(map.matrix.at({2, 1}) == 6.0);

  FeatureSequence single = make_sequence({{7, 8}});
  VideoMap one = build_videomap(single);
  CHECK(one.height() == 1);
  CHECK(one.matrix.at({0, 1}) == 8.0);

  FeatureSequence broken = seq;
  broken.values.pop_back();
  CHECK_THROWS_AS((void)build_videomap(broken), Error);
}

TEST_CASE("build_videomap permutes rows exactly with the frames") {
  Rng rng(23);
  const int t = 9, l = 4;
  FeatureSequence seq;
  seq.id = "perm";
  seq.frames = t;
  seq.feature_dim = l;
  seq.values.resize(static_cast<std::size_t>(t) * l);
  for (double& v : seq.values) v = rng.normal();

  std::vector<int> perm(t);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  FeatureSequence shuffled = seq;
  for (int row = 0; row < t; ++row) {
    for (int d = 0; d < l; ++d) {
      shuffled.values[static_cast<std::size_t>(row) * l + d] =
          seq.values[static_cast<std::size_t>(perm[static_cast<std::size_t>(row)]) * l + d];
    }
  }
  VideoMap base = build_videomap(seq);
  VideoMap permuted = build_videomap(shuffled);
  for (int row = 0; row < t; ++row) {
    for (int d = 0; d < l; ++d) {
      CHECK(permuted.matrix.at({row, d}) ==
            base.matrix.at({perm[static_cast<std::size_t>(row)], d}));
    }
  }
}

TEST_CASE("resample_temporal index formula") {
  FeatureSequence seq = make_sequence({{0.0}, {1.0}, {2.0}, {3.0}});
  VideoMap map = build_videomap(seq);

  VideoMap same = resample_temporal(map, 4);
  for (int i = 0; i < 4; ++i) CHECK(same.matrix.at({i, 0}) == static_cast<double>(i));

  VideoMap down = resample_temporal(map, 2);
  CHECK(down.matrix.at({0, 0}) == 0.0);
  CHECK(down.matrix.at({1, 0}) == 2.0);

  FeatureSequence three = make_sequence({{0.0}, {1.0}, {2.0}});
  VideoMap up = resample_temporal(build_videomap(three), 6);
  const double expected[] = {0, 0, 1, 1, 2, 2};
  for (int i = 0; i < 6; ++i) CHECK(up.matrix.at({i, 0}) == expected[i]);

  CHECK_THROWS_AS((void)resample_temporal(map, 0), Error);
}

TEST_CASE("resample_temporal is idempotent and monotone") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const int t_src = 1 + rng.below_int(40);
    const int t_dst = 1 + rng.below_int(40);
    const std::vector<int> idx = resample_indices(t_src, t_dst);
    for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] >= idx[i - 1]);
    CHECK(idx.front() >= 0);
    CHECK(idx.back() < t_src);

    // resampling to the same height twice equals doing it once
    FeatureSequence seq;
    seq.frames = t_src;
    seq.feature_dim = 3;
    seq.values.resize(static_cast<std::size_t>(t_src) * 3);
    for (double& v : seq.values) v = rng.normal();
    VideoMap once = resample_temporal(build_videomap(seq), t_dst);
    VideoMap twice = resample_temporal(once, t_dst);
    for (int i = 0; i < once.matrix.size(); ++i) {
      CHECK(twice.matrix.values()[static_cast<std::size_t>(i)] ==
            once.matrix.values()[static_cast<std::size_t>(i)]);
    }
  }
}

TEST_CASE("sequence_from_volumes vectorizes every frame") {
  Rng rng(31);
  std::vector<Tensor> volumes;
  for (int i = 0; i < 3; ++i) volumes.push_back(oracle::random_tensor(rng, {2, 3, 4}));
  FeatureSequence seq = sequence_from_volumes(volumes, 1, "vols");
  CHECK(seq.frames == 3);
  CHECK(seq.feature_dim == 4);
  const std::vector<double> f0 = vectorize_feature_maps(volumes[0]);
  for (int d = 0; d < 4; ++d) CHECK(seq.at(0, d) == f0[static_cast<std::size_t>(d)]);
}
