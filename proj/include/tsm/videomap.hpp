#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsm/tensor.hpp"

namespace tsm {

// Ordered per-frame feature vectors with a class label. Frame order is
// temporal order. `relevance`, when non-empty, marks the frames that carry the
// class evidence (one flag per frame); synthetic generators fill it in.
struct FeatureSequence {
  std::string id;
  int label = 0;
  int frames = 0;       // T
  int feature_dim = 0;  // L
  std::vector<double> values;  // frames x feature_dim, row-major
  std::vector<std::uint8_t> relevance;

  double at(int frame, int dim) const;
};

// T x L matrix whose row k is the feature vector of frame k.
struct VideoMap {
  Tensor matrix;  // T x L
  std::string source_id;
  int label = 0;

  int height() const { return matrix.dim(0); }
  int width() const { return matrix.dim(1); }
};

// Average pooling per channel of an h x w x c feature volume, the
// vectorization V: S_k -> f_k.
std::vector<double> vectorize_feature_maps(const Tensor& volume);

// Builds a sequence from per-frame feature volumes by vectorizing each one.
FeatureSequence sequence_from_volumes(const std::vector<Tensor>& volumes,
                                      int label, const std::string& id);

VideoMap build_videomap(const FeatureSequence& seq);

// Uniform nearest-index temporal resampling: output row i is input row
// floor(i * T / t_target). Duplicates rows when upsampling.
VideoMap resample_temporal(const VideoMap& map, int t_target);

// The row indices resample_temporal picks, exposed for subsampling sequences.
std::vector<int> resample_indices(int t_source, int t_target);

FeatureSequence resample_sequence(const FeatureSequence& seq, int t_target);

}  // namespace tsm
