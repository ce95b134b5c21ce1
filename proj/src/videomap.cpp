#include "tsm/videomap.hpp"

#include <utility>

namespace tsm {

double FeatureSequence::at(int frame, int dim) const {
  if (frame < 0 || frame >= frames || dim < 0 || dim >= feature_dim) {
    throw Error(ErrorKind::Index, "frame or feature index out of range");
  }
  return values[static_cast<std::size_t>(frame) * feature_dim + dim];
}

std::vector<double> vectorize_feature_maps(const Tensor& volume) {
  if (volume.rank() != 3) {
    throw Error(ErrorKind::Dimension, "feature volume must be h x w x c");
  }
  const int h = volume.dim(0), w = volume.dim(1), c = volume.dim(2);
  const int plane = h * w;
  std::vector<double> out(static_cast<std::size_t>(c), 0.0);
  const double* v = volume.values().data();
  for (int i = 0; i < plane; ++i) {
    const double* cell = v + static_cast<std::size_t>(i) * c;
    for (int ch = 0; ch < c; ++ch) out[static_cast<std::size_t>(ch)] += cell[ch];
  }
  for (double& x : out) x /= plane;
  return out;
}

FeatureSequence sequence_from_volumes(const std::vector<Tensor>& volumes,
                                      int label, const std::string& id) {
  if (volumes.empty()) {
    throw Error(ErrorKind::Dimension, "sequence needs at least one frame");
  }
  FeatureSequence seq;
  seq.id = id;
  seq.label = label;
  seq.frames = static_cast<int>(volumes.size());
  seq.feature_dim = volumes.front().dim(2);
  seq.values.reserve(static_cast<std::size_t>(seq.frames) * seq.feature_dim);
  for (const Tensor& vol : volumes) {
    std::vector<double> f = vectorize_feature_maps(vol);
    if (static_cast<int>(f.size()) != seq.feature_dim) {
      throw Error(ErrorKind::Dimension, "frames disagree on channel count");
    }
    seq.values.insert(seq.values.end(), f.begin(), f.end());
  }
  return seq;
}

VideoMap build_videomap(const FeatureSequence& seq) {
  if (seq.frames < 1 || seq.feature_dim < 1) {
    throw Error(ErrorKind::Dimension, "sequence is empty");
  }
  if (seq.values.size() !=
      static_cast<std::size_t>(seq.frames) * static_cast<std::size_t>(seq.feature_dim)) {
    throw Error(ErrorKind::Dimension, "sequence payload does not match frames x feature_dim");
  }
  VideoMap map;
  map.matrix = Tensor::from_data({seq.frames, seq.feature_dim}, seq.values);
  map.source_id = seq.id;
  map.label = seq.label;
  return map;
}

std::vector<int> resample_indices(int t_source, int t_target) {
  if (t_target < 1) throw Error(ErrorKind::Argument, "target height must be >= 1");
  std::vector<int> idx(static_cast<std::size_t>(t_target));
  for (int i = 0; i < t_target; ++i) {
    idx[static_cast<std::size_t>(i)] =
        static_cast<int>((static_cast<long long>(i) * t_source) / t_target);
  }
  return idx;
}

VideoMap resample_temporal(const VideoMap& map, int t_target) {
  const int t = map.height(), l = map.width();
  const std::vector<int> idx = resample_indices(t, t_target);
  Tensor out({t_target, l});
  const double* src = map.matrix.values().data();
  double* dst = out.values().data();
  for (int i = 0; i < t_target; ++i) {
    const double* row = src + static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * l;
    double* drow = dst + static_cast<std::size_t>(i) * l;
    for (int j = 0; j < l; ++j) drow[j] = row[j];
  }
  VideoMap res;
  res.matrix = std::move(out);
  res.source_id = map.source_id;
  res.label = map.label;
  return res;
}

FeatureSequence resample_sequence(const FeatureSequence& seq, int t_target) {
  const std::vector<int> idx = resample_indices(seq.frames, t_target);
  FeatureSequence out;
  out.id = seq.id;
  out.label = seq.label;
  out.frames = t_target;
  out.feature_dim = seq.feature_dim;
  out.values.resize(static_cast<std::size_t>(t_target) * seq.feature_dim);
  if (!seq.relevance.empty()) out.relevance.resize(static_cast<std::size_t>(t_target));
  for (int i = 0; i < t_target; ++i) {
    const int s = idx[static_cast<std::size_t>(i)];
    for (int j = 0; j < seq.feature_dim; ++j) {
      out.values[static_cast<std::size_t>(i) * seq.feature_dim + j] =
          seq.values[static_cast<std::size_t>(s) * seq.feature_dim + j];
    }
    if (!seq.relevance.empty()) {
      out.relevance[static_cast<std::size_t>(i)] = seq.relevance[static_cast<std::size_t>(s)];
    }
  }
  return out;
}

}  // namespace tsm
