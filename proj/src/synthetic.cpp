#include "tsm/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "tsm/rng.hpp"

namespace tsm {

namespace {

// Generated values pass through 32-bit precision so that writing a sequence
// to a feature file and reading it back reproduces them bitwise.
double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string item_id(const std::string& kind, const std::string& split, int index) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s_%s_%04d", kind.c_str(), split.c_str(), index);
  return buf;
}

// Random smooth trajectory: per-dimension cumulative Gaussian steps scaled so
// the endpoint spread is ~scale, then a width-3 moving average. Anchored at
// zero, so the walk starts small and diffuses -- time runs one way.
std::vector<double> smooth_curve(Rng& rng, int frames, int dim, double scale) {
  std::vector<double> walk(static_cast<std::size_t>(frames) * dim);
  const double step = scale / std::sqrt(static_cast<double>(frames));
  for (int d = 0; d < dim; ++d) {
    double acc = 0.0;
    for (int t = 0; t < frames; ++t) {
      acc += rng.normal(0.0, step);
      walk[static_cast<std::size_t>(t) * dim + d] = acc;
    }
  }
  std::vector<double> out(walk.size());
  for (int t = 0; t < frames; ++t) {
    const int lo = t > 0 ? t - 1 : 0;
    const int hi = t + 1 < frames ? t + 1 : frames - 1;
    for (int d = 0; d < dim; ++d) {
      double acc = 0.0;
      for (int s = lo; s <= hi; ++s) acc += walk[static_cast<std::size_t>(s) * dim + d];
      out[static_cast<std::size_t>(t) * dim + d] = acc / (hi - lo + 1);
    }
  }
  return out;
}

void check_common(const TaskSpec& spec) {
  if (spec.frames < 1 || spec.feature_dim < 1) {
    throw Error(ErrorKind::Argument, "frames and feature_dim must be >= 1");
  }
  if (spec.n_train < 1 || spec.n_test < 1) {
    throw Error(ErrorKind::Argument, "example counts must be positive");
  }
  if (spec.noise_sigma < 0.0) {
    throw Error(ErrorKind::Argument, "noise_sigma must be >= 0");
  }
}

std::vector<FeatureSequence> order_split(const TaskSpec& spec, int count,
                                         const std::string& split, Rng& rng) {
  if (count % 2 != 0) {
    throw Error(ErrorKind::Argument, "order task builds reversed pairs; counts must be even");
  }
  const int t = spec.frames, l = spec.feature_dim;
  std::vector<FeatureSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int pair = 0; pair < count / 2; ++pair) {
    std::vector<double> base = smooth_curve(rng, t, l, 1.0);
    for (double& v : base) v = quantize(v + rng.normal(0.0, spec.noise_sigma));

    FeatureSequence forward;
    forward.id = item_id("order", split, 2 * pair);
    forward.label = 0;
    forward.frames = t;
    forward.feature_dim = l;
    forward.values = base;

    FeatureSequence reversed;
    reversed.id = item_id("order", split, 2 * pair + 1);
    reversed.label = 1;
    reversed.frames = t;
    reversed.feature_dim = l;
    reversed.values.resize(base.size());
    for (int row = 0; row < t; ++row) {
      for (int d = 0; d < l; ++d) {
        reversed.values[static_cast<std::size_t>(row) * l + d] =
            base[static_cast<std::size_t>(t - 1 - row) * l + d];
      }
    }
    out.push_back(std::move(forward));
    out.push_back(std::move(reversed));
  }
  return out;
}

std::vector<FeatureSequence> noise_frame_split(const TaskSpec& spec, int count,
                                               const std::string& split, Rng& rng,
                                               const std::vector<std::vector<double>>& window_template) {
  const int t = spec.frames, l = spec.feature_dim, k = spec.classes;
  const int w = static_cast<int>(window_template.front().size()) / l;
  std::vector<FeatureSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int label = i % k;
    // the rng stream consumed per example does not depend on the label
    std::vector<double> background = smooth_curve(rng, t, l, 1.0);
    const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(t - w + 1)));

    FeatureSequence seq;
    seq.id = item_id("noise", split, i);
    seq.label = label;
    seq.frames = t;
    seq.feature_dim = l;
    seq.values.resize(static_cast<std::size_t>(t) * l);
    seq.relevance.assign(static_cast<std::size_t>(t), 0);
    const std::vector<double>& tpl = window_template[static_cast<std::size_t>(label)];
    for (int row = 0; row < t; ++row) {
      const bool inside = row >= start && row < start + w;
      if (inside) seq.relevance[static_cast<std::size_t>(row)] = 1;
      for (int d = 0; d < l; ++d) {
        const double core = inside ? tpl[static_cast<std::size_t>(row - start) * l + d]
                                   : background[static_cast<std::size_t>(row) * l + d];
        seq.values[static_cast<std::size_t>(row) * l + d] =
            quantize(core + rng.normal(0.0, spec.noise_sigma));
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<FeatureSequence> sparse_event_split(const TaskSpec& spec, int count,
                                                const std::string& split, Rng& rng,
                                                const std::vector<std::vector<double>>& directions,
                                                double amplitude) {
  const int t = spec.frames, l = spec.feature_dim, k = spec.classes;
  std::vector<FeatureSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int label = i % k;
    FeatureSequence seq;
    seq.id = item_id("event", split, i);
    seq.label = label;
    seq.frames = t;
    seq.feature_dim = l;
    seq.values.resize(static_cast<std::size_t>(t) * l);
    seq.relevance.assign(static_cast<std::size_t>(t), 0);
    for (double& v : seq.values) v = rng.normal(0.0, spec.noise_sigma);
    const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(t - 1)));
    seq.relevance[static_cast<std::size_t>(start)] = 1;
    seq.relevance[static_cast<std::size_t>(start) + 1] = 1;
    const std::vector<double>& dir = directions[static_cast<std::size_t>(label)];
    for (int row = start; row < start + 2; ++row) {
      for (int d = 0; d < l; ++d) {
        seq.values[static_cast<std::size_t>(row) * l + d] += amplitude * dir[static_cast<std::size_t>(d)];
      }
    }
    for (double& v : seq.values) v = quantize(v);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<FeatureSequence> two_stream_split(const TaskSpec& spec, int count,
                                              const std::string& split, Rng& rng,
                                              const std::vector<std::vector<double>>& informative,
                                              const std::vector<double>& ambiguous,
                                              int informative_base) {
  const int t = spec.frames, l = spec.feature_dim, k = spec.classes;
  const int half = k / 2;
  std::vector<FeatureSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int label = i % k;
    const int rel = label - informative_base;
    const bool knows = rel >= 0 && rel < half;
    const std::vector<double>& base =
        knows ? informative[static_cast<std::size_t>(rel)] : ambiguous;
    FeatureSequence seq;
    seq.id = item_id("twostream", split, i);
    seq.label = label;
    seq.frames = t;
    seq.feature_dim = l;
    seq.values.resize(static_cast<std::size_t>(t) * l);
    for (std::size_t j = 0; j < seq.values.size(); ++j) {
      seq.values[j] = quantize(base[j] + rng.normal(0.0, spec.noise_sigma));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace

TaskKind parse_task_kind(const std::string& name) {
  if (name == "order") return TaskKind::Order;
  if (name == "noise-frames") return TaskKind::NoiseFrames;
  if (name == "sparse-event") return TaskKind::SparseEvent;
  throw Error(ErrorKind::Argument, "unknown task kind '" + name +
                                       "' (expected order, noise-frames or sparse-event)");
}

std::string format_task_kind(TaskKind kind) {
  switch (kind) {
    case TaskKind::Order: return "order";
    case TaskKind::NoiseFrames: return "noise-frames";
    case TaskKind::SparseEvent: return "sparse-event";
  }
  throw Error(ErrorKind::Argument, "invalid task kind");
}

TaskData gen_order_task(const TaskSpec& spec) {
  check_common(spec);
  if (spec.classes != 2) {
    throw Error(ErrorKind::Argument, "order task is two-class");
  }
  Rng train_rng(mix_seed(spec.seed, 0));
  Rng test_rng(mix_seed(spec.seed, 1));
  TaskData data;
  data.train = order_split(spec, spec.n_train, "train", train_rng);
  data.test = order_split(spec, spec.n_test, "test", test_rng);
  return data;
}

TaskData gen_noise_frame_task(const TaskSpec& spec) {
  check_common(spec);
  if (spec.classes < 2) throw Error(ErrorKind::Argument, "need at least two classes");
  const int t = spec.frames, l = spec.feature_dim;
  const int w = (t + 3) / 4;  // ceil(T/4)
  if (w < 1 || w > t) throw Error(ErrorKind::Argument, "frames too few for a 25% window");

  Rng task_rng(mix_seed(spec.seed, 2));
  std::vector<std::vector<double>> window_template;
  window_template.reserve(static_cast<std::size_t>(spec.classes));
  for (int c = 0; c < spec.classes; ++c) {
    std::vector<double> offset(static_cast<std::size_t>(l));
    for (double& v : offset) v = task_rng.normal(0.0, 0.8);
    std::vector<double> tpl = smooth_curve(task_rng, w, l, 1.0);
    for (int row = 0; row < w; ++row) {
      for (int d = 0; d < l; ++d) tpl[static_cast<std::size_t>(row) * l + d] += offset[static_cast<std::size_t>(d)];
    }
    window_template.push_back(std::move(tpl));
  }

  Rng train_rng(mix_seed(spec.seed, 0));
  Rng test_rng(mix_seed(spec.seed, 1));
  TaskData data;
  data.train = noise_frame_split(spec, spec.n_train, "train", train_rng, window_template);
  data.test = noise_frame_split(spec, spec.n_test, "test", test_rng, window_template);
  return data;
}

TaskData gen_sparse_event_task(const TaskSpec& spec) {
  check_common(spec);
  if (spec.classes < 2) throw Error(ErrorKind::Argument, "need at least two classes");
  if (spec.frames < 2) throw Error(ErrorKind::Argument, "sparse-event needs >= 2 frames");
  if (spec.classes > spec.feature_dim) {
    throw Error(ErrorKind::Argument, "sparse-event needs feature_dim >= classes");
  }
  const int l = spec.feature_dim;

  // orthonormal class directions
  Rng task_rng(mix_seed(spec.seed, 2));
  std::vector<std::vector<double>> directions;
  directions.reserve(static_cast<std::size_t>(spec.classes));
  for (int c = 0; c < spec.classes; ++c) {
    std::vector<double> v(static_cast<std::size_t>(l));
    for (double& x : v) x = task_rng.normal();
    for (const std::vector<double>& prev : directions) {
      double dot = 0.0;
      for (int d = 0; d < l; ++d) dot += v[static_cast<std::size_t>(d)] * prev[static_cast<std::size_t>(d)];
      for (int d = 0; d < l; ++d) v[static_cast<std::size_t>(d)] -= dot * prev[static_cast<std::size_t>(d)];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-9) throw Error(ErrorKind::Numeric, "degenerate class direction");
    for (double& x : v) x /= norm;
    directions.push_back(std::move(v));
  }

  const double amplitude = std::max(3.0 * spec.noise_sigma, 1.0);
  Rng train_rng(mix_seed(spec.seed, 0));
  Rng test_rng(mix_seed(spec.seed, 1));
  TaskData data;
  data.train = sparse_event_split(spec, spec.n_train, "train", train_rng, directions, amplitude);
  data.test = sparse_event_split(spec, spec.n_test, "test", test_rng, directions, amplitude);
  return data;
}

TaskData generate_task(const TaskSpec& spec) {
  switch (spec.kind) {
    case TaskKind::Order: return gen_order_task(spec);
    case TaskKind::NoiseFrames: return gen_noise_frame_task(spec);
    case TaskKind::SparseEvent: return gen_sparse_event_task(spec);
  }
  throw Error(ErrorKind::Argument, "invalid task kind");
}

TwoStreamData gen_two_stream_task(const TaskSpec& spec) {
  check_common(spec);
  if (spec.classes < 4 || spec.classes % 2 != 0) {
    throw Error(ErrorKind::Argument, "two-stream construction needs an even class count >= 4");
  }
  const int t = spec.frames, l = spec.feature_dim;
  const int half = spec.classes / 2;

  Rng task_rng(mix_seed(spec.seed, 2));
  std::vector<std::vector<double>> informative_a, informative_b;
  for (int c = 0; c < half; ++c) informative_a.push_back(smooth_curve(task_rng, t, l, 1.0));
  std::vector<double> ambiguous_a = smooth_curve(task_rng, t, l, 1.0);
  for (int c = 0; c < half; ++c) informative_b.push_back(smooth_curve(task_rng, t, l, 1.0));
  std::vector<double> ambiguous_b = smooth_curve(task_rng, t, l, 1.0);

  TwoStreamData data;
  {
    Rng train_rng(mix_seed(spec.seed, 0));
    Rng test_rng(mix_seed(spec.seed, 1));
    data.stream_a.train =
        two_stream_split(spec, spec.n_train, "train", train_rng, informative_a, ambiguous_a, 0);
    data.stream_a.test =
        two_stream_split(spec, spec.n_test, "test", test_rng, informative_a, ambiguous_a, 0);
  }
  {
    Rng train_rng(mix_seed(spec.seed, 3));
    Rng test_rng(mix_seed(spec.seed, 4));
    data.stream_b.train =
        two_stream_split(spec, spec.n_train, "train", train_rng, informative_b, ambiguous_b, half);
    data.stream_b.test =
        two_stream_split(spec, spec.n_test, "test", test_rng, informative_b, ambiguous_b, half);
  }
  return data;
}

}  // namespace tsm
