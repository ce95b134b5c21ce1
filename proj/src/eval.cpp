#include "tsm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tsm/ops.hpp"

namespace tsm {

namespace {

EvalReport tally(const std::vector<int>& truth, const std::vector<int>& predicted,
                 int classes) {
  EvalReport report;
  report.classes = classes;
  report.confusion.assign(static_cast<std::size_t>(classes) * classes, 0);
  long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    report.confusion[static_cast<std::size_t>(truth[i]) * classes + predicted[i]] += 1;
    if (truth[i] == predicted[i]) ++correct;
  }
  report.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / truth.size();
  report.per_class_accuracy.assign(static_cast<std::size_t>(classes), 0.0);
  for (int c = 0; c < classes; ++c) {
    long row = 0;
    for (int p = 0; p < classes; ++p) row += report.confusion[static_cast<std::size_t>(c) * classes + p];
    if (row > 0) {
      report.per_class_accuracy[static_cast<std::size_t>(c)] =
          static_cast<double>(report.confusion[static_cast<std::size_t>(c) * classes + c]) / row;
    }
  }
  return report;
}

void check_labels(const std::vector<FeatureSequence>& items, int classes) {
  for (const FeatureSequence& seq : items) {
    if (seq.label < 0 || seq.label >= classes) {
      throw Error(ErrorKind::Index, "label out of range in '" + seq.id + "'");
    }
  }
}

}  // namespace

long EvalReport::confusion_at(int truth, int predicted) const {
  if (truth < 0 || truth >= classes || predicted < 0 || predicted >= classes) {
    throw Error(ErrorKind::Index, "confusion matrix index out of range");
  }
  return confusion[static_cast<std::size_t>(truth) * classes + predicted];
}

EvalResult evaluate(const HeadModel& model, const std::vector<FeatureSequence>& items,
                    int t_test) {
  if (items.empty()) throw Error(ErrorKind::Argument, "evaluation set is empty");
  const int classes = model.config.classes;
  check_labels(items, classes);

  EvalResult result;
  result.scores.classes = classes;
  result.scores.ids.reserve(items.size());
  result.scores.labels.reserve(items.size());
  result.scores.logits.reserve(items.size() * static_cast<std::size_t>(classes));
  result.correct.reserve(items.size());

  std::vector<int> truth, predicted;
  truth.reserve(items.size());
  predicted.reserve(items.size());
  for (const FeatureSequence& seq : items) {
    const FeatureSequence sampled = t_test > 0 ? resample_sequence(seq, t_test) : seq;
    const VideoMap map = resample_temporal(build_videomap(sampled), model.config.t_fixed);
    const Tensor logits = head_forward(map.matrix, model);
    const int guess = argmax_index(logits.values());

    result.scores.ids.push_back(seq.id);
    result.scores.labels.push_back(seq.label);
    result.scores.logits.insert(result.scores.logits.end(), logits.values().begin(),
                                logits.values().end());
    result.correct.push_back(guess == seq.label ? 1 : 0);
    truth.push_back(seq.label);
    predicted.push_back(guess);
  }
  result.report = tally(truth, predicted, classes);
  result.report.t_test = t_test;
  return result;
}

namespace {

// Time average with the addends sorted per dimension first: any frame
// permutation feeds the identical sum and therefore the identical pooled
// vector, bit for bit.
std::vector<double> pooled_features(const FeatureSequence& seq) {
  std::vector<double> pooled(static_cast<std::size_t>(seq.feature_dim));
  std::vector<double> column(static_cast<std::size_t>(seq.frames));
  for (int d = 0; d < seq.feature_dim; ++d) {
    for (int t = 0; t < seq.frames; ++t) {
      column[static_cast<std::size_t>(t)] = seq.values[static_cast<std::size_t>(t) * seq.feature_dim + d];
    }
    std::sort(column.begin(), column.end());
    double acc = 0.0;
    for (double v : column) acc += v;
    pooled[static_cast<std::size_t>(d)] = acc / seq.frames;
  }
  return pooled;
}

}  // namespace

void MeanPoolClassifier::fit(const std::vector<FeatureSequence>& train) {
  if (train.empty()) throw Error(ErrorKind::Argument, "training set is empty");
  feature_dim_ = train.front().feature_dim;
  classes_ = 0;
  for (const FeatureSequence& seq : train) {
    if (seq.feature_dim != feature_dim_) {
      throw Error(ErrorKind::Dimension, "training sequences disagree on feature_dim");
    }
    classes_ = std::max(classes_, seq.label + 1);
  }
  if (classes_ < 2) throw Error(ErrorKind::Argument, "need at least two classes");

  std::vector<std::vector<double>> x;
  x.reserve(train.size());
  for (const FeatureSequence& seq : train) x.push_back(pooled_features(seq));

  // full-batch gradient descent on the softmax regression loss; zero init
  // keeps it deterministic and the objective is convex
  weights_.assign(static_cast<std::size_t>(feature_dim_) * classes_, 0.0);
  bias_.assign(static_cast<std::size_t>(classes_), 0.0);
  const int iterations = 400;
  const double lr = 0.5;
  const double inv_n = 1.0 / static_cast<double>(train.size());
  std::vector<double> grad_w(weights_.size());
  std::vector<double> grad_b(bias_.size());
  std::vector<double> score(static_cast<std::size_t>(classes_));
  for (int it = 0; it < iterations; ++it) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (int c = 0; c < classes_; ++c) score[static_cast<std::size_t>(c)] = bias_[static_cast<std::size_t>(c)];
      for (int d = 0; d < feature_dim_; ++d) {
        const double xv = x[i][static_cast<std::size_t>(d)];
        const double* wrow = weights_.data() + static_cast<std::size_t>(d) * classes_;
        for (int c = 0; c < classes_; ++c) score[static_cast<std::size_t>(c)] += xv * wrow[c];
      }
      const std::vector<double> p = softmax(score);
      for (int c = 0; c < classes_; ++c) {
        const double delta = p[static_cast<std::size_t>(c)] -
                             (c == train[i].label ? 1.0 : 0.0);
        grad_b[static_cast<std::size_t>(c)] += delta;
        for (int d = 0; d < feature_dim_; ++d) {
          grad_w[static_cast<std::size_t>(d) * classes_ + c] += x[i][static_cast<std::size_t>(d)] * delta;
        }
      }
    }
    for (std::size_t j = 0; j < weights_.size(); ++j) weights_[j] -= lr * inv_n * grad_w[j];
    for (std::size_t j = 0; j < bias_.size(); ++j) bias_[j] -= lr * inv_n * grad_b[j];
  }
}

std::vector<double> MeanPoolClassifier::scores(const FeatureSequence& seq) const {
  if (classes_ == 0) throw Error(ErrorKind::State, "classifier has not been fit");
  if (seq.feature_dim != feature_dim_) {
    throw Error(ErrorKind::Dimension, "sequence feature_dim does not match the classifier");
  }
  const std::vector<double> pooled = pooled_features(seq);
  std::vector<double> score(static_cast<std::size_t>(classes_));
  for (int c = 0; c < classes_; ++c) score[static_cast<std::size_t>(c)] = bias_[static_cast<std::size_t>(c)];
  for (int d = 0; d < feature_dim_; ++d) {
    const double* wrow = weights_.data() + static_cast<std::size_t>(d) * classes_;
    for (int c = 0; c < classes_; ++c) score[static_cast<std::size_t>(c)] += pooled[static_cast<std::size_t>(d)] * wrow[c];
  }
  return score;
}

int MeanPoolClassifier::predict(const FeatureSequence& seq) const {
  const std::vector<double> s = scores(seq);
  return argmax_index(s);
}

EvalResult MeanPoolClassifier::evaluate(const std::vector<FeatureSequence>& items) const {
  if (items.empty()) throw Error(ErrorKind::Argument, "evaluation set is empty");
  check_labels(items, classes_);
  EvalResult result;
  result.scores.classes = classes_;
  std::vector<int> truth, predicted;
  for (const FeatureSequence& seq : items) {
    const std::vector<double> s = scores(seq);
    const int guess = argmax_index(s);
    result.scores.ids.push_back(seq.id);
    result.scores.labels.push_back(seq.label);
    result.scores.logits.insert(result.scores.logits.end(), s.begin(), s.end());
    result.correct.push_back(guess == seq.label ? 1 : 0);
    truth.push_back(seq.label);
    predicted.push_back(guess);
  }
  result.report = tally(truth, predicted, classes_);
  return result;
}

EvalResult mean_pool_baseline(const std::vector<FeatureSequence>& train,
                              const std::vector<FeatureSequence>& test) {
  MeanPoolClassifier clf;
  clf.fit(train);
  return clf.evaluate(test);
}

EvalReport fuse_streams(const ScoreTable& a, const ScoreTable& b, double weight_a,
                        double weight_b) {
  if (a.classes != b.classes || a.classes < 2) {
    throw Error(ErrorKind::Argument, "streams disagree on the class count");
  }
  if (a.size() != b.size() || a.size() == 0) {
    throw Error(ErrorKind::Argument, "streams disagree on the item count");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.labels[i] != b.labels[i] || a.ids[i] != b.ids[i]) {
      throw Error(ErrorKind::Argument,
                  "streams disagree on item " + std::to_string(i) + " ('" + a.ids[i] +
                      "' vs '" + b.ids[i] + "')");
    }
  }
  const int classes = a.classes;
  std::vector<int> truth, predicted;
  std::vector<double> fused(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::span<const double> la(a.logits.data() + i * classes, static_cast<std::size_t>(classes));
    const std::span<const double> lb(b.logits.data() + i * classes, static_cast<std::size_t>(classes));
    const std::vector<double> pa = softmax(la);
    const std::vector<double> pb = softmax(lb);
    for (int c = 0; c < classes; ++c) {
      fused[static_cast<std::size_t>(c)] =
          weight_a * pa[static_cast<std::size_t>(c)] + weight_b * pb[static_cast<std::size_t>(c)];
    }
    truth.push_back(a.labels[i]);
    predicted.push_back(argmax_index(fused));
  }
  return tally(truth, predicted, classes);
}

std::vector<std::pair<int, double>> density_sweep(const HeadModel& model,
                                                  const std::vector<FeatureSequence>& items,
                                                  const std::vector<int>& t_list) {
  if (t_list.empty()) throw Error(ErrorKind::Argument, "sweep needs at least one density");
  std::vector<std::pair<int, double>> rows;
  rows.reserve(t_list.size());
  for (int t : t_list) {
    rows.emplace_back(t, evaluate(model, items, t).report.accuracy);
  }
  return rows;
}

void write_report(const EvalReport& report, const std::string& path,
                  const std::string& note) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  if (!note.empty()) out << "# " << note << "\n";
  char line[160];
  std::snprintf(line, sizeof(line), "accuracy\t%.6f\n", report.accuracy);
  out << line;
  out << "t_test\t" << report.t_test << "\n";
  if (!report.model_id.empty()) out << "model\t" << report.model_id << "\n";
  if (!report.dataset_id.empty()) out << "dataset\t" << report.dataset_id << "\n";
  out << "class\taccuracy\tcount\n";
  for (int c = 0; c < report.classes; ++c) {
    long row = 0;
    for (int p = 0; p < report.classes; ++p) row += report.confusion_at(c, p);
    std::snprintf(line, sizeof(line), "%d\t%.6f\t%ld\n", c,
                  report.per_class_accuracy[static_cast<std::size_t>(c)], row);
    out << line;
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

void write_confusion(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  for (int c = 0; c < report.classes; ++c) {
    for (int p = 0; p < report.classes; ++p) {
      if (p > 0) out << '\t';
      out << report.confusion_at(c, p);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

void write_scores(const ScoreTable& scores, const std::string& path,
                  const std::string& note) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  if (!note.empty()) out << "# " << note << "\n";
  out << "id\tlabel";
  for (int c = 0; c < scores.classes; ++c) out << "\tscore_" << c;
  out << '\n';
  char cell[48];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << scores.ids[i] << '\t' << scores.labels[i];
    for (int c = 0; c < scores.classes; ++c) {
      std::snprintf(cell, sizeof(cell), "\t%.17g", scores.logits[i * scores.classes + c]);
      out << cell;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

ScoreTable read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  ScoreTable table;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      // header: id, label, then one score column per class
      int columns = 0;
      std::istringstream head(line);
      std::string word;
      while (head >> word) ++columns;
      if (columns < 3) {
        throw Error(ErrorKind::Format, "bad scores header in '" + path + "'");
      }
      table.classes = columns - 2;
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string id;
    int label = 0;
    if (!(row >> id >> label)) {
      throw Error(ErrorKind::Format,
                  "bad scores line " + std::to_string(line_no) + " in '" + path + "'");
    }
    table.ids.push_back(id);
    table.labels.push_back(label);
    for (int c = 0; c < table.classes; ++c) {
      double v = 0.0;
      if (!(row >> v)) {
        throw Error(ErrorKind::Format,
                    "bad scores line " + std::to_string(line_no) + " in '" + path + "'");
      }
      table.logits.push_back(v);
    }
  }
  if (!header_seen) throw Error(ErrorKind::Format, "'" + path + "' holds no score table");
  return table;
}

void write_sweep_table(const std::vector<std::pair<int, double>>& rows,
                       const std::string& path, const std::string& note) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  if (!note.empty()) out << "# " << note << "\n";
  out << "t_test\taccuracy\n";
  char line[64];
  for (const auto& [t, acc] : rows) {
    std::snprintf(line, sizeof(line), "%d\t%.6f\n", t, acc);
    out << line;
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

void write_sweep_svg(const std::vector<std::pair<int, double>>& rows,
                     const std::string& path) {
  if (rows.empty()) throw Error(ErrorKind::Argument, "sweep plot needs at least one row");
  const double width = 480.0, height = 320.0, margin = 48.0;
  int t_min = rows.front().first, t_max = rows.front().first;
  for (const auto& [t, acc] : rows) {
    t_min = std::min(t_min, t);
    t_max = std::max(t_max, t);
  }
  const double span = t_max > t_min ? static_cast<double>(t_max - t_min) : 1.0;
  const auto px = [&](int t) {
    return margin + (width - 2 * margin) * (static_cast<double>(t - t_min) / span);
  };
  const auto py = [&](double acc) { return height - margin - (height - 2 * margin) * acc; };

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  out << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
      << "' y2='" << height - margin << "' stroke='black'/>\n";
  out << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
      << height - margin << "' stroke='black'/>\n";
  out << "<text x='" << width / 2 << "' y='" << height - 12
      << "' text-anchor='middle' font-size='12'>frames per video</text>\n";
  out << "<text x='14' y='" << height / 2
      << "' text-anchor='middle' font-size='12' transform='rotate(-90 14 " << height / 2
      << ")'>accuracy</text>\n";
  out << "<polyline fill='none' stroke='steelblue' stroke-width='2' points='";
  for (const auto& [t, acc] : rows) out << px(t) << ',' << py(acc) << ' ';
  out << "'/>\n";
  for (const auto& [t, acc] : rows) {
    out << "<circle cx='" << px(t) << "' cy='" << py(acc) << "' r='3' fill='steelblue'/>\n";
    out << "<text x='" << px(t) << "' y='" << height - margin + 16
        << "' text-anchor='middle' font-size='10'>" << t << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

}  // namespace tsm
