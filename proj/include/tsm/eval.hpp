#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsm/model.hpp"
#include "tsm/videomap.hpp"

namespace tsm {

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<long> confusion;  // classes x classes, row = true label
  int classes = 0;
  int t_test = 0;
  std::string model_id;
  std::string dataset_id;

  long confusion_at(int truth, int predicted) const;
};

// Per-item class scores of one stream, aligned by item order.
struct ScoreTable {
  int classes = 0;
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> logits;  // n x classes, row-major

  std::size_t size() const { return labels.size(); }
};

struct EvalResult {
  EvalReport report;
  ScoreTable scores;
  std::vector<std::uint8_t> correct;  // per item
};

// Argmax-of-logits evaluation. t_test > 0 first subsamples each sequence to
// t_test frames (simulating the test-time sampling density), then resamples
// to the model's fixed height.
EvalResult evaluate(const HeadModel& model, const std::vector<FeatureSequence>& items,
                    int t_test = 0);

// Order-invariant baseline: a linear softmax scorer over time-averaged
// feature vectors. Frame values are summed in sorted order per dimension, so
// predictions are bitwise invariant under any frame permutation.
class MeanPoolClassifier {
 public:
  void fit(const std::vector<FeatureSequence>& train);
  std::vector<double> scores(const FeatureSequence& seq) const;
  int predict(const FeatureSequence& seq) const;
  EvalResult evaluate(const std::vector<FeatureSequence>& items) const;
  int classes() const { return classes_; }

 private:
  int classes_ = 0;
  int feature_dim_ = 0;
  std::vector<double> weights_;  // feature_dim x classes
  std::vector<double> bias_;
};

EvalResult mean_pool_baseline(const std::vector<FeatureSequence>& train,
                              const std::vector<FeatureSequence>& test);

// Late fusion: w_a * softmax(a) + w_b * softmax(b), argmax prediction.
EvalReport fuse_streams(const ScoreTable& a, const ScoreTable& b, double weight_a,
                        double weight_b);

std::vector<std::pair<int, double>> density_sweep(const HeadModel& model,
                                                  const std::vector<FeatureSequence>& items,
                                                  const std::vector<int>& t_list);

void write_report(const EvalReport& report, const std::string& path,
                  const std::string& note = "");
void write_confusion(const EvalReport& report, const std::string& path);
void write_scores(const ScoreTable& scores, const std::string& path,
                  const std::string& note = "");
ScoreTable read_scores(const std::string& path);
void write_sweep_table(const std::vector<std::pair<int, double>>& rows,
                       const std::string& path, const std::string& note = "");
void write_sweep_svg(const std::vector<std::pair<int, double>>& rows,
                     const std::string& path);

}  // namespace tsm
