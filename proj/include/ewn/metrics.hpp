// Copyright 2026 The EWasteNet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ewn {

// Rows are true classes, columns are predicted classes.
struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::int64_t> counts;  // C*C row-major

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::int64_t at(int true_class, int predicted) const {
    return counts[static_cast<std::size_t>(true_class) * class_names.size() + predicted];
  }
  std::int64_t& at(int true_class, int predicted) {
    return counts[static_cast<std::size_t>(true_class) * class_names.size() + predicted];
  }
  std::int64_t total() const;
  std::int64_t trace() const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& true_labels,
                                 const std::vector<int>& predicted_labels,
                                 const std::vector<std::string>& class_names);

struct PerClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // set when a zero denominator forced the metric to 0
  bool undefined_precision = false;
  bool undefined_recall = false;
};

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

struct MetricsReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::vector<PerClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  // sample-count weighted variants, reported alongside the macro ones
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double mcc = 0.0;  // multiclass (Gorodkin) form
  std::vector<RocCurve> roc;  // per class, one-vs-rest; empty without scores
  RocCurve micro_roc;
};

// Accuracy, per-class precision/recall/F1 (zero-denominator cases are 0 and
// flagged), macro and weighted averages, and the multiclass MCC computed from
// the full matrix.
MetricsReport classification_metrics(const ConfusionMatrix& cm);

// One-vs-rest ROC for class c: thresholds swept over the unique scores,
// points from (0,0) to (1,1), AUC by trapezoid. scores is row-major [N,C].
RocCurve roc_curve(const std::vector<double>& scores, int num_classes,
                   const std::vector<int>& true_labels, int target_class);

// Pools all (sample, class) one-vs-rest decisions before the sweep.
RocCurve micro_average_roc(const std::vector<double>& scores, int num_classes,
                           const std::vector<int>& true_labels);

// Adds per-class and micro-average ROC curves to a report.
void attach_roc(MetricsReport& report, const std::vector<double>& scores,
                const std::vector<int>& true_labels);

// report.json, confusion.csv and roc.csv with deterministic ordering.
void render_report(const MetricsReport& report, const std::filesystem::path& out_dir);
std::string report_to_json(const MetricsReport& report);
std::string confusion_to_csv(const ConfusionMatrix& cm);
std::string roc_to_csv(const MetricsReport& report);

}  // namespace ewn
