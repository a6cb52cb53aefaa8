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

#include "ewn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace ewn {

using nlohmann::ordered_json;

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const std::int64_t v : counts) t += v;
  return t;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int c = 0; c < num_classes(); ++c) t += at(c, c);
  return t;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& true_labels,
                                 const std::vector<int>& predicted_labels,
                                 const std::vector<std::string>& class_names) {
  if (true_labels.size() != predicted_labels.size()) {
    throw std::invalid_argument("confusion_matrix: " + std::to_string(true_labels.size()) +
                                " true labels vs " + std::to_string(predicted_labels.size()) +
                                " predictions");
  }
  const int c = static_cast<int>(class_names.size());
  ConfusionMatrix cm;
  cm.class_names = class_names;
  cm.counts.assign(static_cast<std::size_t>(c) * c, 0);
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i];
    const int p = predicted_labels[i];
    if (t < 0 || t >= c || p < 0 || p >= c) {
      throw std::invalid_argument("confusion_matrix: label pair (" + std::to_string(t) +
                                  "," + std::to_string(p) + ") outside [0," +
                                  std::to_string(c) + ")");
    }
    ++cm.at(t, p);
  }
  return cm;
}

MetricsReport classification_metrics(const ConfusionMatrix& cm) {
  const int c = cm.num_classes();
  const std::int64_t total = cm.total();
  if (total <= 0) {
    throw std::invalid_argument("classification_metrics: empty confusion matrix");
  }
  MetricsReport report;
  report.confusion = cm;
  report.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);

  report.per_class.resize(static_cast<std::size_t>(c));
  double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;
  double weighted_p = 0.0, weighted_r = 0.0, weighted_f = 0.0;
  for (int k = 0; k < c; ++k) {
    std::int64_t row_sum = 0, col_sum = 0;
    for (int j = 0; j < c; ++j) {
      row_sum += cm.at(k, j);
      col_sum += cm.at(j, k);
    }
    PerClassMetrics& m = report.per_class[static_cast<std::size_t>(k)];
    const std::int64_t diag = cm.at(k, k);
    if (col_sum > 0) {
      m.precision = static_cast<double>(diag) / static_cast<double>(col_sum);
    } else {
      m.undefined_precision = true;
    }
    if (row_sum > 0) {
      m.recall = static_cast<double>(diag) / static_cast<double>(row_sum);
    } else {
      m.undefined_recall = true;
    }
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    macro_p += m.precision;
    macro_r += m.recall;
    macro_f += m.f1;
    const double weight = static_cast<double>(row_sum) / static_cast<double>(total);
    weighted_p += weight * m.precision;
    weighted_r += weight * m.recall;
    weighted_f += weight * m.f1;
  }
  report.macro_precision = macro_p / c;
  report.macro_recall = macro_r / c;
  report.macro_f1 = macro_f / c;
  report.weighted_precision = weighted_p;
  report.weighted_recall = weighted_r;
  report.weighted_f1 = weighted_f;

  // Gorodkin's multiclass MCC over the full matrix.
  long double cs = 0.0L, sum_pt = 0.0L, sum_pp = 0.0L, sum_tt = 0.0L;
  const long double s = static_cast<long double>(total);
  const long double correct = static_cast<long double>(cm.trace());
  for (int k = 0; k < c; ++k) {
    long double row_sum = 0.0L, col_sum = 0.0L;
    for (int j = 0; j < c; ++j) {
      row_sum += static_cast<long double>(cm.at(k, j));
      col_sum += static_cast<long double>(cm.at(j, k));
    }
    sum_pt += col_sum * row_sum;
    sum_pp += col_sum * col_sum;
    sum_tt += row_sum * row_sum;
  }
  cs = correct * s - sum_pt;
  const long double denom = std::sqrt(s * s - sum_pp) * std::sqrt(s * s - sum_tt);
  report.mcc = denom > 0.0L ? static_cast<double>(cs / denom) : 0.0;
  return report;
}

namespace {

RocCurve sweep_roc(std::vector<std::pair<double, bool>>& scored,
                   std::int64_t positives, std::int64_t negatives) {
  RocCurve curve;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("roc: needs at least one positive and one negative");
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::int64_t tp = 0, fp = 0;
  double auc = 0.0;
  std::size_t i = 0;
  while (i < scored.size()) {
    const double threshold = scored[i].first;
    // consume the whole tie group so ties form one diagonal segment
    std::int64_t d_tp = 0, d_fp = 0;
    while (i < scored.size() && scored[i].first == threshold) {
      (scored[i].second ? d_tp : d_fp)++;
      ++i;
    }
    const double prev_fpr = static_cast<double>(fp) / static_cast<double>(negatives);
    const double prev_tpr = static_cast<double>(tp) / static_cast<double>(positives);
    tp += d_tp;
    fp += d_fp;
    const double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
    const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
    auc += (fpr - prev_fpr) * (prev_tpr + tpr) * 0.5;
    curve.points.push_back({threshold, fpr, tpr});
  }
  curve.auc = auc;
  return curve;
}

}  // namespace

RocCurve roc_curve(const std::vector<double>& scores, int num_classes,
                   const std::vector<int>& true_labels, int target_class) {
  if (scores.size() != true_labels.size() * static_cast<std::size_t>(num_classes)) {
    throw std::invalid_argument("roc_curve: scores size does not match labels");
  }
  if (target_class < 0 || target_class >= num_classes) {
    throw std::invalid_argument("roc_curve: class out of range");
  }
  std::vector<std::pair<double, bool>> scored;
  std::int64_t positives = 0;
  scored.reserve(true_labels.size());
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const bool positive = true_labels[i] == target_class;
    positives += positive;
    scored.emplace_back(scores[i * static_cast<std::size_t>(num_classes) +
                               static_cast<std::size_t>(target_class)],
                        positive);
  }
  return sweep_roc(scored, positives,
                   static_cast<std::int64_t>(true_labels.size()) - positives);
}

RocCurve micro_average_roc(const std::vector<double>& scores, int num_classes,
                           const std::vector<int>& true_labels) {
  if (num_classes < 2) {
    throw std::invalid_argument("micro_average_roc: needs at least two classes");
  }
  if (scores.size() != true_labels.size() * static_cast<std::size_t>(num_classes)) {
    throw std::invalid_argument("micro_average_roc: scores size does not match labels");
  }
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(scores.size());
  std::int64_t positives = 0;
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    for (int c = 0; c < num_classes; ++c) {
      const bool positive = true_labels[i] == c;
      positives += positive;
      scored.emplace_back(
          scores[i * static_cast<std::size_t>(num_classes) + static_cast<std::size_t>(c)],
          positive);
    }
  }
  return sweep_roc(scored, positives,
                   static_cast<std::int64_t>(scored.size()) - positives);
}

void attach_roc(MetricsReport& report, const std::vector<double>& scores,
                const std::vector<int>& true_labels) {
  const int c = report.confusion.num_classes();
  report.roc.clear();
  for (int k = 0; k < c; ++k) {
    report.roc.push_back(roc_curve(scores, c, true_labels, k));
  }
  report.micro_roc = micro_average_roc(scores, c, true_labels);
}

std::string report_to_json(const MetricsReport& report) {
  ordered_json doc;
  doc["accuracy"] = report.accuracy;
  doc["macro_precision"] = report.macro_precision;
  doc["macro_recall"] = report.macro_recall;
  doc["macro_f1"] = report.macro_f1;
  doc["weighted_precision"] = report.weighted_precision;
  doc["weighted_recall"] = report.weighted_recall;
  doc["weighted_f1"] = report.weighted_f1;
  doc["mcc"] = report.mcc;
  ordered_json per_class = ordered_json::object();
  for (int k = 0; k < report.confusion.num_classes(); ++k) {
    const PerClassMetrics& m = report.per_class[static_cast<std::size_t>(k)];
    ordered_json entry = {{"precision", m.precision},
                          {"recall", m.recall},
                          {"f1", m.f1}};
    if (m.undefined_precision) entry["undefined_precision"] = true;
    if (m.undefined_recall) entry["undefined_recall"] = true;
    per_class[report.confusion.class_names[static_cast<std::size_t>(k)]] = std::move(entry);
  }
  doc["per_class"] = std::move(per_class);
  ordered_json counts = ordered_json::array();
  for (int t = 0; t < report.confusion.num_classes(); ++t) {
    ordered_json row = ordered_json::array();
    for (int p = 0; p < report.confusion.num_classes(); ++p) {
      row.push_back(report.confusion.at(t, p));
    }
    counts.push_back(std::move(row));
  }
  doc["confusion"] = {{"classes", report.confusion.class_names},
                      {"counts", std::move(counts)}};
  if (!report.roc.empty()) {
    ordered_json aucs = ordered_json::object();
    for (int k = 0; k < report.confusion.num_classes(); ++k) {
      aucs[report.confusion.class_names[static_cast<std::size_t>(k)]] =
          report.roc[static_cast<std::size_t>(k)].auc;
    }
    doc["roc_auc"] = std::move(aucs);
    doc["micro_average_auc"] = report.micro_roc.auc;
  }
  return doc.dump(2) + "\n";
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
  std::string out = "true\\predicted";
  for (const std::string& name : cm.class_names) out += "," + name;
  out += "\n";
  for (int t = 0; t < cm.num_classes(); ++t) {
    out += cm.class_names[static_cast<std::size_t>(t)];
    for (int p = 0; p < cm.num_classes(); ++p) {
      out += "," + std::to_string(cm.at(t, p));
    }
    out += "\n";
  }
  return out;
}

namespace {

void append_roc_rows(std::string& out, const std::string& name, const RocCurve& curve) {
  char buf[128];
  for (const RocPoint& p : curve.points) {
    if (std::isinf(p.threshold)) {
      std::snprintf(buf, sizeof(buf), "%s,inf,%.10g,%.10g\n", name.c_str(), p.fpr, p.tpr);
    } else {
      std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g\n", name.c_str(), p.threshold,
                    p.fpr, p.tpr);
    }
    out += buf;
  }
}

}  // namespace

std::string roc_to_csv(const MetricsReport& report) {
  std::string out = "class,threshold,fpr,tpr\n";
  for (int k = 0; k < report.confusion.num_classes(); ++k) {
    append_roc_rows(out, report.confusion.class_names[static_cast<std::size_t>(k)],
                    report.roc[static_cast<std::size_t>(k)]);
  }
  if (!report.micro_roc.points.empty()) {
    append_roc_rows(out, "micro", report.micro_roc);
  }
  return out;
}

namespace {

void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << bytes;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void render_report(const MetricsReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_atomic(out_dir / "report.json", report_to_json(report));
  write_atomic(out_dir / "confusion.csv", confusion_to_csv(report.confusion));
  if (!report.roc.empty()) {
    write_atomic(out_dir / "roc.csv", roc_to_csv(report));
  }
}

}  // namespace ewn
