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

// Command-line entry point: split / train / eval / predict / check.
// Exit codes: 0 success, 1 check-suite failure, 2 usage or config error,
// 3 I/O error.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ewn/config.hpp"
#include "ewn/dataset.hpp"
#include "ewn/gradcheck.hpp"
#include "ewn/image.hpp"
#include "ewn/kernels.hpp"
#include "ewn/metrics.hpp"
#include "ewn/model.hpp"
#include "ewn/ops.hpp"
#include "ewn/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ewn;

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("EWASTENET_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 42;
}

SplitRatios parse_ratios(const std::string& text) {
  SplitRatios r;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &r.train, &r.val, &r.test) != 3) {
    throw std::invalid_argument("ratios must be three comma-separated numbers, got '" +
                                text + "'");
  }
  return r;
}

void print_split_table(const SplitSpec& spec) {
  std::printf("%-14s %8s %10s %8s %8s\n", "Class", "Train", "Validation", "Test", "Total");
  const auto counts = spec.per_class_counts();
  std::array<std::int64_t, 3> totals = {0, 0, 0};
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const auto& row = counts[c];
    std::printf("%-14s %8lld %10lld %8lld %8lld\n", spec.classes[c].c_str(),
                static_cast<long long>(row[0]), static_cast<long long>(row[1]),
                static_cast<long long>(row[2]),
                static_cast<long long>(row[0] + row[1] + row[2]));
    for (int s = 0; s < 3; ++s) totals[static_cast<std::size_t>(s)] += row[static_cast<std::size_t>(s)];
  }
  std::printf("%-14s %8lld %10lld %8lld %8lld\n", "Total",
              static_cast<long long>(totals[0]), static_cast<long long>(totals[1]),
              static_cast<long long>(totals[2]),
              static_cast<long long>(totals[0] + totals[1] + totals[2]));
}

int cmd_split(const std::string& data_dir, const std::string& ratios_text,
              std::uint64_t seed, const std::string& out_file) {
  const DatasetIndex index = scan_dataset(data_dir);
  const SplitSpec spec = split_dataset(index, parse_ratios(ratios_text), seed);
  save_split(spec, out_file);
  print_split_table(spec);
  std::printf("wrote %s\n", out_file.c_str());
  return 0;
}

void print_parameter_table(const ParameterStore& params) {
  std::printf("%-40s %16s %10s %8s\n", "parameter", "shape", "count", "frozen");
  for (const std::string& name : params.names()) {
    const Tensor& t = params.get(name);
    std::printf("%-40s %16s %10lld %8s\n", name.c_str(), shape_str(t.shape()).c_str(),
                static_cast<long long>(t.numel()), t.requires_grad() ? "no" : "yes");
  }
  const auto [trainable, frozen] = count_trainable_parameters(params);
  std::printf("trainable parameters: %lld\n", static_cast<long long>(trainable));
  std::printf("frozen parameters:    %lld\n", static_cast<long long>(frozen));
}

int cmd_train(const std::string& data_dir, const std::string& split_file,
              const std::string& config_file, const std::string& out_dir,
              std::optional<int> epochs_override,
              std::optional<std::uint64_t> seed_override) {
  RunConfig base;
  base.train.seed = default_seed();  // flag > config > $EWASTENET_SEED > 42
  RunConfig cfg = base;
  if (!config_file.empty()) cfg = load_run_config(config_file, base);
  if (cfg.data.root.empty()) cfg.data.root = data_dir;
  if (epochs_override) cfg.train.epochs = *epochs_override;
  if (seed_override) cfg.train.seed = *seed_override;
  cfg.model.validate();
  cfg.train.validate();

  const DatasetIndex index = scan_dataset(data_dir);
  const SplitSpec spec = load_split(split_file);
  const LoadedSplit train = load_split(data_dir, index, spec, Split::kTrain,
                                       cfg.model.image_h, cfg.model.image_w,
                                       cfg.data.background_removal_cmd);
  const LoadedSplit val = load_split(data_dir, index, spec, Split::kVal,
                                     cfg.model.image_h, cfg.model.image_w,
                                     cfg.data.background_removal_cmd);
  std::printf("train/val samples: %zu/%zu\n", train.size(), val.size());

  EWasteNet model(cfg.model, cfg.train.seed);
  if (cfg.train.freeze_backbones) {
    model.params().freeze_prefix("edge.deit.");
    model.params().freeze_prefix("pyramid.deit.");
  }
  print_parameter_table(model.params());

  fs::create_directories(out_dir);
  {
    const fs::path target = fs::path(out_dir) / "config.json";
    const fs::path tmp = target.string() + ".tmp";
    std::ofstream cfg_out(tmp, std::ios::binary | std::ios::trunc);
    cfg_out << run_config_to_json(cfg);
    cfg_out.close();
    fs::rename(tmp, target);
  }
  const FitResult result = fit(
      model, train, val, cfg.train, cfg.data.augment, out_dir,
      [](int epoch, const EpochStats& ts, const EpochStats& vs) {
        std::printf("epoch %3d  train loss %.4f acc %.4f  val loss %.4f acc %.4f\n",
                    epoch, ts.loss, ts.accuracy, vs.loss, vs.accuracy);
        std::fflush(stdout);
      },
      &index.classes);
  std::printf("best validation epoch: %d\n", result.best_epoch);
  std::printf("checkpoints: %s/final %s/best\n", out_dir.c_str(), out_dir.c_str());
  return 0;
}

EWasteNet model_from_checkpoint(const fs::path& ckpt, LoadedCheckpoint* info_out) {
  if (!fs::exists(ckpt / "manifest.json")) {
    throw std::invalid_argument("no checkpoint at " + ckpt.string() +
                                " (missing manifest.json)");
  }
  EWasteNet model(checkpoint_config(ckpt), 0);
  LoadedCheckpoint info = load_checkpoint(model, ckpt);
  if (info_out) *info_out = std::move(info);
  return model;
}

int cmd_eval(const std::string& ckpt_dir, const std::string& data_dir,
             const std::string& split_file, const std::string& subset,
             const std::string& out_dir) {
  LoadedCheckpoint info;
  EWasteNet model = model_from_checkpoint(ckpt_dir, &info);
  const DatasetIndex index = scan_dataset(data_dir);
  const SplitSpec spec = load_split(split_file);
  const LoadedSplit data = load_split(data_dir, index, spec, split_from_name(subset),
                                      model.config().image_h, model.config().image_w);
  if (data.size() == 0) {
    throw std::invalid_argument("split '" + subset + "' is empty");
  }

  NoGradGuard no_grad;
  std::vector<int> predictions;
  std::vector<double> scores;
  constexpr int kBatch = 16;
  for (std::size_t begin = 0; begin < data.size(); begin += kBatch) {
    const std::size_t end = std::min(data.size(), begin + kBatch);
    Tensor batch = Tensor::zeros(
        {static_cast<std::int64_t>(end - begin), 3, model.config().image_h,
         model.config().image_w});
    auto out = batch.mutable_data();
    std::size_t pos = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const Image& img = data.image(i);
      for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < img.h; ++y)
          for (int x = 0; x < img.w; ++x) out[pos++] = (img.at(y, x, ch) - 0.5f) / 0.5f;
    }
    Tensor probs = model.forward_proba(batch);
    const std::vector<int> pred = argmax_rows(probs);
    predictions.insert(predictions.end(), pred.begin(), pred.end());
    for (const float p : probs.data()) scores.push_back(static_cast<double>(p));
  }

  std::vector<int> truth;
  for (const ImageSample& s : data.samples) truth.push_back(s.label);
  MetricsReport report = classification_metrics(
      confusion_matrix(truth, predictions, index.classes));
  attach_roc(report, scores, truth);
  render_report(report, out_dir);
  std::printf("%s on %s: accuracy %.4f  macro P/R/F1 %.4f/%.4f/%.4f  mcc %.4f  micro-auc %.4f\n",
              ckpt_dir.c_str(), subset.c_str(), report.accuracy, report.macro_precision,
              report.macro_recall, report.macro_f1, report.mcc, report.micro_roc.auc);
  std::printf("wrote %s/report.json %s/confusion.csv %s/roc.csv\n", out_dir.c_str(),
              out_dir.c_str(), out_dir.c_str());
  return 0;
}

int cmd_predict(const std::string& ckpt_dir, const std::string& image_file) {
  LoadedCheckpoint info;
  EWasteNet model = model_from_checkpoint(ckpt_dir, &info);
  std::vector<std::string> names = info.class_names;
  if (names.empty()) {
    for (int c = 0; c < model.config().fusion.num_classes; ++c) {
      names.push_back("class_" + std::to_string(c));
    }
  }
  const Image img = resize(decode_image(image_file), model.config().image_h,
                           model.config().image_w);
  NoGradGuard no_grad;
  Tensor probs = model.forward_proba(normalize(img));
  const int best = argmax_rows(probs)[0];

  nlohmann::ordered_json doc;
  doc["class_name"] = names[static_cast<std::size_t>(best)];
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < names.size(); ++c) {
    p[names[c]] = probs.at({0, static_cast<std::int64_t>(c)});
  }
  doc["probabilities"] = std::move(p);
  std::printf("%s\n", doc.dump(2).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// check: the built-in invariant suite
// ---------------------------------------------------------------------------

struct Check {
  std::string name;
  std::function<void()> run;
};

void expect(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

bool corrupt_enabled(const std::string& check_name) {
  const char* env = std::getenv("EWASTENET_CHECK_CORRUPT");
  return env && check_name == env;
}

EWasteNetConfig check_toy_config() {
  EWasteNetConfig cfg;
  cfg.image_h = cfg.image_w = 16;
  cfg.backbone.patch_size = 8;
  cfg.backbone.embed_dim = 16;
  cfg.backbone.depth = 1;
  cfg.backbone.num_heads = 4;
  cfg.backbone.mlp_ratio = 2.0f;
  cfg.aspp.filters = {4, 2, 2, 1, 1};
  cfg.cbam.channel_reduction = 2;
  cfg.fusion.hidden = {16, 8, 8};
  return cfg;
}

std::vector<Check> build_checks() {
  std::vector<Check> checks;

  checks.push_back({"sobel", []() {
    EWasteNet model(check_toy_config(), 1);
    if (corrupt_enabled("sobel")) {
      Tensor w = model.params().get("edge.sobel.weight");
      w.mutable_data()[0] += 0.5f;
    }
    Tensor flat = model.sobel_apply(Tensor::full({1, 1, 8, 8}, 0.6f));
    for (const float v : flat.data()) expect(v == 0.0f, "constant image must map to exact zero");
    Tensor step = model.sobel_apply(
        Tensor::from({1, 1, 3, 3}, {0, 0, 1, 0, 0, 1, 0, 0, 1}));
    expect(std::abs(step.at({0, 0, 1, 1}) - 4.0f) < 1e-6f,
           "column-step response must be 4.0");
    // linearity against the registered dense kernels
    Rng rng(2);
    Tensor x = Tensor::zeros({1, 1, 6, 6});
    x.fill_uniform(rng, -1, 1);
    Tensor lhs = model.sobel_apply(scale(x, 2.0f));
    Tensor rhs = scale(model.sobel_apply(x), 2.0f);
    for (std::size_t i = 0; i < lhs.data().size(); ++i) {
      expect(std::abs(lhs.data()[i] - rhs.data()[i]) < 1e-5f, "sobel must be linear");
    }
    Tensor dense = conv2d(pad_edge(x, 1), model.params().get("edge.sobel.weight"), 1, 1,
                          Padding::kValid);
    Tensor sep = model.sobel_apply(x);
    for (std::size_t i = 0; i < sep.data().size(); ++i) {
      expect(std::abs(dense.data()[i] - sep.data()[i]) < 1e-5f,
             "separable evaluation must match the dense kernels");
    }
  }});

  checks.push_back({"softmax", []() {
    Rng rng(3);
    Tensor x = Tensor::zeros({5, 9});
    x.fill_uniform(rng, -8, 8);
    Tensor y = softmax(x, -1);
    for (int i = 0; i < 5; ++i) {
      double s = 0.0;
      for (int j = 0; j < 9; ++j) {
        const float v = y.at({i, j});
        expect(v > 0.0f && v < 1.0f, "softmax values must lie in (0,1)");
        s += v;
      }
      expect(std::abs(s - 1.0) < 1e-6, "softmax rows must sum to 1");
    }
    Tensor big = softmax(Tensor::from({1, 2}, {1000, 1000}), -1);
    expect(all_finite(big) && std::abs(big.at({0, 0}) - 0.5f) < 1e-6f,
           "softmax must be stable for large inputs");
  }});

  checks.push_back({"conv-same-padding", []() {
    Rng rng(4);
    for (int dilation = 1; dilation <= 5; ++dilation) {
      Tensor x = Tensor::zeros({1, 2, 9, 11});
      x.fill_uniform(rng, -1, 1);
      Tensor k = Tensor::zeros({3, 2, 3, 3});
      k.fill_uniform(rng, -1, 1);
      Tensor y = conv2d(x, k, 1, dilation, Padding::kSame);
      expect(y.shape() == Shape{1, 3, 9, 11}, "same padding must preserve spatial dims");
      expect(all_finite(y), "conv output must be finite");
    }
  }});

  checks.push_back({"dropout-identity", []() {
    Rng rng(5);
    Tensor x = Tensor::zeros({64});
    x.fill_uniform(rng, -1, 1);
    Tensor y = dropout(x, 0.5f, false, rng);
    expect(std::equal(x.data().begin(), x.data().end(), y.data().begin()),
           "inference dropout must be the identity");
  }});

  checks.push_back({"aspp-shape", []() {
    EWasteNetConfig cfg;  // default pyramid: 64/32/16/8/4 filters
    EWasteNet model(cfg, 6);
    if (corrupt_enabled("aspp-shape")) {
      Tensor w = model.params().get("pyramid.aspp.branch0.weight");
      auto d = w.mutable_data();
      std::fill(d.begin(), d.end(), std::nanf(""));
    }
    Rng rng(7);
    Tensor x = Tensor::zeros({1, 3, 64, 64});
    x.fill_uniform(rng, -1, 1);
    Tensor y = model.aspp_forward(x);
    expect(y.shape() == Shape{1, 124, 64, 64}, "pyramid pooling must emit 124 channels");
    expect(all_finite(y), "pyramid pooling output must be finite");
  }});

  checks.push_back({"cbam-gates", []() {
    EWasteNetConfig cfg = check_toy_config();
    EWasteNet model(cfg, 8);
    Rng rng(9);
    Tensor x = Tensor::zeros({2, 10, 16, 16});
    x.fill_uniform(rng, -1, 1);
    Tensor y = model.cbam_forward(x);
    expect(y.shape() == x.shape(), "attention must preserve the input shape");
    // gates multiply, so |out| <= |in| elementwise can fail for negatives;
    // instead check the composed magnitudes never exceed the input
    for (std::size_t i = 0; i < y.data().size(); ++i) {
      expect(std::abs(y.data()[i]) <= std::abs(x.data()[i]) + 1e-6f,
             "attended values must be gated");
    }
  }});

  checks.push_back({"fusion-probabilities", []() {
    EWasteNet model(check_toy_config(), 10);
    Rng rng(11);
    Tensor f1 = Tensor::zeros({3, 16});
    Tensor f2 = Tensor::zeros({3, 16});
    f1.fill_uniform(rng, -1, 1);
    f2.fill_uniform(rng, -1, 1);
    Tensor probs = model.fusion_head(f1, f2);
    expect(probs.shape() == Shape{3, 8}, "head must emit 8-way probabilities");
    for (int i = 0; i < 3; ++i) {
      double s = 0.0;
      for (int j = 0; j < 8; ++j) s += probs.at({i, j});
      expect(std::abs(s - 1.0) < 1e-6, "probability rows must sum to 1");
    }
  }});

  checks.push_back({"parameter-budget", []() {
    EWasteNetConfig cfg;
    EWasteNet model(cfg, 12);
    const auto [trainable, frozen] = count_trainable_parameters(model.params());
    expect(trainable < 1000000, "default model must stay under one million parameters");
    expect(frozen == 21, "luma + sobel kernels must be frozen");
  }});

  checks.push_back({"metrics-known-matrix", []() {
    const std::vector<std::int64_t> test_counts = {16, 22, 21, 20, 33, 19, 14, 31};
    ConfusionMatrix cm;
    cm.class_names = {"Camera", "Keyboards", "Laptop", "Microwave",
                      "Mobile", "Mouses",    "Smartwatch", "TV"};
    cm.counts.assign(64, 0);
    for (int c = 0; c < 8; ++c) cm.at(c, c) = test_counts[static_cast<std::size_t>(c)];
    auto move = [&](int f, int t, std::int64_t n) {
      cm.at(f, f) -= n;
      cm.at(f, t) += n;
    };
    move(4, 7, 4);
    move(3, 7, 1);
    move(4, 6, 1);
    move(0, 6, 1);
    if (corrupt_enabled("metrics-known-matrix")) move(1, 0, 3);
    const MetricsReport r = classification_metrics(cm);
    expect(std::abs(r.accuracy - 0.960227) < 5e-4, "known-matrix accuracy must be 0.9602");
    expect(std::abs(r.macro_recall - 0.9670) < 5e-4, "known-matrix macro recall must be 0.9670");
    expect(std::abs(r.mcc - 0.9550378) < 2e-4, "known-matrix mcc must be 0.95504");
  }});

  checks.push_back({"roc", []() {
    const std::vector<int> labels = {1, 0, 1, 0};
    const std::vector<double> separable = {0.1, 0.9, 0.8, 0.2, 0.2, 0.8, 0.7, 0.3};
    expect(std::abs(roc_curve(separable, 2, labels, 1).auc - 1.0) < 1e-12,
           "separable scores must give auc 1");
    const std::vector<double> uniform(8, 0.5);
    expect(std::abs(roc_curve(uniform, 2, labels, 1).auc - 0.5) < 1e-12,
           "uniform scores must give auc 0.5");
    expect(std::abs(micro_average_roc(separable, 2, labels).auc - 1.0) < 1e-12,
           "micro auc of separable scores must be 1");
  }});

  checks.push_back({"gradcheck-ops", []() {
    Rng rng(13);
    Tensor a = Tensor::zeros({3, 4});
    Tensor b = Tensor::zeros({4, 2});
    a.fill_uniform(rng, -1, 1);
    b.fill_uniform(rng, -1, 1);
    expect(finite_diff_check([&]() { return sum(matmul(a, b)); }, {a, b}, 1e-3f) < 1e-3,
           "matmul gradient");
    Tensor logits = Tensor::zeros({3, 5});
    logits.fill_uniform(rng, -2, 2);
    expect(finite_diff_check([&]() { return cross_entropy(logits, {0, 3, 2}); },
                             {logits}, 1e-3f) < 1e-3,
           "cross-entropy gradient");
    Tensor x = Tensor::zeros({1, 2, 5, 5});
    Tensor k = Tensor::zeros({3, 2, 3, 3});
    Tensor w = Tensor::zeros({1, 3, 5, 5});
    x.fill_uniform(rng, -1, 1);
    k.fill_uniform(rng, -1, 1);
    w.fill_uniform(rng, -1, 1);
    expect(finite_diff_check(
               [&]() { return sum(mul(conv2d(x, k, 1, 2, Padding::kSame), w)); },
               {x, k}, 1e-3f) < 1e-3,
           "conv2d gradient");
  }});

  checks.push_back({"gradcheck-model", []() {
    const EWasteNetConfig cfg = check_toy_config();
    // seed chosen so every fusion relu input clears the probe radius
    std::uint64_t seed = 30;
    EWasteNet model(cfg, seed);
    Rng data_rng(seed + 1);
    Tensor imgs = Tensor::zeros({2, 3, 16, 16});
    imgs.fill_uniform(data_rng, -0.9f, 0.9f);
    for (; seed < 100; ++seed) {
      EWasteNet candidate(cfg, seed);
      Rng rng(seed + 1);
      Tensor probe = Tensor::zeros({2, 3, 16, 16});
      probe.fill_uniform(rng, -0.9f, 0.9f);
      NoGradGuard ng;
      Tensor h = concat(std::vector<Tensor>{candidate.edge_stream(probe),
                                            candidate.pyramid_stream(probe)}, 1);
      float clearance = 1e30f;
      for (std::size_t i = 1; i <= cfg.fusion.hidden.size(); ++i) {
        Tensor pre = linear(h, candidate.params().get("fusion.fc" + std::to_string(i) + ".weight"),
                            candidate.params().get("fusion.fc" + std::to_string(i) + ".bias"));
        for (const float v : pre.data()) clearance = std::min(clearance, std::abs(v));
        h = relu(pre);
      }
      if (clearance > 0.02f) break;
    }
    expect(seed < 100, "no clearance-verified seed found");
    EWasteNet verified(cfg, seed);
    Rng rng(seed + 1);
    Tensor verified_imgs = Tensor::zeros({2, 3, 16, 16});
    verified_imgs.fill_uniform(rng, -0.9f, 0.9f);
    std::vector<Tensor> leaves;
    for (const std::string& name : verified.params().names()) {
      const Tensor& t = verified.params().get(name);
      if (t.requires_grad()) leaves.push_back(t);
    }
    Rng pick(seed + 2);
    const double err = finite_diff_check_sampled(
        [&]() { return cross_entropy(verified.forward_logits(verified_imgs), {1, 6}); },
        leaves, 1e-3f, 25, pick);
    expect(err < 1e-3, "end-to-end gradient check");
  }});

  checks.push_back({"split-contract", []() {
    DatasetIndex index;
    index.classes = {"A", "B", "C"};
    const int sizes[3] = {101, 53, 27};
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < sizes[c]; ++i)
        index.entries.push_back({index.classes[static_cast<std::size_t>(c)] + "/" +
                                     std::to_string(i) + ".ppm",
                                 c});
    const SplitSpec a = split_dataset(index, {0.7, 0.1, 0.2}, 99);
    const SplitSpec b = split_dataset(index, {0.7, 0.1, 0.2}, 99);
    expect(a.assignment == b.assignment, "same seed must reproduce the split");
    const auto totals = a.totals();
    expect(totals[0] + totals[1] + totals[2] == 181, "split must partition every sample");
    const auto counts = a.per_class_counts();
    for (int c = 0; c < 3; ++c) {
      expect(counts[static_cast<std::size_t>(c)][0] ==
                 static_cast<std::int64_t>(std::floor(0.7 * sizes[c])),
             "train bucket must be floor-rounded");
    }
  }});

  checks.push_back({"checkpoint-roundtrip", []() {
    const fs::path dir =
        fs::temp_directory_path() / ("ewn_check_ckpt_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    EWasteNet model(check_toy_config(), 14);
    save_checkpoint(model, dir, 1, 7, nullptr);
    EWasteNet restored(checkpoint_config(dir), 999);
    load_checkpoint(restored, dir);
    Rng rng(15);
    Tensor x = Tensor::zeros({2, 3, 16, 16});
    x.fill_uniform(rng, -1, 1);
    NoGradGuard ng;
    Tensor pa = model.forward_proba(x);
    Tensor pb = restored.forward_proba(x);
    fs::remove_all(dir);
    expect(std::equal(pa.data().begin(), pa.data().end(), pb.data().begin()),
           "checkpoint round trip must preserve predictions bitwise");
  }});

  checks.push_back({"ppm-roundtrip", []() {
    const fs::path dir =
        fs::temp_directory_path() / ("ewn_check_ppm_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    Rng rng(16);
    Image img = Image::zeros(5, 4, 3);
    for (float& v : img.px) v = rng.next_float();
    write_ppm(dir / "x.ppm", img);
    const Image once = read_ppm(dir / "x.ppm");
    write_ppm(dir / "y.ppm", once);
    const Image twice = read_ppm(dir / "y.ppm");
    fs::remove_all(dir);
    expect(once.px == twice.px, "ppm decode/encode must round-trip bit-exactly");
  }});

  return checks;
}

int cmd_check() {
  std::printf("kernel table: %s (threads: %d)\n", kernels::active().name,
              kernels::thread_count());
  const std::vector<Check> checks = build_checks();
  int failures = 0;
  for (const Check& check : checks) {
    try {
      check.run();
      std::printf("[PASS] %s\n", check.name.c_str());
    } catch (const std::exception& e) {
      std::printf("[FAIL] %s: %s\n", check.name.c_str(), e.what());
      ++failures;
    }
    std::fflush(stdout);
  }
  std::printf("%zu checks, %d failed\n", checks.size(), failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stream e-waste image classifier"};
  app.require_subcommand(1);

  std::string data_dir, split_file, config_file, out_path, ckpt_dir, image_file;
  std::string ratios = "0.7,0.1,0.2";
  std::string subset = "test";
  std::uint64_t seed = default_seed();
  std::optional<int> epochs_override;
  std::optional<std::uint64_t> seed_override;

  CLI::App* split = app.add_subcommand("split", "scan a dataset and write a split file");
  split->add_option("--data", data_dir, "dataset root (class-per-directory)")->required();
  split->add_option("--ratios", ratios, "train,val,test ratios (default 0.7,0.1,0.2)");
  split->add_option("--seed", seed, "split seed (default $EWASTENET_SEED or 42)");
  split->add_option("--out", out_path, "output split JSON")->required();

  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--data", data_dir, "dataset root")->required();
  train->add_option("--split", split_file, "split JSON from 'split'")->required();
  train->add_option("--config", config_file, "run config JSON");
  train->add_option("--out", out_path, "output directory")->required();
  int epochs_flag = -1;
  std::uint64_t seed_flag = 0;
  CLI::Option* epochs_opt = train->add_option("--epochs", epochs_flag, "override epochs");
  CLI::Option* seed_opt = train->add_option("--seed", seed_flag, "override training seed");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt_dir, "checkpoint directory")->required();
  eval->add_option("--data", data_dir, "dataset root")->required();
  eval->add_option("--split", split_file, "split JSON")->required();
  eval->add_option("--subset", subset, "train|val|test (default test)");
  eval->add_option("--out", out_path, "report output directory")->required();

  CLI::App* predict = app.add_subcommand("predict", "classify one image");
  predict->add_option("--ckpt", ckpt_dir, "checkpoint directory")->required();
  predict->add_option("--image", image_file, "image file (.ppm)")->required();

  app.add_subcommand("check", "run the built-in verification suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("split")) {
      return cmd_split(data_dir, ratios, seed, out_path);
    }
    if (app.got_subcommand("train")) {
      if (epochs_opt->count()) epochs_override = epochs_flag;
      if (seed_opt->count()) seed_override = seed_flag;
      return cmd_train(data_dir, split_file, config_file, out_path, epochs_override,
                       seed_override);
    }
    if (app.got_subcommand("eval")) {
      return cmd_eval(ckpt_dir, data_dir, split_file, subset, out_path);
    }
    if (app.got_subcommand("predict")) {
      return cmd_predict(ckpt_dir, image_file);
    }
    if (app.got_subcommand("check")) {
      return cmd_check();
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
