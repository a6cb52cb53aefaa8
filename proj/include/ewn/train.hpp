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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ewn/dataset.hpp"
#include "ewn/image.hpp"
#include "ewn/model.hpp"
#include "ewn/params.hpp"
#include "ewn/rng.hpp"

namespace ewn {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 16;
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  std::uint64_t seed = 42;
  bool freeze_backbones = false;
  void validate() const;
};

// Adam with bias correction. Frozen tensors and tensors without gradients are
// left untouched.
class Adam {
 public:
  Adam(float lr, float beta1, float beta2, float eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  explicit Adam(const TrainConfig& cfg)
      : Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps) {}

  void step(ParameterStore& params);
  std::int64_t steps_taken() const { return t_; }

 private:
  struct Slot {
    std::vector<float> m, v;
  };
  float lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Slot> slots_;  // parallel to params.names()
};

// Decoded, resized samples of one split, held in memory.
struct LoadedSplit {
  std::vector<ImageSample> samples;  // pixels already at the model resolution
  std::size_t size() const { return samples.size(); }
  const Image& image(std::size_t i) const { return samples[i].pixels; }
  int label(std::size_t i) const { return samples[i].label; }
};

// Decodes every entry of `which`, applies the optional background-removal
// command ("<cmd> <in> <out.ppm>" per image), and resizes to the model dims.
LoadedSplit load_split(const std::filesystem::path& root, const DatasetIndex& index,
                       const SplitSpec& spec, Split which, int out_h, int out_w,
                       const std::string& background_removal_cmd = "");

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct History {
  std::vector<double> train_loss, train_accuracy;
  std::vector<double> val_loss, val_accuracy;
  std::size_t size() const { return train_loss.size(); }
};

std::string history_to_json(const History& h);
History history_from_json(const std::string& text);

// One pass over the training split: seeded shuffle, mini-batches, per-batch
// augment -> normalize -> forward -> cross-entropy -> backward -> adam step.
// Returns running means over the epoch.
EpochStats train_epoch(EWasteNet& model, Adam& optimizer, const LoadedSplit& train,
                       const TrainConfig& cfg, const AugmentationSpec& augment_spec,
                       int epoch);

// Inference pass over a split (no augmentation, no dropout).
EpochStats evaluate_split(const EWasteNet& model, const LoadedSplit& split,
                          int batch_size);

struct FitResult {
  History history;
  int best_epoch = -1;  // 1-based; -1 when no validation data
};

// Runs cfg.epochs epochs, evaluating the validation split after each. Saves
// the final checkpoint under out_dir/final and the best-validation-accuracy
// checkpoint (ties resolved to the earliest epoch) under out_dir/best.
// per_epoch, when set, observes (epoch, stats) after each epoch.
FitResult fit(EWasteNet& model, const LoadedSplit& train, const LoadedSplit& val,
              const TrainConfig& cfg, const AugmentationSpec& augment_spec,
              const std::filesystem::path& out_dir,
              const std::function<void(int, const EpochStats&, const EpochStats&)>&
                  per_epoch = nullptr,
              const std::vector<std::string>* class_names = nullptr);

// Checkpoint directory: manifest.json (tensor table with byte offsets, config
// snapshot, epoch, rng state) + weights.bin (little-endian float32 payload)
// + history.json. Writes are atomic (temp dir + rename).
void save_checkpoint(const EWasteNet& model, const std::filesystem::path& dir,
                     int epoch, std::uint64_t rng_state,
                     const History* history = nullptr,
                     const std::vector<std::string>* class_names = nullptr);

// Restores weights into a model built from the checkpoint's config snapshot.
// Shape or name mismatches against the manifest are errors.
struct LoadedCheckpoint {
  EWasteNetConfig config;
  int epoch = 0;
  std::uint64_t rng_state = 0;
  std::optional<History> history;
  std::vector<std::string> class_names;  // empty when the manifest has none
};
LoadedCheckpoint load_checkpoint(EWasteNet& model, const std::filesystem::path& dir);
// Reads just the config snapshot (to build the model before loading weights).
EWasteNetConfig checkpoint_config(const std::filesystem::path& dir);

// JSON (de)serialization of the model configuration, shared by checkpoints
// and the run-config file.
std::string model_config_to_json(const EWasteNetConfig& cfg);
EWasteNetConfig model_config_from_json(const std::string& text);

}  // namespace ewn
