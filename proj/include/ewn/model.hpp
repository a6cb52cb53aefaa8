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
#include <string>
#include <vector>

#include "ewn/deit.hpp"
#include "ewn/ops.hpp"
#include "ewn/params.hpp"
#include "ewn/rng.hpp"
#include "ewn/tensor.hpp"

namespace ewn {

// Both gradient directions by default; kGxOnly keeps just the horizontal
// kernel for a literal reading of the single-matrix form.
enum class SobelMode { kGxGy, kGxOnly };

enum class CbamOrder { kSpatialFirst, kChannelFirst };

struct ASPPConfig {
  std::vector<int> dilations = {1, 2, 3, 4, 5};
  std::vector<int> filters = {64, 32, 16, 8, 4};
  int kernel_size = 3;

  int out_channels() const;
  void validate() const;
};

struct CBAMConfig {
  // The default reduction must divide the attended channel count; with the
  // default pyramid width of 124 channels that means 4.
  int channel_reduction = 4;
  int spatial_kernel = 7;
  CbamOrder order = CbamOrder::kSpatialFirst;

  void validate(int channels) const;
};

struct FusionConfig {
  std::vector<int> hidden = {512, 256, 256};
  std::vector<float> dropout = {0.3f, 0.2f};
  int num_classes = 8;

  void validate() const;
};

struct EWasteNetConfig {
  int image_h = 64;
  int image_w = 64;
  SobelMode sobel_mode = SobelMode::kGxGy;
  DeiTConfig backbone;
  ASPPConfig aspp;
  CBAMConfig cbam;
  FusionConfig fusion;

  // Copy with the backbone bound to the model's image dims and 3 input
  // channels (the stream adapters always emit 3 channels).
  EWasteNetConfig normalized() const;
  void validate() const;
};

// Two-stream classifier: an edge stream (grayscale -> Sobel -> conv adapter
// -> DeiT) and a pyramid stream (ASPP -> CBAM -> conv adapter -> DeiT), fused
// by an MLP head over the concatenated class-token features. Both streams
// read the same input tensor.
class EWasteNet {
 public:
  EWasteNet(const EWasteNetConfig& cfg, std::uint64_t seed);

  const EWasteNetConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  // [N,3,H,W] -> [N,num_classes] raw scores.
  Tensor forward_logits(const Tensor& images, bool training = false,
                        Rng* rng = nullptr) const;
  // Softmax probabilities, inference mode.
  Tensor forward_proba(const Tensor& images) const;

  Tensor edge_stream(const Tensor& images) const;
  Tensor pyramid_stream(const Tensor& images) const;

  // [N,1,H,W] grayscale -> one output channel per Sobel kernel, same padding.
  // The kernels are frozen; gradients flow to the input only.
  Tensor sobel_apply(const Tensor& gray) const;
  Tensor aspp_forward(const Tensor& x) const;
  Tensor cbam_forward(const Tensor& x) const;
  // Probabilities from the two stream features.
  Tensor fusion_head(const Tensor& edge_feature, const Tensor& pyramid_feature,
                     bool training = false, Rng* rng = nullptr) const;

  static Tensor sobel_kernel_tensor(SobelMode mode);

 private:
  Tensor fusion_logits(const Tensor& merged, bool training, Rng* rng) const;
  Tensor adapt(const Tensor& x, const Tensor& weight, const Tensor& bias) const;

  EWasteNetConfig cfg_;
  ParameterStore store_;

  Tensor luma_weight_;                // frozen [1,3,1,1]
  Tensor sobel_weight_;               // frozen [2 or 1,1,3,3]
  // Separable factors of the Sobel kernels. Evaluating smooth-then-difference
  // makes the response to a constant field cancel exactly; the dense 3x3
  // kernels above stay the canonical serialized form.
  Tensor sobel_smooth_y_, sobel_diff_x_, sobel_smooth_x_, sobel_diff_y_;
  Tensor edge_adapter_w_, edge_adapter_b_;
  DeiTParams edge_deit_;
  std::vector<Tensor> aspp_weights_, aspp_biases_;
  Tensor cbam_fc1_w_, cbam_fc1_b_, cbam_fc2_w_, cbam_fc2_b_;
  Tensor cbam_spatial_w_, cbam_spatial_b_;
  Tensor pyramid_adapter_w_, pyramid_adapter_b_;
  DeiTParams pyramid_deit_;
  std::vector<Tensor> fusion_weights_, fusion_biases_;
};

// (trainable, frozen) element counts; the Sobel and luma kernels always land
// in the frozen bucket.
std::pair<std::int64_t, std::int64_t> count_trainable_parameters(
    const ParameterStore& params);

}  // namespace ewn
