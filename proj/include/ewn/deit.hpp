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

#include <string>
#include <vector>

#include "ewn/ops.hpp"
#include "ewn/params.hpp"
#include "ewn/rng.hpp"
#include "ewn/tensor.hpp"

namespace ewn {

// A small data-efficient image transformer: patch embedding, one class and
// one distillation token, pre-norm encoder blocks, final layer norm. The
// feature vector is the class token; the distillation token attends like any
// other token but carries no head here.
struct DeiTConfig {
  int patch_size = 8;
  int embed_dim = 64;
  int depth = 4;
  int num_heads = 4;
  float mlp_ratio = 4.0f;
  int input_channels = 3;
  int image_h = 64;
  int image_w = 64;

  void validate() const;
  int num_patches() const { return (image_h / patch_size) * (image_w / patch_size); }
  int num_tokens() const { return num_patches() + 2; }
  int mlp_hidden() const { return static_cast<int>(mlp_ratio * static_cast<float>(embed_dim)); }
};

struct DeiTBlockParams {
  Tensor norm1_gamma, norm1_beta;
  Tensor qkv_weight, qkv_bias;    // [D, 3D], [3D]
  Tensor proj_weight, proj_bias;  // [D, D], [D]
  Tensor norm2_gamma, norm2_beta;
  Tensor fc1_weight, fc1_bias;    // [D, H], [H]
  Tensor fc2_weight, fc2_bias;    // [H, D], [D]
};

struct DeiTParams {
  Tensor patch_weight, patch_bias;  // [D, C, p, p], [D]
  Tensor cls_token, dist_token;     // [D]
  Tensor pos_embed;                 // [T, D]
  std::vector<DeiTBlockParams> blocks;
  Tensor norm_gamma, norm_beta;
};

// Registers all tensors under `prefix` (e.g. "edge.deit") and initializes
// them: truncated normal (0.02) for tokens and positional embeddings,
// fan-in-scaled uniform for projection weights, ones/zeros for norms/biases.
DeiTParams deit_init(const DeiTConfig& cfg, ParameterStore& store,
                     const std::string& prefix, Rng& rng);

// [N,C,H,W] -> [N, P, D] patch tokens via non-overlapping convolution.
Tensor patch_embed(const Tensor& image, const DeiTConfig& cfg,
                   const DeiTParams& params);

// Scaled dot-product attention over [N,T,D]; optionally exposes the
// post-softmax attention weights as [N*heads, T, T].
Tensor multi_head_attention(const Tensor& x, const DeiTBlockParams& block,
                            int num_heads, Tensor* attention_out = nullptr);

// Pre-norm residual block: x + MHSA(LN(x)), then x + MLP(LN(x)) with GELU.
Tensor encoder_block(const Tensor& x, const DeiTConfig& cfg,
                     const DeiTBlockParams& block);

// Full backbone; returns the class-token feature [N, D].
Tensor deit_forward(const Tensor& image, const DeiTConfig& cfg,
                    const DeiTParams& params);

// Closed-form parameter count of one backbone with this configuration.
std::int64_t deit_parameter_count(const DeiTConfig& cfg);

}  // namespace ewn
