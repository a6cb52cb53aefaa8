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

#include <span>
#include <vector>

#include "ewn/rng.hpp"
#include "ewn/tensor.hpp"

namespace ewn {

enum class Padding { kSame, kValid };
enum class ActKind { kRelu, kGelu, kSigmoid };
enum class PoolKind { kAvg, kMax };
enum class PoolOver { kSpatial, kChannel };

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float alpha);

// x viewed as [R, C] rows with C == bias length; bias is added to every row.
Tensor add_bias_rows(const Tensor& x, const Tensor& bias);
// x is NCHW; bias has one entry per channel.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
// gate has the same rank as x with each extent either matching or 1.
Tensor mul_broadcast(const Tensor& x, const Tensor& gate);

Tensor matmul(const Tensor& a, const Tensor& b);
// a: [B,m,k] (or [B,k,m] when trans_a), b: [B,k,n] (or [B,n,k] when trans_b).
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a = false,
           bool trans_b = false);
// x: [R,in] rows, w: [in,out], b: [out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Cross-correlation over NCHW input with an OIKK kernel. Same padding is
// symmetric zero padding; for odd K and stride 1 it preserves spatial dims.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride = 1,
              int dilation = 1, Padding padding = Padding::kSame);
int conv_out_dim(int in, int kernel, int stride, int dilation, Padding padding);

// Max-subtracted softmax along `axis` (negative counts from the end).
Tensor softmax(const Tensor& x, int axis);

Tensor activation(const Tensor& x, ActKind kind);
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Normalizes the last dimension; gamma/beta must match its extent.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-5f);

// over=kSpatial: [N,C,H,W] -> [N,C,1,1]; over=kChannel: -> [N,1,H,W].
Tensor pool_global(const Tensor& x, PoolKind kind, PoolOver over);

// Inverted dropout: survivors are scaled by 1/(1-p) at training time so the
// inference path is the identity.
Tensor dropout(const Tensor& x, float p, bool training, Rng& rng);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length);
// Replicates the border pixels of an NCHW tensor `pad` steps outward.
Tensor pad_edge(const Tensor& x, int pad);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& dims);

// Mean of -log softmax(logits)[label] over rows. Labels must lie in [0, C).
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

std::vector<int> argmax_rows(const Tensor& x);
bool all_finite(const Tensor& x);

}  // namespace ewn
