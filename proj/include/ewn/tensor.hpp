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
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ewn/rng.hpp"

namespace ewn {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

enum class OpKind : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kAddBiasRows,
  kAddChannelBias,
  kMul,
  kMulBroadcast,
  kScale,
  kMatmul,
  kBmm,
  kConv2d,
  kSoftmax,
  kRelu,
  kGelu,
  kSigmoid,
  kLayerNorm,
  kPoolGlobal,
  kDropout,
  kConcat,
  kSlice,
  kPadEdge,
  kReshape,
  kPermute,
  kCrossEntropy,
  kSum,
  kMean,
};

const char* op_kind_name(OpKind k);

namespace detail {

// One node of the reverse-mode tape. Interior nodes are immutable after the
// producing op returns; only leaves may be written between steps.
struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  bool requires_grad = false;
  std::vector<float> grad;  // sized on first accumulation

  OpKind op = OpKind::kLeaf;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
  }
};

}  // namespace detail

// Shared-handle dense float32 tensor with optional autodiff tape linkage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> data,
                     bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::int64_t dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t numel() const { return impl_->numel(); }

  std::span<const float> data() const { return impl_->data; }
  // Leaf mutation only; interior nodes are frozen once produced.
  std::span<float> mutable_data();

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v);

  bool has_grad() const { return impl_->grad.size() == impl_->data.size(); }
  std::span<const float> grad() const;
  void zero_grad();

  // Reverse-mode sweep from a scalar. Accumulates (+=) into every
  // requires_grad tensor reachable through the tape.
  void backward() const;

  OpKind op() const { return impl_->op; }
  bool is_leaf() const { return impl_->op == OpKind::kLeaf; }

  float item() const;
  float at(std::initializer_list<std::int64_t> idx) const;

  void fill_uniform(Rng& rng, float lo, float hi);
  void fill_truncated_normal(Rng& rng, float stddev);

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl);

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

namespace detail {

Tensor make_node(Shape shape, std::vector<float> data, OpKind op,
                 std::vector<std::shared_ptr<TensorImpl>> parents,
                 std::function<void(TensorImpl&)> backward_fn);

bool grad_enabled();

}  // namespace detail

// Disables tape construction for the enclosing scope (inference paths and the
// finite-difference evaluations).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace ewn
