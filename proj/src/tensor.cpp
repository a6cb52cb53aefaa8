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

#include "ewn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace ewn {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (const std::int64_t d : s) n *= d;
  return n;
}

const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kAddBiasRows: return "add_bias_rows";
    case OpKind::kAddChannelBias: return "add_channel_bias";
    case OpKind::kMul: return "mul";
    case OpKind::kMulBroadcast: return "mul_broadcast";
    case OpKind::kScale: return "scale";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kBmm: return "bmm";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kRelu: return "relu";
    case OpKind::kGelu: return "gelu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kPoolGlobal: return "pool_global";
    case OpKind::kDropout: return "dropout";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kPadEdge: return "pad_edge";
    case OpKind::kReshape: return "reshape";
    case OpKind::kPermute: return "permute";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
  }
  return "?";
}

namespace detail {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

Tensor make_node(Shape shape, std::vector<float> data, OpKind op,
                 std::vector<std::shared_ptr<TensorImpl>> parents,
                 std::function<void(TensorImpl&)> backward_fn) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  if (shape_numel(impl->shape) != impl->numel()) {
    throw std::logic_error("make_node: shape/data size mismatch");
  }
  bool rg = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) rg = rg || p->requires_grad;
  }
  if (rg) {
    impl->requires_grad = true;
    impl->op = op;
    impl->parents = std::move(parents);
    impl->backward_fn = std::move(backward_fn);
  }
  return Tensor::wrap(std::move(impl));
}

}  // namespace detail

NoGradGuard::NoGradGuard() : previous_(detail::g_grad_enabled) {
  detail::g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { detail::g_grad_enabled = previous_; }

Tensor Tensor::wrap(std::shared_ptr<detail::TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  const std::int64_t n = shape_numel(shape);
  if (n < 0) throw std::invalid_argument("tensor shape has negative extent: " + shape_str(shape));
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<std::size_t>(n), value);
  impl->requires_grad = requires_grad;
  return wrap(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<float> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return wrap(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

std::span<float> Tensor::mutable_data() {
  if (!is_leaf()) {
    throw std::logic_error("mutable_data: tensors produced by ops are immutable");
  }
  return impl_->data;
}

void Tensor::set_requires_grad(bool v) {
  if (!is_leaf()) throw std::logic_error("set_requires_grad: only valid on leaves");
  impl_->requires_grad = v;
}

std::span<const float> Tensor::grad() const {
  if (!has_grad()) {
    throw std::logic_error("grad: no gradient populated for this tensor");
  }
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_->grad.size() == impl_->data.size()) {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
  }
}

float Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item: tensor has " + std::to_string(numel()) +
                                " elements, expected 1");
  }
  return impl_->data[0];
}

float Tensor::at(std::initializer_list<std::int64_t> idx) const {
  if (static_cast<int>(idx.size()) != ndim()) {
    throw std::invalid_argument("at: rank mismatch");
  }
  std::int64_t off = 0;
  int d = 0;
  for (const std::int64_t i : idx) {
    if (i < 0 || i >= impl_->shape[static_cast<std::size_t>(d)]) {
      throw std::out_of_range("at: index out of range");
    }
    off = off * impl_->shape[static_cast<std::size_t>(d)] + i;
    ++d;
  }
  return impl_->data[static_cast<std::size_t>(off)];
}

void Tensor::fill_uniform(Rng& rng, float lo, float hi) {
  for (float& v : mutable_data()) v = rng.uniform(lo, hi);
}

void Tensor::fill_truncated_normal(Rng& rng, float stddev) {
  for (float& v : mutable_data()) v = rng.truncated_normal(stddev);
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(shape()));
  }
  if (!impl_->requires_grad) return;

  // Iterative post-order DFS; reverse-post-order is a reverse topological
  // order of the DAG, so each node's backward runs after all its consumers.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> visited;
  struct Frame {
    detail::TensorImpl* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({impl_.get(), 0});
  visited.insert(impl_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::TensorImpl* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  impl_->ensure_grad();
  impl_->grad[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

}  // namespace ewn
