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
#include <unordered_map>
#include <utility>
#include <vector>

#include "ewn/tensor.hpp"

namespace ewn {

// Named trainable state. Names are dot-separated hierarchies
// (e.g. edge.deit.block0.attn.qkv.weight) and registration order is the
// serialization order. Frozen tensors (requires_grad == false) are carried
// through checkpoints but never updated.
class ParameterStore {
 public:
  Tensor add(const std::string& name, Tensor tensor, bool frozen = false);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  // (trainable, frozen) element counts.
  std::pair<std::int64_t, std::int64_t> count() const;

  void zero_grads();
  // Marks every tensor whose name starts with `prefix` as frozen.
  void freeze_prefix(const std::string& prefix);

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> by_name_;
};

}  // namespace ewn
