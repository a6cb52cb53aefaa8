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

#include "ewn/params.hpp"

#include <stdexcept>

namespace ewn {

Tensor ParameterStore::add(const std::string& name, Tensor tensor, bool frozen) {
  if (by_name_.count(name)) {
    throw std::logic_error("parameter registered twice: " + name);
  }
  tensor.set_requires_grad(!frozen);
  order_.push_back(name);
  by_name_.emplace(name, tensor);
  return tensor;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) {
    throw std::out_of_range("no such parameter: " + name);
  }
  return it->second;
}

bool ParameterStore::contains(const std::string& name) const {
  return by_name_.count(name) != 0;
}

std::pair<std::int64_t, std::int64_t> ParameterStore::count() const {
  std::int64_t trainable = 0, frozen = 0;
  for (const std::string& name : order_) {
    const Tensor& t = by_name_.at(name);
    (t.requires_grad() ? trainable : frozen) += t.numel();
  }
  return {trainable, frozen};
}

void ParameterStore::zero_grads() {
  for (const std::string& name : order_) {
    by_name_.at(name).zero_grad();
  }
}

void ParameterStore::freeze_prefix(const std::string& prefix) {
  for (const std::string& name : order_) {
    if (name.starts_with(prefix)) {
      by_name_.at(name).set_requires_grad(false);
    }
  }
}

}  // namespace ewn
