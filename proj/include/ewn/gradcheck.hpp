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

#include <functional>
#include <vector>

#include "ewn/rng.hpp"
#include "ewn/tensor.hpp"

namespace ewn {

// Compares reverse-mode gradients against central differences
// (f(x+eps) - f(x-eps)) / (2 eps), evaluated coordinate by coordinate on the
// given leaf tensors. f must rebuild its graph from the leaves on every call
// and return a scalar. Differences are accumulated in double.
//
// Returns the max over checked coordinates of
//   |analytic - numeric| / max(1, |analytic|, |numeric|),
// i.e. relative for large gradients and absolute near zero.
double finite_diff_check(const std::function<Tensor()>& f,
                         const std::vector<Tensor>& leaves, float eps);

// Same check restricted to `samples` coordinates drawn without replacement
// per leaf (proportionally to its size), for large parameter sets.
double finite_diff_check_sampled(const std::function<Tensor()>& f,
                                 const std::vector<Tensor>& leaves, float eps,
                                 int samples, Rng& rng);

// Convenience form for a function of a single tensor.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& point, float eps);

}  // namespace ewn
