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

#include "ewn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ewn {

namespace {

struct Coord {
  std::size_t leaf;
  std::size_t index;
};

double run_check(const std::function<Tensor()>& f,
                 const std::vector<Tensor>& leaves,
                 const std::vector<Coord>& coords, float eps) {
  for (const Tensor& t : leaves) {
    if (!t.defined() || !t.is_leaf()) {
      throw std::invalid_argument("finite_diff_check: all wrt tensors must be leaves");
    }
  }
  std::vector<Tensor> mut = leaves;
  for (Tensor& t : mut) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor loss = f();
  if (loss.numel() != 1) {
    throw std::invalid_argument("finite_diff_check: f must return a scalar");
  }
  loss.backward();
  std::vector<std::vector<float>> analytic(mut.size());
  for (std::size_t i = 0; i < mut.size(); ++i) {
    if (mut[i].has_grad()) {
      analytic[i].assign(mut[i].grad().begin(), mut[i].grad().end());
    } else {
      analytic[i].assign(static_cast<std::size_t>(mut[i].numel()), 0.0f);
    }
  }

  double worst = 0.0;
  {
    NoGradGuard no_grad;
    for (const Coord& c : coords) {
      auto data = mut[c.leaf].mutable_data();
      const float saved = data[c.index];
      data[c.index] = saved + eps;
      const double f_plus = static_cast<double>(f().item());
      data[c.index] = saved - eps;
      const double f_minus = static_cast<double>(f().item());
      data[c.index] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * static_cast<double>(eps));
      const double an = static_cast<double>(analytic[c.leaf][c.index]);
      const double denom = std::max({1.0, std::abs(an), std::abs(numeric)});
      worst = std::max(worst, std::abs(an - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace

double finite_diff_check(const std::function<Tensor()>& f,
                         const std::vector<Tensor>& leaves, float eps) {
  std::vector<Coord> coords;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(leaves[l].numel()); ++i) {
      coords.push_back({l, i});
    }
  }
  return run_check(f, leaves, coords, eps);
}

double finite_diff_check_sampled(const std::function<Tensor()>& f,
                                 const std::vector<Tensor>& leaves, float eps,
                                 int samples, Rng& rng) {
  std::int64_t total = 0;
  for (const Tensor& t : leaves) total += t.numel();
  std::vector<Coord> all;
  all.reserve(static_cast<std::size_t>(total));
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(leaves[l].numel()); ++i) {
      all.push_back({l, i});
    }
  }
  if (samples >= total) return run_check(f, leaves, all, eps);
  // Partial Fisher-Yates: the first `samples` entries form the sample.
  for (int i = 0; i < samples; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(total - i)));
    std::swap(all[static_cast<std::size_t>(i)], all[j]);
  }
  all.resize(static_cast<std::size_t>(samples));
  return run_check(f, leaves, all, eps);
}

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& point, float eps) {
  return finite_diff_check([&]() { return f(point); }, {point}, eps);
}

}  // namespace ewn
