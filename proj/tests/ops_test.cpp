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

#include "ewn/ops.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "ewn/gradcheck.hpp"
#include "ewn/rng.hpp"
#include "ewn/tensor.hpp"

using namespace ewn;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t = Tensor::zeros(std::move(shape));
  t.fill_uniform(rng, lo, hi);
  return t;
}

// Central differences are only valid at differentiable points, so tests of
// kinked ops resample until every kink input clears the probe radius.
bool min_abs_above(const Tensor& t, float margin) {
  for (const float v : t.data()) {
    if (std::abs(v) <= margin) return false;
  }
  return true;
}

// Smallest top-2 gap over pooling groups; max-pool is non-differentiable at
// ties.
float min_top2_gap(const Tensor& x, PoolOver over) {
  const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  float gap = 1e30f;
  auto probe = [&](auto value_at, std::int64_t count) {
    float best = -1e30f, second = -1e30f;
    for (std::int64_t i = 0; i < count; ++i) {
      const float v = value_at(i);
      if (v > best) {
        second = best;
        best = v;
      } else if (v > second) {
        second = v;
      }
    }
    gap = std::min(gap, best - second);
  };
  for (std::int64_t i = 0; i < n; ++i) {
    if (over == PoolOver::kSpatial) {
      for (std::int64_t cc = 0; cc < c; ++cc)
        probe([&](std::int64_t j) {
          return x.data()[static_cast<std::size_t>((i * c + cc) * hw + j)];
        }, hw);
    } else {
      for (std::int64_t j = 0; j < hw; ++j)
        probe([&](std::int64_t cc) {
          return x.data()[static_cast<std::size_t>((i * c + cc) * hw + j)];
        }, c);
    }
  }
  return gap;
}

}  // namespace

TEST_CASE("conv2d hand-computed examples") {
  // all-ones 3x3 image and kernel, same padding: center sees the full window
  Tensor img = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor ker = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor out = conv2d(img, ker, 1, 1, Padding::kSame);
  CHECK(out.shape() == Shape{1, 1, 3, 3});
  CHECK(out.at({0, 0, 1, 1}) == doctest::Approx(9.0f));
  CHECK(out.at({0, 0, 0, 0}) == doctest::Approx(4.0f));

  // 1x1 identity kernel passes input through
  Rng rng(7);
  Tensor x = rand_tensor({2, 1, 4, 5}, rng);
  Tensor id = Tensor::from({1, 1, 1, 1}, {1.0f});
  Tensor y = conv2d(x, id, 1, 1, Padding::kSame);
  CHECK(std::equal(y.data().begin(), y.data().end(), x.data().begin()));
}

TEST_CASE("conv2d receptive field and shape preservation") {
  // K=3, dilation 5: effective receptive field 3 + 2*4 = 11
  Tensor img = Tensor::full({1, 1, 11, 11}, 1.0f);
  Tensor ker = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor out = conv2d(img, ker, 1, 5, Padding::kValid);
  CHECK(out.shape() == Shape{1, 1, 1, 1});

  Rng rng(11);
  for (int dilation = 1; dilation <= 5; ++dilation) {
    Tensor x = rand_tensor({1, 2, 9, 13}, rng);
    Tensor k = rand_tensor({4, 2, 3, 3}, rng);
    Tensor y = conv2d(x, k, 1, dilation, Padding::kSame);
    CHECK(y.shape() == Shape{1, 4, 9, 13});
    CHECK(all_finite(y));
  }
}

TEST_CASE("conv2d rejects invalid arguments") {
  Tensor img = Tensor::zeros({1, 3, 4, 4});
  Tensor ker = Tensor::zeros({2, 2, 3, 3});
  CHECK_THROWS_WITH_AS(conv2d(img, ker),
                       doctest::Contains("[1,3,4,4]"), std::invalid_argument);
  Tensor ok = Tensor::zeros({2, 3, 3, 3});
  CHECK_THROWS_AS(conv2d(img, ok, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(img, ok, 1, 0), std::invalid_argument);
}

TEST_CASE("conv2d stride2 on even input keeps same-padding contract") {
  // same padding with stride: output dims are ceil(in/stride)
  Tensor x = Tensor::full({1, 1, 6, 6}, 1.0f);
  Tensor k = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor y = conv2d(x, k, 2, 1, Padding::kSame);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  Tensor v = conv2d(x, k, 2, 1, Padding::kValid);
  CHECK(v.shape() == Shape{1, 1, 2, 2});
}

TEST_CASE("matmul examples and errors") {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor r = matmul(eye, a);
  CHECK(std::equal(r.data().begin(), r.data().end(), a.data().begin()));

  Tensor ones = Tensor::from({2, 1}, {1, 1});
  Tensor p = matmul(a, ones);
  CHECK(p.at({0, 0}) == doctest::Approx(3.0f));
  CHECK(p.at({1, 0}) == doctest::Approx(7.0f));

  Tensor z = matmul(Tensor::zeros({3, 2}), a);
  for (float v : z.data()) CHECK(v == 0.0f);

  CHECK_THROWS_WITH_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 5})),
                       doctest::Contains("[2,3]"), std::invalid_argument);
}

TEST_CASE("bmm agrees with per-batch matmul for all transpose flags") {
  Rng rng(23);
  for (const bool ta : {false, true}) {
    for (const bool tb : {false, true}) {
      const int B = 3, m = 4, k = 5, n = 6;
      Tensor a = rand_tensor(ta ? Shape{B, k, m} : Shape{B, m, k}, rng);
      Tensor b = rand_tensor(tb ? Shape{B, n, k} : Shape{B, k, n}, rng);
      Tensor out = bmm(a, b, ta, tb);
      CHECK(out.shape() == Shape{B, m, n});
      for (int bi = 0; bi < B; ++bi) {
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) {
              const float av = ta ? a.at({bi, p, i}) : a.at({bi, i, p});
              const float bv = tb ? b.at({bi, j, p}) : b.at({bi, p, j});
              s += static_cast<double>(av) * bv;
            }
            CHECK(out.at({bi, i, j}) == doctest::Approx(s).epsilon(1e-4));
          }
        }
      }
    }
  }
}

TEST_CASE("softmax examples, stability and row-sum invariant") {
  Tensor u = softmax(Tensor::from({1, 4}, {0, 0, 0, 0}), -1);
  for (float v : u.data()) CHECK(v == doctest::Approx(0.25f));

  Tensor big = softmax(Tensor::from({1, 2}, {1000, 1000}), -1);
  CHECK(all_finite(big));
  CHECK(big.at({0, 0}) == doctest::Approx(0.5f));

  Tensor ln3 = softmax(Tensor::from({1, 2}, {0.0f, std::log(3.0f)}), -1);
  CHECK(ln3.at({0, 0}) == doctest::Approx(0.25f));
  CHECK(ln3.at({0, 1}) == doctest::Approx(0.75f));

  Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor x = rand_tensor({4, 9}, rng, -8.0f, 8.0f);
    Tensor y = softmax(x, 1);
    for (int i = 0; i < 4; ++i) {
      double s = 0.0;
      for (int j = 0; j < 9; ++j) {
        const float v = y.at({i, j});
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
        s += v;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  // non-terminal axis
  Tensor x3 = rand_tensor({2, 3, 4}, rng);
  Tensor y3 = softmax(x3, 1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int l = 0; l < 3; ++l) s += y3.at({i, l, j});
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("activation fixed points") {
  Tensor x = Tensor::from({4}, {-1.0f, 2.0f, 0.0f, -3.5f});
  Tensor r = relu(x);
  CHECK(r.at({0}) == 0.0f);
  CHECK(r.at({1}) == 2.0f);
  CHECK(sigmoid(Tensor::scalar(0.0f)).item() == doctest::Approx(0.5f));
  CHECK(gelu(Tensor::scalar(0.0f)).item() == 0.0f);
  // sigmoid stays in (0,1) and is stable at extremes
  Tensor s = sigmoid(Tensor::from({2}, {80.0f, -80.0f}));
  CHECK(s.at({0}) > 0.0f);
  CHECK(s.at({0}) <= 1.0f);
  CHECK(s.at({1}) > 0.0f);
  CHECK(s.at({1}) < 1e-6f);
}

TEST_CASE("layer_norm examples") {
  Tensor gamma = Tensor::full({3}, 1.0f);
  Tensor beta = Tensor::zeros({3});
  Tensor c = layer_norm(Tensor::full({2, 3}, 5.0f), gamma, beta, 1e-5f);
  for (float v : c.data()) CHECK(v == doctest::Approx(0.0f));

  Tensor g2 = Tensor::full({2}, 1.0f);
  Tensor b2 = Tensor::zeros({2});
  Tensor two = layer_norm(Tensor::from({1, 2}, {1, 3}), g2, b2, 0.0f);
  CHECK(two.at({0, 0}) == doctest::Approx(-1.0f));
  CHECK(two.at({0, 1}) == doctest::Approx(1.0f));

  Rng rng(41);
  Tensor x = rand_tensor({3, 4}, rng);
  Tensor g0 = Tensor::zeros({4});
  Tensor bb = rand_tensor({4}, rng);
  Tensor only_beta = layer_norm(x, g0, bb, 1e-5f);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(only_beta.at({i, j}) == doctest::Approx(bb.at({j})));
}

TEST_CASE("pool_global examples") {
  Tensor c = Tensor::full({2, 3, 4, 4}, 2.5f);
  for (auto kind : {PoolKind::kAvg, PoolKind::kMax}) {
    Tensor sp = pool_global(c, kind, PoolOver::kSpatial);
    CHECK(sp.shape() == Shape{2, 3, 1, 1});
    for (float v : sp.data()) CHECK(v == doctest::Approx(2.5f));
    Tensor ch = pool_global(c, kind, PoolOver::kChannel);
    CHECK(ch.shape() == Shape{2, 1, 4, 4});
    for (float v : ch.data()) CHECK(v == doctest::Approx(2.5f));
  }

  Tensor four = Tensor::from({1, 4, 1, 1}, {1, 2, 3, 4});
  CHECK(pool_global(four, PoolKind::kAvg, PoolOver::kChannel).item() ==
        doctest::Approx(2.5f));
  CHECK(pool_global(four, PoolKind::kMax, PoolOver::kChannel).item() ==
        doctest::Approx(4.0f));

  // max pooling invariant to duplicating the maximum
  Tensor a = Tensor::from({1, 1, 2, 2}, {1, 7, 3, 2});
  Tensor b = Tensor::from({1, 1, 2, 2}, {7, 7, 3, 2});
  CHECK(pool_global(a, PoolKind::kMax, PoolOver::kSpatial).item() ==
        pool_global(b, PoolKind::kMax, PoolOver::kSpatial).item());
}

TEST_CASE("dropout contract") {
  Rng rng(51);
  Tensor x = rand_tensor({4, 4}, rng);
  Tensor inference = dropout(x, 0.5f, false, rng);
  CHECK(inference.impl() == x.impl());  // identity, bit for bit

  Tensor p0 = dropout(x, 0.0f, true, rng);
  CHECK(p0.impl() == x.impl());

  CHECK_THROWS_AS(dropout(x, 1.0f, true, rng), std::invalid_argument);
  CHECK_THROWS_AS(dropout(x, -0.1f, true, rng), std::invalid_argument);

  Tensor ones = Tensor::full({1000000}, 1.0f);
  Rng drop_rng(99);
  Tensor dropped = dropout(ones, 0.3f, true, drop_rng);
  CHECK(mean(dropped).item() == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("concat and slice recover the originals bit-exactly") {
  Rng rng(61);
  Tensor a = rand_tensor({2, 3, 4}, rng);

  Tensor only = concat(std::vector<Tensor>{a}, 1);
  CHECK(std::equal(only.data().begin(), only.data().end(), a.data().begin()));

  Tensor l = rand_tensor({5, 64}, rng);
  Tensor r = rand_tensor({5, 64}, rng);
  Tensor both = concat(std::vector<Tensor>{l, r}, 1);
  CHECK(both.shape() == Shape{5, 128});

  for (int axis = 0; axis < 3; ++axis) {
    Tensor p1 = rand_tensor({2, 3, 4}, rng);
    Tensor p2 = rand_tensor({2, 3, 4}, rng);
    Tensor p3 = rand_tensor({2, 3, 4}, rng);
    Tensor cat = concat(std::vector<Tensor>{p1, p2, p3}, axis);
    const std::int64_t ext = p1.dim(axis);
    Tensor s1 = slice(cat, axis, 0, ext);
    Tensor s2 = slice(cat, axis, ext, ext);
    Tensor s3 = slice(cat, axis, 2 * ext, ext);
    CHECK(std::equal(s1.data().begin(), s1.data().end(), p1.data().begin()));
    CHECK(std::equal(s2.data().begin(), s2.data().end(), p2.data().begin()));
    CHECK(std::equal(s3.data().begin(), s3.data().end(), p3.data().begin()));
  }

  // channel concat of pyramid branch widths
  std::vector<Tensor> branches;
  for (const int f : {64, 32, 16, 8, 4}) branches.push_back(Tensor::zeros({1, f, 2, 2}));
  CHECK(concat(branches, 1).dim(1) == 124);

  CHECK_THROWS_AS(concat(std::vector<Tensor>{Tensor::zeros({2, 3}), Tensor::zeros({3, 3})}, 1),
                  std::invalid_argument);
}

TEST_CASE("reshape and permute round-trip") {
  Rng rng(71);
  Tensor x = rand_tensor({2, 3, 4}, rng);
  Tensor r = reshape(x, {4, 6});
  CHECK(std::equal(r.data().begin(), r.data().end(), x.data().begin()));
  CHECK_THROWS_AS(reshape(x, {5, 5}), std::invalid_argument);

  Tensor p = permute(x, {2, 0, 1});
  CHECK(p.shape() == Shape{4, 2, 3});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int l = 0; l < 4; ++l) CHECK(p.at({l, i, j}) == x.at({i, j, l}));
  Tensor back = permute(p, {1, 2, 0});
  CHECK(std::equal(back.data().begin(), back.data().end(), x.data().begin()));
}

TEST_CASE("mul_broadcast matches an explicit composed reference") {
  Rng rng(81);
  Tensor x = rand_tensor({2, 4, 3, 3}, rng);
  Tensor spatial_gate = rand_tensor({2, 1, 3, 3}, rng, 0.0f, 1.0f);
  Tensor channel_gate = rand_tensor({2, 4, 1, 1}, rng, 0.0f, 1.0f);
  Tensor y = mul_broadcast(mul_broadcast(x, spatial_gate), channel_gate);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 4; ++c)
      for (int h = 0; h < 3; ++h)
        for (int w = 0; w < 3; ++w) {
          const float expect = x.at({n, c, h, w}) * spatial_gate.at({n, 0, h, w}) *
                               channel_gate.at({n, c, 0, 0});
          CHECK(y.at({n, c, h, w}) == doctest::Approx(expect));
        }
}

TEST_CASE("cross_entropy examples") {
  // strongly correct logits: loss goes to zero
  Tensor good = Tensor::from({1, 3}, {30.0f, 0.0f, 0.0f});
  CHECK(cross_entropy(good, {0}).item() == doctest::Approx(0.0).epsilon(1e-6));

  Tensor uniform = Tensor::zeros({2, 8});
  CHECK(cross_entropy(uniform, {3, 5}).item() ==
        doctest::Approx(std::log(8.0)).epsilon(1e-6));

  // invariant to per-row constant shifts
  Rng rng(91);
  Tensor logits = rand_tensor({4, 6}, rng);
  std::vector<int> labels = {1, 0, 5, 3};
  const float base = cross_entropy(logits, labels).item();
  Tensor shifted = add(logits, Tensor::full({4, 6}, 13.5f));
  CHECK(cross_entropy(shifted, labels).item() == doctest::Approx(base).epsilon(1e-4));

  CHECK_THROWS_AS(cross_entropy(logits, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(logits, {1, 2, 3, 6}), std::invalid_argument);
}

TEST_CASE("backward basics") {
  // f(x) = sum(x^2) has gradient 2x
  Rng rng(103);
  Tensor x = rand_tensor({5}, rng);
  x.set_requires_grad(true);
  Tensor loss = sum(mul(x, x));
  loss.backward();
  for (int i = 0; i < 5; ++i)
    CHECK(x.grad()[static_cast<std::size_t>(i)] ==
          doctest::Approx(2.0f * x.at({i})));

  // unused parameter receives no gradient
  Tensor unused = rand_tensor({3}, rng);
  unused.set_requires_grad(true);
  Tensor loss2 = sum(x);
  loss2.backward();
  CHECK_FALSE(unused.has_grad());

  // non-scalar loss is rejected
  Tensor vec = rand_tensor({3}, rng);
  vec.set_requires_grad(true);
  Tensor y = mul(vec, vec);
  CHECK_THROWS_AS(y.backward(), std::invalid_argument);

  // diamond-shaped graph accumulates through both paths exactly once
  Tensor d = Tensor::scalar(3.0f, true);
  Tensor s = add(d, d);           // 2d
  Tensor q = mul(s, s);           // 4d^2
  q.backward();
  CHECK(d.grad()[0] == doctest::Approx(8.0f * 3.0f));

  // gradients accumulate across backward calls until zero_grad
  Tensor w = Tensor::scalar(2.0f, true);
  Tensor l1 = mul(w, w);
  l1.backward();
  const float g1 = w.grad()[0];
  Tensor l2 = mul(w, w);
  l2.backward();
  CHECK(w.grad()[0] == doctest::Approx(2.0f * g1));
  w.zero_grad();
  CHECK(w.grad()[0] == 0.0f);
}

TEST_CASE("finite_diff_check: linear functions are exact") {
  // exactly representable values and eps keep the central difference exact
  Tensor x = Tensor::from({4}, {0.25f, -0.5f, 1.0f, 2.0f});
  const double err = finite_diff_check(
      [](const Tensor& t) { return sum(t); }, x, 0.0009765625f /* 2^-10 */);
  CHECK(err < 1e-6);
}

TEST_CASE("finite_diff_check: per-op gradients") {
  Rng rng(113);
  const float eps = 1e-3f;

  SUBCASE("matmul") {
    for (int rep = 0; rep < 10; ++rep) {
      Tensor a = rand_tensor({3, 4}, rng);
      Tensor b = rand_tensor({4, 2}, rng);
      const double err =
          finite_diff_check([&]() { return sum(matmul(a, b)); }, {a, b}, eps);
      CHECK(err < 1e-3);
    }
  }
  SUBCASE("bmm with transposes") {
    for (const bool ta : {false, true})
      for (const bool tb : {false, true}) {
        Tensor a = rand_tensor(ta ? Shape{2, 4, 3} : Shape{2, 3, 4}, rng);
        Tensor b = rand_tensor(tb ? Shape{2, 5, 4} : Shape{2, 4, 5}, rng);
        Tensor w = rand_tensor({2, 3, 5}, rng);
        const double err = finite_diff_check(
            [&]() { return sum(mul(bmm(a, b, ta, tb), w)); }, {a, b}, eps);
        CHECK(err < 1e-3);
      }
  }
  SUBCASE("conv2d composite with relu") {
    // The signed weighting keeps |f| small: the centered difference of a
    // float32 objective carries noise ~ulp(|f|)/2eps.
    for (int rep = 0; rep < 10; ++rep) {
      const int dilation = 1 + rep % 3;
      Tensor x, k;
      do {
        x = rand_tensor({1, 2, 5, 5}, rng);
        k = rand_tensor({3, 2, 3, 3}, rng);
      } while (!min_abs_above(conv2d(x, k, 1, dilation, Padding::kSame), 0.02f));
      Tensor w = rand_tensor({1, 3, 5, 5}, rng);
      const double err = finite_diff_check(
          [&]() {
            return sum(mul(relu(conv2d(x, k, 1, dilation, Padding::kSame)), w));
          },
          {x, k}, eps);
      CHECK(err < 1e-3);
    }
  }
  SUBCASE("conv2d strided valid") {
    Tensor x = rand_tensor({2, 3, 8, 8}, rng);
    Tensor k = rand_tensor({4, 3, 4, 4}, rng);
    Tensor w = rand_tensor({2, 4, 2, 2}, rng);
    const double err = finite_diff_check(
        [&]() { return sum(mul(conv2d(x, k, 4, 1, Padding::kValid), w)); },
        {x, k}, eps);
    CHECK(err < 1e-3);
  }
  SUBCASE("softmax + cross_entropy") {
    for (int rep = 0; rep < 10; ++rep) {
      Tensor logits = rand_tensor({3, 5}, rng, -2.0f, 2.0f);
      const std::vector<int> labels = {static_cast<int>(rng.next_below(5)),
                                       static_cast<int>(rng.next_below(5)),
                                       static_cast<int>(rng.next_below(5))};
      const double err = finite_diff_check(
          [&]() { return cross_entropy(logits, labels); }, {logits}, eps);
      CHECK(err < 1e-3);
    }
  }
  SUBCASE("softmax weighted sum") {
    for (int rep = 0; rep < 10; ++rep) {
      Tensor x = rand_tensor({2, 6}, rng, -2.0f, 2.0f);
      Tensor w = rand_tensor({2, 6}, rng);
      const double err = finite_diff_check(
          [&]() { return sum(mul(softmax(x, -1), w)); }, {x}, eps);
      CHECK(err < 1e-3);
    }
  }
  SUBCASE("gelu and sigmoid") {
    for (int rep = 0; rep < 10; ++rep) {
      Tensor x = rand_tensor({7}, rng, -2.0f, 2.0f);
      Tensor w = rand_tensor({7}, rng);
      CHECK(finite_diff_check([&]() { return sum(mul(gelu(x), w)); }, {x}, eps) < 1e-3);
      CHECK(finite_diff_check([&]() { return sum(mul(sigmoid(x), w)); }, {x}, eps) < 1e-3);
    }
  }
  SUBCASE("layer_norm") {
    for (int rep = 0; rep < 10; ++rep) {
      Tensor x = rand_tensor({3, 6}, rng);
      Tensor g = rand_tensor({6}, rng, 0.5f, 1.5f);
      Tensor b = rand_tensor({6}, rng);
      Tensor w = rand_tensor({3, 6}, rng);
      const double err = finite_diff_check(
          [&]() { return sum(mul(layer_norm(x, g, b, 1e-5f), w)); }, {x, g, b}, eps);
      CHECK(err < 1e-3);
    }
  }
  SUBCASE("pooling") {
    for (auto over : {PoolOver::kSpatial, PoolOver::kChannel}) {
      Tensor x = rand_tensor({2, 3, 4, 4}, rng);
      while (min_top2_gap(x, over) < 0.02f) x = rand_tensor({2, 3, 4, 4}, rng);
      Tensor wa = rand_tensor(over == PoolOver::kSpatial ? Shape{2, 3, 1, 1}
                                                         : Shape{2, 1, 4, 4},
                              rng);
      CHECK(finite_diff_check(
                [&]() { return sum(mul(pool_global(x, PoolKind::kAvg, over), wa)); },
                {x}, eps) < 1e-3);
      CHECK(finite_diff_check(
                [&]() { return sum(mul(pool_global(x, PoolKind::kMax, over), wa)); },
                {x}, eps) < 1e-3);
    }
  }
  SUBCASE("dropout (training mode, fixed stream)") {
    Tensor x = rand_tensor({4, 4}, rng);
    const double err = finite_diff_check(
        [&]() {
          Rng local(12345);
          return sum(dropout(x, 0.4f, true, local));
        },
        {x}, eps);
    CHECK(err < 1e-3);
  }
  SUBCASE("concat, slice, permute, broadcast") {
    Tensor a = rand_tensor({2, 3}, rng);
    Tensor b = rand_tensor({2, 2}, rng);
    Tensor w = rand_tensor({2, 5}, rng);
    CHECK(finite_diff_check(
              [&]() {
                return sum(mul(concat(std::vector<Tensor>{a, b}, 1), w));
              },
              {a, b}, eps) < 1e-3);

    Tensor x = rand_tensor({2, 3, 4, 2}, rng);
    Tensor g = rand_tensor({2, 1, 4, 2}, rng);
    CHECK(finite_diff_check(
              [&]() {
                Tensor sliced = slice(mul_broadcast(x, g), 1, 1, 2);
                return sum(permute(sliced, {3, 1, 0, 2}));
              },
              {x, g}, eps) < 1e-3);
  }
  SUBCASE("pad_edge") {
    Tensor x = rand_tensor({1, 2, 3, 4}, rng);
    Tensor w = rand_tensor({1, 2, 7, 8}, rng);
    CHECK(finite_diff_check([&]() { return sum(mul(pad_edge(x, 2), w)); }, {x},
                            eps) < 1e-3);
    // replication reads border pixels multiple times
    Tensor p = pad_edge(Tensor::from({1, 1, 1, 1}, {3.5f}), 1);
    CHECK(p.shape() == Shape{1, 1, 3, 3});
    for (float v : p.data()) CHECK(v == 3.5f);
  }
  SUBCASE("bias adds") {
    Tensor x = rand_tensor({3, 4}, rng);
    Tensor b = rand_tensor({4}, rng);
    Tensor w = rand_tensor({3, 4}, rng);
    CHECK(finite_diff_check([&]() { return sum(mul(add_bias_rows(x, b), w)); },
                            {x, b}, eps) < 1e-3);
    Tensor img = rand_tensor({2, 3, 3, 3}, rng);
    Tensor cb = rand_tensor({3}, rng);
    Tensor wi = rand_tensor({2, 3, 3, 3}, rng);
    CHECK(finite_diff_check(
              [&]() { return sum(mul(add_channel_bias(img, cb), wi)); },
              {img, cb}, eps) < 1e-3);
  }
}

TEST_CASE("forward ops stay finite on extreme finite inputs") {
  Rng rng(997);
  Tensor wide = rand_tensor({2, 3, 6, 6}, rng, -1e3f, 1e3f);
  Tensor k = rand_tensor({4, 3, 3, 3}, rng, -10.0f, 10.0f);
  CHECK(all_finite(conv2d(wide, k)));
  CHECK(all_finite(relu(wide)));
  CHECK(all_finite(gelu(rand_tensor({64}, rng, -50.0f, 50.0f))));
  CHECK(all_finite(sigmoid(rand_tensor({64}, rng, -200.0f, 200.0f))));
  CHECK(all_finite(softmax(rand_tensor({4, 7}, rng, -500.0f, 500.0f), -1)));

  // constant rows: layer_norm's eps keeps the inverse std finite
  Tensor g = Tensor::full({5}, 1.0f);
  Tensor b = Tensor::zeros({5});
  CHECK(all_finite(layer_norm(Tensor::full({3, 5}, 123.0f), g, b, 1e-5f)));

  Tensor logits = rand_tensor({3, 8}, rng, -300.0f, 300.0f);
  CHECK(all_finite(cross_entropy(logits, {0, 4, 7})));
}

TEST_CASE("forward determinism: identical graphs produce identical bits") {
  auto build = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = rand_tensor({2, 3, 6, 6}, rng);
    Tensor k = rand_tensor({4, 3, 3, 3}, rng);
    Tensor g = rand_tensor({4}, rng, 0.5f, 1.5f);
    Tensor b = rand_tensor({4}, rng);
    Tensor h = relu(conv2d(x, k, 1, 2, Padding::kSame));
    Tensor pooled = pool_global(h, PoolKind::kAvg, PoolOver::kSpatial);
    Tensor flat = reshape(pooled, {2, 4});
    return softmax(layer_norm(flat, g, b, 1e-5f), -1);
  };
  Tensor a = build(17);
  Tensor b = build(17);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  CHECK(all_finite(a));
}
