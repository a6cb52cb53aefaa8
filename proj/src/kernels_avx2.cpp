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

#include "ewn/kernels.hpp"

#if defined(EWN_HAVE_AVX2_BUILD) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <vector>

namespace ewn::kernels {
namespace {

// C tile of 4 rows x 16 columns held in registers; k is the inner loop.
// A is broadcast per row, B rows are loaded as two ymm vectors.
void gemm_nn_tile(int m, int n, int k, const float* a, int lda, const float* b,
                  int ldb, float* c, int ldc, bool accumulate) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    int j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256 c00, c01, c10, c11, c20, c21, c30, c31;
      if (accumulate) {
        c00 = _mm256_loadu_ps(c + (i + 0) * ldc + j);
        c01 = _mm256_loadu_ps(c + (i + 0) * ldc + j + 8);
        c10 = _mm256_loadu_ps(c + (i + 1) * ldc + j);
        c11 = _mm256_loadu_ps(c + (i + 1) * ldc + j + 8);
        c20 = _mm256_loadu_ps(c + (i + 2) * ldc + j);
        c21 = _mm256_loadu_ps(c + (i + 2) * ldc + j + 8);
        c30 = _mm256_loadu_ps(c + (i + 3) * ldc + j);
        c31 = _mm256_loadu_ps(c + (i + 3) * ldc + j + 8);
      } else {
        c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_ps();
      }
      for (int p = 0; p < k; ++p) {
        const __m256 b0 = _mm256_loadu_ps(b + p * ldb + j);
        const __m256 b1 = _mm256_loadu_ps(b + p * ldb + j + 8);
        const __m256 a0 = _mm256_set1_ps(a[(i + 0) * lda + p]);
        const __m256 a1 = _mm256_set1_ps(a[(i + 1) * lda + p]);
        const __m256 a2 = _mm256_set1_ps(a[(i + 2) * lda + p]);
        const __m256 a3 = _mm256_set1_ps(a[(i + 3) * lda + p]);
        c00 = _mm256_fmadd_ps(a0, b0, c00);
        c01 = _mm256_fmadd_ps(a0, b1, c01);
        c10 = _mm256_fmadd_ps(a1, b0, c10);
        c11 = _mm256_fmadd_ps(a1, b1, c11);
        c20 = _mm256_fmadd_ps(a2, b0, c20);
        c21 = _mm256_fmadd_ps(a2, b1, c21);
        c30 = _mm256_fmadd_ps(a3, b0, c30);
        c31 = _mm256_fmadd_ps(a3, b1, c31);
      }
      _mm256_storeu_ps(c + (i + 0) * ldc + j, c00);
      _mm256_storeu_ps(c + (i + 0) * ldc + j + 8, c01);
      _mm256_storeu_ps(c + (i + 1) * ldc + j, c10);
      _mm256_storeu_ps(c + (i + 1) * ldc + j + 8, c11);
      _mm256_storeu_ps(c + (i + 2) * ldc + j, c20);
      _mm256_storeu_ps(c + (i + 2) * ldc + j + 8, c21);
      _mm256_storeu_ps(c + (i + 3) * ldc + j, c30);
      _mm256_storeu_ps(c + (i + 3) * ldc + j + 8, c31);
    }
    for (; j < n; ++j) {
      for (int r = 0; r < 4; ++r) {
        float acc = accumulate ? c[(i + r) * ldc + j] : 0.0f;
        for (int p = 0; p < k; ++p) acc += a[(i + r) * lda + p] * b[p * ldb + j];
        c[(i + r) * ldc + j] = acc;
      }
    }
  }
  for (; i < m; ++i) {
    int j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256 acc = accumulate ? _mm256_loadu_ps(c + i * ldc + j)
                              : _mm256_setzero_ps();
      for (int p = 0; p < k; ++p) {
        acc = _mm256_fmadd_ps(_mm256_set1_ps(a[i * lda + p]),
                              _mm256_loadu_ps(b + p * ldb + j), acc);
      }
      _mm256_storeu_ps(c + i * ldc + j, acc);
    }
    for (; j < n; ++j) {
      float acc = accumulate ? c[i * ldc + j] : 0.0f;
      for (int p = 0; p < k; ++p) acc += a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] = acc;
    }
  }
}

// Transposed operands are materialized into scratch so the NN tile kernel can
// run on contiguous rows.
void sgemm_avx2(bool trans_a, bool trans_b, int m, int n, int k,
                const float* a, int lda, const float* b, int ldb, float* c,
                int ldc, bool accumulate) {
  thread_local std::vector<float> scratch_a;
  thread_local std::vector<float> scratch_b;
  if (trans_a) {
    scratch_a.resize(static_cast<std::size_t>(m) * k);
    for (int p = 0; p < k; ++p)
      for (int i = 0; i < m; ++i)
        scratch_a[static_cast<std::size_t>(i) * k + p] = a[p * lda + i];
    a = scratch_a.data();
    lda = k;
  }
  if (trans_b) {
    scratch_b.resize(static_cast<std::size_t>(k) * n);
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < k; ++p)
        scratch_b[static_cast<std::size_t>(p) * n + j] = b[j * ldb + p];
    b = scratch_b.data();
    ldb = n;
  }
  gemm_nn_tile(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void add_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i),
                                            _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i),
                                            _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

// mul+add instead of fma so the result is bit-identical to the scalar table.
void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(float alpha, const float* x, float* out, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

void relu_avx2(const float* x, float* out, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_avx2(const float* x, const float* dy, float* dx,
                        std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 gated = _mm256_and_ps(mask, _mm256_loadu_ps(dy + i));
    _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), gated));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0f) dx[i] += dy[i];
  }
}

float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_hadd_ps(lo, lo);
  lo = _mm_hadd_ps(lo, lo);
  return _mm_cvtss_f32(lo);
}

float reduce_sum_avx2(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

float reduce_max_avx2(const float* x, std::size_t n) {
  float m = x[0];
  std::size_t i = 0;
  if (n >= 8) {
    __m256 acc = _mm256_loadu_ps(x);
    for (i = 8; i + 8 <= n; i += 8)
      acc = _mm256_max_ps(acc, _mm256_loadu_ps(x + i));
    alignas(32) float lanes[8];
    _mm256_store_ps(lanes, acc);
    m = lanes[0];
    for (int l = 1; l < 8; ++l) {
      if (lanes[l] > m) m = lanes[l];
    }
  }
  for (; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
  float s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

const KernelTable* avx2_table_impl() {
  static const KernelTable table = {
      "avx2",       sgemm_avx2,         add_avx2,
      mul_avx2,     axpy_avx2,          scale_avx2,
      relu_avx2,    relu_backward_avx2, reduce_sum_avx2,
      reduce_max_avx2, dot_avx2,
  };
  return &table;
}

}  // namespace ewn::kernels

#else

namespace ewn::kernels {
const KernelTable* avx2_table_impl() { return nullptr; }
}  // namespace ewn::kernels

#endif
