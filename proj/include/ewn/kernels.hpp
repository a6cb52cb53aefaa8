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

#include <cstddef>

namespace ewn::kernels {

// Single-precision kernels over packed row-major buffers. Every entry has a
// scalar reference implementation; wider ISAs provide variants that are
// selected once at startup from CPU capabilities. The selection can be forced
// with EWASTENET_KERNELS=scalar|avx2.
//
// Elementwise entries (add, mul, axpy, scale, relu, relu_backward) are
// bit-identical across tables. Reductions and sgemm may differ in summation
// order and are equivalence-tested against a double-precision reference.
struct KernelTable {
  const char* name;

  // c[m,n] (+)= op(a)[m,k] * op(b)[k,n]. op(x) transposes when the flag is
  // set; lda/ldb/ldc are leading dimensions of the stored (untransposed)
  // buffers.
  void (*sgemm)(bool trans_a, bool trans_b, int m, int n, int k,
                const float* a, int lda, const float* b, int ldb, float* c,
                int ldc, bool accumulate);

  void (*add)(const float* a, const float* b, float* out, std::size_t n);
  void (*mul)(const float* a, const float* b, float* out, std::size_t n);
  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  void (*scale)(float alpha, const float* x, float* out, std::size_t n);
  void (*relu)(const float* x, float* out, std::size_t n);
  // dx += dy where x > 0
  void (*relu_backward)(const float* x, const float* dy, float* dx,
                        std::size_t n);
  float (*reduce_sum)(const float* x, std::size_t n);
  float (*reduce_max)(const float* x, std::size_t n);  // requires n >= 1
  float (*dot)(const float* a, const float* b, std::size_t n);
};

const KernelTable& scalar_table();

// Null when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table();

const KernelTable& active();

// Force a table by name ("scalar" or "avx2"). Throws std::invalid_argument
// on an unknown or unavailable name. Intended for tests.
void set_active(const char* name);

// Number of worker threads used by sgemm_parallel. Controlled by
// EWASTENET_THREADS, defaults to the hardware concurrency.
int thread_count();

// Row-partitioned multithreaded sgemm on the active table. Each output row is
// produced by exactly one thread with the same per-row arithmetic as the
// single-threaded kernel, so results do not depend on the thread count.
void sgemm_parallel(bool trans_a, bool trans_b, int m, int n, int k,
                    const float* a, int lda, const float* b, int ldb, float* c,
                    int ldc, bool accumulate);

}  // namespace ewn::kernels
