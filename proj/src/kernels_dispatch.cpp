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

#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ewn::kernels {

// Defined in kernels_avx2.cpp; null when the TU was built without AVX2.
const KernelTable* avx2_table_impl();

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* pick_default() {
  const KernelTable* avx2 = avx2_table();
  if (const char* env = std::getenv("EWASTENET_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_table();
    if (std::strcmp(env, "avx2") == 0 && avx2) return avx2;
  }
  return avx2 ? avx2 : &scalar_table();
}

const KernelTable*& active_slot() {
  static const KernelTable* slot = pick_default();
  return slot;
}

int detect_threads() {
  if (const char* env = std::getenv("EWASTENET_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable* table = cpu_has_avx2() ? avx2_table_impl() : nullptr;
  return table;
}

const KernelTable& active() { return *active_slot(); }

void set_active(const char* name) {
  if (std::strcmp(name, "scalar") == 0) {
    active_slot() = &scalar_table();
    return;
  }
  if (std::strcmp(name, "avx2") == 0) {
    if (const KernelTable* t = avx2_table()) {
      active_slot() = t;
      return;
    }
    throw std::invalid_argument("kernel table 'avx2' is not available on this machine");
  }
  throw std::invalid_argument(std::string("unknown kernel table: ") + name);
}

int thread_count() {
  static const int n = detect_threads();
  return n;
}

void sgemm_parallel(bool trans_a, bool trans_b, int m, int n, int k,
                    const float* a, int lda, const float* b, int ldb, float* c,
                    int ldc, bool accumulate) {
  const KernelTable& t = active();
  const long long work = static_cast<long long>(m) * n * k;
  const int threads = thread_count();
  if (threads <= 1 || work < (1 << 18) || m < 2 * threads) {
    t.sgemm(trans_a, trans_b, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    return;
  }
  const int chunks = threads;
  std::vector<std::thread> pool;
  pool.reserve(chunks - 1);
  auto run = [&](int r0, int r1) {
    const int rows = r1 - r0;
    if (rows <= 0) return;
    // Row slice of op(a): with trans_a the slice is a column offset.
    const float* a_slice = trans_a ? a + r0 : a + static_cast<std::size_t>(r0) * lda;
    t.sgemm(trans_a, trans_b, rows, n, k, a_slice, lda, b, ldb,
            c + static_cast<std::size_t>(r0) * ldc, ldc, accumulate);
  };
  const int base = m / chunks;
  const int extra = m % chunks;
  int row = 0;
  std::vector<std::pair<int, int>> ranges;
  for (int i = 0; i < chunks; ++i) {
    const int len = base + (i < extra ? 1 : 0);
    ranges.emplace_back(row, row + len);
    row += len;
  }
  for (std::size_t i = 1; i < ranges.size(); ++i)
    pool.emplace_back(run, ranges[i].first, ranges[i].second);
  run(ranges[0].first, ranges[0].second);
  for (auto& th : pool) th.join();
}

}  // namespace ewn::kernels
