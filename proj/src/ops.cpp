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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

#include "ewn/kernels.hpp"

namespace ewn {

namespace {

using detail::TensorImpl;
using Impl = std::shared_ptr<TensorImpl>;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void acc(float* dst, const float* src, std::size_t n) {
  kernels::active().axpy(1.0f, src, dst, n);
}

void acc_mul(float* dst, const float* a, const float* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += a[i] * b[i];
}

std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size());
  std::int64_t acc_stride = 1;
  for (int d = static_cast<int>(s.size()) - 1; d >= 0; --d) {
    st[static_cast<std::size_t>(d)] = acc_stride;
    acc_stride *= s[static_cast<std::size_t>(d)];
  }
  return st;
}

int normalize_axis(int axis, int rank, const char* op) {
  const int a = axis < 0 ? axis + rank : axis;
  require(a >= 0 && a < rank, std::string(op) + ": axis " + std::to_string(axis) +
                                  " out of range for rank " + std::to_string(rank));
  return a;
}

// Deterministic batch-parallel helper: fixed chunking, one writer per item.
void parallel_chunks(std::int64_t n, std::int64_t work_per_item,
                     const std::function<void(std::int64_t, std::int64_t)>& fn) {
  const int threads = kernels::thread_count();
  if (threads <= 1 || n < 2 || n * work_per_item < (1 << 18)) {
    fn(0, n);
    return;
  }
  const int chunks = static_cast<int>(std::min<std::int64_t>(threads, n));
  std::vector<std::thread> pool;
  const std::int64_t base = n / chunks;
  const std::int64_t extra = n % chunks;
  std::int64_t begin = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> ranges;
  for (int i = 0; i < chunks; ++i) {
    const std::int64_t len = base + (i < extra ? 1 : 0);
    ranges.emplace_back(begin, begin + len);
    begin += len;
  }
  for (std::size_t i = 1; i < ranges.size(); ++i)
    pool.emplace_back(fn, ranges[i].first, ranges[i].second);
  fn(ranges[0].first, ranges[0].second);
  for (auto& t : pool) t.join();
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
  std::vector<float> out(static_cast<std::size_t>(a.numel()));
  kernels::active().add(a.data().data(), b.data().data(), out.data(), out.size());
  Impl ai = a.impl(), bi = b.impl();
  return detail::make_node(a.shape(), std::move(out), OpKind::kAdd, {ai, bi},
                           [ai, bi](TensorImpl& self) {
                             if (ai->requires_grad) {
                               ai->ensure_grad();
                               acc(ai->grad.data(), self.grad.data(), self.grad.size());
                             }
                             if (bi->requires_grad) {
                               bi->ensure_grad();
                               acc(bi->grad.data(), self.grad.data(), self.grad.size());
                             }
                           });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub: shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
  std::vector<float> out(static_cast<std::size_t>(a.numel()));
  const auto* pa = a.data().data();
  const auto* pb = b.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
  Impl ai = a.impl(), bi = b.impl();
  return detail::make_node(a.shape(), std::move(out), OpKind::kSub, {ai, bi},
                           [ai, bi](TensorImpl& self) {
                             if (ai->requires_grad) {
                               ai->ensure_grad();
                               acc(ai->grad.data(), self.grad.data(), self.grad.size());
                             }
                             if (bi->requires_grad) {
                               bi->ensure_grad();
                               kernels::active().axpy(-1.0f, self.grad.data(),
                                                      bi->grad.data(), self.grad.size());
                             }
                           });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
  std::vector<float> out(static_cast<std::size_t>(a.numel()));
  kernels::active().mul(a.data().data(), b.data().data(), out.data(), out.size());
  Impl ai = a.impl(), bi = b.impl();
  return detail::make_node(a.shape(), std::move(out), OpKind::kMul, {ai, bi},
                           [ai, bi](TensorImpl& self) {
                             if (ai->requires_grad) {
                               ai->ensure_grad();
                               acc_mul(ai->grad.data(), self.grad.data(),
                                       bi->data.data(), self.grad.size());
                             }
                             if (bi->requires_grad) {
                               bi->ensure_grad();
                               acc_mul(bi->grad.data(), self.grad.data(),
                                       ai->data.data(), self.grad.size());
                             }
                           });
}

Tensor scale(const Tensor& x, float alpha) {
  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  kernels::active().scale(alpha, x.data().data(), out.data(), out.size());
  Impl xi = x.impl();
  return detail::make_node(x.shape(), std::move(out), OpKind::kScale, {xi},
                           [xi, alpha](TensorImpl& self) {
                             if (!xi->requires_grad) return;
                             xi->ensure_grad();
                             kernels::active().axpy(alpha, self.grad.data(),
                                                    xi->grad.data(), self.grad.size());
                           });
}

Tensor add_bias_rows(const Tensor& x, const Tensor& bias) {
  const std::int64_t c = bias.numel();
  require(c > 0 && x.numel() % c == 0,
          "add_bias_rows: bias length " + std::to_string(c) +
              " does not divide input " + shape_str(x.shape()));
  const std::int64_t rows = x.numel() / c;
  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  const float* px = x.data().data();
  const float* pb = bias.data().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    kernels::active().add(px + r * c, pb, out.data() + r * c,
                          static_cast<std::size_t>(c));
  }
  Impl xi = x.impl(), bi = bias.impl();
  return detail::make_node(
      x.shape(), std::move(out), OpKind::kAddBiasRows, {xi, bi},
      [xi, bi, rows, c](TensorImpl& self) {
        if (xi->requires_grad) {
          xi->ensure_grad();
          acc(xi->grad.data(), self.grad.data(), self.grad.size());
        }
        if (bi->requires_grad) {
          bi->ensure_grad();
          for (std::int64_t r = 0; r < rows; ++r)
            acc(bi->grad.data(), self.grad.data() + r * c,
                static_cast<std::size_t>(c));
        }
      });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require(x.ndim() == 4, "add_channel_bias: expected NCHW, got " + shape_str(x.shape()));
  const std::int64_t n = x.dim(0), ch = x.dim(1), hw = x.dim(2) * x.dim(3);
  require(bias.numel() == ch, "add_channel_bias: bias " + shape_str(bias.shape()) +
                                  " does not match channels of " + shape_str(x.shape()));
  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  const float* px = x.data().data();
  const float* pb = bias.data().data();
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t cc = 0; cc < ch; ++cc) {
      const float b = pb[cc];
      const float* src = px + (i * ch + cc) * hw;
      float* dst = out.data() + (i * ch + cc) * hw;
      for (std::int64_t j = 0; j < hw; ++j) dst[j] = src[j] + b;
    }
  }
  Impl xi = x.impl(), bi = bias.impl();
  return detail::make_node(
      x.shape(), std::move(out), OpKind::kAddChannelBias, {xi, bi},
      [xi, bi, n, ch, hw](TensorImpl& self) {
        if (xi->requires_grad) {
          xi->ensure_grad();
          acc(xi->grad.data(), self.grad.data(), self.grad.size());
        }
        if (bi->requires_grad) {
          bi->ensure_grad();
          for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t cc = 0; cc < ch; ++cc) {
              const float* g = self.grad.data() + (i * ch + cc) * hw;
              float s = 0.0f;
              for (std::int64_t j = 0; j < hw; ++j) s += g[j];
              bi->grad[static_cast<std::size_t>(cc)] += s;
            }
        }
      });
}

Tensor mul_broadcast(const Tensor& x, const Tensor& gate) {
  require(x.ndim() == gate.ndim(),
          "mul_broadcast: rank mismatch " + shape_str(x.shape()) + " vs " +
              shape_str(gate.shape()));
  for (int d = 0; d < x.ndim(); ++d) {
    require(gate.dim(d) == x.dim(d) || gate.dim(d) == 1,
            "mul_broadcast: gate " + shape_str(gate.shape()) +
                " does not broadcast over " + shape_str(x.shape()));
  }
  const int rank = x.ndim();
  const auto gs_full = row_major_strides(gate.shape());
  std::vector<std::int64_t> gs(static_cast<std::size_t>(rank));
  for (int d = 0; d < rank; ++d)
    gs[static_cast<std::size_t>(d)] = gate.dim(d) == 1 ? 0 : gs_full[static_cast<std::size_t>(d)];

  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  const float* px = x.data().data();
  const float* pg = gate.data().data();
  std::vector<std::int64_t> idx(static_cast<std::size_t>(rank), 0);
  const Shape& shp = x.shape();
  std::int64_t goff = 0;
  for (std::int64_t flat = 0; flat < x.numel(); ++flat) {
    out[static_cast<std::size_t>(flat)] = px[flat] * pg[goff];
    for (int d = rank - 1; d >= 0; --d) {
      auto& id = idx[static_cast<std::size_t>(d)];
      goff += gs[static_cast<std::size_t>(d)];
      if (++id < shp[static_cast<std::size_t>(d)]) break;
      goff -= gs[static_cast<std::size_t>(d)] * id;
      id = 0;
    }
  }
  Impl xi = x.impl(), gi = gate.impl();
  const Shape xshape = x.shape();
  return detail::make_node(
      x.shape(), std::move(out), OpKind::kMulBroadcast, {xi, gi},
      [xi, gi, gs, xshape, rank](TensorImpl& self) {
        const bool need_x = xi->requires_grad;
        const bool need_g = gi->requires_grad;
        if (!need_x && !need_g) return;
        if (need_x) xi->ensure_grad();
        if (need_g) gi->ensure_grad();
        std::vector<std::int64_t> idx(static_cast<std::size_t>(rank), 0);
        std::int64_t goff = 0;
        const std::int64_t n = self.numel();
        for (std::int64_t flat = 0; flat < n; ++flat) {
          const float g = self.grad[static_cast<std::size_t>(flat)];
          if (need_x) xi->grad[static_cast<std::size_t>(flat)] += g * gi->data[static_cast<std::size_t>(goff)];
          if (need_g) gi->grad[static_cast<std::size_t>(goff)] += g * xi->data[static_cast<std::size_t>(flat)];
          for (int d = rank - 1; d >= 0; --d) {
            auto& id = idx[static_cast<std::size_t>(d)];
            goff += gs[static_cast<std::size_t>(d)];
            if (++id < xshape[static_cast<std::size_t>(d)]) break;
            goff -= gs[static_cast<std::size_t>(d)] * id;
            id = 0;
          }
        }
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2,
          "matmul: expected rank-2 operands, got " + shape_str(a.shape()) +
              " and " + shape_str(b.shape()));
  require(a.dim(1) == b.dim(0), "matmul: inner dimensions mismatch " +
                                    shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = static_cast<int>(a.dim(0));
  const int k = static_cast<int>(a.dim(1));
  const int n = static_cast<int>(b.dim(1));
  std::vector<float> out(static_cast<std::size_t>(m) * n);
  kernels::sgemm_parallel(false, false, m, n, k, a.data().data(), k,
                          b.data().data(), n, out.data(), n, false);
  Impl ai = a.impl(), bi = b.impl();
  return detail::make_node(
      {m, n}, std::move(out), OpKind::kMatmul, {ai, bi},
      [ai, bi, m, n, k](TensorImpl& self) {
        if (ai->requires_grad) {
          ai->ensure_grad();
          kernels::sgemm_parallel(false, true, m, k, n, self.grad.data(), n,
                                  bi->data.data(), n, ai->grad.data(), k, true);
        }
        if (bi->requires_grad) {
          bi->ensure_grad();
          kernels::sgemm_parallel(true, false, k, n, m, ai->data.data(), k,
                                  self.grad.data(), n, bi->grad.data(), n, true);
        }
      });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  require(a.ndim() == 3 && b.ndim() == 3,
          "bmm: expected rank-3 operands, got " + shape_str(a.shape()) + " and " +
              shape_str(b.shape()));
  require(a.dim(0) == b.dim(0), "bmm: batch mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
  const std::int64_t batch = a.dim(0);
  const int m = static_cast<int>(trans_a ? a.dim(2) : a.dim(1));
  const int k = static_cast<int>(trans_a ? a.dim(1) : a.dim(2));
  const int kb = static_cast<int>(trans_b ? b.dim(2) : b.dim(1));
  const int n = static_cast<int>(trans_b ? b.dim(1) : b.dim(2));
  require(k == kb, "bmm: inner dimensions mismatch " + shape_str(a.shape()) +
                       " x " + shape_str(b.shape()));
  const std::int64_t sa = a.dim(1) * a.dim(2);
  const std::int64_t sb = b.dim(1) * b.dim(2);
  const std::int64_t so = static_cast<std::int64_t>(m) * n;
  std::vector<float> out(static_cast<std::size_t>(batch * so));
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  const int lda = static_cast<int>(a.dim(2));
  const int ldb = static_cast<int>(b.dim(2));
  float* po = out.data();
  parallel_chunks(batch, so * k, [&](std::int64_t b0, std::int64_t b1) {
    for (std::int64_t i = b0; i < b1; ++i) {
      kernels::active().sgemm(trans_a, trans_b, m, n, k, pa + i * sa, lda,
                              pb + i * sb, ldb, po + i * so, n, false);
    }
  });
  Impl ai = a.impl(), bi = b.impl();
  return detail::make_node(
      {batch, m, n}, std::move(out), OpKind::kBmm, {ai, bi},
      [ai, bi, batch, m, n, k, sa, sb, so, lda, ldb, trans_a,
       trans_b](TensorImpl& self) {
        for (std::int64_t i = 0; i < batch; ++i) {
          const float* dy = self.grad.data() + i * so;
          const float* av = ai->data.data() + i * sa;
          const float* bv = bi->data.data() + i * sb;
          if (ai->requires_grad) {
            ai->ensure_grad();
            float* da = ai->grad.data() + i * sa;
            if (!trans_a) {
              // dA[m,k] += dY * op(B)^T
              kernels::active().sgemm(false, !trans_b, m, k, n, dy, n, bv, ldb,
                                      da, lda, true);
            } else {
              // stored A is [k,m]: dA += op(B) * dY^T
              kernels::active().sgemm(trans_b, true, k, m, n, bv, ldb, dy, n,
                                      da, lda, true);
            }
          }
          if (bi->requires_grad) {
            bi->ensure_grad();
            float* db = bi->grad.data() + i * sb;
            if (!trans_b) {
              // dB[k,n] += op(A)^T * dY
              kernels::active().sgemm(!trans_a, false, k, n, m, av, lda, dy, n,
                                      db, ldb, true);
            } else {
              // stored B is [n,k]: dB += dY^T * op(A)
              kernels::active().sgemm(true, trans_a, n, k, m, dy, n, av, lda,
                                      db, ldb, true);
            }
          }
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_bias_rows(matmul(x, w), b);
}

int conv_out_dim(int in, int kernel, int stride, int dilation, Padding padding) {
  const int eff = (kernel - 1) * dilation + 1;
  if (padding == Padding::kSame) return (in + stride - 1) / stride;
  return (in - eff) / stride + 1;
}

namespace {

struct ConvGeom {
  std::int64_t n, ci, h, w, co, kh, kw;
  int stride, dilation;
  std::int64_t oh, ow, pad_top, pad_left;
  std::int64_t patch() const { return ci * kh * kw; }
  std::int64_t out_hw() const { return oh * ow; }
};

ConvGeom conv_geometry(const Tensor& input, const Tensor& kernel, int stride,
                       int dilation, Padding padding) {
  require(input.ndim() == 4, "conv2d: expected NCHW input, got " + shape_str(input.shape()));
  require(kernel.ndim() == 4, "conv2d: expected OIKK kernel, got " + shape_str(kernel.shape()));
  require(stride >= 1, "conv2d: stride must be >= 1, got " + std::to_string(stride));
  require(dilation >= 1, "conv2d: dilation must be >= 1, got " + std::to_string(dilation));
  require(input.dim(1) == kernel.dim(1),
          "conv2d: input channels " + shape_str(input.shape()) +
              " do not match kernel " + shape_str(kernel.shape()));
  ConvGeom g;
  g.n = input.dim(0);
  g.ci = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.co = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  g.stride = stride;
  g.dilation = dilation;
  g.oh = conv_out_dim(static_cast<int>(g.h), static_cast<int>(g.kh), stride, dilation, padding);
  g.ow = conv_out_dim(static_cast<int>(g.w), static_cast<int>(g.kw), stride, dilation, padding);
  require(g.oh >= 1 && g.ow >= 1,
          "conv2d: kernel " + shape_str(kernel.shape()) + " does not fit input " +
              shape_str(input.shape()));
  if (padding == Padding::kSame) {
    const std::int64_t eff_h = (g.kh - 1) * dilation + 1;
    const std::int64_t eff_w = (g.kw - 1) * dilation + 1;
    const std::int64_t pad_h = std::max<std::int64_t>(0, (g.oh - 1) * stride + eff_h - g.h);
    const std::int64_t pad_w = std::max<std::int64_t>(0, (g.ow - 1) * stride + eff_w - g.w);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    g.pad_top = 0;
    g.pad_left = 0;
  }
  return g;
}

// cols is [ci*kh*kw, oh*ow]; out-of-bounds taps read as zero.
void im2col(const float* img, const ConvGeom& g, float* cols) {
  std::size_t row = 0;
  for (std::int64_t c = 0; c < g.ci; ++c) {
    const float* plane = img + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj, ++row) {
        float* dst = cols + row * g.out_hw();
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad_top + ki * g.dilation;
          if (iy < 0 || iy >= g.h) {
            for (std::int64_t ox = 0; ox < g.ow; ++ox) *dst++ = 0.0f;
            continue;
          }
          const float* src_row = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad_left + kj * g.dilation;
            *dst++ = (ix < 0 || ix >= g.w) ? 0.0f : src_row[ix];
          }
        }
      }
    }
  }
}

void col2im_acc(const float* cols, const ConvGeom& g, float* img_grad) {
  std::size_t row = 0;
  for (std::int64_t c = 0; c < g.ci; ++c) {
    float* plane = img_grad + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj, ++row) {
        const float* src = cols + row * g.out_hw();
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad_top + ki * g.dilation;
          if (iy < 0 || iy >= g.h) {
            src += g.ow;
            continue;
          }
          float* dst_row = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad_left + kj * g.dilation;
            if (ix >= 0 && ix < g.w) dst_row[ix] += src[ox];
          }
          src += g.ow;
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride,
              int dilation, Padding padding) {
  const ConvGeom g = conv_geometry(input, kernel, stride, dilation, padding);
  const std::int64_t patch = g.patch();
  const std::int64_t ohw = g.out_hw();
  std::vector<float> out(static_cast<std::size_t>(g.n * g.co * ohw));
  const float* pin = input.data().data();
  const float* pk = kernel.data().data();
  const std::int64_t in_stride = g.ci * g.h * g.w;

  parallel_chunks(g.n, g.co * ohw * patch, [&](std::int64_t n0, std::int64_t n1) {
    std::vector<float> cols(static_cast<std::size_t>(patch * ohw));
    for (std::int64_t i = n0; i < n1; ++i) {
      im2col(pin + i * in_stride, g, cols.data());
      kernels::active().sgemm(false, false, static_cast<int>(g.co),
                              static_cast<int>(ohw), static_cast<int>(patch), pk,
                              static_cast<int>(patch), cols.data(),
                              static_cast<int>(ohw),
                              out.data() + i * g.co * ohw, static_cast<int>(ohw),
                              false);
    }
  });

  Impl xi = input.impl(), ki = kernel.impl();
  return detail::make_node(
      {g.n, g.co, g.oh, g.ow}, std::move(out), OpKind::kConv2d, {xi, ki},
      [xi, ki, g, patch, ohw, in_stride](TensorImpl& self) {
        const bool need_x = xi->requires_grad;
        const bool need_k = ki->requires_grad;
        if (!need_x && !need_k) return;
        if (need_x) xi->ensure_grad();
        if (need_k) ki->ensure_grad();
        std::vector<float> cols(static_cast<std::size_t>(patch * ohw));
        std::vector<float> dcols(need_x ? static_cast<std::size_t>(patch * ohw) : 0);
        for (std::int64_t i = 0; i < g.n; ++i) {
          const float* dy = self.grad.data() + i * g.co * ohw;
          im2col(xi->data.data() + i * in_stride, g, cols.data());
          if (need_k) {
            // dK[co, patch] += dY[co, ohw] * cols^T
            kernels::sgemm_parallel(false, true, static_cast<int>(g.co),
                                    static_cast<int>(patch), static_cast<int>(ohw),
                                    dy, static_cast<int>(ohw), cols.data(),
                                    static_cast<int>(ohw), ki->grad.data(),
                                    static_cast<int>(patch), true);
          }
          if (need_x) {
            // dcols = K^T * dY, then scatter back through the padding map.
            kernels::sgemm_parallel(true, false, static_cast<int>(patch),
                                    static_cast<int>(ohw), static_cast<int>(g.co),
                                    ki->data.data(), static_cast<int>(patch), dy,
                                    static_cast<int>(ohw), dcols.data(),
                                    static_cast<int>(ohw), false);
            col2im_acc(dcols.data(), g, xi->grad.data() + i * in_stride);
          }
        }
      });
}

Tensor softmax(const Tensor& x, int axis) {
  const int a = normalize_axis(axis, x.ndim(), "softmax");
  const Shape& shp = x.shape();
  const std::int64_t len = shp[static_cast<std::size_t>(a)];
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < a; ++d) outer *= shp[static_cast<std::size_t>(d)];
  for (int d = a + 1; d < x.ndim(); ++d) inner *= shp[static_cast<std::size_t>(d)];

  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  const float* px = x.data().data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * len * inner + in;
      float mx = px[base];
      for (std::int64_t l = 1; l < len; ++l)
        mx = std::max(mx, px[base + l * inner]);
      float denom = 0.0f;
      for (std::int64_t l = 0; l < len; ++l) {
        const float e = std::exp(px[base + l * inner] - mx);
        out[static_cast<std::size_t>(base + l * inner)] = e;
        denom += e;
      }
      const float inv = 1.0f / denom;
      for (std::int64_t l = 0; l < len; ++l)
        out[static_cast<std::size_t>(base + l * inner)] *= inv;
    }
  }
  Impl xi = x.impl();
  return detail::make_node(
      x.shape(), std::move(out), OpKind::kSoftmax, {xi},
      [xi, outer, inner, len](TensorImpl& self) {
        if (!xi->requires_grad) return;
        xi->ensure_grad();
        const float* y = self.data.data();
        const float* dy = self.grad.data();
        for (std::int64_t o = 0; o < outer; ++o) {
          for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = o * len * inner + in;
            float dotp = 0.0f;
            for (std::int64_t l = 0; l < len; ++l) {
              const std::int64_t i = base + l * inner;
              dotp += dy[i] * y[i];
            }
            for (std::int64_t l = 0; l < len; ++l) {
              const std::int64_t i = base + l * inner;
              xi->grad[static_cast<std::size_t>(i)] += y[i] * (dy[i] - dotp);
            }
          }
        }
      });
}

namespace {

constexpr float kInvSqrt2 = 0.7071067811865476f;

float gelu_value(float v) {
  return 0.5f * v * (1.0f + std::erf(v * kInvSqrt2));
}

float gelu_grad(float v) {
  const float cdf = 0.5f * (1.0f + std::erf(v * kInvSqrt2));
  const float pdf = std::exp(-0.5f * v * v) *
                    static_cast<float>(0.3989422804014327);  // 1/sqrt(2*pi)
  return cdf + v * pdf;
}

float sigmoid_value(float v) {
  if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
  const float e = std::exp(v);
  return e / (1.0f + e);
}

}  // namespace

Tensor activation(const Tensor& x, ActKind kind) {
  const std::size_t n = static_cast<std::size_t>(x.numel());
  std::vector<float> out(n);
  const float* px = x.data().data();
  OpKind op = OpKind::kRelu;
  switch (kind) {
    case ActKind::kRelu:
      kernels::active().relu(px, out.data(), n);
      op = OpKind::kRelu;
      break;
    case ActKind::kGelu:
      for (std::size_t i = 0; i < n; ++i) out[i] = gelu_value(px[i]);
      op = OpKind::kGelu;
      break;
    case ActKind::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_value(px[i]);
      op = OpKind::kSigmoid;
      break;
  }
  Impl xi = x.impl();
  return detail::make_node(
      x.shape(), std::move(out), op, {xi}, [xi, kind](TensorImpl& self) {
        if (!xi->requires_grad) return;
        xi->ensure_grad();
        const std::size_t n = self.grad.size();
        switch (kind) {
          case ActKind::kRelu:
            kernels::active().relu_backward(xi->data.data(), self.grad.data(),
                                            xi->grad.data(), n);
            break;
          case ActKind::kGelu:
            for (std::size_t i = 0; i < n; ++i)
              xi->grad[i] += self.grad[i] * gelu_grad(xi->data[i]);
            break;
          case ActKind::kSigmoid:
            for (std::size_t i = 0; i < n; ++i) {
              const float y = self.data[i];
              xi->grad[i] += self.grad[i] * y * (1.0f - y);
            }
            break;
        }
      });
}

Tensor relu(const Tensor& x) { return activation(x, ActKind::kRelu); }
Tensor gelu(const Tensor& x) { return activation(x, ActKind::kGelu); }
Tensor sigmoid(const Tensor& x) { return activation(x, ActKind::kSigmoid); }

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps) {
  require(x.ndim() >= 1, "layer_norm: rank-0 input");
  const std::int64_t d = x.dim(x.ndim() - 1);
  require(gamma.numel() == d && beta.numel() == d,
          "layer_norm: gamma " + shape_str(gamma.shape()) + " / beta " +
              shape_str(beta.shape()) + " must match last dim of " +
              shape_str(x.shape()));
  const std::int64_t rows = x.numel() / d;
  std::vector<float> out(static_cast<std::size_t>(x.numel()));
  auto means = std::make_shared<std::vector<float>>(static_cast<std::size_t>(rows));
  auto inv_stds = std::make_shared<std::vector<float>>(static_cast<std::size_t>(rows));
  const float* px = x.data().data();
  const float* pg = gamma.data().data();
  const float* pb = beta.data().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* row = px + r * d;
    double m = 0.0;
    for (std::int64_t j = 0; j < d; ++j) m += row[j];
    m /= static_cast<double>(d);
    double var = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
      const double c = row[j] - m;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps));
    (*means)[static_cast<std::size_t>(r)] = static_cast<float>(m);
    (*inv_stds)[static_cast<std::size_t>(r)] = inv;
    float* orow = out.data() + r * d;
    for (std::int64_t j = 0; j < d; ++j) {
      const float xhat = (row[j] - static_cast<float>(m)) * inv;
      orow[j] = xhat * pg[j] + pb[j];
    }
  }
  Impl xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
  return detail::make_node(
      x.shape(), std::move(out), OpKind::kLayerNorm, {xi, gi, bi},
      [xi, gi, bi, rows, d, means, inv_stds](TensorImpl& self) {
        const bool need_x = xi->requires_grad;
        const bool need_g = gi->requires_grad;
        const bool need_b = bi->requires_grad;
        if (need_x) xi->ensure_grad();
        if (need_g) gi->ensure_grad();
        if (need_b) bi->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
          const float m = (*means)[static_cast<std::size_t>(r)];
          const float inv = (*inv_stds)[static_cast<std::size_t>(r)];
          const float* xrow = xi->data.data() + r * d;
          const float* dyrow = self.grad.data() + r * d;
          double s1 = 0.0, s2 = 0.0;
          for (std::int64_t j = 0; j < d; ++j) {
            const float xhat = (xrow[j] - m) * inv;
            const float dxhat = dyrow[j] * gi->data[static_cast<std::size_t>(j)];
            s1 += dxhat;
            s2 += static_cast<double>(dxhat) * xhat;
            if (need_g) gi->grad[static_cast<std::size_t>(j)] += dyrow[j] * xhat;
            if (need_b) bi->grad[static_cast<std::size_t>(j)] += dyrow[j];
          }
          if (!need_x) continue;
          const float mean_dxhat = static_cast<float>(s1 / static_cast<double>(d));
          const float mean_dxhat_xhat = static_cast<float>(s2 / static_cast<double>(d));
          float* dxrow = xi->grad.data() + r * d;
          for (std::int64_t j = 0; j < d; ++j) {
            const float xhat = (xrow[j] - m) * inv;
            const float dxhat = dyrow[j] * gi->data[static_cast<std::size_t>(j)];
            dxrow[j] += inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
          }
        }
      });
}

Tensor pool_global(const Tensor& x, PoolKind kind, PoolOver over) {
  require(x.ndim() == 4, "pool_global: expected NCHW input, got " + shape_str(x.shape()));
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t hw = h * w;
  const float* px = x.data().data();
  Shape out_shape;
  std::vector<float> out;
  auto argmax = std::make_shared<std::vector<std::int64_t>>();

  if (over == PoolOver::kSpatial) {
    out_shape = {n, c, 1, 1};
    out.resize(static_cast<std::size_t>(n * c));
    if (kind == PoolKind::kMax) argmax->resize(static_cast<std::size_t>(n * c));
    for (std::int64_t i = 0; i < n * c; ++i) {
      const float* plane = px + i * hw;
      if (kind == PoolKind::kAvg) {
        out[static_cast<std::size_t>(i)] =
            kernels::active().reduce_sum(plane, static_cast<std::size_t>(hw)) /
            static_cast<float>(hw);
      } else {
        std::int64_t best = 0;
        for (std::int64_t j = 1; j < hw; ++j)
          if (plane[j] > plane[best]) best = j;
        out[static_cast<std::size_t>(i)] = plane[best];
        (*argmax)[static_cast<std::size_t>(i)] = best;
      }
    }
  } else {
    out_shape = {n, 1, h, w};
    out.resize(static_cast<std::size_t>(n * hw));
    if (kind == PoolKind::kMax) argmax->resize(static_cast<std::size_t>(n * hw));
    for (std::int64_t i = 0; i < n; ++i) {
      const float* base = px + i * c * hw;
      for (std::int64_t j = 0; j < hw; ++j) {
        if (kind == PoolKind::kAvg) {
          float s = 0.0f;
          for (std::int64_t cc = 0; cc < c; ++cc) s += base[cc * hw + j];
          out[static_cast<std::size_t>(i * hw + j)] = s / static_cast<float>(c);
        } else {
          std::int64_t best = 0;
          for (std::int64_t cc = 1; cc < c; ++cc)
            if (base[cc * hw + j] > base[best * hw + j]) best = cc;
          out[static_cast<std::size_t>(i * hw + j)] = base[best * hw + j];
          (*argmax)[static_cast<std::size_t>(i * hw + j)] = best;
        }
      }
    }
  }

  Impl xi = x.impl();
  return detail::make_node(
      std::move(out_shape), std::move(out), OpKind::kPoolGlobal, {xi},
      [xi, kind, over, n, c, hw, argmax](TensorImpl& self) {
        if (!xi->requires_grad) return;
        xi->ensure_grad();
        if (over == PoolOver::kSpatial) {
          for (std::int64_t i = 0; i < n * c; ++i) {
            const float g = self.grad[static_cast<std::size_t>(i)];
            float* dplane = xi->grad.data() + i * hw;
            if (kind == PoolKind::kAvg) {
              const float share = g / static_cast<float>(hw);
              for (std::int64_t j = 0; j < hw; ++j) dplane[j] += share;
            } else {
              dplane[(*argmax)[static_cast<std::size_t>(i)]] += g;
            }
          }
        } else {
          for (std::int64_t i = 0; i < n; ++i) {
            float* dbase = xi->grad.data() + i * c * hw;
            for (std::int64_t j = 0; j < hw; ++j) {
              const float g = self.grad[static_cast<std::size_t>(i * hw + j)];
              if (kind == PoolKind::kAvg) {
                const float share = g / static_cast<float>(c);
                for (std::int64_t cc = 0; cc < c; ++cc) dbase[cc * hw + j] += share;
              } else {
                dbase[(*argmax)[static_cast<std::size_t>(i * hw + j)] * hw + j] += g;
              }
            }
          }
        }
      });
}

Tensor dropout(const Tensor& x, float p, bool training, Rng& rng) {
  require(p >= 0.0f && p < 1.0f,
          "dropout: probability must be in [0,1), got " + std::to_string(p));
  if (!training || p == 0.0f) return x;
  const std::size_t n = static_cast<std::size_t>(x.numel());
  const float keep_scale = 1.0f / (1.0f - p);
  auto mask = std::make_shared<std::vector<float>>(n);
  std::vector<float> out(n);
  const float* px = x.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const float m = rng.next_float() < p ? 0.0f : keep_scale;
    (*mask)[i] = m;
    out[i] = px[i] * m;
  }
  Impl xi = x.impl();
  return detail::make_node(x.shape(), std::move(out), OpKind::kDropout, {xi},
                           [xi, mask](TensorImpl& self) {
                             if (!xi->requires_grad) return;
                             xi->ensure_grad();
                             acc_mul(xi->grad.data(), self.grad.data(),
                                     mask->data(), self.grad.size());
                           });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  require(!parts.empty(), "concat: no inputs");
  const int rank = parts[0].ndim();
  const int a = normalize_axis(axis, rank, "concat");
  std::int64_t axis_total = 0;
  for (const Tensor& t : parts) {
    require(t.ndim() == rank, "concat: rank mismatch " + shape_str(parts[0].shape()) +
                                  " vs " + shape_str(t.shape()));
    for (int d = 0; d < rank; ++d) {
      require(d == a || t.dim(d) == parts[0].dim(d),
              "concat: shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                  shape_str(t.shape()) + " outside axis " + std::to_string(a));
    }
    axis_total += t.dim(a);
  }
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<std::size_t>(a)] = axis_total;

  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < a; ++d) outer *= out_shape[static_cast<std::size_t>(d)];
  for (int d = a + 1; d < rank; ++d) inner *= out_shape[static_cast<std::size_t>(d)];

  std::vector<float> out(static_cast<std::size_t>(shape_numel(out_shape)));
  std::vector<Impl> impls;
  std::vector<std::int64_t> axis_sizes;
  impls.reserve(parts.size());
  for (const Tensor& t : parts) {
    impls.push_back(t.impl());
    axis_sizes.push_back(t.dim(a));
  }
  const std::int64_t out_row = axis_total * inner;
  std::int64_t offset = 0;
  for (std::size_t p = 0; p < impls.size(); ++p) {
    const std::int64_t block = axis_sizes[p] * inner;
    const float* src = impls[p]->data.data();
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * block, block, out.data() + o * out_row + offset);
    }
    offset += block;
  }
  return detail::make_node(
      std::move(out_shape), std::move(out), OpKind::kConcat,
      std::vector<Impl>(impls), [impls, axis_sizes, outer, inner, out_row](TensorImpl& self) {
        std::int64_t offset = 0;
        for (std::size_t p = 0; p < impls.size(); ++p) {
          const std::int64_t block = axis_sizes[p] * inner;
          if (impls[p]->requires_grad) {
            impls[p]->ensure_grad();
            for (std::int64_t o = 0; o < outer; ++o) {
              acc(impls[p]->grad.data() + o * block,
                  self.grad.data() + o * out_row + offset,
                  static_cast<std::size_t>(block));
            }
          }
          offset += block;
        }
      });
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length) {
  const int a = normalize_axis(axis, x.ndim(), "slice");
  const std::int64_t extent = x.dim(a);
  require(start >= 0 && length >= 1 && start + length <= extent,
          "slice: range [" + std::to_string(start) + "," +
              std::to_string(start + length) + ") out of bounds for axis " +
              std::to_string(a) + " of " + shape_str(x.shape()));
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < a; ++d) outer *= x.dim(d);
  for (int d = a + 1; d < x.ndim(); ++d) inner *= x.dim(d);
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(a)] = length;
  std::vector<float> out(static_cast<std::size_t>(outer * length * inner));
  const float* px = x.data().data();
  const std::int64_t in_row = extent * inner;
  const std::int64_t out_row = length * inner;
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(px + o * in_row + start * inner, out_row, out.data() + o * out_row);
  }
  Impl xi = x.impl();
  return detail::make_node(
      std::move(out_shape), std::move(out), OpKind::kSlice, {xi},
      [xi, outer, inner, in_row, out_row, start](TensorImpl& self) {
        if (!xi->requires_grad) return;
        xi->ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o) {
          acc(xi->grad.data() + o * in_row + start * inner,
              self.grad.data() + o * out_row, static_cast<std::size_t>(out_row));
        }
      });
}

Tensor pad_edge(const Tensor& x, int pad) {
  require(x.ndim() == 4, "pad_edge: expected NCHW input, got " + shape_str(x.shape()));
  require(pad >= 0, "pad_edge: pad must be non-negative");
  if (pad == 0) return x;
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t oh = h + 2 * pad, ow = w + 2 * pad;
  std::vector<float> out(static_cast<std::size_t>(n * c * oh * ow));
  const float* px = x.data().data();
  for (std::int64_t i = 0; i < n * c; ++i) {
    const float* plane = px + i * h * w;
    float* dst = out.data() + i * oh * ow;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      const std::int64_t iy = std::clamp<std::int64_t>(oy - pad, 0, h - 1);
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        const std::int64_t ix = std::clamp<std::int64_t>(ox - pad, 0, w - 1);
        dst[oy * ow + ox] = plane[iy * w + ix];
      }
    }
  }
  Impl xi = x.impl();
  return detail::make_node(
      {n, c, oh, ow}, std::move(out), OpKind::kPadEdge, {xi},
      [xi, n, c, h, w, oh, ow, pad](TensorImpl& self) {
        if (!xi->requires_grad) return;
        xi->ensure_grad();
        for (std::int64_t i = 0; i < n * c; ++i) {
          const float* g = self.grad.data() + i * oh * ow;
          float* dst = xi->grad.data() + i * h * w;
          for (std::int64_t oy = 0; oy < oh; ++oy) {
            const std::int64_t iy = std::clamp<std::int64_t>(oy - pad, 0, h - 1);
            for (std::int64_t ox = 0; ox < ow; ++ox) {
              const std::int64_t ix = std::clamp<std::int64_t>(ox - pad, 0, w - 1);
              dst[iy * w + ix] += g[oy * ow + ox];
            }
          }
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  std::vector<float> out(x.data().begin(), x.data().end());
  Impl xi = x.impl();
  return detail::make_node(std::move(shape), std::move(out), OpKind::kReshape,
                           {xi}, [xi](TensorImpl& self) {
                             if (!xi->requires_grad) return;
                             xi->ensure_grad();
                             acc(xi->grad.data(), self.grad.data(), self.grad.size());
                           });
}

Tensor permute(const Tensor& x, const std::vector<int>& dims) {
  const int rank = x.ndim();
  require(static_cast<int>(dims.size()) == rank,
          "permute: got " + std::to_string(dims.size()) + " dims for rank " +
              std::to_string(rank));
  std::vector<bool> seen(static_cast<std::size_t>(rank), false);
  for (const int d : dims) {
    require(d >= 0 && d < rank && !seen[static_cast<std::size_t>(d)],
            "permute: dims are not a permutation");
    seen[static_cast<std::size_t>(d)] = true;
  }
  Shape out_shape(static_cast<std::size_t>(rank));
  const auto in_strides = row_major_strides(x.shape());
  std::vector<std::int64_t> src_strides(static_cast<std::size_t>(rank));
  for (int d = 0; d < rank; ++d) {
    out_shape[static_cast<std::size_t>(d)] = x.dim(dims[static_cast<std::size_t>(d)]);
    src_strides[static_cast<std::size_t>(d)] =
        in_strides[static_cast<std::size_t>(dims[static_cast<std::size_t>(d)])];
  }
  const std::int64_t n = x.numel();
  std::vector<float> out(static_cast<std::size_t>(n));
  const float* px = x.data().data();
  std::vector<std::int64_t> idx(static_cast<std::size_t>(rank), 0);
  std::int64_t src = 0;
  for (std::int64_t flat = 0; flat < n; ++flat) {
    out[static_cast<std::size_t>(flat)] = px[src];
    for (int d = rank - 1; d >= 0; --d) {
      auto& id = idx[static_cast<std::size_t>(d)];
      src += src_strides[static_cast<std::size_t>(d)];
      if (++id < out_shape[static_cast<std::size_t>(d)]) break;
      src -= src_strides[static_cast<std::size_t>(d)] * id;
      id = 0;
    }
  }
  Impl xi = x.impl();
  const Shape oshape = out_shape;
  return detail::make_node(
      std::move(out_shape), std::move(out), OpKind::kPermute, {xi},
      [xi, src_strides, oshape, rank](TensorImpl& self) {
        if (!xi->requires_grad) return;
        xi->ensure_grad();
        std::vector<std::int64_t> idx(static_cast<std::size_t>(rank), 0);
        std::int64_t src = 0;
        const std::int64_t n = self.numel();
        for (std::int64_t flat = 0; flat < n; ++flat) {
          xi->grad[static_cast<std::size_t>(src)] += self.grad[static_cast<std::size_t>(flat)];
          for (int d = rank - 1; d >= 0; --d) {
            auto& id = idx[static_cast<std::size_t>(d)];
            src += src_strides[static_cast<std::size_t>(d)];
            if (++id < oshape[static_cast<std::size_t>(d)]) break;
            src -= src_strides[static_cast<std::size_t>(d)] * id;
            id = 0;
          }
        }
      });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require(logits.ndim() == 2, "cross_entropy: expected [N,C] logits, got " +
                                  shape_str(logits.shape()));
  const std::int64_t n = logits.dim(0);
  const std::int64_t c = logits.dim(1);
  require(static_cast<std::int64_t>(labels.size()) == n,
          "cross_entropy: " + std::to_string(labels.size()) + " labels for " +
              std::to_string(n) + " rows");
  for (const int y : labels) {
    require(y >= 0 && y < c, "cross_entropy: label " + std::to_string(y) +
                                 " outside [0," + std::to_string(c) + ")");
  }
  auto probs = std::make_shared<std::vector<float>>(static_cast<std::size_t>(n * c));
  const float* px = logits.data().data();
  double loss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const float* row = px + i * c;
    float mx = row[0];
    for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < c; ++j) {
      const double e = std::exp(static_cast<double>(row[j]) - mx);
      (*probs)[static_cast<std::size_t>(i * c + j)] = static_cast<float>(e);
      denom += e;
    }
    const double inv = 1.0 / denom;
    for (std::int64_t j = 0; j < c; ++j)
      (*probs)[static_cast<std::size_t>(i * c + j)] *= static_cast<float>(inv);
    const double lse = mx + std::log(denom);
    loss += lse - row[labels[static_cast<std::size_t>(i)]];
  }
  loss /= static_cast<double>(n);
  Impl li = logits.impl();
  auto labels_copy = std::make_shared<std::vector<int>>(labels);
  return detail::make_node(
      {1}, {static_cast<float>(loss)}, OpKind::kCrossEntropy, {li},
      [li, probs, labels_copy, n, c](TensorImpl& self) {
        if (!li->requires_grad) return;
        li->ensure_grad();
        const float g = self.grad[0] / static_cast<float>(n);
        for (std::int64_t i = 0; i < n; ++i) {
          const int y = (*labels_copy)[static_cast<std::size_t>(i)];
          for (std::int64_t j = 0; j < c; ++j) {
            const float p = (*probs)[static_cast<std::size_t>(i * c + j)];
            li->grad[static_cast<std::size_t>(i * c + j)] +=
                g * (p - (j == y ? 1.0f : 0.0f));
          }
        }
      });
}

Tensor sum(const Tensor& x) {
  const float s = kernels::active().reduce_sum(x.data().data(),
                                               static_cast<std::size_t>(x.numel()));
  Impl xi = x.impl();
  return detail::make_node({1}, {s}, OpKind::kSum, {xi}, [xi](TensorImpl& self) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    const float g = self.grad[0];
    for (float& v : xi->grad) v += g;
  });
}

Tensor mean(const Tensor& x) {
  const std::int64_t n = x.numel();
  const float s = kernels::active().reduce_sum(x.data().data(),
                                               static_cast<std::size_t>(n)) /
                  static_cast<float>(n);
  Impl xi = x.impl();
  return detail::make_node({1}, {s}, OpKind::kMean, {xi}, [xi, n](TensorImpl& self) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    const float g = self.grad[0] / static_cast<float>(n);
    for (float& v : xi->grad) v += g;
  });
}

std::vector<int> argmax_rows(const Tensor& x) {
  require(x.ndim() == 2, "argmax_rows: expected [N,C], got " + shape_str(x.shape()));
  const std::int64_t n = x.dim(0), c = x.dim(1);
  std::vector<int> out(static_cast<std::size_t>(n));
  const float* px = x.data().data();
  for (std::int64_t i = 0; i < n; ++i) {
    const float* row = px + i * c;
    int best = 0;
    for (std::int64_t j = 1; j < c; ++j)
      if (row[j] > row[best]) best = static_cast<int>(j);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

bool all_finite(const Tensor& x) {
  for (const float v : x.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace ewn
