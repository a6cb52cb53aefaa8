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

#include "ewn/deit.hpp"

#include <cmath>
#include <stdexcept>

namespace ewn {

void DeiTConfig::validate() const {
  if (patch_size < 1 || embed_dim < 1 || depth < 1 || num_heads < 1 ||
      input_channels < 1 || image_h < 1 || image_w < 1) {
    throw std::invalid_argument("deit config: all dimensions must be positive");
  }
  if (image_h % patch_size != 0 || image_w % patch_size != 0) {
    throw std::invalid_argument(
        "deit config: image " + std::to_string(image_h) + "x" + std::to_string(image_w) +
        " is not divisible by patch size " + std::to_string(patch_size));
  }
  if (embed_dim % num_heads != 0) {
    throw std::invalid_argument("deit config: embed_dim " + std::to_string(embed_dim) +
                                " is not divisible by num_heads " +
                                std::to_string(num_heads));
  }
  if (mlp_hidden() < 1) {
    throw std::invalid_argument("deit config: mlp_ratio too small");
  }
}

namespace {

Tensor init_linear(ParameterStore& store, const std::string& name, Shape shape,
                   std::int64_t fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
  t.fill_uniform(rng, -bound, bound);
  return store.add(name, std::move(t));
}

Tensor init_embedding(ParameterStore& store, const std::string& name, Shape shape,
                      Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  t.fill_truncated_normal(rng, 0.02f);
  return store.add(name, std::move(t));
}

}  // namespace

DeiTParams deit_init(const DeiTConfig& cfg, ParameterStore& store,
                     const std::string& prefix, Rng& rng) {
  cfg.validate();
  const int d = cfg.embed_dim;
  const int hidden = cfg.mlp_hidden();
  DeiTParams p;
  p.patch_weight = init_linear(store, prefix + ".patch.weight",
                               {d, cfg.input_channels, cfg.patch_size, cfg.patch_size},
                               static_cast<std::int64_t>(cfg.input_channels) *
                                   cfg.patch_size * cfg.patch_size,
                               rng);
  p.patch_bias = store.add(prefix + ".patch.bias", Tensor::zeros({d}));
  p.cls_token = init_embedding(store, prefix + ".cls_token", {d}, rng);
  p.dist_token = init_embedding(store, prefix + ".dist_token", {d}, rng);
  p.pos_embed = init_embedding(store, prefix + ".pos_embed", {cfg.num_tokens(), d}, rng);
  for (int b = 0; b < cfg.depth; ++b) {
    const std::string bp = prefix + ".block" + std::to_string(b);
    DeiTBlockParams blk;
    blk.norm1_gamma = store.add(bp + ".norm1.gamma", Tensor::full({d}, 1.0f));
    blk.norm1_beta = store.add(bp + ".norm1.beta", Tensor::zeros({d}));
    blk.qkv_weight = init_linear(store, bp + ".attn.qkv.weight", {d, 3 * d}, d, rng);
    blk.qkv_bias = store.add(bp + ".attn.qkv.bias", Tensor::zeros({3 * d}));
    blk.proj_weight = init_linear(store, bp + ".attn.proj.weight", {d, d}, d, rng);
    blk.proj_bias = store.add(bp + ".attn.proj.bias", Tensor::zeros({d}));
    blk.norm2_gamma = store.add(bp + ".norm2.gamma", Tensor::full({d}, 1.0f));
    blk.norm2_beta = store.add(bp + ".norm2.beta", Tensor::zeros({d}));
    blk.fc1_weight = init_linear(store, bp + ".mlp.fc1.weight", {d, hidden}, d, rng);
    blk.fc1_bias = store.add(bp + ".mlp.fc1.bias", Tensor::zeros({hidden}));
    blk.fc2_weight = init_linear(store, bp + ".mlp.fc2.weight", {hidden, d}, hidden, rng);
    blk.fc2_bias = store.add(bp + ".mlp.fc2.bias", Tensor::zeros({d}));
    p.blocks.push_back(std::move(blk));
  }
  p.norm_gamma = store.add(prefix + ".norm.gamma", Tensor::full({d}, 1.0f));
  p.norm_beta = store.add(prefix + ".norm.beta", Tensor::zeros({d}));
  return p;
}

Tensor patch_embed(const Tensor& image, const DeiTConfig& cfg,
                   const DeiTParams& params) {
  if (image.ndim() != 4 || image.dim(1) != cfg.input_channels) {
    throw std::invalid_argument("patch_embed: expected [N," +
                                std::to_string(cfg.input_channels) + ",H,W], got " +
                                shape_str(image.shape()));
  }
  if (image.dim(2) % cfg.patch_size != 0 || image.dim(3) % cfg.patch_size != 0) {
    throw std::invalid_argument("patch_embed: spatial dims of " + shape_str(image.shape()) +
                                " must be divisible by " + std::to_string(cfg.patch_size));
  }
  const std::int64_t n = image.dim(0);
  Tensor grid = conv2d(image, params.patch_weight, cfg.patch_size, 1, Padding::kValid);
  grid = add_channel_bias(grid, params.patch_bias);
  const std::int64_t patches = grid.dim(2) * grid.dim(3);
  // [N, D, P] -> [N, P, D]
  return permute(reshape(grid, {n, cfg.embed_dim, patches}), {0, 2, 1});
}

Tensor multi_head_attention(const Tensor& x, const DeiTBlockParams& block,
                            int num_heads, Tensor* attention_out) {
  const std::int64_t n = x.dim(0), t = x.dim(1), d = x.dim(2);
  if (d % num_heads != 0) {
    throw std::invalid_argument("attention: embed dim " + std::to_string(d) +
                                " is not divisible by " + std::to_string(num_heads) +
                                " heads");
  }
  const std::int64_t dh = d / num_heads;
  Tensor qkv = linear(reshape(x, {n * t, d}), block.qkv_weight, block.qkv_bias);
  qkv = permute(reshape(qkv, {n, t, 3, num_heads, dh}), {2, 0, 3, 1, 4});
  auto head_view = [&](std::int64_t which) {
    return reshape(slice(qkv, 0, which, 1), {n * num_heads, t, dh});
  };
  Tensor q = head_view(0);
  Tensor k = head_view(1);
  Tensor v = head_view(2);
  Tensor scores = scale(bmm(q, k, false, true),
                        1.0f / std::sqrt(static_cast<float>(dh)));
  Tensor probs = softmax(scores, -1);
  if (attention_out) *attention_out = probs;
  Tensor ctx = bmm(probs, v);  // [N*H, T, dh]
  ctx = permute(reshape(ctx, {n, num_heads, t, dh}), {0, 2, 1, 3});
  Tensor out = linear(reshape(ctx, {n * t, d}), block.proj_weight, block.proj_bias);
  return reshape(out, {n, t, d});
}

Tensor encoder_block(const Tensor& x, const DeiTConfig& cfg,
                     const DeiTBlockParams& block) {
  Tensor h = add(x, multi_head_attention(
                       layer_norm(x, block.norm1_gamma, block.norm1_beta), block,
                       cfg.num_heads));
  const std::int64_t n = h.dim(0), t = h.dim(1), d = h.dim(2);
  Tensor normed = layer_norm(h, block.norm2_gamma, block.norm2_beta);
  Tensor up = gelu(linear(reshape(normed, {n * t, d}), block.fc1_weight, block.fc1_bias));
  Tensor down = linear(up, block.fc2_weight, block.fc2_bias);
  return add(h, reshape(down, {n, t, d}));
}

Tensor deit_forward(const Tensor& image, const DeiTConfig& cfg,
                    const DeiTParams& params) {
  Tensor patches = patch_embed(image, cfg, params);
  const std::int64_t n = patches.dim(0);
  const std::int64_t d = cfg.embed_dim;
  Tensor cls_rows = add_bias_rows(Tensor::zeros({n, 1, d}), params.cls_token);
  Tensor dist_rows = add_bias_rows(Tensor::zeros({n, 1, d}), params.dist_token);
  Tensor tokens = concat(std::vector<Tensor>{cls_rows, dist_rows, patches}, 1);
  tokens = add_bias_rows(tokens, params.pos_embed);
  for (const DeiTBlockParams& block : params.blocks) {
    tokens = encoder_block(tokens, cfg, block);
  }
  tokens = layer_norm(tokens, params.norm_gamma, params.norm_beta);
  return reshape(slice(tokens, 1, 0, 1), {n, d});
}

std::int64_t deit_parameter_count(const DeiTConfig& cfg) {
  const std::int64_t d = cfg.embed_dim;
  const std::int64_t h = cfg.mlp_hidden();
  const std::int64_t patch = d * cfg.input_channels * cfg.patch_size * cfg.patch_size + d;
  const std::int64_t tokens = 2 * d + static_cast<std::int64_t>(cfg.num_tokens()) * d;
  const std::int64_t per_block = 2 * d +            // norm1
                                 d * 3 * d + 3 * d +  // qkv
                                 d * d + d +          // proj
                                 2 * d +              // norm2
                                 d * h + h +          // fc1
                                 h * d + d;           // fc2
  return patch + tokens + per_block * cfg.depth + 2 * d;
}

}  // namespace ewn
