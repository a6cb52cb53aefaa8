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

#include "ewn/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ewn {

int ASPPConfig::out_channels() const {
  return std::accumulate(filters.begin(), filters.end(), 0);
}

void ASPPConfig::validate() const {
  if (dilations.empty() || dilations.size() != filters.size()) {
    throw std::invalid_argument(
        "aspp config: dilations and filters must be non-empty lists of equal length");
  }
  for (const int d : dilations) {
    if (d < 1) throw std::invalid_argument("aspp config: dilations must be >= 1");
  }
  for (const int f : filters) {
    if (f < 1) throw std::invalid_argument("aspp config: filters must be >= 1");
  }
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw std::invalid_argument("aspp config: kernel_size must be odd and positive");
  }
}

void CBAMConfig::validate(int channels) const {
  if (channel_reduction < 1) {
    throw std::invalid_argument("cbam config: channel_reduction must be >= 1");
  }
  if (channels % channel_reduction != 0) {
    throw std::invalid_argument("cbam config: channel_reduction " +
                                std::to_string(channel_reduction) +
                                " does not divide the attended channel count " +
                                std::to_string(channels));
  }
  if (spatial_kernel < 1 || spatial_kernel % 2 == 0) {
    throw std::invalid_argument("cbam config: spatial_kernel must be odd and positive");
  }
}

void FusionConfig::validate() const {
  if (hidden.empty()) {
    throw std::invalid_argument("fusion config: at least one hidden layer required");
  }
  for (const int h : hidden) {
    if (h < 1) throw std::invalid_argument("fusion config: hidden sizes must be >= 1");
  }
  if (dropout.size() > hidden.size()) {
    throw std::invalid_argument("fusion config: more dropout rates than hidden layers");
  }
  for (const float p : dropout) {
    if (p < 0.0f || p >= 1.0f) {
      throw std::invalid_argument("fusion config: dropout rates must be in [0,1)");
    }
  }
  if (num_classes < 2) {
    throw std::invalid_argument("fusion config: num_classes must be >= 2");
  }
}

EWasteNetConfig EWasteNetConfig::normalized() const {
  EWasteNetConfig out = *this;
  out.backbone.image_h = image_h;
  out.backbone.image_w = image_w;
  out.backbone.input_channels = 3;
  return out;
}

void EWasteNetConfig::validate() const {
  if (image_h < 1 || image_w < 1) {
    throw std::invalid_argument("model config: image dims must be positive");
  }
  const EWasteNetConfig n = normalized();
  n.backbone.validate();
  n.aspp.validate();
  n.cbam.validate(n.aspp.out_channels());
  n.fusion.validate();
}

Tensor EWasteNet::sobel_kernel_tensor(SobelMode mode) {
  // horizontal gradient; the vertical kernel is its transpose
  const std::vector<float> gx = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
  const std::vector<float> gy = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
  if (mode == SobelMode::kGxOnly) {
    return Tensor::from({1, 1, 3, 3}, gx);
  }
  std::vector<float> both = gx;
  both.insert(both.end(), gy.begin(), gy.end());
  return Tensor::from({2, 1, 3, 3}, std::move(both));
}

namespace {

Tensor init_conv(ParameterStore& store, const std::string& name, Shape shape,
                 Rng& rng) {
  std::int64_t fan_in = 1;
  for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
  Tensor t = Tensor::zeros(std::move(shape));
  const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
  t.fill_uniform(rng, -bound, bound);
  return store.add(name, std::move(t));
}

}  // namespace

EWasteNet::EWasteNet(const EWasteNetConfig& cfg, std::uint64_t seed)
    : cfg_(cfg.normalized()) {
  cfg_.validate();
  Rng rng(Rng::mix(seed, 0xE3A57Eull));

  // edge stream
  luma_weight_ = store_.add("edge.gray.weight",
                            Tensor::from({1, 3, 1, 1}, {0.299f, 0.587f, 0.114f}),
                            /*frozen=*/true);
  sobel_weight_ = store_.add("edge.sobel.weight", sobel_kernel_tensor(cfg_.sobel_mode),
                             /*frozen=*/true);
  sobel_smooth_y_ = Tensor::from({1, 1, 3, 1}, {1, 2, 1});
  sobel_diff_x_ = Tensor::from({1, 1, 1, 3}, {-1, 0, 1});
  sobel_smooth_x_ = Tensor::from({1, 1, 1, 3}, {1, 2, 1});
  sobel_diff_y_ = Tensor::from({1, 1, 3, 1}, {-1, 0, 1});
  const int sobel_channels = cfg_.sobel_mode == SobelMode::kGxGy ? 2 : 1;
  edge_adapter_w_ =
      init_conv(store_, "edge.adapter.weight", {3, sobel_channels, 3, 3}, rng);
  edge_adapter_b_ = store_.add("edge.adapter.bias", Tensor::zeros({3}));
  edge_deit_ = deit_init(cfg_.backbone, store_, "edge.deit", rng);

  // pyramid stream
  const int k = cfg_.aspp.kernel_size;
  for (std::size_t b = 0; b < cfg_.aspp.filters.size(); ++b) {
    const std::string name = "pyramid.aspp.branch" + std::to_string(b);
    aspp_weights_.push_back(
        init_conv(store_, name + ".weight", {cfg_.aspp.filters[b], 3, k, k}, rng));
    aspp_biases_.push_back(store_.add(name + ".bias", Tensor::zeros({cfg_.aspp.filters[b]})));
  }
  const int channels = cfg_.aspp.out_channels();
  const int reduced = channels / cfg_.cbam.channel_reduction;
  cbam_fc1_w_ = init_conv(store_, "pyramid.cbam.channel.fc1.weight", {channels, reduced}, rng);
  cbam_fc1_b_ = store_.add("pyramid.cbam.channel.fc1.bias", Tensor::zeros({reduced}));
  cbam_fc2_w_ = init_conv(store_, "pyramid.cbam.channel.fc2.weight", {reduced, channels}, rng);
  cbam_fc2_b_ = store_.add("pyramid.cbam.channel.fc2.bias", Tensor::zeros({channels}));
  const int sk = cfg_.cbam.spatial_kernel;
  cbam_spatial_w_ = init_conv(store_, "pyramid.cbam.spatial.conv.weight", {1, 2, sk, sk}, rng);
  cbam_spatial_b_ = store_.add("pyramid.cbam.spatial.conv.bias", Tensor::zeros({1}));
  pyramid_adapter_w_ =
      init_conv(store_, "pyramid.adapter.weight", {3, channels, 3, 3}, rng);
  pyramid_adapter_b_ = store_.add("pyramid.adapter.bias", Tensor::zeros({3}));
  pyramid_deit_ = deit_init(cfg_.backbone, store_, "pyramid.deit", rng);

  // fusion head
  int in_features = 2 * cfg_.backbone.embed_dim;
  for (std::size_t i = 0; i < cfg_.fusion.hidden.size(); ++i) {
    const std::string name = "fusion.fc" + std::to_string(i + 1);
    fusion_weights_.push_back(
        init_conv(store_, name + ".weight", {in_features, cfg_.fusion.hidden[i]}, rng));
    fusion_biases_.push_back(
        store_.add(name + ".bias", Tensor::zeros({cfg_.fusion.hidden[i]})));
    in_features = cfg_.fusion.hidden[i];
  }
  fusion_weights_.push_back(
      init_conv(store_, "fusion.out.weight", {in_features, cfg_.fusion.num_classes}, rng));
  fusion_biases_.push_back(
      store_.add("fusion.out.bias", Tensor::zeros({cfg_.fusion.num_classes})));
}

Tensor EWasteNet::adapt(const Tensor& x, const Tensor& weight, const Tensor& bias) const {
  return add_channel_bias(conv2d(x, weight, 1, 1, Padding::kSame), bias);
}

Tensor EWasteNet::sobel_apply(const Tensor& gray) const {
  if (gray.ndim() != 4 || gray.dim(1) != 1) {
    throw std::invalid_argument("sobel_apply: expected single-channel [N,1,H,W], got " +
                                shape_str(gray.shape()));
  }
  // Replicated borders: a gradient operator must read a constant field as
  // zero everywhere, which zero padding would break at the image edge.
  Tensor padded = pad_edge(gray, 1);
  Tensor gx = conv2d(conv2d(padded, sobel_smooth_y_, 1, 1, Padding::kValid),
                     sobel_diff_x_, 1, 1, Padding::kValid);
  if (cfg_.sobel_mode == SobelMode::kGxOnly) return gx;
  Tensor gy = conv2d(conv2d(padded, sobel_smooth_x_, 1, 1, Padding::kValid),
                     sobel_diff_y_, 1, 1, Padding::kValid);
  return concat(std::vector<Tensor>{gx, gy}, 1);
}

Tensor EWasteNet::edge_stream(const Tensor& images) const {
  Tensor gray = conv2d(images, luma_weight_, 1, 1, Padding::kSame);
  Tensor edges = sobel_apply(gray);
  Tensor adapted = adapt(edges, edge_adapter_w_, edge_adapter_b_);
  return deit_forward(adapted, cfg_.backbone, edge_deit_);
}

Tensor EWasteNet::aspp_forward(const Tensor& x) const {
  if (x.ndim() != 4 || x.dim(1) != 3) {
    throw std::invalid_argument("aspp_forward: expected [N,3,H,W] input, got " +
                                shape_str(x.shape()));
  }
  std::vector<Tensor> branches;
  branches.reserve(aspp_weights_.size());
  for (std::size_t b = 0; b < aspp_weights_.size(); ++b) {
    Tensor conv = conv2d(x, aspp_weights_[b], 1, cfg_.aspp.dilations[b], Padding::kSame);
    branches.push_back(relu(add_channel_bias(conv, aspp_biases_[b])));
  }
  return concat(branches, 1);
}

Tensor EWasteNet::cbam_forward(const Tensor& x) const {
  const int channels = cfg_.aspp.out_channels();
  if (x.ndim() != 4 || x.dim(1) != channels) {
    throw std::invalid_argument("cbam_forward: expected " + std::to_string(channels) +
                                " channels, got " + shape_str(x.shape()));
  }
  const std::int64_t n = x.dim(0);

  auto spatial_gate = [&](const Tensor& in) {
    Tensor mean_map = pool_global(in, PoolKind::kAvg, PoolOver::kChannel);
    Tensor max_map = pool_global(in, PoolKind::kMax, PoolOver::kChannel);
    Tensor stacked = concat(std::vector<Tensor>{mean_map, max_map}, 1);
    Tensor pre = adapt(stacked, cbam_spatial_w_, cbam_spatial_b_);
    return sigmoid(pre);  // [N,1,H,W]
  };
  auto channel_gate = [&](const Tensor& in) {
    auto shared_mlp = [&](const Tensor& pooled) {
      Tensor flat = reshape(pooled, {n, channels});
      Tensor hid = relu(linear(flat, cbam_fc1_w_, cbam_fc1_b_));
      return linear(hid, cbam_fc2_w_, cbam_fc2_b_);
    };
    Tensor avg = shared_mlp(pool_global(in, PoolKind::kAvg, PoolOver::kSpatial));
    Tensor mx = shared_mlp(pool_global(in, PoolKind::kMax, PoolOver::kSpatial));
    return reshape(sigmoid(add(avg, mx)), {n, channels, 1, 1});
  };

  if (cfg_.cbam.order == CbamOrder::kSpatialFirst) {
    Tensor spatial_attended = mul_broadcast(x, spatial_gate(x));
    return mul_broadcast(spatial_attended, channel_gate(spatial_attended));
  }
  Tensor channel_attended = mul_broadcast(x, channel_gate(x));
  return mul_broadcast(channel_attended, spatial_gate(channel_attended));
}

Tensor EWasteNet::pyramid_stream(const Tensor& images) const {
  Tensor attended = cbam_forward(aspp_forward(images));
  Tensor adapted = adapt(attended, pyramid_adapter_w_, pyramid_adapter_b_);
  return deit_forward(adapted, cfg_.backbone, pyramid_deit_);
}

Tensor EWasteNet::fusion_logits(const Tensor& merged, bool training, Rng* rng) const {
  if (training && !rng) {
    throw std::invalid_argument("fusion: training mode requires an rng for dropout");
  }
  Tensor h = merged;
  for (std::size_t i = 0; i < cfg_.fusion.hidden.size(); ++i) {
    h = relu(linear(h, fusion_weights_[i], fusion_biases_[i]));
    if (training && i < cfg_.fusion.dropout.size()) {
      h = dropout(h, cfg_.fusion.dropout[i], true, *rng);
    }
  }
  return linear(h, fusion_weights_.back(), fusion_biases_.back());
}

Tensor EWasteNet::fusion_head(const Tensor& edge_feature, const Tensor& pyramid_feature,
                              bool training, Rng* rng) const {
  if (edge_feature.shape() != pyramid_feature.shape()) {
    throw std::invalid_argument("fusion: stream features differ " +
                                shape_str(edge_feature.shape()) + " vs " +
                                shape_str(pyramid_feature.shape()));
  }
  Tensor merged = concat(std::vector<Tensor>{edge_feature, pyramid_feature}, 1);
  return softmax(fusion_logits(merged, training, rng), -1);
}

Tensor EWasteNet::forward_logits(const Tensor& images, bool training, Rng* rng) const {
  if (images.ndim() != 4 || images.dim(1) != 3 || images.dim(2) != cfg_.image_h ||
      images.dim(3) != cfg_.image_w) {
    throw std::invalid_argument("forward: expected [N,3," + std::to_string(cfg_.image_h) +
                                "," + std::to_string(cfg_.image_w) + "], got " +
                                shape_str(images.shape()));
  }
  Tensor f1 = edge_stream(images);
  Tensor f2 = pyramid_stream(images);
  Tensor merged = concat(std::vector<Tensor>{f1, f2}, 1);
  return fusion_logits(merged, training, rng);
}

Tensor EWasteNet::forward_proba(const Tensor& images) const {
  return softmax(forward_logits(images, false, nullptr), -1);
}

std::pair<std::int64_t, std::int64_t> count_trainable_parameters(
    const ParameterStore& params) {
  return params.count();
}

}  // namespace ewn
