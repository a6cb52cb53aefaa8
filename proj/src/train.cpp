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

#include "ewn/train.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "ewn/ops.hpp"
#include "json.hpp"

namespace ewn {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(learning_rate > 0.0f)) {
    throw std::invalid_argument("train config: learning_rate must be positive");
  }
  if (beta1 < 0.0f || beta1 >= 1.0f || beta2 < 0.0f || beta2 >= 1.0f) {
    throw std::invalid_argument("train config: betas must be in [0,1)");
  }
  if (!(eps > 0.0f)) throw std::invalid_argument("train config: eps must be positive");
}

void Adam::step(ParameterStore& params) {
  if (slots_.size() != params.size()) slots_.resize(params.size());
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(beta1_), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(beta2_), static_cast<double>(t_));
  for (std::size_t i = 0; i < params.names().size(); ++i) {
    Tensor t = params.get(params.names()[i]);
    if (!t.requires_grad() || !t.has_grad()) continue;
    Slot& slot = slots_[i];
    const auto g = t.grad();
    auto w = t.mutable_data();
    if (slot.m.size() != w.size()) {
      slot.m.assign(w.size(), 0.0f);
      slot.v.assign(w.size(), 0.0f);
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      slot.m[j] = beta1_ * slot.m[j] + (1.0f - beta1_) * g[j];
      slot.v[j] = beta2_ * slot.v[j] + (1.0f - beta2_) * g[j] * g[j];
      const float mhat = slot.m[j] / static_cast<float>(bc1);
      const float vhat = slot.v[j] / static_cast<float>(bc2);
      w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

LoadedSplit load_split(const fs::path& root, const DatasetIndex& index,
                       const SplitSpec& spec, Split which, int out_h, int out_w,
                       const std::string& background_removal_cmd) {
  LoadedSplit out;
  for (const std::size_t i : entries_in_split(index, spec, which)) {
    const fs::path path = root / index.entries[i].rel_path;
    Image img;
    if (!background_removal_cmd.empty()) {
      const fs::path processed =
          fs::temp_directory_path() /
          ("ewn_bg_" + std::to_string(::getpid()) + "_" + std::to_string(i) + ".ppm");
      const std::string cmd = background_removal_cmd + " '" + path.string() + "' '" +
                              processed.string() + "'";
      const int rc = std::system(cmd.c_str());
      if (rc != 0) {
        throw std::runtime_error("background removal failed (exit " + std::to_string(rc) +
                                 "): " + cmd);
      }
      img = decode_image(processed);
      fs::remove(processed);
    } else {
      img = decode_image(path);
    }
    out.samples.push_back(ImageSample{resize(img, out_h, out_w),
                                      index.entries[i].label, path.string()});
  }
  return out;
}

namespace {

// HWC [0,1] images -> normalized NCHW batch in [-1,1].
Tensor stack_batch(const std::vector<const Image*>& images) {
  const int h = images[0]->h, w = images[0]->w, c = images[0]->c;
  Tensor batch = Tensor::zeros({static_cast<std::int64_t>(images.size()), c, h, w});
  auto out = batch.mutable_data();
  std::size_t pos = 0;
  for (const Image* img : images) {
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out[pos++] = (img->at(y, x, ch) - 0.5f) / 0.5f;
  }
  return batch;
}

}  // namespace

EpochStats train_epoch(EWasteNet& model, Adam& optimizer, const LoadedSplit& train,
                       const TrainConfig& cfg, const AugmentationSpec& augment_spec,
                       int epoch) {
  cfg.validate();
  if (train.size() == 0) {
    throw std::invalid_argument("train_epoch: empty training split");
  }
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch), 0x5u));
  shuffle_rng.shuffle(order);

  double loss_sum = 0.0;
  std::int64_t correct = 0;
  int step_in_epoch = 0;
  for (std::size_t begin = 0; begin < order.size();
       begin += static_cast<std::size_t>(cfg.batch_size), ++step_in_epoch) {
    const std::size_t end =
        std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
    std::vector<Image> augmented;
    std::vector<const Image*> views;
    std::vector<int> labels;
    augmented.reserve(end - begin);
    for (std::size_t j = begin; j < end; ++j) {
      const std::size_t idx = order[j];
      Rng sample_rng(
          Rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx)));
      augmented.push_back(augment(train.image(idx), augment_spec, sample_rng));
      labels.push_back(train.label(idx));
    }
    for (const Image& img : augmented) views.push_back(&img);
    Tensor batch = stack_batch(views);

    Rng dropout_rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch),
                             0xD0000000ull + static_cast<std::uint64_t>(step_in_epoch)));
    Tensor logits = model.forward_logits(batch, /*training=*/true, &dropout_rng);
    Tensor loss = cross_entropy(logits, labels);
    loss.backward();
    optimizer.step(model.params());
    model.params().zero_grads();

    loss_sum += static_cast<double>(loss.item()) * static_cast<double>(end - begin);
    const std::vector<int> pred = argmax_rows(logits);
    for (std::size_t j = 0; j < pred.size(); ++j) {
      if (pred[j] == labels[j]) ++correct;
    }
  }
  return {loss_sum / static_cast<double>(train.size()),
          static_cast<double>(correct) / static_cast<double>(train.size())};
}

EpochStats evaluate_split(const EWasteNet& model, const LoadedSplit& split,
                          int batch_size) {
  if (split.size() == 0) return {0.0, 0.0};
  NoGradGuard no_grad;
  double loss_sum = 0.0;
  std::int64_t correct = 0;
  for (std::size_t begin = 0; begin < split.size();
       begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(split.size(), begin + static_cast<std::size_t>(batch_size));
    std::vector<const Image*> views;
    std::vector<int> labels;
    for (std::size_t j = begin; j < end; ++j) {
      views.push_back(&split.image(j));
      labels.push_back(split.label(j));
    }
    Tensor logits = model.forward_logits(stack_batch(views));
    loss_sum += static_cast<double>(cross_entropy(logits, labels).item()) *
                static_cast<double>(end - begin);
    const std::vector<int> pred = argmax_rows(logits);
    for (std::size_t j = 0; j < pred.size(); ++j) {
      if (pred[j] == labels[j]) ++correct;
    }
  }
  return {loss_sum / static_cast<double>(split.size()),
          static_cast<double>(correct) / static_cast<double>(split.size())};
}

FitResult fit(EWasteNet& model, const LoadedSplit& train, const LoadedSplit& val,
              const TrainConfig& cfg, const AugmentationSpec& augment_spec,
              const fs::path& out_dir,
              const std::function<void(int, const EpochStats&, const EpochStats&)>&
                  per_epoch,
              const std::vector<std::string>* class_names) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("fit: empty training split");
  fs::create_directories(out_dir);
  if (cfg.freeze_backbones) {
    model.params().freeze_prefix("edge.deit.");
    model.params().freeze_prefix("pyramid.deit.");
  }
  Adam optimizer(cfg);
  FitResult result;
  double best_accuracy = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const EpochStats ts = train_epoch(model, optimizer, train, cfg, augment_spec, epoch);
    const EpochStats vs = evaluate_split(model, val, cfg.batch_size);
    result.history.train_loss.push_back(ts.loss);
    result.history.train_accuracy.push_back(ts.accuracy);
    result.history.val_loss.push_back(vs.loss);
    result.history.val_accuracy.push_back(vs.accuracy);
    if (vs.accuracy > best_accuracy) {
      best_accuracy = vs.accuracy;
      result.best_epoch = epoch;
      save_checkpoint(model, out_dir / "best", epoch,
                      Rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch)),
                      &result.history, class_names);
    }
    if (per_epoch) per_epoch(epoch, ts, vs);
  }
  save_checkpoint(model, out_dir / "final", cfg.epochs,
                  Rng::mix(cfg.seed, static_cast<std::uint64_t>(cfg.epochs)),
                  &result.history, class_names);
  return result;
}

namespace {

void append_le_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t read_le_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

const char* sobel_mode_name(SobelMode m) {
  return m == SobelMode::kGxGy ? "gx_gy" : "gx_only";
}
const char* cbam_order_name(CbamOrder o) {
  return o == CbamOrder::kSpatialFirst ? "spatial_first" : "channel_first";
}

void check_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                const std::string& context) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw std::runtime_error("config: unknown key '" + key + "' in " + context);
    }
  }
}

}  // namespace

std::string model_config_to_json(const EWasteNetConfig& cfg) {
  ordered_json doc;
  doc["image_h"] = cfg.image_h;
  doc["image_w"] = cfg.image_w;
  doc["sobel_mode"] = sobel_mode_name(cfg.sobel_mode);
  doc["backbone"] = {{"patch_size", cfg.backbone.patch_size},
                     {"embed_dim", cfg.backbone.embed_dim},
                     {"depth", cfg.backbone.depth},
                     {"num_heads", cfg.backbone.num_heads},
                     {"mlp_ratio", cfg.backbone.mlp_ratio}};
  doc["aspp"] = {{"dilations", cfg.aspp.dilations},
                 {"filters", cfg.aspp.filters},
                 {"kernel_size", cfg.aspp.kernel_size}};
  doc["cbam"] = {{"channel_reduction", cfg.cbam.channel_reduction},
                 {"spatial_kernel", cfg.cbam.spatial_kernel},
                 {"order", cbam_order_name(cfg.cbam.order)}};
  doc["fusion"] = {{"hidden", cfg.fusion.hidden},
                   {"dropout", cfg.fusion.dropout},
                   {"num_classes", cfg.fusion.num_classes}};
  return doc.dump(2);
}

EWasteNetConfig model_config_from_json(const std::string& text) {
  const auto doc = ordered_json::parse(text);
  EWasteNetConfig cfg;
  check_keys(doc, {"image_h", "image_w", "sobel_mode", "backbone", "aspp", "cbam", "fusion"},
             "model");
  if (doc.contains("image_h")) cfg.image_h = doc["image_h"].get<int>();
  if (doc.contains("image_w")) cfg.image_w = doc["image_w"].get<int>();
  if (doc.contains("sobel_mode")) {
    const std::string mode = doc["sobel_mode"].get<std::string>();
    if (mode == "gx_gy") {
      cfg.sobel_mode = SobelMode::kGxGy;
    } else if (mode == "gx_only") {
      cfg.sobel_mode = SobelMode::kGxOnly;
    } else {
      throw std::runtime_error("config: sobel_mode must be gx_gy or gx_only, got " + mode);
    }
  }
  if (doc.contains("backbone")) {
    const auto& b = doc["backbone"];
    check_keys(b, {"patch_size", "embed_dim", "depth", "num_heads", "mlp_ratio"},
               "model.backbone");
    if (b.contains("patch_size")) cfg.backbone.patch_size = b["patch_size"].get<int>();
    if (b.contains("embed_dim")) cfg.backbone.embed_dim = b["embed_dim"].get<int>();
    if (b.contains("depth")) cfg.backbone.depth = b["depth"].get<int>();
    if (b.contains("num_heads")) cfg.backbone.num_heads = b["num_heads"].get<int>();
    if (b.contains("mlp_ratio")) cfg.backbone.mlp_ratio = b["mlp_ratio"].get<float>();
  }
  if (doc.contains("aspp")) {
    const auto& a = doc["aspp"];
    check_keys(a, {"dilations", "filters", "kernel_size"}, "model.aspp");
    if (a.contains("dilations")) cfg.aspp.dilations = a["dilations"].get<std::vector<int>>();
    if (a.contains("filters")) cfg.aspp.filters = a["filters"].get<std::vector<int>>();
    if (a.contains("kernel_size")) cfg.aspp.kernel_size = a["kernel_size"].get<int>();
  }
  if (doc.contains("cbam")) {
    const auto& c = doc["cbam"];
    check_keys(c, {"channel_reduction", "spatial_kernel", "order"}, "model.cbam");
    if (c.contains("channel_reduction")) {
      cfg.cbam.channel_reduction = c["channel_reduction"].get<int>();
    }
    if (c.contains("spatial_kernel")) cfg.cbam.spatial_kernel = c["spatial_kernel"].get<int>();
    if (c.contains("order")) {
      const std::string order = c["order"].get<std::string>();
      if (order == "spatial_first") {
        cfg.cbam.order = CbamOrder::kSpatialFirst;
      } else if (order == "channel_first") {
        cfg.cbam.order = CbamOrder::kChannelFirst;
      } else {
        throw std::runtime_error("config: cbam.order must be spatial_first or channel_first");
      }
    }
  }
  if (doc.contains("fusion")) {
    const auto& f = doc["fusion"];
    check_keys(f, {"hidden", "dropout", "num_classes"}, "model.fusion");
    if (f.contains("hidden")) cfg.fusion.hidden = f["hidden"].get<std::vector<int>>();
    if (f.contains("dropout")) cfg.fusion.dropout = f["dropout"].get<std::vector<float>>();
    if (f.contains("num_classes")) cfg.fusion.num_classes = f["num_classes"].get<int>();
  }
  return cfg;
}

std::string history_to_json(const History& h) {
  ordered_json doc;
  doc["train_loss"] = h.train_loss;
  doc["train_accuracy"] = h.train_accuracy;
  doc["val_loss"] = h.val_loss;
  doc["val_accuracy"] = h.val_accuracy;
  return doc.dump(2) + "\n";
}

History history_from_json(const std::string& text) {
  const auto doc = ordered_json::parse(text);
  History h;
  h.train_loss = doc.at("train_loss").get<std::vector<double>>();
  h.train_accuracy = doc.at("train_accuracy").get<std::vector<double>>();
  h.val_loss = doc.at("val_loss").get<std::vector<double>>();
  h.val_accuracy = doc.at("val_accuracy").get<std::vector<double>>();
  return h;
}

void save_checkpoint(const EWasteNet& model, const fs::path& dir, int epoch,
                     std::uint64_t rng_state, const History* history,
                     const std::vector<std::string>* class_names) {
  const ParameterStore& params = model.params();
  ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["config"] = ordered_json::parse(model_config_to_json(model.config()));
  manifest["epoch"] = epoch;
  manifest["rng_state"] = rng_state;
  if (class_names) manifest["classes"] = *class_names;
  ordered_json tensors = ordered_json::array();
  std::string blob;
  for (const std::string& name : params.names()) {
    const Tensor& t = params.get(name);
    ordered_json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = blob.size();
    entry["frozen"] = !t.requires_grad();
    tensors.push_back(std::move(entry));
    for (const float v : t.data()) {
      std::uint32_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      append_le_u32(blob, bits);
    }
  }
  manifest["tensors"] = std::move(tensors);

  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write_file(tmp / "manifest.json", manifest.dump(2) + "\n");
  write_file(tmp / "weights.bin", blob);
  if (history) write_file(tmp / "history.json", history_to_json(*history));

  const fs::path old = dir.string() + ".old";
  fs::remove_all(old);
  if (fs::exists(dir)) fs::rename(dir, old);
  fs::rename(tmp, dir);
  fs::remove_all(old);
}

EWasteNetConfig checkpoint_config(const fs::path& dir) {
  const auto manifest = ordered_json::parse(read_file(dir / "manifest.json"));
  return model_config_from_json(manifest.at("config").dump());
}

LoadedCheckpoint load_checkpoint(EWasteNet& model, const fs::path& dir) {
  const auto manifest = ordered_json::parse(read_file(dir / "manifest.json"));
  if (manifest.at("format_version").get<int>() != 1) {
    throw std::runtime_error("checkpoint " + dir.string() + ": unsupported format version");
  }
  LoadedCheckpoint out;
  out.config = model_config_from_json(manifest.at("config").dump());
  out.epoch = manifest.at("epoch").get<int>();
  out.rng_state = manifest.at("rng_state").get<std::uint64_t>();
  if (manifest.contains("classes")) {
    out.class_names = manifest.at("classes").get<std::vector<std::string>>();
  }

  const std::string blob = read_file(dir / "weights.bin");
  const auto& tensors = manifest.at("tensors");
  ParameterStore& params = model.params();
  if (tensors.size() != params.size()) {
    throw std::runtime_error("checkpoint " + dir.string() + ": has " +
                             std::to_string(tensors.size()) + " tensors, model expects " +
                             std::to_string(params.size()));
  }
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = tensors[i];
    const std::string name = entry.at("name").get<std::string>();
    if (name != params.names()[i]) {
      throw std::runtime_error("checkpoint " + dir.string() + ": tensor " +
                               std::to_string(i) + " is '" + name + "', model expects '" +
                               params.names()[i] + "'");
    }
    Tensor t = params.get(name);
    const Shape shape = entry.at("shape").get<Shape>();
    if (shape != t.shape()) {
      throw std::runtime_error("checkpoint " + dir.string() + ": tensor '" + name +
                               "' has shape " + shape_str(shape) + ", model expects " +
                               shape_str(t.shape()));
    }
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    if (offset != expected_offset) {
      throw std::runtime_error("checkpoint " + dir.string() + ": tensor '" + name +
                               "' offset " + std::to_string(offset) + " is not contiguous");
    }
    const std::size_t bytes = static_cast<std::size_t>(t.numel()) * 4;
    if (offset + bytes > blob.size()) {
      throw std::runtime_error("checkpoint " + dir.string() + ": weights.bin truncated at '" +
                               name + "'");
    }
    auto data = t.mutable_data();
    const unsigned char* p = reinterpret_cast<const unsigned char*>(blob.data()) + offset;
    for (std::size_t j = 0; j < data.size(); ++j) {
      const std::uint32_t bits = read_le_u32(p + 4 * j);
      std::memcpy(&data[j], &bits, sizeof(float));
    }
    expected_offset = offset + bytes;
  }
  if (expected_offset != blob.size()) {
    throw std::runtime_error("checkpoint " + dir.string() + ": weights.bin has " +
                             std::to_string(blob.size()) + " bytes, manifest covers " +
                             std::to_string(expected_offset));
  }
  if (fs::exists(dir / "history.json")) {
    out.history = history_from_json(read_file(dir / "history.json"));
  }
  return out;
}

}  // namespace ewn
