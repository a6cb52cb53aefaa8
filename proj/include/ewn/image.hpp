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

#include <filesystem>
#include <string>
#include <vector>

#include "ewn/rng.hpp"
#include "ewn/tensor.hpp"

namespace ewn {

// Interleaved HWC pixels in [0,1].
struct Image {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<float> px;

  float at(int y, int x, int ch) const {
    return px[static_cast<std::size_t>((y * w + x) * c + ch)];
  }
  float& at(int y, int x, int ch) {
    return px[static_cast<std::size_t>((y * w + x) * c + ch)];
  }
  static Image zeros(int h, int w, int c) {
    return Image{h, w, c, std::vector<float>(static_cast<std::size_t>(h) * w * c, 0.0f)};
  }
};

struct ImageSample {
  Image pixels;
  int label = -1;
  std::string source_path;
};

// Binary PPM (P6). Maxval up to 65535; values are scaled by 1/maxval.
Image read_ppm(const std::filesystem::path& path);
// Writes P6 with maxval 255.
void write_ppm(const std::filesystem::path& path, const Image& img);

// Dispatches on extension. Only .ppm is decodable in this build; anything
// else reports a descriptive error.
Image decode_image(const std::filesystem::path& path);

// Bilinear with half-pixel centers; a same-size resize is an exact copy.
Image resize(const Image& img, int out_h, int out_w);

// Rec.601 luma: 0.299 R + 0.587 G + 0.114 B.
Image to_grayscale(const Image& img);

// (v - 0.5) / 0.5 per channel, emitted as a [1,C,H,W] tensor.
Tensor normalize(const Image& img);
Image denormalize(const Tensor& t);

struct AugmentationSpec {
  float rotation_deg_max = 20.0f;
  float shift_frac_max = 0.1f;
  float shear_deg_max = 10.0f;
  float zoom_frac_max = 0.1f;
  float hflip_prob = 0.5f;
  void validate() const;
};

struct AffineParams {
  float rotation_deg = 0.0f;
  float shift_y_frac = 0.0f;  // fraction of image height
  float shift_x_frac = 0.0f;  // fraction of image width
  float shear_deg = 0.0f;
  float zoom = 1.0f;
  bool hflip = false;
};

// Draw order is fixed: rotation, vertical shift, horizontal shift, shear,
// zoom, flip. One sample stream must not depend on another's consumption.
AffineParams sample_affine(const AugmentationSpec& spec, Rng& rng);

// Single composed affine warp about the image center, bilinear resampling,
// zero fill outside the source.
Image apply_affine(const Image& img, const AffineParams& params);

Image augment(const Image& img, const AugmentationSpec& spec, Rng& rng);

}  // namespace ewn
