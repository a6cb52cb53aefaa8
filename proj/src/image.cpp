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

#include "ewn/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace ewn {

namespace {

[[noreturn]] void ppm_error(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("ppm: " + path.string() + ": " + what);
}

// Next header token, skipping whitespace and '#' comments. The terminating
// byte is pushed back so the caller sees the single whitespace that separates
// the header from the payload.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) {
      tok.push_back(static_cast<char>(ch));
      break;
    }
  }
  while ((ch = in.get()) != EOF && !std::isspace(ch) && ch != '#') {
    tok.push_back(static_cast<char>(ch));
  }
  if (ch != EOF) in.unget();
  return tok;
}

int parse_header_int(std::istream& in, const std::filesystem::path& path,
                     const char* field) {
  const std::string tok = next_token(in);
  if (tok.empty()) ppm_error(path, std::string("truncated header before ") + field);
  try {
    const long v = std::stol(tok);
    if (v <= 0) ppm_error(path, std::string("non-positive ") + field);
    return static_cast<int>(v);
  } catch (const std::logic_error&) {
    ppm_error(path, std::string("malformed ") + field + " '" + tok + "'");
  }
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ppm_error(path, "cannot open file");
  if (next_token(in) != "P6") ppm_error(path, "not a binary PPM (expected magic P6)");
  const int w = parse_header_int(in, path, "width");
  const int h = parse_header_int(in, path, "height");
  const int maxval = parse_header_int(in, path, "maxval");
  if (maxval >= 65536) ppm_error(path, "maxval out of range");
  // exactly one whitespace byte separates the header from the payload
  const int sep = in.get();
  if (sep == EOF || !std::isspace(sep)) ppm_error(path, "missing header terminator");

  const std::size_t npx = static_cast<std::size_t>(w) * h * 3;
  const int bytes_per_value = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(npx * static_cast<std::size_t>(bytes_per_value));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    ppm_error(path, "truncated pixel payload");
  }

  Image img = Image::zeros(h, w, 3);
  const float inv = 1.0f / static_cast<float>(maxval);
  if (bytes_per_value == 1) {
    for (std::size_t i = 0; i < npx; ++i) img.px[i] = static_cast<float>(raw[i]) * inv;
  } else {
    for (std::size_t i = 0; i < npx; ++i) {
      const unsigned v = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
      if (v > static_cast<unsigned>(maxval)) ppm_error(path, "sample exceeds maxval");
      img.px[i] = static_cast<float>(v) * inv;
    }
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  if (img.c != 3) {
    throw std::invalid_argument("write_ppm: expected 3 channels, got " +
                                std::to_string(img.c));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) ppm_error(path, "cannot open for writing");
  out << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> raw(img.px.size());
  for (std::size_t i = 0; i < img.px.size(); ++i) {
    const float v = std::clamp(img.px[i], 0.0f, 1.0f);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) ppm_error(path, "write failed");
}

Image decode_image(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".ppm") return read_ppm(path);
  if (ext == ".png") {
    throw std::runtime_error("decode_image: " + path.string() +
                             ": PNG decoding is not enabled in this build; convert to PPM (P6)");
  }
  throw std::runtime_error("decode_image: " + path.string() + ": unsupported extension '" +
                           ext + "'");
}

Image resize(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument("resize: output dims must be positive, got " +
                                std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  if (out_h == img.h && out_w == img.w) return img;
  Image out = Image::zeros(out_h, out_w, img.c);
  const float sy = static_cast<float>(img.h) / static_cast<float>(out_h);
  const float sx = static_cast<float>(img.w) / static_cast<float>(out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    const float fy = (static_cast<float>(oy) + 0.5f) * sy - 0.5f;
    const int y0 = static_cast<int>(std::floor(fy));
    const float wy = fy - static_cast<float>(y0);
    const int y0c = std::clamp(y0, 0, img.h - 1);
    const int y1c = std::clamp(y0 + 1, 0, img.h - 1);
    for (int ox = 0; ox < out_w; ++ox) {
      const float fx = (static_cast<float>(ox) + 0.5f) * sx - 0.5f;
      const int x0 = static_cast<int>(std::floor(fx));
      const float wx = fx - static_cast<float>(x0);
      const int x0c = std::clamp(x0, 0, img.w - 1);
      const int x1c = std::clamp(x0 + 1, 0, img.w - 1);
      for (int ch = 0; ch < img.c; ++ch) {
        const float top = img.at(y0c, x0c, ch) * (1.0f - wx) + img.at(y0c, x1c, ch) * wx;
        const float bot = img.at(y1c, x0c, ch) * (1.0f - wx) + img.at(y1c, x1c, ch) * wx;
        out.at(oy, ox, ch) = top * (1.0f - wy) + bot * wy;
      }
    }
  }
  return out;
}

Image to_grayscale(const Image& img) {
  if (img.c == 1) return img;
  if (img.c != 3) {
    throw std::invalid_argument("to_grayscale: expected 1 or 3 channels, got " +
                                std::to_string(img.c));
  }
  Image out = Image::zeros(img.h, img.w, 1);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      out.at(y, x, 0) = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) +
                        0.114f * img.at(y, x, 2);
  return out;
}

Tensor normalize(const Image& img) {
  Tensor t = Tensor::zeros({1, img.c, img.h, img.w});
  auto out = t.mutable_data();
  std::size_t i = 0;
  for (int ch = 0; ch < img.c; ++ch)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) out[i++] = (img.at(y, x, ch) - 0.5f) / 0.5f;
  return t;
}

Image denormalize(const Tensor& t) {
  if (t.ndim() != 4 || t.dim(0) != 1) {
    throw std::invalid_argument("denormalize: expected [1,C,H,W], got " +
                                shape_str(t.shape()));
  }
  const int c = static_cast<int>(t.dim(1));
  const int h = static_cast<int>(t.dim(2));
  const int w = static_cast<int>(t.dim(3));
  Image img = Image::zeros(h, w, c);
  std::size_t i = 0;
  const auto data = t.data();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(y, x, ch) = data[i++] * 0.5f + 0.5f;
  return img;
}

void AugmentationSpec::validate() const {
  if (rotation_deg_max < 0 || shift_frac_max < 0 || shear_deg_max < 0 ||
      zoom_frac_max < 0) {
    throw std::invalid_argument("augmentation: magnitudes must be non-negative");
  }
  if (hflip_prob < 0.0f || hflip_prob > 1.0f) {
    throw std::invalid_argument("augmentation: hflip_prob must be in [0,1]");
  }
}

AffineParams sample_affine(const AugmentationSpec& spec, Rng& rng) {
  spec.validate();
  AffineParams p;
  p.rotation_deg = rng.uniform(-spec.rotation_deg_max, spec.rotation_deg_max);
  p.shift_y_frac = rng.uniform(-spec.shift_frac_max, spec.shift_frac_max);
  p.shift_x_frac = rng.uniform(-spec.shift_frac_max, spec.shift_frac_max);
  p.shear_deg = rng.uniform(-spec.shear_deg_max, spec.shear_deg_max);
  p.zoom = 1.0f + rng.uniform(-spec.zoom_frac_max, spec.zoom_frac_max);
  p.hflip = rng.bernoulli(spec.hflip_prob);
  return p;
}

Image apply_affine(const Image& img, const AffineParams& params) {
  const float cy = static_cast<float>(img.h - 1) * 0.5f;
  const float cx = static_cast<float>(img.w - 1) * 0.5f;
  const float theta = params.rotation_deg * static_cast<float>(std::numbers::pi) / 180.0f;
  const float phi = params.shear_deg * static_cast<float>(std::numbers::pi) / 180.0f;
  const float cos_t = std::cos(theta);
  const float sin_t = std::sin(theta);
  const float shear = std::tan(phi);
  const float z = params.zoom;
  const float fx = params.hflip ? -1.0f : 1.0f;

  // forward map about the center: rotate . shear . zoom . flip
  // [a b; c d] columns then translation
  const float a = cos_t * z * fx;
  const float b = (cos_t * shear - sin_t) * z;
  const float c = sin_t * z * fx;
  const float d = (sin_t * shear + cos_t) * z;
  const float ty = cy + params.shift_y_frac * static_cast<float>(img.h);
  const float tx = cx + params.shift_x_frac * static_cast<float>(img.w);

  // dst -> src requires the inverse
  const float det = a * d - b * c;
  if (std::abs(det) < 1e-12f) {
    throw std::invalid_argument("apply_affine: singular transform (zoom too small)");
  }
  const float ia = d / det;
  const float ib = -b / det;
  const float ic = -c / det;
  const float id = a / det;

  Image out = Image::zeros(img.h, img.w, img.c);
  for (int oy = 0; oy < img.h; ++oy) {
    for (int ox = 0; ox < img.w; ++ox) {
      const float dy = static_cast<float>(oy) - ty;
      const float dx = static_cast<float>(ox) - tx;
      const float sx = ia * dx + ib * dy + cx;
      const float sy = ic * dx + id * dy + cy;
      if (sx < -1.0f || sx > static_cast<float>(img.w) || sy < -1.0f ||
          sy > static_cast<float>(img.h)) {
        continue;  // zero fill
      }
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const float wx = sx - static_cast<float>(x0);
      const float wy = sy - static_cast<float>(y0);
      for (int ch = 0; ch < img.c; ++ch) {
        float accum = 0.0f;
        for (int yy = 0; yy <= 1; ++yy) {
          const int ys = y0 + yy;
          if (ys < 0 || ys >= img.h) continue;
          const float wyv = yy ? wy : 1.0f - wy;
          if (wyv == 0.0f) continue;
          for (int xx = 0; xx <= 1; ++xx) {
            const int xs = x0 + xx;
            if (xs < 0 || xs >= img.w) continue;
            const float wxv = xx ? wx : 1.0f - wx;
            if (wxv == 0.0f) continue;
            accum += img.at(ys, xs, ch) * wyv * wxv;
          }
        }
        out.at(oy, ox, ch) = accum;
      }
    }
  }
  return out;
}

Image augment(const Image& img, const AugmentationSpec& spec, Rng& rng) {
  return apply_affine(img, sample_affine(spec, rng));
}

}  // namespace ewn
