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

// Generates the bundled synthetic dataset: eight classes of programmatically
// drawn shapes with class-specific geometry and palette, a few variants each.
// Usage: make_synthetic <out_dir> [variants_per_class]

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "ewn/image.hpp"
#include "ewn/rng.hpp"

namespace fs = std::filesystem;
using ewn::Image;
using ewn::Rng;

namespace {

constexpr int kSize = 64;

struct Palette {
  float r, g, b;
};

void fill_background(Image& img, const Palette& c) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      img.at(y, x, 0) = c.r;
      img.at(y, x, 1) = c.g;
      img.at(y, x, 2) = c.b;
    }
}

void put(Image& img, int y, int x, const Palette& c) {
  if (y < 0 || y >= img.h || x < 0 || x >= img.w) return;
  img.at(y, x, 0) = c.r;
  img.at(y, x, 1) = c.g;
  img.at(y, x, 2) = c.b;
}

void rect(Image& img, int y0, int x0, int y1, int x1, const Palette& c, bool filled) {
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      if (filled || y == y0 || y == y1 || x == x0 || x == x1) put(img, y, x, c);
    }
}

void disk(Image& img, float cy, float cx, float ry, float rx, const Palette& c) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const float dy = (static_cast<float>(y) - cy) / ry;
      const float dx = (static_cast<float>(x) - cx) / rx;
      if (dy * dy + dx * dx <= 1.0f) put(img, y, x, c);
    }
}

Image draw(int cls, int variant) {
  Rng rng(Rng::mix(0x5E17u, static_cast<std::uint64_t>(cls),
                   static_cast<std::uint64_t>(variant)));
  Image img = Image::zeros(kSize, kSize, 3);
  const float tint = 0.06f * static_cast<float>(variant);
  const int jy = static_cast<int>(rng.next_below(5)) - 2;
  const int jx = static_cast<int>(rng.next_below(5)) - 2;
  const int cy = 32 + jy, cx = 32 + jx;

  switch (cls) {
    case 0: {  // Camera: dark body with a bright lens disk
      fill_background(img, {0.15f + tint, 0.15f, 0.2f});
      rect(img, cy - 14, cx - 20, cy + 14, cx + 20, {0.35f, 0.35f, 0.4f}, true);
      disk(img, static_cast<float>(cy), static_cast<float>(cx), 9, 9, {0.95f, 0.9f, 0.2f});
      disk(img, static_cast<float>(cy), static_cast<float>(cx), 4, 4, {0.1f, 0.1f, 0.12f});
      break;
    }
    case 1: {  // Keyboards: horizontal key rows
      fill_background(img, {0.75f - tint, 0.75f, 0.78f});
      for (int row = 0; row < 6; ++row) {
        for (int col = 0; col < 8; ++col) {
          const int y0 = 8 + row * 9 + jy;
          const int x0 = 4 + col * 8 + jx;
          rect(img, y0, x0, y0 + 6, x0 + 5, {0.2f, 0.2f + tint, 0.25f}, true);
        }
      }
      break;
    }
    case 2: {  // Laptop: screen above a base slab
      fill_background(img, {0.85f, 0.8f - tint, 0.7f});
      rect(img, 6 + jy, 12 + jx, 34 + jy, 52 + jx, {0.1f, 0.25f, 0.5f + tint}, true);
      rect(img, 38 + jy, 6 + jx, 54 + jy, 58 + jx, {0.35f, 0.35f, 0.35f}, true);
      break;
    }
    case 3: {  // Microwave: wide box with door and dial column
      fill_background(img, {0.3f, 0.5f + tint, 0.45f});
      rect(img, 14 + jy, 4 + jx, 50 + jy, 59 + jx, {0.85f, 0.85f, 0.9f}, true);
      rect(img, 18 + jy, 9 + jx, 46 + jy, 41 + jx, {0.15f, 0.15f, 0.2f}, true);
      for (int k = 0; k < 4; ++k) {
        disk(img, static_cast<float>(24 + k * 7 + jy), static_cast<float>(51 + jx), 2.5f,
             2.5f, {0.9f, 0.4f, 0.2f});
      }
      break;
    }
    case 4: {  // Mobile: tall rounded slab with a bright screen
      fill_background(img, {0.9f - tint, 0.65f, 0.65f});
      rect(img, 6 + jy, 22 + jx, 58 + jy, 42 + jx, {0.08f, 0.08f, 0.1f}, true);
      rect(img, 10 + jy, 25 + jx, 50 + jy, 39 + jx, {0.3f, 0.8f, 0.95f - tint}, true);
      disk(img, static_cast<float>(54 + jy), static_cast<float>(cx), 2, 2, {0.8f, 0.8f, 0.8f});
      break;
    }
    case 5: {  // Mouses: diagonal ellipse with a scroll slot
      fill_background(img, {0.55f, 0.75f, 0.35f + tint});
      disk(img, static_cast<float>(cy), static_cast<float>(cx), 20, 13, {0.9f, 0.9f, 0.95f});
      rect(img, cy - 18, cx - 1, cy - 8, cx + 1, {0.2f, 0.2f, 0.25f}, true);
      break;
    }
    case 6: {  // Smartwatch: small square face on a vertical band
      fill_background(img, {0.4f + tint, 0.3f, 0.55f});
      rect(img, 0, cx - 6, 63, cx + 6, {0.2f, 0.18f, 0.22f}, true);
      rect(img, cy - 11, cx - 13, cy + 11, cx + 13, {0.85f, 0.85f, 0.88f}, true);
      rect(img, cy - 7, cx - 9, cy + 7, cx + 9, {0.05f, 0.3f + tint, 0.2f}, true);
      break;
    }
    default: {  // TV: thin bright frame around a dark panel, on legs
      fill_background(img, {0.7f, 0.7f, 0.3f + tint});
      rect(img, 8 + jy, 4 + jx, 46 + jy, 59 + jx, {0.9f, 0.9f, 0.9f}, true);
      rect(img, 11 + jy, 7 + jx, 43 + jy, 56 + jx, {0.1f, 0.1f, 0.3f}, true);
      rect(img, 47 + jy, 20 + jx, 56 + jy, 23 + jx, {0.2f, 0.2f, 0.2f}, true);
      rect(img, 47 + jy, 40 + jx, 56 + jy, 43 + jx, {0.2f, 0.2f, 0.2f}, true);
      break;
    }
  }
  return img;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <out_dir> [variants_per_class]\n", argv[0]);
    return 2;
  }
  const fs::path out_dir = argv[1];
  const int variants = argc > 2 ? std::atoi(argv[2]) : 4;
  const std::vector<std::string> classes = {"Camera",    "Keyboards", "Laptop",
                                            "Microwave", "Mobile",    "Mouses",
                                            "Smartwatch", "TV"};
  for (std::size_t cls = 0; cls < classes.size(); ++cls) {
    fs::create_directories(out_dir / classes[cls]);
    for (int v = 0; v < variants; ++v) {
      char name[32];
      std::snprintf(name, sizeof(name), "shape_%02d.ppm", v);
      ewn::write_ppm(out_dir / classes[cls] / name, draw(static_cast<int>(cls), v));
    }
  }
  std::printf("wrote %zu classes x %d variants under %s\n", classes.size(), variants,
              out_dir.string().c_str());
  return 0;
}
