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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "ewn/dataset.hpp"
#include "ewn/image.hpp"
#include "ewn/rng.hpp"

using namespace ewn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ewn_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

Image noise_image(int h, int w, Rng& rng) {
  Image img = Image::zeros(h, w, 3);
  for (float& v : img.px) v = rng.next_float();
  return img;
}

}  // namespace

TEST_CASE("ppm decode: single red pixel and maxval rescaling") {
  TempDir dir("ppm");
  write_bytes(dir.path / "red.ppm", std::string("P6\n1 1\n255\n") + '\xff' + '\x00' + '\x00');
  Image red = read_ppm(dir.path / "red.ppm");
  CHECK(red.h == 1);
  CHECK(red.w == 1);
  CHECK(red.at(0, 0, 0) == 1.0f);
  CHECK(red.at(0, 0, 1) == 0.0f);
  CHECK(red.at(0, 0, 2) == 0.0f);

  // maxval 100: sample 50 decodes to 0.5
  write_bytes(dir.path / "half.ppm", std::string("P6 1 1 100 ") + '\x32' + '\x32' + '\x32');
  Image half = read_ppm(dir.path / "half.ppm");
  CHECK(half.at(0, 0, 0) == doctest::Approx(0.5f));

  // header comments are allowed
  write_bytes(dir.path / "comment.ppm",
              std::string("P6\n# a comment\n1 1\n# another\n255\n") + '\x10' + '\x20' + '\x30');
  Image c = read_ppm(dir.path / "comment.ppm");
  CHECK(c.at(0, 0, 2) == doctest::Approx(0x30 / 255.0f));
}

TEST_CASE("ppm decode errors carry the path") {
  TempDir dir("ppm_err");
  write_bytes(dir.path / "trunc.ppm", "P6\n4 4\n255\nabc");
  CHECK_THROWS_WITH_AS(read_ppm(dir.path / "trunc.ppm"),
                       doctest::Contains("trunc.ppm"), std::runtime_error);
  write_bytes(dir.path / "magic.ppm", "P5\n1 1\n255\nx");
  CHECK_THROWS_AS(read_ppm(dir.path / "magic.ppm"), std::runtime_error);
  CHECK_THROWS_AS(read_ppm(dir.path / "missing.ppm"), std::runtime_error);
  write_bytes(dir.path / "img.png", "\x89PNG...");
  CHECK_THROWS_WITH_AS(decode_image(dir.path / "img.png"),
                       doctest::Contains("PNG"), std::runtime_error);
}

TEST_CASE("ppm encode/decode round-trips bit-exactly") {
  TempDir dir("ppm_rt");
  Rng rng(5);
  Image img = noise_image(7, 5, rng);
  write_ppm(dir.path / "a.ppm", img);
  Image once = read_ppm(dir.path / "a.ppm");
  write_ppm(dir.path / "b.ppm", once);
  Image twice = read_ppm(dir.path / "b.ppm");
  CHECK(once.px == twice.px);
  CHECK(read_bytes(dir.path / "a.ppm") == read_bytes(dir.path / "b.ppm"));
}

TEST_CASE("resize: identity, constancy, monotonicity") {
  Rng rng(15);
  Image img = noise_image(6, 9, rng);
  Image same = resize(img, 6, 9);
  CHECK(same.px == img.px);

  Image flat = Image::zeros(4, 4, 3);
  for (float& v : flat.px) v = 0.37f;
  Image grown = resize(flat, 11, 3);
  for (float v : grown.px) CHECK(v == doctest::Approx(0.37f));

  Image two = Image::zeros(1, 2, 3);
  two.at(0, 1, 0) = two.at(0, 1, 1) = two.at(0, 1, 2) = 1.0f;
  Image four = resize(two, 1, 4);
  for (int x = 0; x + 1 < 4; ++x) CHECK(four.at(0, x, 0) <= four.at(0, x + 1, 0));
  CHECK(four.at(0, 0, 0) == doctest::Approx(0.0f));
  CHECK(four.at(0, 3, 0) == doctest::Approx(1.0f));
  for (float v : four.px) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }

  CHECK_THROWS_AS(resize(img, 0, 5), std::invalid_argument);
}

TEST_CASE("grayscale luma coefficients") {
  Image px = Image::zeros(1, 3, 3);
  // white, pure red, mid gray
  px.at(0, 0, 0) = px.at(0, 0, 1) = px.at(0, 0, 2) = 1.0f;
  px.at(0, 1, 0) = 1.0f;
  px.at(0, 2, 0) = px.at(0, 2, 1) = px.at(0, 2, 2) = 0.6f;
  Image g = to_grayscale(px);
  CHECK(g.c == 1);
  CHECK(g.at(0, 0, 0) == doctest::Approx(1.0f));
  CHECK(g.at(0, 1, 0) == doctest::Approx(0.299f));
  CHECK(g.at(0, 2, 0) == doctest::Approx(0.6f));
}

TEST_CASE("normalize maps [0,1] to [-1,1] and round-trips") {
  Image img = Image::zeros(2, 2, 3);
  img.at(0, 0, 0) = 0.5f;
  img.at(0, 1, 0) = 1.0f;
  img.at(1, 0, 0) = 0.0f;
  Tensor t = normalize(img);
  CHECK(t.shape() == Shape{1, 3, 2, 2});
  CHECK(t.at({0, 0, 0, 0}) == doctest::Approx(0.0f));
  CHECK(t.at({0, 0, 0, 1}) == doctest::Approx(1.0f));
  CHECK(t.at({0, 0, 1, 0}) == doctest::Approx(-1.0f));

  Rng rng(25);
  Image noisy = noise_image(4, 4, rng);
  Image back = denormalize(normalize(noisy));
  for (std::size_t i = 0; i < noisy.px.size(); ++i)
    CHECK(back.px[i] == doctest::Approx(noisy.px[i]).epsilon(1e-6));
}

TEST_CASE("augment: identity spec, flip involution, rotation inverse") {
  Rng rng(35);
  // Smooth content: double bilinear resampling error scales with curvature,
  // so the inverse-rotation bound is stated for natural-image smoothness.
  Image img = Image::zeros(16, 16, 3);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int ch = 0; ch < 3; ++ch)
        img.at(y, x, ch) =
            0.5f + 0.3f * std::sin(0.35f * static_cast<float>(x) + ch) *
                       std::cos(0.3f * static_cast<float>(y));

  AugmentationSpec zero{0, 0, 0, 0, 0};
  Rng arng(1);
  Image same = augment(img, zero, arng);
  CHECK(same.px == img.px);

  AffineParams flip;
  flip.hflip = true;
  Image flipped = apply_affine(img, flip);
  CHECK(flipped.px != img.px);
  Image unflipped = apply_affine(flipped, flip);
  CHECK(unflipped.px == img.px);

  AffineParams rot;
  rot.rotation_deg = 23.0f;
  AffineParams unrot;
  unrot.rotation_deg = -23.0f;
  Image rotated_back = apply_affine(apply_affine(img, rot), unrot);
  double mean_abs = 0.0;
  // interior pixels only: corners leave the frame under rotation
  int count = 0;
  for (int y = 4; y < 12; ++y)
    for (int x = 4; x < 12; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        mean_abs += std::abs(rotated_back.at(y, x, ch) - img.at(y, x, ch));
        ++count;
      }
  mean_abs /= count;
  CHECK(mean_abs < 0.05);

  AugmentationSpec bad;
  bad.hflip_prob = 1.5f;
  CHECK_THROWS_AS(augment(img, bad, arng), std::invalid_argument);

  // dimensions and range are preserved under the default spec
  AugmentationSpec def;
  Image out = augment(img, def, arng);
  CHECK(out.h == img.h);
  CHECK(out.w == img.w);
  for (float v : out.px) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("scan_dataset: sorted classes, deterministic entries") {
  TempDir dir("scan");
  const std::vector<std::string> classes = {"Camera",    "Keyboards", "Laptop",
                                            "Microwave", "Mobile",    "Mouses",
                                            "Smartwatch", "TV"};
  Rng rng(45);
  for (const std::string& c : {"TV", "Mobile", "Camera", "Laptop", "Keyboards",
                               "Microwave", "Smartwatch", "Mouses"}) {
    fs::create_directories(dir.path / c);
    for (int i = 0; i < 3; ++i) {
      write_ppm(dir.path / c / ("img_" + std::to_string(i) + ".ppm"),
                noise_image(4, 4, rng));
    }
  }
  DatasetIndex index = scan_dataset(dir.path);
  CHECK(index.classes == classes);
  CHECK(index.entries.size() == 24);
  CHECK(index.entries[0].rel_path == "Camera/img_0.ppm");
  CHECK(index.entries[0].label == 0);

  DatasetIndex again = scan_dataset(dir.path);
  CHECK(again.classes == index.classes);
  REQUIRE(again.entries.size() == index.entries.size());
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    CHECK(again.entries[i].rel_path == index.entries[i].rel_path);
    CHECK(again.entries[i].label == index.entries[i].label);
  }

  TempDir empty("scan_empty");
  CHECK_THROWS_AS(scan_dataset(empty.path), std::runtime_error);
  CHECK_THROWS_AS(scan_dataset(empty.path / "missing"), std::runtime_error);
}

TEST_CASE("split_dataset: exact floor rounding for one class") {
  DatasetIndex index;
  index.classes = {"Only"};
  for (int i = 0; i < 1000; ++i) {
    index.entries.push_back({"Only/f" + std::to_string(i) + ".ppm", 0});
  }
  SplitSpec spec = split_dataset(index, {0.7, 0.1, 0.2}, 7);
  const auto totals = spec.totals();
  CHECK(totals[0] == 700);
  CHECK(totals[1] == 100);
  CHECK(totals[2] == 200);

  SplitSpec all_train = split_dataset(index, {1.0, 0.0, 0.0}, 7);
  CHECK(all_train.totals()[0] == 1000);

  CHECK_THROWS_AS(split_dataset(index, {0.9, 0.2, -0.1}, 7), std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(index, {0.5, 0.1, 0.2}, 7), std::invalid_argument);
}

TEST_CASE("split_dataset: stratified partition at published class sizes") {
  // per-class totals of an 8-class e-waste dataset with 1053 images
  const std::vector<std::pair<std::string, int>> class_sizes = {
      {"Camera", 78},    {"Keyboards", 131}, {"Laptop", 138},
      {"Microwave", 122}, {"Mobile", 185},   {"Mouses", 123},
      {"Smartwatch", 114}, {"TV", 162}};
  DatasetIndex index;
  for (const auto& [name, count] : class_sizes) index.classes.push_back(name);
  for (std::size_t label = 0; label < class_sizes.size(); ++label) {
    for (int i = 0; i < class_sizes[label].second; ++i) {
      index.entries.push_back({class_sizes[label].first + "/f" + std::to_string(i) + ".ppm",
                               static_cast<int>(label)});
    }
  }
  REQUIRE(index.entries.size() == 1053);

  SplitSpec spec = split_dataset(index, {0.7, 0.1, 0.2}, 1234);

  // a partition: every entry appears exactly once
  CHECK(spec.paths.size() == 1053);
  const auto totals = spec.totals();
  CHECK(totals[0] + totals[1] + totals[2] == 1053);

  // train and val are floor-rounded (strictly within 1 of the target); the
  // remainder goes to test, which can drift by both floors combined
  const auto counts = spec.per_class_counts();
  for (std::size_t cls = 0; cls < class_sizes.size(); ++cls) {
    const double n = class_sizes[cls].second;
    CHECK(counts[cls][0] == static_cast<std::int64_t>(std::floor(0.7 * n)));
    CHECK(counts[cls][1] == static_cast<std::int64_t>(std::floor(0.1 * n)));
    CHECK(std::abs(counts[cls][2] - 0.2 * n) < 2.0);
  }
  // overall totals stay within per-class rounding of the global targets
  CHECK(std::abs(totals[0] - 737) <= 8);
  CHECK(std::abs(totals[1] - 105) <= 8);
  CHECK(std::abs(totals[2] - 211) <= 16);

  // reproducible: same seed gives identical assignment and identical bytes
  SplitSpec again = split_dataset(index, {0.7, 0.1, 0.2}, 1234);
  CHECK(again.assignment == spec.assignment);
  CHECK(split_spec_to_json(again) == split_spec_to_json(spec));

  SplitSpec other = split_dataset(index, {0.7, 0.1, 0.2}, 99);
  CHECK(other.assignment != spec.assignment);

  // serialization round-trip preserves everything
  TempDir dir("split");
  save_split(spec, dir.path / "split.json");
  SplitSpec loaded = load_split(dir.path / "split.json");
  CHECK(loaded.seed == spec.seed);
  CHECK(loaded.classes == spec.classes);
  CHECK(loaded.paths == spec.paths);
  CHECK(loaded.assignment == spec.assignment);
  save_split(loaded, dir.path / "split2.json");
  CHECK(read_bytes(dir.path / "split.json") == read_bytes(dir.path / "split2.json"));

  // membership queries match the assignment
  const auto train_ids = entries_in_split(index, spec, Split::kTrain);
  CHECK(static_cast<std::int64_t>(train_ids.size()) == totals[0]);
}
