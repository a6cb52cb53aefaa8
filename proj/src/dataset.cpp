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

#include "ewn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "ewn/rng.hpp"
#include "json.hpp"

namespace ewn {

namespace fs = std::filesystem;

namespace {

bool has_image_extension(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".ppm" || ext == ".png";
}

}  // namespace

DatasetIndex scan_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw std::runtime_error("scan_dataset: " + root.string() + " is not a directory");
  }
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && !entry.path().filename().string().starts_with(".")) {
      classes.push_back(entry.path().filename().string());
    }
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) {
    throw std::runtime_error("scan_dataset: " + root.string() +
                             " contains no class subdirectories");
  }

  DatasetIndex index;
  index.classes = classes;
  std::vector<std::string> unreadable;
  for (std::size_t label = 0; label < classes.size(); ++label) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(root / classes[label])) {
      if (!entry.is_regular_file() || !has_image_extension(entry.path())) continue;
      files.push_back(entry.path().filename().string());
      std::ifstream probe(entry.path(), std::ios::binary);
      if (!probe) unreadable.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const std::string& f : files) {
      index.entries.push_back({classes[label] + "/" + f, static_cast<int>(label)});
    }
  }
  if (!unreadable.empty()) {
    std::string msg = "scan_dataset: unreadable files:";
    for (const std::string& f : unreadable) msg += "\n  " + f;
    throw std::runtime_error(msg);
  }
  if (index.entries.empty()) {
    throw std::runtime_error("scan_dataset: " + root.string() +
                             " contains no .ppm/.png images");
  }
  return index;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw std::invalid_argument("unknown split name: " + name);
}

void SplitRatios::validate() const {
  if (train < 0 || val < 0 || test < 0) {
    throw std::invalid_argument("split ratios must be non-negative");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1, got " +
                                std::to_string(train + val + test));
  }
}

std::vector<std::array<std::int64_t, 3>> SplitSpec::per_class_counts() const {
  std::unordered_map<std::string, std::size_t> class_of;
  for (std::size_t i = 0; i < classes.size(); ++i) class_of[classes[i]] = i;
  std::vector<std::array<std::int64_t, 3>> counts(classes.size(), {0, 0, 0});
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const std::string cls = paths[i].substr(0, paths[i].find('/'));
    const auto it = class_of.find(cls);
    if (it == class_of.end()) {
      throw std::runtime_error("split spec: path '" + paths[i] +
                               "' has no matching class");
    }
    counts[it->second][static_cast<std::size_t>(assignment[i])]++;
  }
  return counts;
}

std::array<std::int64_t, 3> SplitSpec::totals() const {
  std::array<std::int64_t, 3> t = {0, 0, 0};
  for (const Split s : assignment) t[static_cast<std::size_t>(s)]++;
  return t;
}

SplitSpec split_dataset(const DatasetIndex& index, const SplitRatios& ratios,
                        std::uint64_t seed) {
  ratios.validate();
  SplitSpec spec;
  spec.seed = seed;
  spec.ratios = ratios;
  spec.classes = index.classes;
  spec.paths.reserve(index.entries.size());
  for (const DatasetEntry& e : index.entries) spec.paths.push_back(e.rel_path);
  spec.assignment.assign(index.entries.size(), Split::kTest);

  for (std::size_t label = 0; label < index.classes.size(); ++label) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < index.entries.size(); ++i) {
      if (index.entries[i].label == static_cast<int>(label)) members.push_back(i);
    }
    Rng class_rng(Rng::mix(seed, static_cast<std::uint64_t>(label)));
    class_rng.shuffle(members);
    const std::size_t n = members.size();
    const auto n_train = static_cast<std::size_t>(
        std::floor(ratios.train * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(
        std::floor(ratios.val * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
      spec.assignment[members[i]] =
          i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
    }
  }
  return spec;
}

std::string split_spec_to_json(const SplitSpec& spec) {
  nlohmann::ordered_json doc;
  doc["seed"] = spec.seed;
  doc["ratios"] = {spec.ratios.train, spec.ratios.val, spec.ratios.test};
  doc["classes"] = spec.classes;
  nlohmann::ordered_json assignment = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < spec.paths.size(); ++i) {
    assignment[spec.paths[i]] = split_name(spec.assignment[i]);
  }
  doc["assignment"] = std::move(assignment);
  return doc.dump(2) + "\n";
}

SplitSpec split_spec_from_json(const std::string& text) {
  const auto doc = nlohmann::ordered_json::parse(text);
  SplitSpec spec;
  spec.seed = doc.at("seed").get<std::uint64_t>();
  const auto& r = doc.at("ratios");
  if (!r.is_array() || r.size() != 3) {
    throw std::runtime_error("split spec: 'ratios' must be an array of 3 numbers");
  }
  spec.ratios = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>()};
  spec.classes = doc.at("classes").get<std::vector<std::string>>();
  for (const auto& [path, tag] : doc.at("assignment").items()) {
    spec.paths.push_back(path);
    spec.assignment.push_back(split_from_name(tag.get<std::string>()));
  }
  return spec;
}

void save_split(const SplitSpec& spec, const fs::path& path) {
  const std::string text = split_spec_to_json(spec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_split: cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

SplitSpec load_split(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_split: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  try {
    return split_spec_from_json(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_split: " + path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> entries_in_split(const DatasetIndex& index,
                                          const SplitSpec& spec, Split which) {
  std::unordered_map<std::string, Split> by_path;
  by_path.reserve(spec.paths.size());
  for (std::size_t i = 0; i < spec.paths.size(); ++i) {
    by_path.emplace(spec.paths[i], spec.assignment[i]);
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    const auto it = by_path.find(index.entries[i].rel_path);
    if (it == by_path.end()) {
      throw std::runtime_error("split spec does not cover dataset entry '" +
                               index.entries[i].rel_path + "'");
    }
    if (it->second == which) out.push_back(i);
  }
  return out;
}

}  // namespace ewn
