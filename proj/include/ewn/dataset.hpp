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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ewn {

struct DatasetEntry {
  std::string rel_path;  // "<ClassName>/<file>", '/' separated
  int label = -1;
};

// Class names are the sorted subdirectory names; entries are sorted by
// (class, filename) so two scans of the same tree are identical.
struct DatasetIndex {
  std::vector<std::string> classes;
  std::vector<DatasetEntry> entries;
};

// Accepts .ppm and .png files under root/<ClassName>/.
DatasetIndex scan_dataset(const std::filesystem::path& root);

enum class Split : int { kTrain = 0, kVal = 1, kTest = 2 };
const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
  void validate() const;
};

struct SplitSpec {
  std::uint64_t seed = 0;
  SplitRatios ratios;
  std::vector<std::string> classes;
  // Parallel to the index entry order used to build the spec.
  std::vector<std::string> paths;
  std::vector<Split> assignment;

  // counts[class][split]
  std::vector<std::array<std::int64_t, 3>> per_class_counts() const;
  std::array<std::int64_t, 3> totals() const;
};

// Stratified per class: a seeded shuffle of each class's entries, with
// floor(n*train) to train, floor(n*val) to val and the remainder to test.
// The assignment is a pure function of (seed, ratios, entry order).
SplitSpec split_dataset(const DatasetIndex& index, const SplitRatios& ratios,
                        std::uint64_t seed);

std::string split_spec_to_json(const SplitSpec& spec);
SplitSpec split_spec_from_json(const std::string& text);
void save_split(const SplitSpec& spec, const std::filesystem::path& path);
SplitSpec load_split(const std::filesystem::path& path);

// Indices into index.entries belonging to one split; validates that the spec
// covers exactly the index's paths.
std::vector<std::size_t> entries_in_split(const DatasetIndex& index,
                                          const SplitSpec& spec, Split which);

}  // namespace ewn
