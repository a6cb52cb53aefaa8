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
#include <stdexcept>
#include <string>

#include "ewn/image.hpp"
#include "ewn/model.hpp"
#include "ewn/train.hpp"

namespace ewn {

// Malformed or unknown configuration (distinct from I/O failures so the CLI
// can map it to the usage exit code).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string root;
  std::string background_removal_cmd;
  AugmentationSpec augment;
};

struct EvalConfig {
  std::string subset = "test";
};

// The one JSON document describing a full run: {data, model, train, eval}.
// Every key is defaulted; unknown keys are rejected.
struct RunConfig {
  DataConfig data;
  EWasteNetConfig model;
  TrainConfig train;
  EvalConfig eval;
};

// Keys present in the JSON overwrite the corresponding fields of `base`;
// everything else keeps the base (default) value.
RunConfig run_config_from_json(const std::string& text, const RunConfig& base = {});
std::string run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base = {});

}  // namespace ewn
