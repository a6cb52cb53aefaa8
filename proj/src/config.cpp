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

#include "ewn/config.hpp"

#include <fstream>

#include "json.hpp"

namespace ewn {

using nlohmann::ordered_json;

namespace {

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
    if (!ok) throw ConfigError("config: unknown key '" + key + "' in " + context);
  }
}

}  // namespace

RunConfig run_config_from_json(const std::string& text, const RunConfig& base) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig cfg = base;
  try {
    check_keys(doc, {"data", "model", "train", "eval"}, "top level");
    if (doc.contains("data")) {
      const auto& d = doc["data"];
      check_keys(d, {"root", "background_removal_cmd", "augment"}, "data");
      if (d.contains("root")) cfg.data.root = d["root"].get<std::string>();
      if (d.contains("background_removal_cmd")) {
        cfg.data.background_removal_cmd = d["background_removal_cmd"].get<std::string>();
      }
      if (d.contains("augment")) {
        const auto& a = d["augment"];
        check_keys(a,
                   {"rotation_deg_max", "shift_frac_max", "shear_deg_max",
                    "zoom_frac_max", "hflip_prob"},
                   "data.augment");
        if (a.contains("rotation_deg_max")) {
          cfg.data.augment.rotation_deg_max = a["rotation_deg_max"].get<float>();
        }
        if (a.contains("shift_frac_max")) {
          cfg.data.augment.shift_frac_max = a["shift_frac_max"].get<float>();
        }
        if (a.contains("shear_deg_max")) {
          cfg.data.augment.shear_deg_max = a["shear_deg_max"].get<float>();
        }
        if (a.contains("zoom_frac_max")) {
          cfg.data.augment.zoom_frac_max = a["zoom_frac_max"].get<float>();
        }
        if (a.contains("hflip_prob")) {
          cfg.data.augment.hflip_prob = a["hflip_prob"].get<float>();
        }
      }
    }
    if (doc.contains("model")) {
      cfg.model = model_config_from_json(doc["model"].dump());
    }
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      check_keys(t,
                 {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "eps",
                  "seed", "freeze_backbones"},
                 "train");
      if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<int>();
      if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<int>();
      if (t.contains("learning_rate")) cfg.train.learning_rate = t["learning_rate"].get<float>();
      if (t.contains("beta1")) cfg.train.beta1 = t["beta1"].get<float>();
      if (t.contains("beta2")) cfg.train.beta2 = t["beta2"].get<float>();
      if (t.contains("eps")) cfg.train.eps = t["eps"].get<float>();
      if (t.contains("seed")) cfg.train.seed = t["seed"].get<std::uint64_t>();
      if (t.contains("freeze_backbones")) {
        cfg.train.freeze_backbones = t["freeze_backbones"].get<bool>();
      }
    }
    if (doc.contains("eval")) {
      const auto& e = doc["eval"];
      check_keys(e, {"subset"}, "eval");
      if (e.contains("subset")) cfg.eval.subset = e["subset"].get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  if (cfg.eval.subset != "train" && cfg.eval.subset != "val" && cfg.eval.subset != "test") {
    throw ConfigError("config: eval.subset must be train, val or test");
  }
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  ordered_json doc;
  doc["data"] = {{"root", cfg.data.root},
                 {"background_removal_cmd", cfg.data.background_removal_cmd},
                 {"augment",
                  {{"rotation_deg_max", cfg.data.augment.rotation_deg_max},
                   {"shift_frac_max", cfg.data.augment.shift_frac_max},
                   {"shear_deg_max", cfg.data.augment.shear_deg_max},
                   {"zoom_frac_max", cfg.data.augment.zoom_frac_max},
                   {"hflip_prob", cfg.data.augment.hflip_prob}}}};
  doc["model"] = ordered_json::parse(model_config_to_json(cfg.model));
  doc["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"learning_rate", cfg.train.learning_rate},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"eps", cfg.train.eps},
                  {"seed", cfg.train.seed},
                  {"freeze_backbones", cfg.train.freeze_backbones}};
  doc["eval"] = {{"subset", cfg.eval.subset}};
  return doc.dump(2) + "\n";
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return run_config_from_json(text, base);
}

}  // namespace ewn
