// Copyright 2026 The DKMGP Authors
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

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "dkmgp/dataset.hpp"
#include "dkmgp/dynamics.hpp"
#include "dkmgp/mlp.hpp"
#include "dkmgp/mtgp.hpp"
#include "dkmgp/predictor.hpp"

namespace dkmgp {

/// Value of a TOML-style key: number, boolean, string or (nested) array.
struct ConfigValue {
  using Array = std::vector<ConfigValue>;
  std::variant<double, bool, std::string, Array> data;

  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }
};

/// Flat "table.sub.key" -> value map. Supports [tables], dotted table names,
/// numbers, booleans, double-quoted strings, nested and multi-line arrays,
/// and # comments.
class ConfigDocument {
 public:
  static ConfigDocument parse(const std::string& text, const std::string& origin = "<config>");
  static ConfigDocument load(const std::filesystem::path& path);

  /// "key=value" with value in the same syntax as the file.
  void set_override(const std::string& assignment);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const ConfigValue& at(const std::string& key) const;
  std::vector<std::string> keys() const;

 private:
  std::map<std::string, ConfigValue> values_;
  std::string origin_;
};

/// Closed racing-speed lap (about 50 to 62 m/s) with sensor noise.
ManeuverSpec default_maneuver();

struct RunConfig {
  std::uint64_t seed = 0;
  double dt = 0.04;
  double duration = 60.0;

  ModelContext model;
  ManeuverSpec maneuver = default_maneuver();

  std::vector<int> horizons{3, 5, 10, 15};
  double train_fraction = 0.7;

  MlpConfig mlp;
  MtgpConfig mtgp;
  TrainOptions optimizer;

  AchThresholds ach;

  int prediction_horizon = 43;
  std::size_t anchor_stride = 3;
  std::vector<std::string> policies{"ekin", "fixed:5", "ach"};

  bool baseline_enabled = true;
  ExactGpConfig baseline;

  std::size_t bench_repeats = 200;
  std::vector<std::string> bench_policies{"fixed:15", "fixed:10", "fixed:5", "fixed:3", "baseline"};

  std::filesystem::path out_dir = "run";

  void validate() const;
  int max_horizon() const;
};

/// Builds a RunConfig from defaults plus the document; every key in the
/// document must be known.
RunConfig run_config_from(const ConfigDocument& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// Example configuration text with every key and its default.
std::string default_config_text();

/// splitmix64(seed ^ fnv1a64(name)).
std::uint64_t derive_seed(std::uint64_t seed, const std::string& name);

}  // namespace dkmgp
