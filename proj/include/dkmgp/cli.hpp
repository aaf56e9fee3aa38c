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
#include <optional>
#include <string>
#include <vector>

#include "dkmgp/config.hpp"

namespace dkmgp {

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

/// Read from DKMGP_LOG (quiet | info | debug); info when unset.
LogLevel log_level();
void log_message(LogLevel level, const std::string& text);

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;  // comma-separated policy names
  std::optional<std::filesystem::path> out;
  std::vector<std::string> sets;      // key=value config overrides
};

/// Defaults, then the config file (if any), then --set, then explicit flags.
RunConfig resolve_config(const std::filesystem::path& config_path, const CliOverrides& o);

/// Output file names inside RunConfig::out_dir.
namespace paths {
std::filesystem::path log(const RunConfig& c);
std::filesystem::path dataset(const RunConfig& c, int n, const std::string& role);
std::filesystem::path model(const RunConfig& c, int n);
std::filesystem::path history(const RunConfig& c, int n);
std::filesystem::path trace(const RunConfig& c, const std::string& policy);
std::filesystem::path report_csv(const RunConfig& c);
std::filesystem::path report_json(const RunConfig& c);
std::filesystem::path bench(const RunConfig& c);
}  // namespace paths

/// First log index used for held-out rollouts: no training target reaches it.
std::size_t evaluation_start(const RunConfig& c, std::size_t log_rows);

/// Horizons that get a residual dataset: the configured ones plus 1 when the
/// baseline is enabled.
std::vector<int> dataset_horizons(const RunConfig& c);

void cmd_simulate(const RunConfig& c);
void cmd_dataset(const RunConfig& c);
void cmd_train(const RunConfig& c);
void cmd_predict(const RunConfig& c);
void cmd_eval(const RunConfig& c);
void cmd_bench(const RunConfig& c);
/// simulate, dataset, train, predict, eval.
void cmd_run(const RunConfig& c);

/// Full command-line entry point. Returns the process exit code; failures
/// print one "error kind=<kind> message=<text>" line to stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace dkmgp
