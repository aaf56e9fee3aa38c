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

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dkmgp/cli.hpp"
#include "dkmgp/config.hpp"
#include "dkmgp/errors.hpp"
#include "dkmgp/io_util.hpp"
#include "support.hpp"

using namespace dkmgp;
using namespace dkmgp::testing;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run_cli_process(const TempDir& dir, const std::string& args) {
  const std::filesystem::path out = dir / "stdout.txt";
  const std::filesystem::path err = dir / "stderr.txt";
  const std::string cmd = std::string("DKMGP_LOG=quiet \"") + DKMGP_CLI_PATH + "\" " + args + " >\"" +
                          out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(out);
  r.err = read_text_file(err);
  return r;
}

std::string small_config(const std::filesystem::path& out) {
  return "seed = 11\n"
         "duration = 12.0\n"
         "[dataset]\nhorizons = [1, 3, 5, 10, 15]\n"
         "[mlp]\nlayer_sizes = [9, 4, 3]\n"
         "[mtgp]\nnum_latent = 2\nnum_inducing = 6\n"
         "[train]\nepochs = 0\nbatch_size = 32\n"
         "[predict]\nanchor_stride = 10\npolicies = [\"ekin\", \"fixed:1\"]\n"
         "[baseline]\nenabled = false\n"
         "[bench]\nrepeats = 2\npolicies = [\"fixed:15\", \"fixed:3\"]\n"
         "[paths]\nout = \"" + out.string() + "\"\n";
}

std::vector<std::string> state_columns(const std::string& csv) {
  std::vector<std::string> rows;
  for (const std::string& line : split(csv, '\n')) {
    const std::vector<std::string> cells = split(line, ',');
    if (cells.size() < 8) continue;
    std::string r;
    for (std::size_t i = 0; i < 8; ++i) r += cells[i] + ",";
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_CASE("config document syntax") {
  const ConfigDocument doc = ConfigDocument::parse(
      "a = 1.5  # trailing comment\n"
      "flag = true\n"
      "[t.sub]\n"
      "name = \"x y\"\n"
      "grid = [\n  [1, 2],\n  [3, 4],\n]\n");
  CHECK(std::get<double>(doc.at("a").data) == 1.5);
  CHECK(std::get<bool>(doc.at("flag").data));
  CHECK(std::get<std::string>(doc.at("t.sub.name").data) == "x y");
  const auto& grid = std::get<ConfigValue::Array>(doc.at("t.sub.grid").data);
  REQUIRE(grid.size() == 2);
  CHECK(std::get<double>(std::get<ConfigValue::Array>(grid[1].data)[0].data) == 3.0);
  CHECK(doc.keys().size() == 4);

  try {
    ConfigDocument::parse("a = 1\nb = \"open\n", "f.toml");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("f.toml:2") != std::string::npos);
  }
  CHECK_THROWS_AS(ConfigDocument::parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(ConfigDocument::parse("a = [1, 2\n"), ConfigError);
  CHECK_THROWS_AS(ConfigDocument::parse("= 3\n"), ConfigError);
}

TEST_CASE("run config defaults and the example text agree") {
  const RunConfig parsed = run_config_from(ConfigDocument::parse(default_config_text()));
  const RunConfig defaults;
  CHECK(parsed.seed == defaults.seed);
  CHECK(parsed.dt == defaults.dt);
  CHECK(parsed.duration == defaults.duration);
  CHECK(parsed.horizons == defaults.horizons);
  CHECK(parsed.mlp.layer_sizes == defaults.mlp.layer_sizes);
  CHECK(parsed.mtgp.num_inducing == defaults.mtgp.num_inducing);
  CHECK(parsed.optimizer.epochs == defaults.optimizer.epochs);
  CHECK(parsed.optimizer.learning_rate == defaults.optimizer.learning_rate);
  CHECK(parsed.ach.horizons == defaults.ach.horizons);
  CHECK(parsed.policies == defaults.policies);
  CHECK(parsed.bench_policies == defaults.bench_policies);
  CHECK(parsed.maneuver.segments.size() == defaults.maneuver.segments.size());
  CHECK(parsed.maneuver.noise_std == defaults.maneuver.noise_std);
  CHECK(parsed.model.front.D == defaults.model.front.D);
  CHECK(parsed.model.vehicle.steering_ratio == defaults.model.vehicle.steering_ratio);
  CHECK(parsed.out_dir == defaults.out_dir);
  CHECK_NOTHROW(defaults.validate());
}

TEST_CASE("run config rejects unknown keys and bad values by name") {
  auto message = [](const std::string& text) -> std::string {
    try {
      run_config_from(ConfigDocument::parse(text));
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("[train]\nepoch = 3\n").find("train.epoch") != std::string::npos);
  CHECK(message("[train]\nepoch = 3\n").find("unknown") != std::string::npos);
  CHECK(message("[dataset]\ntrain_fraction = 1.5\n").find("dataset.train_fraction") != std::string::npos);
  CHECK(message("[train]\nepochs = \"many\"\n").find("train.epochs") != std::string::npos);
  CHECK(message("[dataset]\nhorizons = [3, 5, 10]\n").find("ach.horizons") != std::string::npos);
  CHECK(message("[predict]\npolicies = [\"fixed:0\"]\n").find("predict.policies") != std::string::npos);
  CHECK(message("[mlp]\nlayer_sizes = [8, 3]\n").find("mlp.layer_sizes") != std::string::npos);
}

TEST_CASE("config overrides") {
  ConfigDocument doc = ConfigDocument::parse("[train]\nepochs = 10\n");
  doc.set_override("train.epochs=25");
  doc.set_override("mlp.layer_sizes = [9, 7, 3]");
  doc.set_override("paths.out=\"elsewhere\"");
  const RunConfig c = run_config_from(doc);
  CHECK(c.optimizer.epochs == 25);
  CHECK(c.mlp.layer_sizes == std::vector<int>{9, 7, 3});
  CHECK(c.out_dir == "elsewhere");
  CHECK_THROWS_AS(doc.set_override("no-equals"), ConfigError);
  CHECK_THROWS_AS(doc.set_override("=3"), ConfigError);

  TempDir dir("cfg");
  write_text_file(dir / "c.toml", "seed = 4\n[predict]\npolicies = [\"fixed:5\"]\n");
  CliOverrides o;
  o.sets = {"train.epochs=7"};
  o.seed = 9;
  o.policy = "fixed:3,ach";
  const RunConfig r = resolve_config(dir / "c.toml", o);
  CHECK(r.seed == 9);
  CHECK(r.optimizer.epochs == 7);
  CHECK(r.policies == std::vector<std::string>{"fixed:3", "ach"});
  CHECK(resolve_config(dir / "c.toml", {}).seed == 4);
}

TEST_CASE("derived seeds") {
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL}) {
    for (const char* name : {"simulate", "train.n5", "mlp", ""}) {
      CHECK(derive_seed(seed, name) == splitmix(seed ^ fnv1a(name)));
    }
  }
  CHECK(derive_seed(7, "a") != derive_seed(7, "b"));
  CHECK(derive_seed(7, "a") != derive_seed(8, "a"));
}

TEST_CASE("cli help lists every flag") {
  TempDir dir("help");
  for (const char* sub : {"simulate", "dataset", "train", "predict", "eval", "bench", "run"}) {
    const CliRun r = run_cli_process(dir, std::string(sub) + " --help");
    CAPTURE(sub);
    CHECK(r.code == 0);
    for (const char* flag : {"--config", "--seed", "--policy", "--out", "--set"}) {
      CHECK(r.out.find(flag) != std::string::npos);
    }
  }
  const CliRun top = run_cli_process(dir, "--help");
  for (const char* sub : {"simulate", "dataset", "train", "predict", "eval", "bench", "run", "config"}) {
    CHECK(top.out.find(sub) != std::string::npos);
  }
  const CliRun cfg = run_cli_process(dir, "config");
  CHECK(cfg.code == 0);
  CHECK(cfg.out == default_config_text());
}

TEST_CASE("cli errors are one structured line") {
  TempDir dir("errs");
  write_text_file(dir / "bad.toml", "[train]\nepoch = 3\n");
  const CliRun bad = run_cli_process(dir, "simulate --config \"" + (dir / "bad.toml").string() + "\"");
  CHECK(bad.code != 0);
  CHECK(bad.err.rfind("error kind=ConfigError message=", 0) == 0);
  CHECK(bad.err.find("train.epoch") != std::string::npos);
  CHECK(std::count(bad.err.begin(), bad.err.end(), '\n') == 1);

  const CliRun usage = run_cli_process(dir, "fly");
  CHECK(usage.code != 0);
  CHECK(usage.err.rfind("error kind=UsageError message=", 0) == 0);

  const CliRun missing = run_cli_process(dir, "dataset --out \"" + (dir / "nothing").string() + "\"");
  CHECK(missing.code != 0);
  CHECK(missing.err.rfind("error kind=IoError message=", 0) == 0);
}

TEST_CASE("cli pipeline on a small run") {
  TempDir dir("pipe");
  const std::filesystem::path out = dir / "run";
  write_text_file(dir / "small.toml", small_config(out));
  const std::string cfg = "--config \"" + (dir / "small.toml").string() + "\"";

  REQUIRE(run_cli_process(dir, "simulate " + cfg).code == 0);
  REQUIRE(run_cli_process(dir, "dataset " + cfg).code == 0);
  const TrajectoryLog log = load_log_csv(out / "log.csv");
  CHECK(log.size() == 301);
  for (int n : {1, 3, 5, 10, 15}) {
    const std::string tag = "dataset_n" + std::to_string(n);
    const ResidualDataset train = load_dataset_json(out / (tag + "_train.json"));
    const ResidualDataset test = load_dataset_json(out / (tag + "_test.json"));
    CHECK(train.horizon == n);
    CHECK(train.size() + test.size() == log.size() - static_cast<std::size_t>(n));
  }

  REQUIRE(run_cli_process(dir, "train " + cfg).code == 0);
  // Zero variational means and zero target offsets make the n = 1 model
  // predict an exact zero residual.
  DkmgpModel m = load_checkpoint(out / "model_n1.json");
  for (Vector& v : m.var_mean) v.setZero();
  m.target_stats.mean.setZero();
  save_checkpoint(m, out / "model_n1.json");

  REQUIRE(run_cli_process(dir, "predict " + cfg).code == 0);
  const std::string ekin = read_text_file(out / "trace_ekin.csv");
  const std::string fixed1 = read_text_file(out / "trace_fixed-1.csv");
  CHECK(state_columns(ekin).size() > 43);
  CHECK(state_columns(ekin) == state_columns(fixed1));

  REQUIRE(run_cli_process(dir, "eval " + cfg).code == 0);
  CHECK(read_text_file(out / "report.csv").rfind("model,metric,target,value\n", 0) == 0);
  REQUIRE(run_cli_process(dir, "bench " + cfg).code == 0);
  CHECK(std::filesystem::exists(out / "bench.csv"));

  // Same seed, fresh directory: identical log; different seed: different log.
  const std::filesystem::path again = dir / "again";
  REQUIRE(run_cli_process(dir, "simulate " + cfg + " --out \"" + again.string() + "\"").code == 0);
  CHECK(read_text_file(again / "log.csv") == read_text_file(out / "log.csv"));
  const std::filesystem::path other = dir / "other";
  REQUIRE(run_cli_process(dir, "simulate " + cfg + " --seed 12 --out \"" + other.string() + "\"").code == 0);
  CHECK(read_text_file(other / "log.csv") != read_text_file(out / "log.csv"));
}

TEST_CASE("shipped configs load") {
  const std::filesystem::path dir = DKMGP_CONFIG_DIR;
  const RunConfig def = load_run_config(dir / "default.toml");
  CHECK(def.optimizer.epochs == RunConfig{}.optimizer.epochs);
  const RunConfig desk = load_run_config(dir / "desk.toml");
  CHECK(desk.mlp.layer_sizes == std::vector<int>{9, 16, 8, 3});
  CHECK(desk.mtgp.num_inducing == 20);
  CHECK(desk.optimizer.epochs == 300);
}
