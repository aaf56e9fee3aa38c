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

#include "dkmgp/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dkmgp/errors.hpp"
#include "dkmgp/eval.hpp"
#include "dkmgp/io_util.hpp"
#include "dkmgp/predictor.hpp"

namespace dkmgp {

LogLevel log_level() {
  const char* env = std::getenv("DKMGP_LOG");
  if (env == nullptr) return LogLevel::kInfo;
  const std::string v(env);
  if (v == "quiet") return LogLevel::kQuiet;
  if (v == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void log_message(LogLevel level, const std::string& text) {
  if (level == LogLevel::kQuiet || static_cast<int>(level) > static_cast<int>(log_level())) return;
  std::cerr << "[dkmgp] " << (level == LogLevel::kDebug ? "debug: " : "") << text << '\n';
}

RunConfig resolve_config(const std::filesystem::path& config_path, const CliOverrides& o) {
  ConfigDocument doc =
      config_path.empty() ? ConfigDocument::parse("", "<defaults>") : ConfigDocument::load(config_path);
  for (const std::string& s : o.sets) doc.set_override(s);
  RunConfig c = run_config_from(doc);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out_dir = *o.out;
  if (o.policy) {
    std::vector<std::string> names;
    for (const std::string& p : split(*o.policy, ',')) {
      const std::string name(trim(p));
      if (!name.empty()) names.push_back(name);
    }
    if (names.empty()) throw ConfigError("--policy: no policy given");
    c.policies = names;
    c.bench_policies = names;
  }
  c.validate();
  return c;
}

namespace paths {

std::filesystem::path log(const RunConfig& c) { return c.out_dir / "log.csv"; }

std::filesystem::path dataset(const RunConfig& c, int n, const std::string& role) {
  return c.out_dir / ("dataset_n" + std::to_string(n) + "_" + role + ".json");
}

std::filesystem::path model(const RunConfig& c, int n) {
  return c.out_dir / ("model_n" + std::to_string(n) + ".json");
}

std::filesystem::path history(const RunConfig& c, int n) {
  return c.out_dir / ("history_n" + std::to_string(n) + ".csv");
}

std::filesystem::path trace(const RunConfig& c, const std::string& policy) {
  std::string tag = policy;
  std::replace(tag.begin(), tag.end(), ':', '-');
  return c.out_dir / ("trace_" + tag + ".csv");
}

std::filesystem::path report_csv(const RunConfig& c) { return c.out_dir / "report.csv"; }
std::filesystem::path report_json(const RunConfig& c) { return c.out_dir / "report.json"; }
std::filesystem::path bench(const RunConfig& c) { return c.out_dir / "bench.csv"; }

}  // namespace paths

std::vector<int> dataset_horizons(const RunConfig& c) {
  std::vector<int> out = c.horizons;
  if (c.baseline_enabled && std::find(out.begin(), out.end(), 1) == out.end()) out.push_back(1);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t evaluation_start(const RunConfig& c, std::size_t log_rows) {
  std::size_t start = 0;
  for (int n : dataset_horizons(c)) {
    const auto un = static_cast<std::size_t>(n);
    if (log_rows <= un) throw InsufficientData("log is shorter than horizon " + std::to_string(n));
    const auto train =
        static_cast<std::size_t>(std::floor(c.train_fraction * static_cast<double>(log_rows - un)));
    start = std::max(start, train + un);
  }
  return start;
}

void cmd_simulate(const RunConfig& c) {
  const TrajectoryLog log =
      generate_synthetic_log(c.model, c.maneuver, c.duration, c.dt, derive_seed(c.seed, "simulate"));
  write_log_csv(log, paths::log(c));
  log_message(LogLevel::kInfo, "simulate: " + std::to_string(log.size()) + " samples -> " +
                                   paths::log(c).string());
}

void cmd_dataset(const RunConfig& c) {
  const TrajectoryLog log = load_log_csv(paths::log(c));
  for (int n : dataset_horizons(c)) {
    const ResidualDataset full = build_residual_dataset(log, n, c.model.vehicle);
    const auto [train, test] = split_contiguous(full, c.train_fraction);
    save_dataset_json(train, paths::dataset(c, n, "train"));
    save_dataset_json(test, paths::dataset(c, n, "test"));
    log_message(LogLevel::kInfo, "dataset n=" + std::to_string(n) + ": " +
                                     std::to_string(train.size()) + " train / " +
                                     std::to_string(test.size()) + " test samples");
  }
}

void cmd_train(const RunConfig& c) {
  for (int n : c.horizons) {
    const std::string tag = "n" + std::to_string(n);
    const ResidualDataset train_set = load_dataset_json(paths::dataset(c, n, "train"));
    if (train_set.horizon != n) {
      throw SchemaError(paths::dataset(c, n, "train").string() + " holds horizon " +
                        std::to_string(train_set.horizon));
    }
    MlpConfig mlp = c.mlp;
    mlp.seed = derive_seed(c.seed, "mlp/" + tag);
    MtgpConfig gp = c.mtgp;
    gp.seed = derive_seed(c.seed, "mtgp/" + tag);
    TrainOptions opt = c.optimizer;
    opt.seed = derive_seed(c.seed, "train/" + tag);
    const TrainResult result =
        train(init_model(mlp, gp, train_set), train_set, opt, [&](const EpochRecord& r) {
          if (r.epoch % 50 == 0) {
            log_message(LogLevel::kDebug, "train " + tag + " epoch " + std::to_string(r.epoch) +
                                              " elbo " + format_double(r.elbo));
          }
        });
    save_checkpoint(result.model, paths::model(c, n));
    write_history_csv(result.history, paths::history(c, n));
    log_message(LogLevel::kInfo, "train " + tag + ": elbo " +
                                     format_double(result.history.back().elbo) + " after " +
                                     std::to_string(opt.epochs) + " epochs");
  }
}

namespace {

struct PolicyRunner {
  std::shared_ptr<const CorrectionModel> model;
  HorizonPolicy policy;
};

class Resources {
 public:
  explicit Resources(const RunConfig& c) : c_(c) {}

  PolicyRunner runner(const std::string& name) {
    if (name == "ekin") {
      return {std::make_shared<ZeroCorrector>(), HorizonPolicy::fixed(c_.prediction_horizon)};
    }
    if (name == "baseline") {
      if (!c_.baseline_enabled) throw ConfigError("policy 'baseline' requires baseline.enabled = true");
      if (!baseline_) {
        const ResidualDataset train_set = load_dataset_json(paths::dataset(c_, 1, "train"));
        baseline_ = std::make_shared<BaselineCorrector>(std::make_shared<const PerTaskExactGp>(
            per_task_baseline_train(train_set, c_.baseline)));
      }
      return {baseline_, HorizonPolicy::fixed(1)};
    }
    const HorizonPolicy policy = HorizonPolicy::parse(name, c_.ach);
    if (!models_) {
      auto set = std::make_shared<DkmgpModelSet>();
      for (int n : c_.horizons) {
        const DkmgpModel model = load_checkpoint(paths::model(c_, n));
        if (model.horizon != n) {
          throw SchemaError(paths::model(c_, n).string() + " holds horizon " +
                            std::to_string(model.horizon));
        }
        set->add(model);
      }
      models_ = set;
    }
    return {models_, policy};
  }

 private:
  const RunConfig& c_;
  std::shared_ptr<const CorrectionModel> models_;
  std::shared_ptr<const CorrectionModel> baseline_;
};

std::vector<std::size_t> evaluation_anchors(const RunConfig& c, const TrajectoryLog& log) {
  const std::vector<std::size_t> anchors =
      anchor_grid(evaluation_start(c, log.size()), log.size(), c.anchor_stride, c.prediction_horizon);
  if (anchors.empty()) {
    throw InsufficientData("held-out part of the log is shorter than the prediction horizon");
  }
  return anchors;
}

}  // namespace

void cmd_predict(const RunConfig& c) {
  const TrajectoryLog log = load_log_csv(paths::log(c));
  const std::vector<std::size_t> anchors = evaluation_anchors(c, log);
  Resources res(c);
  for (const std::string& name : c.policies) {
    const PolicyRunner r = res.runner(name);
    const std::vector<PredictionTrace> traces =
        rollouts(*r.model, log, anchors, c.prediction_horizon, r.policy, c.model.vehicle);
    write_traces_csv(traces, paths::trace(c, name));
    log_message(LogLevel::kInfo, "predict " + name + ": " + std::to_string(traces.size()) +
                                     " rollouts -> " + paths::trace(c, name).string());
  }
}

void cmd_eval(const RunConfig& c) {
  const TrajectoryLog log = load_log_csv(paths::log(c));
  std::vector<NamedTraces> named;
  for (const std::string& name : c.policies) {
    named.push_back({name, name, read_traces_csv(paths::trace(c, name))});
  }
  const std::vector<MetricReport> reports = compare_models(log, named);
  write_report_csv(reports, paths::report_csv(c));
  write_report_json(reports, log.dt, paths::report_json(c));
  if (log_level() != LogLevel::kQuiet) std::cout << report_table(reports);
}

void cmd_bench(const RunConfig& c) {
  const TrajectoryLog log = load_log_csv(paths::log(c));
  std::vector<std::size_t> anchors = anchor_grid(evaluation_start(c, log.size()), log.size(), 1,
                                                 c.prediction_horizon);
  if (anchors.empty()) throw InsufficientData("no anchors available for benchmarking");
  if (anchors.size() > 64) anchors.resize(64);
  Resources res(c);
  std::ostringstream csv;
  csv << "label,rate_hz,median_ms,gp_queries_per_call,repeats\n";
  for (const std::string& name : c.bench_policies) {
    const PolicyRunner r = res.runner(name);
    BenchResult b = bench_inference(*r.model, log, anchors, r.policy, c.model.vehicle,
                                    c.bench_repeats, c.prediction_horizon);
    b.label = name;
    csv << name << ',' << format_double(b.rate_hz) << ',' << format_double(b.median_seconds * 1e3)
        << ',' << b.gp_queries_per_call << ',' << b.repeats << '\n';
    char line[160];
    std::snprintf(line, sizeof(line), "%-10s %12.2f Hz  (%zu GP queries per %d-step call)",
                  name.c_str(), b.rate_hz, b.gp_queries_per_call, c.prediction_horizon);
    if (log_level() != LogLevel::kQuiet) std::cout << line << '\n';
  }
  write_text_file(paths::bench(c), csv.str());
}

void cmd_run(const RunConfig& c) {
  cmd_simulate(c);
  cmd_dataset(c);
  cmd_train(c);
  cmd_predict(c);
  cmd_eval(c);
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Deep-kernel multi-task GP residual correction for vehicle dynamics"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::filesystem::path config_path;
  CliOverrides overrides;
  std::uint64_t seed = 0;
  std::string policy;
  std::string out;

  struct Command {
    const char* name;
    const char* help;
    void (*fn)(const RunConfig&);
  };
  const std::vector<Command> commands{
      {"simulate", "Generate the synthetic ground-truth log (log.csv)", cmd_simulate},
      {"dataset", "Build residual datasets per horizon (dataset_n<n>_{train,test}.json)", cmd_dataset},
      {"train", "Train one model per horizon (model_n<n>.json, history_n<n>.csv)", cmd_train},
      {"predict", "Roll out every policy over the held-out log (trace_<policy>.csv)", cmd_predict},
      {"eval", "Score traces against the log (report.csv, report.json)", cmd_eval},
      {"bench", "Measure 43-step inference rates per policy (bench.csv)", cmd_bench},
      {"run", "simulate, dataset, train, predict and eval in one go", cmd_run},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const Command& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path, "Config file (TOML subset); defaults when omitted")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the top-level seed (u64)");
    sub->add_option("--policy", policy,
                    "Comma-separated policies: fixed:<n>, ach, ekin, baseline (predict, eval, bench)");
    sub->add_option("--out", out, "Override the output directory");
    sub->add_option("--set", overrides.sets, "Override a config key, e.g. --set train.epochs=50")
        ->take_all();
    subs.emplace_back(sub, &cmd);
  }
  CLI::App* show = app.add_subcommand("config", "Print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error kind=UsageError message=" << e.what() << '\n';
    return 2;
  }

  try {
    if (show->parsed()) {
      std::cout << default_config_text();
      return 0;
    }
    for (const auto& [sub, cmd] : subs) {
      if (!sub->parsed()) continue;
      if (sub->count("--seed") > 0) overrides.seed = seed;
      if (sub->count("--policy") > 0) overrides.policy = policy;
      if (sub->count("--out") > 0) overrides.out = out;
      const RunConfig c = resolve_config(config_path, overrides);
      cmd->fn(c);
    }
    return 0;
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error kind=" << e.kind() << " message=" << msg << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error kind=Internal message=" << msg << '\n';
    return 1;
  }
}

}  // namespace dkmgp
