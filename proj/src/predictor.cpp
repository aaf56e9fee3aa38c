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

#include "dkmgp/predictor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dkmgp/errors.hpp"
#include "dkmgp/io_util.hpp"

namespace dkmgp {

std::string condition_name(DrivingCondition c) {
  switch (c) {
    case DrivingCondition::kCruising:
      return "cruising";
    case DrivingCondition::kControlled:
      return "controlled";
    case DrivingCondition::kPushing:
      return "pushing";
    case DrivingCondition::kAggressive:
      return "aggressive";
  }
  return "cruising";
}

DrivingCondition condition_from_name(const std::string& name) {
  for (auto c : {DrivingCondition::kCruising, DrivingCondition::kControlled,
                 DrivingCondition::kPushing, DrivingCondition::kAggressive}) {
    if (condition_name(c) == name) return c;
  }
  throw ParseError("unknown driving condition '" + name + "'");
}

void AchThresholds::validate() const {
  auto increasing = [](const std::array<double, 3>& b, const char* what) {
    if (!(b[0] < b[1] && b[1] < b[2])) {
      throw ConfigError(std::string("ach.") + what + " breakpoints must be strictly increasing");
    }
  };
  increasing(vx, "vx");
  increasing(ax, "ax");
  increasing(delta_w, "delta_w");
  for (std::size_t i = 0; i + 1 < horizons.size(); ++i) {
    if (!(horizons[i] > horizons[i + 1])) {
      throw ConfigError("ach.horizons must strictly decrease with aggressiveness");
    }
  }
  if (horizons.back() < 1) throw ConfigError("ach.horizons must be >= 1");
}

namespace {

int bucket(double value, const std::array<double, 3>& breaks) {
  int level = 0;
  for (double b : breaks) {
    if (value >= b) ++level;
  }
  return level;
}

}  // namespace

DrivingCondition classify_condition(double vx, double ax, double delta_w,
                                    const AchThresholds& th) {
  const int level = std::max({bucket(vx, th.vx), bucket(std::abs(ax), th.ax),
                              bucket(std::abs(delta_w), th.delta_w)});
  return static_cast<DrivingCondition>(level);
}

int ach_horizon(DrivingCondition cond, const AchThresholds& th) {
  return th.horizons[static_cast<std::size_t>(cond)];
}

double steering_wheel_degrees(double delta, double steering_ratio) {
  return delta * steering_ratio * 180.0 / std::numbers::pi;
}

HorizonPolicy HorizonPolicy::fixed(int n) {
  if (n < 1) throw InvalidArgument("fixed horizon must be >= 1");
  HorizonPolicy p;
  p.kind = Kind::kFixed;
  p.fixed_n = n;
  return p;
}

HorizonPolicy HorizonPolicy::adaptive(const AchThresholds& th) {
  th.validate();
  HorizonPolicy p;
  p.kind = Kind::kAdaptive;
  p.thresholds = th;
  return p;
}

HorizonPolicy HorizonPolicy::parse(const std::string& text, const AchThresholds& th) {
  if (text == "ach") return adaptive(th);
  if (text.rfind("fixed:", 0) == 0) {
    double n = 0.0;
    if (!parse_double(text.substr(6), n) || n < 1.0 || n != std::floor(n) || n > 1e6) {
      throw ConfigError("policy '" + text + "': horizon must be a positive integer");
    }
    HorizonPolicy p = fixed(static_cast<int>(n));
    p.thresholds = th;
    return p;
  }
  throw ConfigError("policy '" + text + "' is not fixed:<n> or ach");
}

std::string HorizonPolicy::name() const {
  return kind == Kind::kAdaptive ? "ach" : "fixed:" + std::to_string(fixed_n);
}

void DkmgpModelSet::add(const DkmgpModel& model) {
  if (model.num_tasks() != kTargetDim) {
    throw DimensionMismatch("correction models must have 3 tasks");
  }
  models_[model.horizon] = std::make_shared<const DkmgpPosterior>(model);
}

bool DkmgpModelSet::supports(int horizon) const { return models_.count(horizon) > 0; }

const DkmgpPosterior& DkmgpModelSet::posterior(int horizon) const {
  const auto it = models_.find(horizon);
  if (it == models_.end()) {
    throw MissingHorizonModel("no model registered for horizon " + std::to_string(horizon));
  }
  return *it->second;
}

Correction DkmgpModelSet::predict(int horizon, const Vector& d_raw) const {
  const PredictiveDistribution p = posterior(horizon).predict_raw(d_raw);
  return {p.mean_physical, p.variance_physical};
}

std::vector<int> DkmgpModelSet::horizons() const {
  std::vector<int> out;
  for (const auto& [n, _] : models_) out.push_back(n);
  return out;
}

Correction BaselineCorrector::predict(int horizon, const Vector& d_raw) const {
  if (horizon != 1) {
    throw MissingHorizonModel("the per-task baseline only predicts single-step residuals");
  }
  const Vector d = normalize(d_raw, gp_->input_stats());
  const Vector var = (gp_->predict_variance(d).array() *
                      gp_->target_stats().std.array().square())
                         .matrix();
  return {denormalize(gp_->predict_mean(d), gp_->target_stats()), var};
}

Correction ZeroCorrector::predict(int, const Vector&) const {
  return {Vector::Zero(kTargetDim), Vector::Zero(kTargetDim)};
}

PredictionTrace multistep_predict(const CorrectionModel& model, const VehicleState& s_t,
                                  std::span<const ControlInput> inputs,
                                  const HorizonPolicy& policy, const VehicleParams& vp,
                                  double dt) {
  const std::size_t m = inputs.size();
  if (m < 1) throw InvalidArgument("prediction horizon must be >= 1");
  const ModelContext ctx{vp, {}, {}};

  PredictionTrace trace;
  trace.horizon = static_cast<int>(m);
  trace.states.reserve(m + 1);
  trace.states.push_back(s_t);
  trace.corrected.push_back(false);
  trace.n_used.push_back(0);
  trace.variance.push_back({0.0, 0.0, 0.0});

  VehicleState anchor = s_t;
  std::size_t step = 0;
  while (step < m) {
    const ControlInput& u = inputs[step];
    const DrivingCondition cond =
        classify_condition(anchor.vx, u.ax, steering_wheel_degrees(anchor.delta, vp.steering_ratio),
                           policy.thresholds);
    if (step == 0) trace.condition.push_back(cond);
    const int nominal =
        policy.kind == HorizonPolicy::Kind::kFixed ? policy.fixed_n : ach_horizon(cond, policy.thresholds);
    const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(nominal), m - step));
    const int model_n = model.supports(n) ? n : nominal;
    if (!model.supports(model_n)) {
      throw MissingHorizonModel("policy " + policy.name() + " needs a model for horizon " +
                                std::to_string(nominal));
    }

    VehicleState s = anchor;
    for (int k = 0; k < n; ++k) {
      s = rk4_step(DynamicsModel::kEkin, ctx, s, inputs[step + static_cast<std::size_t>(k)], dt);
      trace.states.push_back(s);
      trace.corrected.push_back(false);
      trace.n_used.push_back(n);
      trace.condition.push_back(cond);
      trace.variance.push_back({0.0, 0.0, 0.0});
    }
    const Correction c = model.predict(model_n, anchor_features(anchor, u));
    ++trace.gp_queries;
    s.vx += c.mean(0);
    s.vy += c.mean(1);
    s.omega += c.mean(2);
    trace.states.back() = s;
    trace.corrected.back() = true;
    trace.variance.back() = {c.variance(0), c.variance(1), c.variance(2)};
    trace.schedule.push_back({step, n, model_n, cond});

    anchor = s;
    step += static_cast<std::size_t>(n);
  }
  return trace;
}

std::vector<std::size_t> anchor_grid(std::size_t first, std::size_t last, std::size_t stride,
                                     int m) {
  std::vector<std::size_t> out;
  if (stride == 0) throw InvalidArgument("anchor stride must be >= 1");
  for (std::size_t a = first; a + static_cast<std::size_t>(m) < last; a += stride) {
    out.push_back(a);
  }
  return out;
}

std::vector<PredictionTrace> rollouts(const CorrectionModel& model, const TrajectoryLog& log,
                                      std::span<const std::size_t> anchors, int m,
                                      const HorizonPolicy& policy, const VehicleParams& vp) {
  std::vector<PredictionTrace> out;
  out.reserve(anchors.size());
  const auto steps = static_cast<std::size_t>(m);
  for (std::size_t a : anchors) {
    if (a + steps >= log.size()) continue;
    const std::vector<ControlInput> inputs = log.inputs(a, steps);
    PredictionTrace t = multistep_predict(model, log.samples[a].state, inputs, policy, vp, log.dt);
    t.anchor_index = a;
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

constexpr const char* kTraceHeader =
    "step,x,y,vx,vy,psi,delta,omega,corrected,n_used,condition,var_vx,var_vy,var_omega";

}  // namespace

void write_traces_csv(std::span<const PredictionTrace> traces,
                      const std::filesystem::path& path) {
  std::ostringstream out;
  out << kTraceHeader << '\n';
  for (const PredictionTrace& t : traces) {
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      out << t.anchor_index + k;
      for (double v : t.states[k].to_array()) out << ',' << format_double(v);
      out << ',' << (t.corrected[k] ? 1 : 0) << ',' << t.n_used[k] << ','
          << condition_name(t.condition[k]);
      for (double v : t.variance[k]) out << ',' << format_double(v);
      out << '\n';
    }
  }
  write_text_file(path, out.str());
}

std::vector<PredictionTrace> read_traces_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kTraceHeader) {
    throw SchemaError("trace " + path.string() + " does not start with the trace header");
  }
  std::vector<PredictionTrace> traces;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(trim(line), ',');
    if (cells.size() != 14) {
      throw ParseError("trace row " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " fields, expected 14");
    }
    std::array<double, 14> v{};
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == 10) continue;
      if (!parse_double(cells[i], v[i])) {
        throw ParseError("trace row " + std::to_string(line_no) + ": bad value '" + cells[i] + "'");
      }
    }
    const auto step = static_cast<std::size_t>(v[0]);
    const int n_used = static_cast<int>(v[9]);
    if (n_used == 0) {
      PredictionTrace t;
      t.anchor_index = step;
      traces.push_back(std::move(t));
    } else if (traces.empty()) {
      throw ParseError("trace row " + std::to_string(line_no) + " precedes any anchor row");
    }
    PredictionTrace& t = traces.back();
    if (step != t.anchor_index + t.states.size()) {
      throw ParseError("trace row " + std::to_string(line_no) + " breaks step continuity");
    }
    t.states.push_back({v[1], v[2], v[3], v[4], v[5], v[6], v[7]});
    t.corrected.push_back(v[8] != 0.0);
    t.n_used.push_back(n_used);
    t.condition.push_back(condition_from_name(cells[10]));
    t.variance.push_back({v[11], v[12], v[13]});
    if (v[8] != 0.0) ++t.gp_queries;
    t.horizon = static_cast<int>(t.states.size()) - 1;
  }
  return traces;
}

BenchResult bench_inference(const CorrectionModel& model, const TrajectoryLog& log,
                            std::span<const std::size_t> anchors, const HorizonPolicy& policy,
                            const VehicleParams& vp, std::size_t repeats, int m,
                            std::size_t warmup) {
  if (anchors.empty()) throw InsufficientData("benchmark needs at least one anchor");
  if (repeats == 0) throw InvalidArgument("benchmark needs repeats >= 1");
  const auto steps = static_cast<std::size_t>(m);
  std::vector<std::vector<ControlInput>> inputs;
  for (std::size_t a : anchors) {
    if (a + steps >= log.size()) throw InsufficientData("anchor too close to the end of the log");
    inputs.push_back(log.inputs(a, steps));
  }
  using Clock = std::chrono::steady_clock;
  BenchResult result;
  result.label = policy.name();
  result.repeats = repeats;
  std::vector<double> seconds;
  seconds.reserve(repeats);
  for (std::size_t i = 0; i < warmup + repeats; ++i) {
    const std::size_t k = i % anchors.size();
    const auto t0 = Clock::now();
    const PredictionTrace t =
        multistep_predict(model, log.samples[anchors[k]].state, inputs[k], policy, vp, log.dt);
    const auto t1 = Clock::now();
    result.gp_queries_per_call = t.gp_queries;
    if (i >= warmup) seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::nth_element(seconds.begin(), seconds.begin() + static_cast<std::ptrdiff_t>(seconds.size() / 2),
                   seconds.end());
  result.median_seconds = seconds[seconds.size() / 2];
  result.rate_hz = 1.0 / std::max(result.median_seconds, 1e-12);
  return result;
}

}  // namespace dkmgp
