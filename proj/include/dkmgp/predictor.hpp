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

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dkmgp/dataset.hpp"
#include "dkmgp/dynamics.hpp"
#include "dkmgp/mtgp.hpp"

namespace dkmgp {

enum class DrivingCondition { kCruising = 0, kControlled = 1, kPushing = 2, kAggressive = 3 };

std::string condition_name(DrivingCondition c);
DrivingCondition condition_from_name(const std::string& name);

/// Breakpoints between consecutive driving conditions, in increasing order,
/// and the correction horizon used under each condition.
struct AchThresholds {
  std::array<double, 3> vx{40.0, 50.0, 60.0};        // m/s
  std::array<double, 3> ax{0.5, 1.0, 3.0};           // |ax|, m/s^2
  std::array<double, 3> delta_w{4.5, 7.5, 11.5};     // |steering wheel angle|, deg
  std::array<int, 4> horizons{15, 10, 5, 3};         // Cruising .. Aggressive

  void validate() const;
};

/// Each variable falls into [lo, hi) buckets; the most aggressive bucket wins.
DrivingCondition classify_condition(double vx, double ax, double delta_w,
                                    const AchThresholds& th);
int ach_horizon(DrivingCondition cond, const AchThresholds& th);

/// Road-wheel angle (rad) to steering-wheel angle (deg).
double steering_wheel_degrees(double delta, double steering_ratio);

struct HorizonPolicy {
  enum class Kind { kFixed, kAdaptive };
  Kind kind = Kind::kFixed;
  int fixed_n = 1;
  AchThresholds thresholds;

  static HorizonPolicy fixed(int n);
  static HorizonPolicy adaptive(const AchThresholds& th = {});
  /// "fixed:<n>" or "ach".
  static HorizonPolicy parse(const std::string& text, const AchThresholds& th = {});
  std::string name() const;
};

struct Correction {
  Vector mean;      // physical residual (vx, vy, omega)
  Vector variance;  // physical predictive variance
};

/// Anything that can estimate the horizon-n residual from an anchor sample.
class CorrectionModel {
 public:
  virtual ~CorrectionModel() = default;
  virtual bool supports(int horizon) const = 0;
  virtual Correction predict(int horizon, const Vector& d_raw) const = 0;
};

/// One trained DKMGP per correction horizon.
class DkmgpModelSet final : public CorrectionModel {
 public:
  DkmgpModelSet() = default;
  void add(const DkmgpModel& model);
  bool supports(int horizon) const override;
  Correction predict(int horizon, const Vector& d_raw) const override;
  std::vector<int> horizons() const;
  const DkmgpPosterior& posterior(int horizon) const;

 private:
  std::map<int, std::shared_ptr<const DkmgpPosterior>> models_;
};

/// Per-task exact GP, single-step only.
class BaselineCorrector final : public CorrectionModel {
 public:
  explicit BaselineCorrector(std::shared_ptr<const PerTaskExactGp> gp) : gp_(std::move(gp)) {}
  bool supports(int horizon) const override { return horizon == 1; }
  Correction predict(int horizon, const Vector& d_raw) const override;

 private:
  std::shared_ptr<const PerTaskExactGp> gp_;
};

/// Always predicts a zero residual; turns multistep_predict into plain E-kin.
class ZeroCorrector final : public CorrectionModel {
 public:
  bool supports(int) const override { return true; }
  Correction predict(int, const Vector&) const override;
};

struct ScheduleEntry {
  std::size_t start_step = 0;  // offset inside the rollout
  int n = 0;                   // steps propagated before the correction
  int model_horizon = 0;       // horizon of the model that produced the correction
  DrivingCondition condition = DrivingCondition::kCruising;
};

/// One m-step rollout. Index 0 is the anchor; index k the prediction k steps ahead.
struct PredictionTrace {
  std::size_t anchor_index = 0;  // position of the anchor in its log, if any
  std::vector<VehicleState> states;
  std::vector<bool> corrected;
  std::vector<int> n_used;                    // 0 on the anchor row
  std::vector<DrivingCondition> condition;    // condition of the segment
  std::vector<std::array<double, 3>> variance;  // zeros on uncorrected rows
  std::vector<ScheduleEntry> schedule;
  int horizon = 0;  // m
  std::size_t gp_queries = 0;
};

/// E-kin rollout over inputs.size() steps, corrected every n steps where n comes
/// from the policy evaluated at the current anchor. A segment clamped at the end
/// of the horizon uses the model for its clamped length when one is registered,
/// otherwise the model for the nominal n.
PredictionTrace multistep_predict(const CorrectionModel& model, const VehicleState& s_t,
                                  std::span<const ControlInput> inputs,
                                  const HorizonPolicy& policy, const VehicleParams& vp,
                                  double dt);

/// Rollouts of length m anchored on measured states at `anchors` (log indices).
/// Anchors without m future inputs are skipped.
std::vector<PredictionTrace> rollouts(const CorrectionModel& model, const TrajectoryLog& log,
                                      std::span<const std::size_t> anchors, int m,
                                      const HorizonPolicy& policy, const VehicleParams& vp);

/// anchors = first, first + stride, ... while a full m-step window fits before `last`.
std::vector<std::size_t> anchor_grid(std::size_t first, std::size_t last, std::size_t stride,
                                     int m);

/// Rows: one anchor row (n_used = 0) followed by m predicted rows per trace.
/// The step column is the log index.
void write_traces_csv(std::span<const PredictionTrace> traces,
                      const std::filesystem::path& path);
std::vector<PredictionTrace> read_traces_csv(const std::filesystem::path& path);

struct BenchResult {
  std::string label;
  double rate_hz = 0.0;
  double median_seconds = 0.0;
  std::size_t repeats = 0;
  std::size_t gp_queries_per_call = 0;
};

/// Median wall-clock rate of complete m-step multistep_predict calls, cycling
/// through `anchors`. Single-threaded.
BenchResult bench_inference(const CorrectionModel& model, const TrajectoryLog& log,
                            std::span<const std::size_t> anchors, const HorizonPolicy& policy,
                            const VehicleParams& vp, std::size_t repeats, int m = 43,
                            std::size_t warmup = 3);

}  // namespace dkmgp
