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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dkmgp/dynamics.hpp"
#include "dkmgp/linalg.hpp"

namespace dkmgp {

inline constexpr int kInputDim = 9;   // 7 state fields then 2 input fields
inline constexpr int kTargetDim = 3;  // residuals in vx, vy, omega

struct LogSample {
  double t = 0.0;
  VehicleState state;
  ControlInput input;
  double bank_theta = 0.0;
};

/// Uniformly sampled recording of states and applied inputs.
struct TrajectoryLog {
  std::vector<LogSample> samples;
  double dt = 0.0;
  bool has_bank = false;

  std::size_t size() const { return samples.size(); }
  std::vector<ControlInput> inputs(std::size_t first, std::size_t count) const;
};

/// Checks length >= 2, finite values and constant spacing (tolerance in seconds).
/// Fills in log.dt from the first interval.
void validate_log(TrajectoryLog& log, double spacing_tolerance = 1e-6);

TrajectoryLog load_log_csv(const std::filesystem::path& path);
void write_log_csv(const TrajectoryLog& log, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic logs

struct ManeuverSegment {
  double duration = 1.0;   // s
  double ax = 0.0;         // m/s^2
  double delta_dot = 0.0;  // rad/s
};

/// Scripted input program. Segments repeat cyclically until the log ends.
struct ManeuverSpec {
  VehicleState initial{0.0, 0.0, 45.0, 0.0, 0.0, 0.0, 0.0};
  std::vector<ManeuverSegment> segments;
  std::array<double, VehicleState::kSize> noise_std{};  // per logged state field
  bool wrap_heading = true;                              // log psi in (-pi, pi]

  ControlInput input_at(double t) const;
};

/// Single-track ground truth under the maneuver program, sampled every dt for
/// floor(duration / dt) + 1 samples, plus seeded Gaussian measurement noise.
/// The input held over [t, t + dt) is the program evaluated at t + dt / 2.
TrajectoryLog generate_synthetic_log(const ModelContext& ctx, const ManeuverSpec& maneuver,
                                     double duration, double dt, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Normalization

struct NormalizationStats {
  Vector mean;
  Vector std;
  std::vector<bool> degenerate;  // dimension had zero spread; std forced to 1

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  static NormalizationStats identity(std::size_t dim);
  /// Per-column mean and population standard deviation of `rows`.
  static NormalizationStats from_rows(const RowMatrix& rows);
  bool operator==(const NormalizationStats&) const = default;
};

Vector normalize(const Vector& v, const NormalizationStats& stats);
Vector denormalize(const Vector& v, const NormalizationStats& stats);
RowMatrix normalize_rows(const RowMatrix& rows, const NormalizationStats& stats);

// ---------------------------------------------------------------------------
// Residual datasets

struct ResidualSample {
  Vector input;   // normalized d, size kInputDim
  Vector target;  // normalized (eps_vx, eps_vy, eps_omega)
  int horizon = 1;
};

struct DatasetSource {
  std::size_t log_rows = 0;
  double dt = 0.0;
  std::string role = "full";  // full | train | test
};

/// Anchor/target pairs for one correction horizon. Raw values are kept next to
/// the normalized copies so that stats can be recomputed after splitting.
struct ResidualDataset {
  int horizon = 1;
  RowMatrix raw_inputs;   // N x 9
  RowMatrix raw_targets;  // N x 3
  RowMatrix inputs;       // normalized
  RowMatrix targets;      // normalized
  NormalizationStats input_stats;
  NormalizationStats target_stats;
  std::vector<std::size_t> anchors;  // log index of each sample
  DatasetSource source;

  std::size_t size() const { return static_cast<std::size_t>(raw_inputs.rows()); }
  ResidualSample sample(std::size_t i) const;
  /// Recomputes normalized copies from raw values with the given stats.
  void apply_stats(NormalizationStats in, NormalizationStats out);
};

/// Raw GP input for anchor t: state fields then input fields.
Vector anchor_features(const VehicleState& s, const ControlInput& u);

/// Raw residual s_{t+n} - ekin^n(s_t) restricted to (vx, vy, omega).
Vector residual_target(const VehicleState& truth, const VehicleState& predicted);

ResidualDataset build_residual_dataset(const TrajectoryLog& log, int horizon,
                                       const VehicleParams& vp);

/// First floor(fraction * N) samples train, the rest test; both normalized with
/// train-only statistics.
std::pair<ResidualDataset, ResidualDataset> split_contiguous(const ResidualDataset& ds,
                                                             double train_fraction);

void save_dataset_json(const ResidualDataset& ds, const std::filesystem::path& path);
ResidualDataset load_dataset_json(const std::filesystem::path& path);

}  // namespace dkmgp
