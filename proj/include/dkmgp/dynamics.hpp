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
#include <span>
#include <utility>
#include <vector>

namespace dkmgp {

/// Planar vehicle state {x, y, vx, vy, psi, delta, omega}. psi is the inertial
/// heading, delta the road-wheel steering angle, omega the yaw rate.
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double psi = 0.0;
  double delta = 0.0;
  double omega = 0.0;

  static constexpr std::size_t kSize = 7;
  std::array<double, kSize> to_array() const { return {x, y, vx, vy, psi, delta, omega}; }
  static VehicleState from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
  }
  bool is_finite() const;
  bool operator==(const VehicleState&) const = default;
};

/// Time derivative of a VehicleState, field for field.
struct StateDerivative {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double psi = 0.0;
  double delta = 0.0;
  double omega = 0.0;

  std::array<double, VehicleState::kSize> to_array() const {
    return {x, y, vx, vy, psi, delta, omega};
  }
  bool operator==(const StateDerivative&) const = default;
};

struct ControlInput {
  double ax = 0.0;         // longitudinal acceleration, m/s^2
  double delta_dot = 0.0;  // steering velocity, rad/s
  bool operator==(const ControlInput&) const = default;
};

struct VehicleParams {
  double m = 790.0;
  double Iz = 1000.0;
  double lf = 1.7;
  double lr = 1.2;
  double Tw = 1.6;
  double h_cog = 0.3;
  double g = 9.81;
  double bank_theta = 0.0;
  double steering_ratio = 10.0;

  /// Throws ConfigError when a positivity or bank-angle bound is violated.
  void validate() const;
};

/// Lateral magic-formula coefficients for one axle.
struct PacejkaAxleParams {
  double B = 10.0;
  double C = 1.5;
  double D = 5000.0;
  double E = 0.5;
  double Svy = 0.0;
  double Shy = 0.0;

  void validate() const;
};

/// Minimum longitudinal speed at which slip angles are evaluated.
inline constexpr double kVxGuard = 1.0;

enum class DynamicsModel { kSingleTrack, kEkin };

/// Everything a derivative function needs besides state and input.
struct ModelContext {
  VehicleParams vehicle;
  PacejkaAxleParams front{10.0, 1.5, 5200.0, 0.5, 0.0, 0.0};
  PacejkaAxleParams rear{12.0, 1.5, 7400.0, 0.5, 0.0, 0.0};
};

double pacejka_lateral_force(const PacejkaAxleParams& p, double alpha0);

/// Pre-shift slip angles (alpha_f0, alpha_r0). Throws GuardViolation when
/// vx < kVxGuard.
std::pair<double, double> slip_angles(const VehicleState& s, const VehicleParams& vp);

StateDerivative single_track_derivative(const VehicleState& s, const ControlInput& u,
                                        const VehicleParams& vp,
                                        const PacejkaAxleParams& pf,
                                        const PacejkaAxleParams& pr);

StateDerivative ekin_derivative(const VehicleState& s, const ControlInput& u,
                                const VehicleParams& vp);

StateDerivative derivative(DynamicsModel model, const ModelContext& ctx,
                           const VehicleState& s, const ControlInput& u);

/// One classical RK4 step with u held over [t, t + dt]. Requires dt > 0.
VehicleState rk4_step(DynamicsModel model, const ModelContext& ctx, const VehicleState& s,
                      const ControlInput& u, double dt);

/// Open-loop rollout: result[0] = s0, result[k + 1] = rk4_step(result[k], inputs[k]).
std::vector<VehicleState> propagate(DynamicsModel model, const ModelContext& ctx,
                                    const VehicleState& s0,
                                    std::span<const ControlInput> inputs, double dt);

}  // namespace dkmgp
