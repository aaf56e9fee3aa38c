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

#include "dkmgp/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dkmgp/errors.hpp"

namespace dkmgp {

bool VehicleState::is_finite() const {
  for (double v : to_array()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void VehicleParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("vehicle.") + name + " must be positive");
    }
  };
  positive(m, "m");
  positive(Iz, "Iz");
  positive(lf, "lf");
  positive(lr, "lr");
  positive(Tw, "Tw");
  positive(h_cog, "h_cog");
  positive(steering_ratio, "steering_ratio");
  if (!std::isfinite(g)) throw ConfigError("vehicle.g must be finite");
  if (!(std::abs(bank_theta) < std::numbers::pi / 2)) {
    throw ConfigError("vehicle.bank_theta must satisfy |theta| < pi/2");
  }
}

void PacejkaAxleParams::validate() const {
  if (!(B > 0.0) || !(C > 0.0) || !(D > 0.0)) {
    throw ConfigError("pacejka B, C and D must be positive");
  }
  if (!std::isfinite(B) || !std::isfinite(C) || !std::isfinite(D) || !std::isfinite(E) ||
      !std::isfinite(Svy) || !std::isfinite(Shy)) {
    throw ConfigError("pacejka coefficients must be finite");
  }
}

double pacejka_lateral_force(const PacejkaAxleParams& p, double alpha0) {
  const double alpha = alpha0 + p.Shy;
  const double ba = p.B * alpha;
  return p.Svy + p.D * std::sin(p.C * std::atan(ba - p.E * (ba - std::atan(ba))));
}

std::pair<double, double> slip_angles(const VehicleState& s, const VehicleParams& vp) {
  if (!(s.vx >= kVxGuard)) {
    throw GuardViolation("vx = " + std::to_string(s.vx) + " below guard of " +
                         std::to_string(kVxGuard) + " m/s");
  }
  const double front = s.delta - std::atan((s.vy + vp.lf * s.omega) / s.vx);
  const double rear = -std::atan((s.vy - vp.lr * s.omega) / s.vx);
  return {front, rear};
}

namespace {

// Position, heading and steering rows are shared by both models.
StateDerivative kinematic_rows(const VehicleState& s, const ControlInput& u) {
  StateDerivative d;
  const double c = std::cos(s.psi);
  const double sn = std::sin(s.psi);
  d.x = s.vx * c - s.vy * sn;
  d.y = s.vx * sn + s.vy * c;
  d.psi = s.omega;
  d.delta = u.delta_dot;
  return d;
}

}  // namespace

StateDerivative single_track_derivative(const VehicleState& s, const ControlInput& u,
                                        const VehicleParams& vp,
                                        const PacejkaAxleParams& pf,
                                        const PacejkaAxleParams& pr) {
  const auto [alpha_f0, alpha_r0] = slip_angles(s, vp);
  const double f_front = pacejka_lateral_force(pf, alpha_f0);
  const double f_rear = pacejka_lateral_force(pr, alpha_r0);
  const double f_bank = vp.m * vp.g * std::sin(vp.bank_theta);
  const double cd = std::cos(s.delta);

  StateDerivative d = kinematic_rows(s, u);
  d.vx = u.ax;
  d.vy = (f_rear + f_front * cd - f_bank) / vp.m - s.vx * s.omega;
  d.omega = (vp.lf * f_front * cd - vp.lr * f_rear) / vp.Iz;
  return d;
}

StateDerivative ekin_derivative(const VehicleState& s, const ControlInput& u,
                                const VehicleParams& vp) {
  const double wheelbase = vp.lr + vp.lf;
  const double denom = vp.Tw * wheelbase;
  StateDerivative d = kinematic_rows(s, u);
  d.vx = vp.Tw / wheelbase * u.ax;
  d.vy = (u.ax * std::sin(s.psi) + s.vx * s.omega) / denom;
  d.omega = vp.h_cog / denom * (u.ax * std::cos(s.psi) + s.vx * s.omega);
  return d;
}

StateDerivative derivative(DynamicsModel model, const ModelContext& ctx,
                           const VehicleState& s, const ControlInput& u) {
  if (model == DynamicsModel::kSingleTrack) {
    return single_track_derivative(s, u, ctx.vehicle, ctx.front, ctx.rear);
  }
  return ekin_derivative(s, u, ctx.vehicle);
}

namespace {

VehicleState add_scaled(const VehicleState& s, const StateDerivative& d, double h) {
  return {s.x + h * d.x,     s.y + h * d.y,         s.vx + h * d.vx,      s.vy + h * d.vy,
          s.psi + h * d.psi, s.delta + h * d.delta, s.omega + h * d.omega};
}

}  // namespace

VehicleState rk4_step(DynamicsModel model, const ModelContext& ctx, const VehicleState& s,
                      const ControlInput& u, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("rk4_step requires dt > 0");
  const StateDerivative k1 = derivative(model, ctx, s, u);
  const StateDerivative k2 = derivative(model, ctx, add_scaled(s, k1, 0.5 * dt), u);
  const StateDerivative k3 = derivative(model, ctx, add_scaled(s, k2, 0.5 * dt), u);
  const StateDerivative k4 = derivative(model, ctx, add_scaled(s, k3, dt), u);

  auto a = s.to_array();
  const auto a1 = k1.to_array();
  const auto a2 = k2.to_array();
  const auto a3 = k3.to_array();
  const auto a4 = k4.to_array();
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] += dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
  }
  return VehicleState::from_array(a);
}

std::vector<VehicleState> propagate(DynamicsModel model, const ModelContext& ctx,
                                    const VehicleState& s0,
                                    std::span<const ControlInput> inputs, double dt) {
  std::vector<VehicleState> out;
  out.reserve(inputs.size() + 1);
  out.push_back(s0);
  for (const ControlInput& u : inputs) out.push_back(rk4_step(model, ctx, out.back(), u, dt));
  return out;
}

}  // namespace dkmgp
