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

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "dkmgp/dataset.hpp"
#include "dkmgp/dynamics.hpp"
#include "dkmgp/errors.hpp"
#include "support.hpp"

using namespace dkmgp;
using namespace dkmgp::testing;

TEST_CASE("pacejka: zero slip and shift-only cases") {
  PacejkaAxleParams p{10.0, 1.5, 1000.0, 0.9, 0.0, 0.0};
  CHECK(pacejka_lateral_force(p, 0.0) == 0.0);
  p.Svy = 50.0;
  CHECK(pacejka_lateral_force(p, 0.0) == 50.0);
}

TEST_CASE("pacejka: generic slip against a high-precision evaluation") {
  // 50-digit evaluation of D sin(C atan(Ba - E (Ba - atan(Ba)))) at a = 0.05.
  const double expected = 609.71386543047648695946462472005894356303181836889;
  const PacejkaAxleParams p{10.0, 1.5, 1000.0, 0.9, 0.0, 0.0};
  const double got = pacejka_lateral_force(p, 0.05);
  CHECK(std::abs(got - expected) <= 1e-12 * std::abs(expected));
}

TEST_CASE("pacejka: horizontal shift moves the argument") {
  const PacejkaAxleParams a{8.0, 1.3, 900.0, -0.4, 0.0, 0.01};
  const PacejkaAxleParams b{8.0, 1.3, 900.0, -0.4, 0.0, 0.0};
  CHECK(pacejka_lateral_force(a, 0.02) == doctest::Approx(pacejka_lateral_force(b, 0.03)));
}

TEST_CASE("pacejka: force stays within the peak band") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> b(0.5, 30.0), c(0.3, 2.5), d(10.0, 1e4), e(-5.0, 1.0),
      sv(-200.0, 200.0), sh(-0.1, 0.1), alpha(-3.0, 3.0);
  for (int i = 0; i < 5000; ++i) {
    const PacejkaAxleParams p{b(rng), c(rng), d(rng), e(rng), sv(rng), sh(rng)};
    const double f = pacejka_lateral_force(p, alpha(rng));
    CHECK(std::abs(f - p.Svy) <= p.D * (1.0 + 1e-15));
  }
}

TEST_CASE("pacejka: cornering stiffness equals B C D") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> b(1.0, 20.0), c(0.5, 2.0), d(100.0, 8000.0),
      e(-2.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const PacejkaAxleParams p{b(rng), c(rng), d(rng), e(rng), 0.0, 0.0};
    const double h = 1e-6;
    const double slope =
        (pacejka_lateral_force(p, h) - pacejka_lateral_force(p, -h)) / (2.0 * h);
    const double bcd = p.B * p.C * p.D;
    CHECK(std::abs(slope - bcd) <= 1e-5 * bcd);
  }
}

TEST_CASE("slip angles") {
  VehicleParams vp;
  vp.lf = 1.7;
  vp.lr = 1.2;
  VehicleState s{0.0, 0.0, 50.0, 0.0, 0.0, 0.0, 0.0};
  auto [f0, r0] = slip_angles(s, vp);
  CHECK(f0 == 0.0);
  CHECK(r0 == 0.0);

  s.delta = 0.1;
  std::tie(f0, r0) = slip_angles(s, vp);
  CHECK(f0 == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(r0 == 0.0);

  s = {0.0, 0.0, 50.0, 1.0, 0.0, 0.0, 0.2};
  std::tie(f0, r0) = slip_angles(s, vp);
  // vy + lf w = 1.34, vy - lr w = 0.76
  CHECK(f0 == doctest::Approx(-std::atan(1.34 / 50.0)).epsilon(1e-14));
  CHECK(r0 == doctest::Approx(-std::atan(0.76 / 50.0)).epsilon(1e-14));

  s.vx = 0.999;
  CHECK_THROWS_AS(slip_angles(s, vp), GuardViolation);
  s.vx = kVxGuard;
  CHECK_NOTHROW(slip_angles(s, vp));
}

TEST_CASE("single-track: straight driving has no lateral dynamics") {
  const ModelContext ctx = test_context();
  const VehicleState s{3.0, -2.0, 40.0, 0.0, 0.7, 0.0, 0.0};
  const StateDerivative d =
      single_track_derivative(s, {2.0, 0.0}, ctx.vehicle, ctx.front, ctx.rear);
  CHECK(d.vx == 2.0);
  CHECK(d.vy == 0.0);
  CHECK(d.omega == 0.0);
  CHECK(d.x == doctest::Approx(40.0 * std::cos(0.7)));
  CHECK(d.y == doctest::Approx(40.0 * std::sin(0.7)));
}

TEST_CASE("single-track: bank force isolated") {
  ModelContext ctx = test_context();
  ctx.vehicle.bank_theta = 0.15;
  const VehicleState s{0.0, 0.0, 40.0, 0.0, 0.0, 0.0, 0.0};
  const StateDerivative d =
      single_track_derivative(s, {0.0, 0.0}, ctx.vehicle, ctx.front, ctx.rear);
  CHECK(d.vy == doctest::Approx(-9.81 * std::sin(0.15)).epsilon(1e-14));
}

TEST_CASE("derivatives match the line-by-line oracle") {
  std::mt19937_64 rng(21);
  ModelContext ctx = test_context();
  ctx.vehicle.bank_theta = 0.05;
  ctx.front.Svy = 30.0;
  ctx.front.Shy = 0.002;
  ctx.rear.Svy = -20.0;
  ctx.rear.Shy = -0.001;
  for (int i = 0; i < 200; ++i) {
    const VehicleState s = random_state(rng);
    const ControlInput u = random_input(rng);
    const auto got = single_track_derivative(s, u, ctx.vehicle, ctx.front, ctx.rear).to_array();
    const auto want = oracle_single_track(s, u, ctx.vehicle, ctx.front, ctx.rear).to_array();
    const auto got_e = ekin_derivative(s, u, ctx.vehicle).to_array();
    const auto want_e = oracle_ekin(s, u, ctx.vehicle).to_array();
    for (std::size_t j = 0; j < 7; ++j) {
      CHECK(close_rel(got[j], want[j], 1e-12, 1e-12));
      CHECK(close_rel(got_e[j], want_e[j], 1e-12, 1e-12));
    }
  }
}

TEST_CASE("ekin: documented special cases") {
  VehicleParams vp;
  const VehicleState rest{1.0, 2.0, 0.0, 0.5, 1.1, 0.0, 0.3};
  const StateDerivative d = ekin_derivative(rest, {0.0, 0.0}, vp);
  CHECK(d.vx == 0.0);
  CHECK(d.vy == 0.0);
  CHECK(d.omega == 0.0);

  vp.Tw = vp.lr + vp.lf;
  const StateDerivative d2 = ekin_derivative({0, 0, 30, 0, 0.3, 0, 0}, {2.0, 0.0}, vp);
  CHECK(d2.vx == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("rk4: constant-derivative translation is exact") {
  const ModelContext ctx = test_context();
  const VehicleState s{1.0, 2.0, 30.0, 0.0, 0.4, 0.0, 0.0};
  const VehicleState n = rk4_step(DynamicsModel::kEkin, ctx, s, {0.0, 0.0}, 0.04);
  CHECK(n.x == doctest::Approx(1.0 + 30.0 * std::cos(0.4) * 0.04).epsilon(1e-15));
  CHECK(n.y == doctest::Approx(2.0 + 30.0 * std::sin(0.4) * 0.04).epsilon(1e-15));
  CHECK(n.vx == 30.0);
  CHECK(n.psi == 0.4);
  CHECK_THROWS_AS(rk4_step(DynamicsModel::kEkin, ctx, s, {0.0, 0.0}, 0.0), InvalidArgument);
}

TEST_CASE("rk4 agrees with fine-step Euler") {
  // 1 ms step: at 40 ms the tire modes make the RK4 truncation error itself
  // larger than the tolerance, which says nothing about the implementation.
  const ModelContext ctx = test_context();
  std::mt19937_64 rng(22);
  for (const auto model : {DynamicsModel::kSingleTrack, DynamicsModel::kEkin}) {
    for (int i = 0; i < 100; ++i) {
      const VehicleState s = random_state(rng);
      const ControlInput u = random_input(rng);
      const auto rk = rk4_step(model, ctx, s, u, 1e-3).to_array();
      const auto eu = euler_fine(model, ctx, s, u, 1e-3, 1000).to_array();
      for (std::size_t j = 0; j < 7; ++j) {
        const double scale = std::max({std::abs(rk[j]), std::abs(eu[j]), 1.0});
        CHECK(std::abs(rk[j] - eu[j]) <= 1e-6 * scale);
      }
    }
  }
}

TEST_CASE("rk4 is deterministic and propagates guard violations") {
  const ModelContext ctx = test_context();
  const VehicleState s{0.0, 0.0, 35.0, 0.4, 0.2, 0.03, 0.1};
  const VehicleState a = rk4_step(DynamicsModel::kSingleTrack, ctx, s, {1.0, 0.01}, 0.04);
  const VehicleState b = rk4_step(DynamicsModel::kSingleTrack, ctx, s, {1.0, 0.01}, 0.04);
  CHECK(a == b);
  const VehicleState slow{0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(rk4_step(DynamicsModel::kSingleTrack, ctx, slow, {}, 0.04), GuardViolation);
}

TEST_CASE("propagate: base case and composition") {
  const ModelContext ctx = test_context();
  std::mt19937_64 rng(23);
  std::vector<ControlInput> inputs;
  for (int i = 0; i < 12; ++i) inputs.push_back(random_input(rng));
  const VehicleState s0{0.0, 0.0, 45.0, 0.2, 0.1, 0.01, 0.05};
  for (const auto model : {DynamicsModel::kSingleTrack, DynamicsModel::kEkin}) {
    const auto one = propagate(model, ctx, s0, std::span(inputs).first(1), 0.04);
    REQUIRE(one.size() == 2);
    CHECK(one[0] == s0);
    CHECK(one[1] == rk4_step(model, ctx, s0, inputs[0], 0.04));

    const auto full = propagate(model, ctx, s0, inputs, 0.04);
    REQUIRE(full.size() == inputs.size() + 1);
    const auto head = propagate(model, ctx, s0, std::span(inputs).first(5), 0.04);
    const auto tail = propagate(model, ctx, head.back(), std::span(inputs).subspan(5), 0.04);
    CHECK(tail.back() == full.back());
  }
}

TEST_CASE("straight cruising: both models coincide when Tw = lr + lf") {
  // Cruising inputs only: with ax != 0 the ekin yaw row is driven by
  // ax cos(psi) and the two models separate for every heading.
  ModelContext ctx = test_context();
  ctx.vehicle.Tw = ctx.vehicle.lr + ctx.vehicle.lf;
  const std::vector<ControlInput> inputs(40, ControlInput{0.0, 0.0});
  for (double psi : {0.0, 0.6, -2.0}) {
    const VehicleState s0{5.0, -3.0, 42.0, 0.0, psi, 0.0, 0.0};
    const auto st = propagate(DynamicsModel::kSingleTrack, ctx, s0, inputs, 0.04);
    const auto ek = propagate(DynamicsModel::kEkin, ctx, s0, inputs, 0.04);
    for (std::size_t k = 0; k < st.size(); ++k) {
      const auto a = st[k].to_array();
      const auto b = ek[k].to_array();
      for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(a[j] - b[j]) <= 1e-9);
    }
  }
}

TEST_CASE("ground speed is rotation consistent") {
  const ModelContext ctx = test_context();
  std::mt19937_64 rng(24);
  for (int i = 0; i < 200; ++i) {
    const VehicleState s = random_state(rng);
    const ControlInput u = random_input(rng);
    const double speed = std::hypot(s.vx, s.vy);
    for (const auto model : {DynamicsModel::kSingleTrack, DynamicsModel::kEkin}) {
      const StateDerivative d = derivative(model, ctx, s, u);
      CHECK(std::hypot(d.x, d.y) == doctest::Approx(speed).epsilon(1e-13));
    }
  }
}

TEST_CASE("ekin drift over 43 steps exceeds the one-step error") {
  const ModelContext ctx = test_context();
  const TrajectoryLog log = generate_synthetic_log(ctx, test_maneuver(), 30.0, 0.04, 5);
  double one_vy = 0.0, one_w = 0.0, end_vy = 0.0, end_w = 0.0;
  int anchors = 0;
  for (std::size_t t = 0; t + 43 < log.size(); t += 10) {
    const auto inputs = log.inputs(t, 43);
    const auto traj = propagate(DynamicsModel::kEkin, ctx, log.samples[t].state, inputs, 0.04);
    one_vy += std::abs(traj[1].vy - log.samples[t + 1].state.vy);
    one_w += std::abs(traj[1].omega - log.samples[t + 1].state.omega);
    end_vy += std::abs(traj[43].vy - log.samples[t + 43].state.vy);
    end_w += std::abs(traj[43].omega - log.samples[t + 43].state.omega);
    ++anchors;
  }
  REQUIRE(anchors > 50);
  CHECK(end_vy > one_vy);
  CHECK(end_w > one_w);
}
