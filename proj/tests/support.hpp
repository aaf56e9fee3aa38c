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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dkmgp/dataset.hpp"
#include "dkmgp/dynamics.hpp"
#include "dkmgp/linalg.hpp"
#include "dkmgp/mtgp.hpp"

namespace dkmgp::testing {

inline bool close_rel(double a, double b, double rel, double abs = 0.0) {
  return std::abs(a - b) <= std::max(abs, rel * std::max(std::abs(a), std::abs(b)));
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline RowMatrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                               double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RowMatrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  }
  return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dkmgp_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Context with parameters spelled out here so tests do not depend on defaults.
inline ModelContext test_context() {
  ModelContext ctx;
  ctx.vehicle = VehicleParams{790.0, 1000.0, 1.7, 1.2, 1.6, 0.3, 9.81, 0.0, 10.0};
  ctx.front = PacejkaAxleParams{10.0, 1.5, 5200.0, 0.5, 0.0, 0.0};
  ctx.rear = PacejkaAxleParams{12.0, 1.5, 7400.0, 0.5, 0.0, 0.0};
  return ctx;
}

inline VehicleState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-100.0, 100.0);
  std::uniform_real_distribution<double> vx(5.0, 70.0);
  std::uniform_real_distribution<double> vy(-3.0, 3.0);
  std::uniform_real_distribution<double> psi(-3.1, 3.1);
  std::uniform_real_distribution<double> delta(-0.08, 0.08);
  std::uniform_real_distribution<double> omega(-0.6, 0.6);
  return {pos(rng), pos(rng), vx(rng), vy(rng), psi(rng), delta(rng), omega(rng)};
}

inline ControlInput random_input(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ax(-5.0, 5.0);
  std::uniform_real_distribution<double> dd(-0.05, 0.05);
  return {ax(rng), dd(rng)};
}

// Cornering program at racing speed used by the pipeline-level tests.
inline ManeuverSpec test_maneuver() {
  ManeuverSpec prog;
  prog.initial = VehicleState{0.0, 0.0, 52.0, 0.0, 0.0, 0.0, 0.0};
  prog.segments = {{2.0, 2.5, 0.0},  {1.0, 0.3, 0.0},   {0.8, 0.0, 0.025}, {5.0, 0.3, 0.0},
                   {0.8, 0.0, -0.025}, {2.0, 2.0, 0.0}, {2.0, -3.5, 0.0}, {0.8, 0.0, 0.027},
                   {4.0, -0.3, 0.0}, {0.8, 0.0, -0.027}, {1.2, -0.8, 0.0}};
  prog.noise_std = {};
  return prog;
}

inline VehicleState state_plus(const VehicleState& s, const StateDerivative& d, double h) {
  auto a = s.to_array();
  const auto b = d.to_array();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += h * b[i];
  return VehicleState::from_array(a);
}

// Forward Euler with `substeps` equal sub-steps over dt.
inline VehicleState euler_fine(DynamicsModel model, const ModelContext& ctx, VehicleState s,
                               const ControlInput& u, double dt, int substeps) {
  const double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) s = state_plus(s, derivative(model, ctx, s, u), h);
  return s;
}

// Table-1 rows written out independently of the library.
inline StateDerivative oracle_single_track(const VehicleState& s, const ControlInput& u,
                                           const VehicleParams& vp,
                                           const PacejkaAxleParams& pf,
                                           const PacejkaAxleParams& pr) {
  auto magic = [](const PacejkaAxleParams& p, double a0) {
    const double a = a0 + p.Shy;
    return p.Svy + p.D * std::sin(p.C * std::atan(p.B * a - p.E * (p.B * a - std::atan(p.B * a))));
  };
  const double af = s.delta - std::atan((s.vy + vp.lf * s.omega) / s.vx);
  const double ar = -std::atan((s.vy - vp.lr * s.omega) / s.vx);
  const double ffy = magic(pf, af);
  const double fry = magic(pr, ar);
  const double fby = vp.m * vp.g * std::sin(vp.bank_theta);
  StateDerivative d;
  d.x = s.vx * std::cos(s.psi) - s.vy * std::sin(s.psi);
  d.y = s.vx * std::sin(s.psi) + s.vy * std::cos(s.psi);
  d.vx = u.ax;
  d.vy = 1.0 / vp.m * (fry + ffy * std::cos(s.delta) - fby) - s.vx * s.omega;
  d.psi = s.omega;
  d.delta = u.delta_dot;
  d.omega = 1.0 / vp.Iz * (vp.lf * ffy * std::cos(s.delta) - vp.lr * fry);
  return d;
}

inline StateDerivative oracle_ekin(const VehicleState& s, const ControlInput& u,
                                   const VehicleParams& vp) {
  StateDerivative d;
  d.x = s.vx * std::cos(s.psi) - s.vy * std::sin(s.psi);
  d.y = s.vx * std::sin(s.psi) + s.vy * std::cos(s.psi);
  d.vx = vp.Tw / (vp.lr + vp.lf) * u.ax;
  d.vy = 1.0 / (vp.Tw * (vp.lr + vp.lf)) * (u.ax * std::sin(s.psi) + s.vx * s.omega);
  d.psi = s.omega;
  d.delta = u.delta_dot;
  d.omega = vp.h_cog / (vp.Tw * (vp.lr + vp.lf)) * (u.ax * std::cos(s.psi) + s.vx * s.omega);
  return d;
}

// Small model with every parameter group moved away from its initial value.
inline DkmgpModel random_tiny_model(std::uint64_t seed, int tasks, int latent, int inducing,
                                    std::vector<int> layers, Eigen::Index data_rows = 40) {
  std::mt19937_64 rng(seed);
  const RowMatrix inputs = random_matrix(rng, data_rows, layers.front(), -1.5, 1.5);
  MlpConfig mc;
  mc.layer_sizes = std::move(layers);
  mc.seed = seed;
  MtgpConfig cfg;
  cfg.num_latent = latent;
  cfg.num_inducing = inducing;
  cfg.seed = seed + 1;
  DkmgpModel model = init_model(mc, cfg, inputs, tasks,
                                NormalizationStats::identity(static_cast<std::size_t>(inputs.cols())),
                                NormalizationStats::identity(static_cast<std::size_t>(tasks)), 1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (KernelHyper& k : model.kernels) {
    for (Eigen::Index j = 0; j < k.log_lengthscale.size(); ++j) k.log_lengthscale(j) = u(rng);
    k.log_signal_var = u(rng);
  }
  model.mixing = random_matrix(rng, tasks, latent, -1.0, 1.0);
  for (std::size_t q = 0; q < model.var_mean.size(); ++q) {
    model.var_mean[q] = random_vector(rng, inducing, -0.8, 0.8);
    Matrix l = Matrix::Zero(inducing, inducing);
    for (int r = 0; r < inducing; ++r) {
      for (int c = 0; c < r; ++c) l(r, c) = 0.2 * u(rng);
      l(r, r) = 0.5 + std::abs(u(rng));
    }
    model.var_chol[q] = l;
  }
  for (Eigen::Index t = 0; t < model.log_noise.size(); ++t) model.log_noise(t) = -2.0 + u(rng);
  for (Eigen::Index i = 0; i < model.inducing.size(); ++i) model.inducing.data()[i] += u(rng);
  return model;
}

// Extrapolated central difference of the ELBO along every packed parameter;
// returns the worst mismatch ratio (<= 1 passes) for a 1e-4 relative bound.
inline double elbo_gradient_mismatch(const DkmgpModel& model, const Batch& batch) {
  const std::vector<double> analytic = pack_gradient(elbo_gradients(model, batch).grad, model);
  const std::vector<double> theta = pack_parameters(model);
  DkmgpModel probe = model;
  std::vector<double> p = theta;
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    auto at = [&](double v) {
      p[i] = v;
      unpack_parameters(p, probe);
      return elbo(probe, batch);
    };
    auto stencil = [&](double h) {
      return (8.0 * (at(theta[i] + h) - at(theta[i] - h)) -
              (at(theta[i] + 2.0 * h) - at(theta[i] - 2.0 * h))) /
             (12.0 * h);
    };
    // Richardson step on the five-point stencil.
    const double h = 1e-3 * std::max(1.0, std::abs(theta[i]));
    const double coarse = stencil(h);
    const double fine = stencil(0.5 * h);
    const double numeric = fine + (fine - coarse) / 15.0;
    p[i] = theta[i];
    const double err = std::abs(numeric - analytic[i]);
    const double bound = std::max(1e-4 * std::max(std::abs(numeric), std::abs(analytic[i])), 1e-8);
    worst = std::max(worst, err / bound);
  }
  return worst;
}

// Exact GP log marginal likelihood of a single-task, single-latent model with
// the kernel evaluated on deep features.
inline double exact_log_marginal(const DkmgpModel& model, const RowMatrix& inputs,
                                 const Vector& y) {
  const RowMatrix feats = deep_features(model.mlp, inputs);
  const Eigen::Index n = inputs.rows();
  const double a = model.mixing(0, 0);
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k(i, j) = a * a * rbf_kernel(model.kernels[0], feats.row(i).transpose(),
                                   feats.row(j).transpose());
    }
  }
  k += std::exp(model.log_noise(0)) * Matrix::Identity(n, n);
  const Eigen::LLT<Matrix> llt(k);
  const Vector alpha = llt.solve(y);
  const double log_det = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * y.dot(alpha) - 0.5 * log_det -
         0.5 * static_cast<double>(n) * std::log(2.0 * 3.14159265358979323846);
}

struct ExactnessGap {
  double elbo = 0.0;
  double exact = 0.0;
  double per_point() const { return (exact - elbo) / 20.0; }
};

// T = 1, Q = 1, M = N = 20 with the inducing inputs at the training features;
// only the variational parameters are optimized.
inline ExactnessGap svgp_exactness_gap(std::uint64_t seed, int epochs = 3000) {
  std::mt19937_64 rng(seed);
  const RowMatrix x = random_matrix(rng, 20, 9, -1.0, 1.0);
  Vector y(20);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (Eigen::Index i = 0; i < 20; ++i) y(i) = std::sin(2.0 * x(i, 0)) + 0.5 * x(i, 1) + noise(rng);
  MlpConfig mc;
  mc.layer_sizes = {9, 4};
  mc.seed = seed;
  MtgpConfig cfg;
  cfg.num_latent = 1;
  cfg.num_inducing = 20;
  cfg.seed = seed;
  cfg.init_noise_var = 0.05;
  DkmgpModel model = init_model(mc, cfg, x, 1, NormalizationStats::identity(9),
                                NormalizationStats::identity(1), 1);
  model.inducing = deep_features(model.mlp, x);
  model.mixing(0, 0) = 1.0;
  const RowMatrix targets = y;
  TrainOptions opt;
  opt.batch_size = 20;
  opt.seed = seed;
  opt.trainable = {false, false, false, false, true, true, false};
  opt.learning_rate = 0.02;
  opt.epochs = epochs;
  model = train(model, x, targets, opt).model;
  opt.learning_rate = 0.002;
  model = train(model, x, targets, opt).model;
  ExactnessGap gap;
  gap.elbo = elbo(model, Batch{x, targets});
  gap.exact = exact_log_marginal(model, x, y);
  return gap;
}

// Log whose states come from the ekin model itself.
inline TrajectoryLog ekin_log(std::size_t rows, double dt, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ax(-1.0, 1.0), dd(-0.01, 0.01);
  const ModelContext ctx = test_context();
  TrajectoryLog log;
  log.dt = dt;
  VehicleState s{0.0, 0.0, 30.0, 0.0, 0.3, 0.0, 0.0};
  for (std::size_t k = 0; k < rows; ++k) {
    LogSample sample;
    sample.t = static_cast<double>(k) * dt;
    sample.state = s;
    sample.input = {ax(rng), dd(rng)};
    log.samples.push_back(sample);
    s = rk4_step(DynamicsModel::kEkin, ctx, s, sample.input, dt);
  }
  return log;
}

}  // namespace dkmgp::testing
