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

#include "dkmgp/errors.hpp"
#include "dkmgp/mtgp.hpp"
#include "dkmgp/simd/kernels.hpp"

namespace dkmgp {

PerTaskExactGp per_task_baseline_train(const RowMatrix& inputs, const RowMatrix& targets,
                                       const ExactGpConfig& config,
                                       NormalizationStats input_stats,
                                       NormalizationStats target_stats) {
  if (inputs.rows() == 0) throw InsufficientData("baseline needs training data");
  if (inputs.rows() != targets.rows()) {
    throw DimensionMismatch("baseline inputs and targets differ in row count");
  }
  if (!(config.lengthscale > 0.0) || !(config.signal_var > 0.0) || !(config.noise_var >= 0.0)) {
    throw ConfigError("baseline hyperparameters must be positive");
  }
  const simd::KernelTable& kt = simd::kernels();
  const Eigen::Index n = inputs.rows();
  const Eigen::Index dim = inputs.cols();

  PerTaskExactGp gp;
  gp.train_t_ = inputs.transpose();
  gp.input_stats_ = std::move(input_stats);
  gp.target_stats_ = std::move(target_stats);
  for (Eigen::Index task = 0; task < targets.cols(); ++task) {
    PerTaskExactGp::Task t;
    t.inv_len_sq = Vector::Constant(dim, 1.0 / (config.lengthscale * config.lengthscale));
    t.signal_var = config.signal_var;
    RowMatrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      kt.rbf_row(inputs.row(i).data(), gp.train_t_.data(), static_cast<std::size_t>(dim),
                 static_cast<std::size_t>(n), static_cast<std::size_t>(n), t.inv_len_sq.data(),
                 t.signal_var, k.row(i).data());
    }
    const Matrix kn = k;
    t.chol = jittered_cholesky(kn, config.noise_var);
    const Vector y = targets.col(task);
    t.alpha = t.chol.triangularView<Eigen::Lower>().transpose().solve(
        t.chol.triangularView<Eigen::Lower>().solve(y));
    gp.tasks_.push_back(std::move(t));
  }
  return gp;
}

PerTaskExactGp per_task_baseline_train(const ResidualDataset& train_set,
                                       const ExactGpConfig& config) {
  return per_task_baseline_train(train_set.inputs, train_set.targets, config,
                                 train_set.input_stats, train_set.target_stats);
}

Vector PerTaskExactGp::predict_mean(const Vector& d) const {
  if (d.size() != train_t_.rows()) throw DimensionMismatch("baseline query has wrong dimension");
  const simd::KernelTable& kt = simd::kernels();
  const auto n = static_cast<std::size_t>(train_t_.cols());
  Vector k(train_t_.cols());
  Vector mean(static_cast<Eigen::Index>(tasks_.size()));
  // Each task is an independent regressor, so each evaluates its own kernel row.
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    const Task& task = tasks_[t];
    kt.rbf_row(d.data(), train_t_.data(), static_cast<std::size_t>(d.size()), n, n,
               task.inv_len_sq.data(), task.signal_var, k.data());
    mean(static_cast<Eigen::Index>(t)) = kt.dot(k.data(), task.alpha.data(), n);
  }
  return mean;
}

Vector PerTaskExactGp::predict_variance(const Vector& d) const {
  if (d.size() != train_t_.rows()) throw DimensionMismatch("baseline query has wrong dimension");
  const simd::KernelTable& kt = simd::kernels();
  const auto n = static_cast<std::size_t>(train_t_.cols());
  Vector k(train_t_.cols());
  Vector var(static_cast<Eigen::Index>(tasks_.size()));
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    const Task& task = tasks_[t];
    kt.rbf_row(d.data(), train_t_.data(), static_cast<std::size_t>(d.size()), n, n,
               task.inv_len_sq.data(), task.signal_var, k.data());
    const Vector v = task.chol.triangularView<Eigen::Lower>().solve(k);
    var(static_cast<Eigen::Index>(t)) = std::max(0.0, task.signal_var - v.squaredNorm());
  }
  return var;
}

Vector PerTaskExactGp::predict_raw(const Vector& d_raw) const {
  return denormalize(predict_mean(normalize(d_raw, input_stats_)), target_stats_);
}

Vector per_task_baseline_predict(const PerTaskExactGp& gp, const Vector& d_raw) {
  return gp.predict_raw(d_raw);
}

}  // namespace dkmgp
