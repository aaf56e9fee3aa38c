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

#include "dkmgp/mtgp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "dkmgp/errors.hpp"
#include "dkmgp/simd/kernels.hpp"

namespace dkmgp {

double KernelHyper::signal_var() const { return std::exp(log_signal_var); }

Vector KernelHyper::inv_len_sq() const { return (-2.0 * log_lengthscale.array()).exp(); }

double rbf_kernel(const KernelHyper& hyper, const Vector& x, const Vector& xp) {
  if (x.size() != xp.size() || x.size() != hyper.log_lengthscale.size()) {
    throw DimensionMismatch("rbf_kernel: inputs of size " + std::to_string(x.size()) + " and " +
                            std::to_string(xp.size()) + " with " +
                            std::to_string(hyper.log_lengthscale.size()) + " lengthscales");
  }
  const double r2 = ((x - xp).array().square() * hyper.inv_len_sq().array()).sum();
  return hyper.signal_var() * std::exp(-0.5 * r2);
}

void MtgpConfig::validate() const {
  if (num_latent < 1) throw ConfigError("mtgp.num_latent must be >= 1");
  if (num_inducing < 1) throw ConfigError("mtgp.num_inducing must be >= 1");
  if (!(jitter >= 0.0)) throw ConfigError("mtgp.jitter must be >= 0");
  if (!(init_lengthscale > 0.0) || !(init_signal_var > 0.0) || !(init_noise_var > 0.0)) {
    throw ConfigError("mtgp initial lengthscale, signal and noise variance must be positive");
  }
  if (!(init_mixing_std >= 0.0)) throw ConfigError("mtgp.init_mixing_std must be >= 0");
}

void DkmgpModel::validate() const {
  if (mlp.layers.empty()) throw InvalidArgument("model has no feature extractor");
  const int t = num_tasks();
  const int q = num_latent();
  const int m = num_inducing();
  const int f = feature_dim();
  if (t < 1 || q < 1 || m < 1) throw InvalidArgument("model needs T, Q, M >= 1");
  if (mlp.output_dim() != f) {
    throw DimensionMismatch("feature extractor outputs " + std::to_string(mlp.output_dim()) +
                            " features but inducing points have " + std::to_string(f));
  }
  if (static_cast<int>(kernels.size()) != q || static_cast<int>(var_mean.size()) != q ||
      static_cast<int>(var_chol.size()) != q) {
    throw DimensionMismatch("per-latent parameter lists do not match Q");
  }
  for (int i = 0; i < q; ++i) {
    if (kernels[static_cast<std::size_t>(i)].log_lengthscale.size() != f) {
      throw DimensionMismatch("lengthscale count does not match feature dimension");
    }
    const Vector& mean = var_mean[static_cast<std::size_t>(i)];
    const Matrix& chol = var_chol[static_cast<std::size_t>(i)];
    if (mean.size() != m || chol.rows() != m || chol.cols() != m) {
      throw DimensionMismatch("variational parameters do not match M");
    }
    for (int k = 0; k < m; ++k) {
      if (!(chol(k, k) > 0.0)) throw InvalidArgument("variational Cholesky diagonal must be > 0");
    }
  }
  if (log_noise.size() != t) throw DimensionMismatch("noise vector does not match T");
  if (static_cast<int>(input_stats.dim()) != mlp.input_dim() ||
      static_cast<int>(target_stats.dim()) != t) {
    throw DimensionMismatch("normalization stats do not match model dimensions");
  }
}

RowMatrix deep_features(const MlpParams& mlp, const RowMatrix& inputs) {
  RowMatrix out(inputs.rows(), mlp.output_dim());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    out.row(i) = mlp_forward(mlp, inputs.row(i).transpose()).transpose();
  }
  return out;
}

DkmgpModel init_model(const MlpConfig& mlp_config, const MtgpConfig& config,
                      const RowMatrix& inputs, int num_tasks, NormalizationStats input_stats,
                      NormalizationStats target_stats, int horizon) {
  config.validate();
  mlp_config.validate();
  if (inputs.rows() == 0) throw InsufficientData("cannot place inducing points without data");
  if (num_tasks < 1) throw InvalidArgument("num_tasks must be >= 1");

  DkmgpModel model;
  model.mlp_config = mlp_config;
  model.mlp = mlp_init(mlp_config);
  model.horizon = horizon;
  model.jitter = config.jitter;
  model.input_stats = std::move(input_stats);
  model.target_stats = std::move(target_stats);

  const int f = mlp_config.output_dim();
  const int q = config.num_latent;
  const int m = config.num_inducing;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  for (int i = 0; i < q; ++i) {
    model.kernels.push_back({Vector::Constant(f, std::log(config.init_lengthscale)),
                             std::log(config.init_signal_var)});
  }
  model.mixing.resize(num_tasks, q);
  for (Eigen::Index r = 0; r < model.mixing.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.mixing.cols(); ++c) {
      model.mixing(r, c) = config.init_mixing_std * unit(rng);
    }
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(inputs.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  model.inducing.resize(m, f);
  for (int i = 0; i < m; ++i) {
    const auto row = static_cast<Eigen::Index>(order[static_cast<std::size_t>(i) % order.size()]);
    Vector feat = mlp_forward(model.mlp, inputs.row(row).transpose());
    if (static_cast<std::size_t>(i) >= order.size()) {
      for (Eigen::Index j = 0; j < feat.size(); ++j) feat(j) += 1e-3 * unit(rng);
    }
    model.inducing.row(i) = feat.transpose();
  }

  model.var_mean.assign(static_cast<std::size_t>(q), Vector::Zero(m));
  model.var_chol.assign(static_cast<std::size_t>(q), Matrix::Identity(m, m));
  model.log_noise = Vector::Constant(num_tasks, std::log(config.init_noise_var));
  model.validate();
  return model;
}

DkmgpModel init_model(const MlpConfig& mlp_config, const MtgpConfig& config,
                      const ResidualDataset& train) {
  return init_model(mlp_config, config, train.inputs, kTargetDim, train.input_stats,
                    train.target_stats, train.horizon);
}

namespace {

// K(X, Z) with Z given feature-major (f x M).
RowMatrix cross_kernel(const KernelHyper& hyper, const RowMatrix& x, const RowMatrix& z_t) {
  const simd::KernelTable& k = simd::kernels();
  const Vector inv = hyper.inv_len_sq();
  const double s2 = hyper.signal_var();
  RowMatrix out(x.rows(), z_t.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    k.rbf_row(x.row(i).data(), z_t.data(), static_cast<std::size_t>(z_t.rows()),
              static_cast<std::size_t>(z_t.cols()), static_cast<std::size_t>(z_t.cols()),
              inv.data(), s2, out.row(i).data());
  }
  return out;
}

Matrix inverse_from_chol(const Matrix& chol) {
  const Matrix linv = chol.triangularView<Eigen::Lower>().solve(
      Matrix::Identity(chol.rows(), chol.cols()));
  return linv.transpose() * linv;
}

double log_det_from_chol(const Matrix& chol) {
  return 2.0 * chol.diagonal().array().abs().log().sum();
}

double kl_unclamped(const Vector& m, const Matrix& chol, const Matrix& prior_chol) {
  const auto prior = prior_chol.triangularView<Eigen::Lower>();
  const double trace = prior.solve(chol.triangularView<Eigen::Lower>().toDenseMatrix())
                           .squaredNorm();
  const double maha = prior.solve(m).squaredNorm();
  return 0.5 * (trace + maha - static_cast<double>(m.size()) + log_det_from_chol(prior_chol) -
                log_det_from_chol(chol));
}

}  // namespace

double lmc_cross_covariance(const DkmgpModel& model, int task, int task_prime,
                            const Vector& d_i, const Vector& d_j) {
  if (task < 0 || task >= model.num_tasks() || task_prime < 0 ||
      task_prime >= model.num_tasks()) {
    throw InvalidArgument("task index out of range");
  }
  const Vector fi = mlp_forward(model.mlp, d_i);
  const Vector fj = mlp_forward(model.mlp, d_j);
  double cov = 0.0;
  for (int q = 0; q < model.num_latent(); ++q) {
    cov += model.mixing(task, q) * model.mixing(task_prime, q) *
           rbf_kernel(model.kernels[static_cast<std::size_t>(q)], fi, fj);
  }
  return cov;
}

Matrix lmc_covariance_matrix(const DkmgpModel& model, const RowMatrix& inputs) {
  const RowMatrix feats = deep_features(model.mlp, inputs);
  const RowMatrix feats_t = feats.transpose();
  const Eigen::Index n = inputs.rows();
  const int t = model.num_tasks();
  Matrix cov = Matrix::Zero(t * n, t * n);
  for (int q = 0; q < model.num_latent(); ++q) {
    const RowMatrix kq = cross_kernel(model.kernels[static_cast<std::size_t>(q)], feats, feats_t);
    for (int a = 0; a < t; ++a) {
      for (int b = 0; b < t; ++b) {
        cov.block(a * n, b * n, n, n) += model.mixing(a, q) * model.mixing(b, q) * kq;
      }
    }
  }
  return cov;
}

Matrix inducing_kernel(const KernelHyper& hyper, const RowMatrix& inducing) {
  const RowMatrix z_t = inducing.transpose();
  return cross_kernel(hyper, inducing, z_t);
}

Matrix jittered_cholesky(const Matrix& k, double jitter) {
  for (double j : {jitter, std::max(jitter, 1e-4)}) {
    Eigen::LLT<Matrix> llt(k + j * Matrix::Identity(k.rows(), k.cols()));
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite() &&
        (llt.matrixLLT().diagonal().array() > 0.0).all()) {
      return llt.matrixL();
    }
  }
  throw CholeskyFailure("kernel matrix of size " + std::to_string(k.rows()) +
                        " is not positive definite even with 1e-4 jitter");
}

double kl_gaussians(const Vector& m, const Matrix& chol, const Matrix& prior_chol) {
  if (chol.rows() != m.size() || chol.cols() != m.size() || prior_chol.rows() != m.size() ||
      prior_chol.cols() != m.size()) {
    throw DimensionMismatch("kl_gaussians: shapes do not agree");
  }
  // Only rounding can push the exact expression below zero.
  return std::max(0.0, kl_unclamped(m, chol, prior_chol));
}

// ---------------------------------------------------------------------------
// Posterior

DkmgpPosterior::DkmgpPosterior(const DkmgpModel& model) : model_(model) {
  model_.validate();
  inducing_t_ = model_.inducing.transpose();
  for (int q = 0; q < model_.num_latent(); ++q) {
    const auto qi = static_cast<std::size_t>(q);
    const KernelHyper& hyper = model_.kernels[qi];
    const Matrix chol = jittered_cholesky(inducing_kernel(hyper, model_.inducing), model_.jitter);
    const Matrix k_inv = inverse_from_chol(chol);
    const Matrix& l = model_.var_chol[qi];
    const Matrix s = l.triangularView<Eigen::Lower>() * l.transpose();
    Matrix var_op = k_inv * s * k_inv - k_inv;
    var_op = 0.5 * (var_op + var_op.transpose()).eval();
    latents_.push_back({k_inv * model_.var_mean[qi], var_op, hyper.inv_len_sq(),
                        hyper.signal_var()});
  }
}

PredictiveDistribution DkmgpPosterior::predict(const Vector& d) const {
  const simd::KernelTable& kt = simd::kernels();
  const Vector feat = mlp_forward(model_.mlp, d);
  const auto m = static_cast<std::size_t>(model_.num_inducing());
  const auto f = static_cast<std::size_t>(model_.feature_dim());
  const int t = model_.num_tasks();

  PredictiveDistribution out;
  out.mean = Vector::Zero(t);
  out.variance = Vector::Zero(t);
  Vector k(static_cast<Eigen::Index>(m));
  Vector tmp(static_cast<Eigen::Index>(m));
  for (int q = 0; q < model_.num_latent(); ++q) {
    const Latent& lat = latents_[static_cast<std::size_t>(q)];
    kt.rbf_row(feat.data(), inducing_t_.data(), f, m, m, lat.inv_len_sq.data(), lat.signal_var,
               k.data());
    const double mu = kt.dot(k.data(), lat.alpha.data(), m);
    kt.affine(lat.var_op.data(), k.data(), nullptr, m, m, tmp.data());
    const double var = std::max(0.0, lat.signal_var + kt.dot(k.data(), tmp.data(), m));
    for (int tau = 0; tau < t; ++tau) {
      const double a = model_.mixing(tau, q);
      out.mean(tau) += a * mu;
      out.variance(tau) += a * a * var;
    }
  }
  out.variance += model_.log_noise.array().exp().matrix();
  out.mean_physical = denormalize(out.mean, model_.target_stats);
  out.variance_physical =
      (out.variance.array() * model_.target_stats.std.array().square()).matrix();
  return out;
}

PredictiveDistribution DkmgpPosterior::predict_raw(const Vector& d_raw) const {
  return predict(normalize(d_raw, model_.input_stats));
}

PredictiveDistribution predictive_distribution(const DkmgpModel& model, const Vector& d_raw) {
  return DkmgpPosterior(model).predict_raw(d_raw);
}

// ---------------------------------------------------------------------------
// ELBO and its gradient

ModelGradient ModelGradient::zeros_like(const DkmgpModel& model) {
  ModelGradient g;
  g.mlp = model.mlp.zeros_like();
  for (const KernelHyper& k : model.kernels) {
    g.kernels.push_back({Vector::Zero(k.log_lengthscale.size()), 0.0});
  }
  g.mixing = Matrix::Zero(model.mixing.rows(), model.mixing.cols());
  g.inducing = RowMatrix::Zero(model.inducing.rows(), model.inducing.cols());
  for (const Vector& v : model.var_mean) g.var_mean.push_back(Vector::Zero(v.size()));
  for (const Matrix& l : model.var_chol) g.var_chol.push_back(Matrix::Zero(l.rows(), l.cols()));
  g.log_noise = Vector::Zero(model.log_noise.size());
  return g;
}

namespace {

ElboWithGradient evaluate(const DkmgpModel& model, const Batch& batch, bool want_grad) {
  model.validate();
  if (batch.inputs.rows() != batch.targets.rows()) {
    throw DimensionMismatch("batch inputs and targets differ in row count");
  }
  if (batch.targets.cols() != model.num_tasks()) {
    throw DimensionMismatch("targets have " + std::to_string(batch.targets.cols()) +
                            " columns, model has " + std::to_string(model.num_tasks()) +
                            " tasks");
  }
  if (batch.inputs.cols() != model.mlp.input_dim()) {
    throw DimensionMismatch("inputs have " + std::to_string(batch.inputs.cols()) +
                            " columns, feature extractor expects " +
                            std::to_string(model.mlp.input_dim()));
  }
  std::vector<std::size_t> all_rows;
  std::span<const std::size_t> rows = batch.rows;
  if (rows.empty()) {
    all_rows.resize(static_cast<std::size_t>(batch.inputs.rows()));
    std::iota(all_rows.begin(), all_rows.end(), 0);
    rows = all_rows;
  }
  if (rows.empty()) throw InvalidArgument("ELBO needs a nonempty batch");

  const auto b = static_cast<Eigen::Index>(rows.size());
  const int t = model.num_tasks();
  const int nq = model.num_latent();
  const Eigen::Index m = model.num_inducing();
  const int f = model.feature_dim();
  const double n = batch.data_size > 0.0 ? batch.data_size : static_cast<double>(b);
  const double scale = n / static_cast<double>(b);

  RowMatrix feats(b, f);
  RowMatrix y(b, t);
  std::vector<MlpTape> tapes;
  if (want_grad) tapes.reserve(rows.size());
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    if (r >= batch.inputs.rows()) throw InvalidArgument("batch row out of range");
    MlpTape tape = mlp_forward_tape(model.mlp, batch.inputs.row(r).transpose());
    feats.row(i) = tape.output().transpose();
    y.row(i) = batch.targets.row(r);
    if (want_grad) tapes.push_back(std::move(tape));
  }
  const RowMatrix z_t = model.inducing.transpose();

  struct LatentWork {
    Matrix k_zz;  // without jitter
    Matrix chol;
    Matrix k_inv;
    Vector alpha;
    Matrix s;
    RowMatrix k_xz;
    RowMatrix a;  // rows (K^-1 k_i)^T
    RowMatrix p;  // rows (K^-1 S K^-1 k_i)^T
  };
  std::vector<LatentWork> work(static_cast<std::size_t>(nq));
  Matrix mu_lat(b, nq);
  Matrix var_lat(b, nq);
  double kl_total = 0.0;
  for (int q = 0; q < nq; ++q) {
    const auto qi = static_cast<std::size_t>(q);
    LatentWork& w = work[qi];
    const KernelHyper& hyper = model.kernels[qi];
    const Matrix& l = model.var_chol[qi];
    w.k_zz = cross_kernel(hyper, model.inducing, z_t);
    w.chol = jittered_cholesky(w.k_zz, model.jitter);
    w.k_inv = inverse_from_chol(w.chol);
    w.alpha = w.k_inv * model.var_mean[qi];
    w.s = l.triangularView<Eigen::Lower>() * l.transpose();
    w.k_xz = cross_kernel(hyper, feats, z_t);
    w.a = w.k_xz * w.k_inv;
    const RowMatrix sa = w.a * w.s;
    mu_lat.col(q) = w.k_xz * w.alpha;
    var_lat.col(q) = (hyper.signal_var() - (w.k_xz.array() * w.a.array()).rowwise().sum() +
                      (w.a.array() * sa.array()).rowwise().sum())
                         .matrix();
    if (want_grad) w.p = sa * w.k_inv;
    kl_total += kl_unclamped(model.var_mean[qi], l, w.chol);
  }

  const Matrix mu_task = mu_lat * model.mixing.transpose();
  const Matrix var_task = var_lat * model.mixing.array().square().matrix().transpose();
  const Vector noise = model.log_noise.array().exp();
  const Matrix resid = y - mu_task;
  double expected_ll = 0.0;
  for (int tau = 0; tau < t; ++tau) {
    const double s2 = noise(tau);
    expected_ll += static_cast<double>(b) * -0.5 * std::log(2.0 * std::numbers::pi * s2) -
                   (resid.col(tau).array().square() + var_task.col(tau).array()).sum() /
                       (2.0 * s2);
  }

  ElboWithGradient out;
  out.elbo = scale * expected_ll - kl_total;
  if (!want_grad) return out;

  ModelGradient& g = out.grad;
  g = ModelGradient::zeros_like(model);

  // Adjoints of per-point task means and variances.
  Matrix g_mu(b, t);
  Matrix g_var(b, t);
  for (int tau = 0; tau < t; ++tau) {
    const double s2 = noise(tau);
    g_mu.col(tau) = scale * resid.col(tau) / s2;
    g_var.col(tau).setConstant(-scale / (2.0 * s2));
    g.log_noise(tau) =
        scale * (-0.5 * static_cast<double>(b) +
                 (resid.col(tau).array().square() + var_task.col(tau).array()).sum() / (2.0 * s2));
  }
  const Matrix g_mu_lat = g_mu * model.mixing;
  const Matrix g_var_lat = g_var * model.mixing.array().square().matrix();
  g.mixing = g_mu.transpose() * mu_lat +
             2.0 * ((g_var.transpose() * var_lat).array() * model.mixing.array()).matrix();

  RowMatrix feat_grad = RowMatrix::Zero(b, f);
  for (int q = 0; q < nq; ++q) {
    const auto qi = static_cast<std::size_t>(q);
    const LatentWork& w = work[qi];
    const KernelHyper& hyper = model.kernels[qi];
    const Vector inv = hyper.inv_len_sq();
    const double s2 = hyper.signal_var();
    const Matrix& l = model.var_chol[qi];
    const Vector gm = g_mu_lat.col(q);
    const Vector gv = g_var_lat.col(q);

    // Cross-kernel adjoint: mean term plus both variance terms.
    RowMatrix k_xz_bar = gm * w.alpha.transpose();
    k_xz_bar += (2.0 * gv).asDiagonal() * (w.p - w.a);

    const Vector a_gm = w.a.transpose() * gm;
    const Matrix wv = w.a.transpose() * gv.asDiagonal() * w.a;
    const Matrix k_inv_s = w.k_inv * w.s;

    g.var_mean[qi] = a_gm - w.alpha;
    Matrix k_zz_bar = -a_gm * w.alpha.transpose() + wv - 2.0 * k_inv_s * wv +
                      0.5 * (k_inv_s * w.k_inv + w.alpha * w.alpha.transpose() - w.k_inv);
    Matrix l_bar = 2.0 * wv * l - w.k_inv * l;
    l_bar.diagonal() += l.diagonal().cwiseInverse();
    g.var_chol[qi] = l_bar.triangularView<Eigen::Lower>();

    double g_signal = s2 * gv.sum();
    Vector g_log_len = Vector::Zero(f);

    const RowMatrix e = k_xz_bar.array() * w.k_xz.array();
    g_signal += e.sum();
    for (int j = 0; j < f; ++j) {
      const RowMatrix diff = feats.col(j).replicate(1, m) -
                             model.inducing.col(j).transpose().replicate(b, 1);
      const RowMatrix ed = e.array() * diff.array();
      feat_grad.col(j) -= inv(j) * ed.rowwise().sum();
      g.inducing.col(j) += inv(j) * ed.colwise().sum().transpose();
      g_log_len(j) += inv(j) * (ed.array() * diff.array()).sum();
    }

    const Matrix fz = k_zz_bar.array() * w.k_zz.array();
    const Matrix gz = fz + fz.transpose();
    g_signal += fz.sum();
    for (int j = 0; j < f; ++j) {
      const Matrix diff = model.inducing.col(j).replicate(1, m) -
                          model.inducing.col(j).transpose().replicate(m, 1);
      g.inducing.col(j) -= inv(j) * (gz.array() * diff.array()).rowwise().sum().matrix();
      g_log_len(j) += inv(j) * (fz.array() * diff.array().square()).sum();
    }
    g.kernels[qi].log_lengthscale = g_log_len;
    g.kernels[qi].log_signal_var = g_signal;
  }

  for (Eigen::Index i = 0; i < b; ++i) {
    mlp_backward_accumulate(model.mlp, tapes[static_cast<std::size_t>(i)],
                            feat_grad.row(i).transpose(), g.mlp);
  }
  return out;
}

}  // namespace

double elbo(const DkmgpModel& model, const Batch& batch) {
  return evaluate(model, batch, false).elbo;
}

ElboWithGradient elbo_gradients(const DkmgpModel& model, const Batch& batch) {
  return evaluate(model, batch, true);
}

// ---------------------------------------------------------------------------
// Flat parameter vector

ParamLayout param_layout(const DkmgpModel& model) {
  const auto m = static_cast<std::size_t>(model.num_inducing());
  const auto f = static_cast<std::size_t>(model.feature_dim());
  const auto q = static_cast<std::size_t>(model.num_latent());
  const auto t = static_cast<std::size_t>(model.num_tasks());
  const std::array<std::size_t, kParamGroupCount> sizes{
      model.mlp.parameter_count(), q * (f + 1), t * q, m * f, q * m, q * m * (m + 1) / 2, t};
  ParamLayout layout;
  for (std::size_t i = 0; i < kParamGroupCount; ++i) {
    layout.offsets[i + 1] = layout.offsets[i] + sizes[i];
  }
  return layout;
}

namespace {

// Visits every trainable scalar in layout order. `fn(value_ref, grad_ref, is_chol_diag)`.
template <typename Model, typename Grad, typename Fn>
void visit_parameters(Model& model, Grad& grad, Fn&& fn) {
  for (std::size_t li = 0; li < model.mlp.layers.size(); ++li) {
    auto& layer = model.mlp.layers[li];
    auto& glayer = grad.mlp.layers[li];
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      fn(layer.weight.data()[i], glayer.weight.data()[i], false);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) fn(layer.bias(i), glayer.bias(i), false);
  }
  for (std::size_t q = 0; q < model.kernels.size(); ++q) {
    auto& k = model.kernels[q];
    auto& gk = grad.kernels[q];
    for (Eigen::Index j = 0; j < k.log_lengthscale.size(); ++j) {
      fn(k.log_lengthscale(j), gk.log_lengthscale(j), false);
    }
    fn(k.log_signal_var, gk.log_signal_var, false);
  }
  for (Eigen::Index r = 0; r < model.mixing.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.mixing.cols(); ++c) {
      fn(model.mixing(r, c), grad.mixing(r, c), false);
    }
  }
  for (Eigen::Index r = 0; r < model.inducing.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.inducing.cols(); ++c) {
      fn(model.inducing(r, c), grad.inducing(r, c), false);
    }
  }
  for (std::size_t q = 0; q < model.var_mean.size(); ++q) {
    for (Eigen::Index i = 0; i < model.var_mean[q].size(); ++i) {
      fn(model.var_mean[q](i), grad.var_mean[q](i), false);
    }
  }
  for (std::size_t q = 0; q < model.var_chol.size(); ++q) {
    auto& l = model.var_chol[q];
    auto& gl = grad.var_chol[q];
    for (Eigen::Index r = 0; r < l.rows(); ++r) {
      for (Eigen::Index c = 0; c <= r; ++c) fn(l(r, c), gl(r, c), r == c);
    }
  }
  for (Eigen::Index i = 0; i < model.log_noise.size(); ++i) {
    fn(model.log_noise(i), grad.log_noise(i), false);
  }
}

}  // namespace

std::vector<double> pack_parameters(const DkmgpModel& model) {
  std::vector<double> flat;
  flat.reserve(param_layout(model).size());
  DkmgpModel copy = model;
  ModelGradient dummy = ModelGradient::zeros_like(model);
  visit_parameters(copy, dummy, [&](double& v, double&, bool diag) {
    flat.push_back(diag ? std::log(v) : v);
  });
  return flat;
}

void unpack_parameters(std::span<const double> flat, DkmgpModel& model) {
  if (flat.size() != param_layout(model).size()) {
    throw DimensionMismatch("flat parameter vector has " + std::to_string(flat.size()) +
                            " entries, model needs " + std::to_string(param_layout(model).size()));
  }
  std::size_t i = 0;
  ModelGradient dummy = ModelGradient::zeros_like(model);
  visit_parameters(model, dummy, [&](double& v, double&, bool diag) {
    v = diag ? std::exp(flat[i]) : flat[i];
    ++i;
  });
}

std::vector<double> pack_gradient(const ModelGradient& grad, const DkmgpModel& model) {
  std::vector<double> flat;
  flat.reserve(param_layout(model).size());
  DkmgpModel copy = model;
  ModelGradient gcopy = grad;
  visit_parameters(copy, gcopy, [&](double& v, double& gv, bool diag) {
    flat.push_back(diag ? gv * v : gv);
  });
  return flat;
}

}  // namespace dkmgp
