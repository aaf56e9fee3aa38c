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

// Multi-task sparse variational GP over deep-kernel features.
//
// Each task tau mixes Q independent latent GPs, f_tau(d) = sum_q a(tau, q) h_q(g(d)),
// where g is the MLP feature extractor and h_q ~ GP(0, k_q) with an ARD RBF k_q.
// Every latent carries its own Gaussian q(u_q) = N(m_q, L_q L_q^T) over the
// latent values at M inducing features Z shared by all latents (non-whitened).
// All inputs handed to the functions below are in normalized model space
// unless the name says "raw".

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "dkmgp/dataset.hpp"
#include "dkmgp/linalg.hpp"
#include "dkmgp/mlp.hpp"

namespace dkmgp {

/// ARD RBF hyperparameters, log-stored.
struct KernelHyper {
  Vector log_lengthscale;
  double log_signal_var = 0.0;

  double signal_var() const;
  Vector inv_len_sq() const;
};

double rbf_kernel(const KernelHyper& hyper, const Vector& x, const Vector& xp);

struct MtgpConfig {
  int num_latent = 3;      // Q
  int num_inducing = 100;  // M
  double jitter = 1e-6;
  double init_lengthscale = 1.0;
  double init_signal_var = 1.0;
  double init_noise_var = 0.01;
  double init_mixing_std = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DkmgpModel {
  static constexpr int kSchemaVersion = 1;

  MlpConfig mlp_config;
  MlpParams mlp;
  std::vector<KernelHyper> kernels;  // one per latent
  Matrix mixing;                     // T x Q, entries a(tau, q)
  RowMatrix inducing;                // M x f
  std::vector<Vector> var_mean;      // per latent, M
  std::vector<Matrix> var_chol;      // per latent, M x M lower triangular
  Vector log_noise;                  // per task
  NormalizationStats input_stats;
  NormalizationStats target_stats;
  int horizon = 1;
  double jitter = 1e-6;

  int num_tasks() const { return static_cast<int>(mixing.rows()); }
  int num_latent() const { return static_cast<int>(mixing.cols()); }
  int num_inducing() const { return static_cast<int>(inducing.rows()); }
  int feature_dim() const { return static_cast<int>(inducing.cols()); }

  /// Throws DimensionMismatch / InvalidArgument on inconsistent shapes or a
  /// non-positive Cholesky diagonal.
  void validate() const;
};

/// Initial model: MLP from mlp_config, unit lengthscales and signal variance,
/// mixing ~ N(0, init_mixing_std^2), Z = features of M random rows of
/// `inputs`, m_q = 0, L_q = I, noise = init_noise_var.
DkmgpModel init_model(const MlpConfig& mlp_config, const MtgpConfig& config,
                      const RowMatrix& inputs, int num_tasks, NormalizationStats input_stats,
                      NormalizationStats target_stats, int horizon);
DkmgpModel init_model(const MlpConfig& mlp_config, const MtgpConfig& config,
                      const ResidualDataset& train);

/// Deep features of every row of `inputs`.
RowMatrix deep_features(const MlpParams& mlp, const RowMatrix& inputs);

/// Cov(f_tau(d_i), f_tau'(d_j)) = sum_q a(tau,q) a(tau',q) k_q(g(d_i), g(d_j)).
double lmc_cross_covariance(const DkmgpModel& model, int task, int task_prime,
                            const Vector& d_i, const Vector& d_j);

/// Full (T*N) x (T*N) prior covariance, task-major blocks.
Matrix lmc_covariance_matrix(const DkmgpModel& model, const RowMatrix& inputs);

/// K(Z, Z) for latent q, without jitter.
Matrix inducing_kernel(const KernelHyper& hyper, const RowMatrix& inducing);

/// Lower Cholesky factor of k + jitter I; retries once with 1e-4 before
/// throwing CholeskyFailure.
Matrix jittered_cholesky(const Matrix& k, double jitter);

/// KL(N(m, L L^T) || N(0, P P^T)) where P = prior_chol.
double kl_gaussians(const Vector& m, const Matrix& chol, const Matrix& prior_chol);

struct PredictiveDistribution {
  Vector mean;                // normalized target space, per task
  Vector variance;            // normalized, includes the task noise
  Vector mean_physical;       // denormalized residual estimate e
  Vector variance_physical;
};

/// Per-latent quantities that do not depend on the query point. Immutable and
/// safe to share across threads.
class DkmgpPosterior {
 public:
  explicit DkmgpPosterior(const DkmgpModel& model);

  /// Query with a raw (unnormalized) 9-vector.
  PredictiveDistribution predict_raw(const Vector& d_raw) const;
  /// Query with a normalized input.
  PredictiveDistribution predict(const Vector& d) const;

  const DkmgpModel& model() const { return model_; }

 private:
  struct Latent {
    Vector alpha;      // K^-1 m
    RowMatrix var_op;  // K^-1 S K^-1 - K^-1
    Vector inv_len_sq;
    double signal_var = 1.0;
  };
  DkmgpModel model_;
  RowMatrix inducing_t_;  // f x M, feature-major for simd::rbf_row
  std::vector<Latent> latents_;
};

PredictiveDistribution predictive_distribution(const DkmgpModel& model, const Vector& d_raw);

/// Gradient with the same layout as the trainable parts of DkmgpModel.
/// Kernel entries are derivatives w.r.t. the log-stored values; var_chol is
/// w.r.t. the raw lower-triangular entries.
struct ModelGradient {
  MlpParams mlp;
  std::vector<KernelHyper> kernels;
  Matrix mixing;
  RowMatrix inducing;
  std::vector<Vector> var_mean;
  std::vector<Matrix> var_chol;
  Vector log_noise;

  static ModelGradient zeros_like(const DkmgpModel& model);
};

/// Minibatch view: rows index into inputs/targets; data_size is N in the
/// N / |batch| likelihood scaling. Empty rows means the whole matrix.
struct Batch {
  const RowMatrix& inputs;
  const RowMatrix& targets;
  std::span<const std::size_t> rows = {};
  double data_size = 0.0;  // 0 -> number of rows in the batch
};

double elbo(const DkmgpModel& model, const Batch& batch);

struct ElboWithGradient {
  double elbo = 0.0;
  ModelGradient grad;
};

ElboWithGradient elbo_gradients(const DkmgpModel& model, const Batch& batch);

// ---------------------------------------------------------------------------
// Flat parameter vector used by the optimizer and by gradient checks.
// Cholesky diagonals are carried as logs so Adam keeps them positive.

enum class ParamGroup { kMlp, kKernel, kMixing, kInducing, kVarMean, kVarChol, kNoise };
inline constexpr std::size_t kParamGroupCount = 7;

struct ParamLayout {
  std::array<std::size_t, kParamGroupCount + 1> offsets{};
  std::size_t size() const { return offsets.back(); }
  std::size_t begin(ParamGroup g) const { return offsets[static_cast<std::size_t>(g)]; }
  std::size_t end(ParamGroup g) const { return offsets[static_cast<std::size_t>(g) + 1]; }
};

ParamLayout param_layout(const DkmgpModel& model);
std::vector<double> pack_parameters(const DkmgpModel& model);
void unpack_parameters(std::span<const double> flat, DkmgpModel& model);
std::vector<double> pack_gradient(const ModelGradient& grad, const DkmgpModel& model);

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
  double learning_rate = 0.0064;
  int batch_size = 144;
  int epochs = 1140;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::array<bool, kParamGroupCount> trainable{true, true, true, true, true, true, true};
};

struct EpochRecord {
  int epoch = 0;      // 0 is the initial model
  double elbo = 0.0;  // full-data ELBO after the epoch
  double wall_ms = 0.0;
};

struct TrainResult {
  DkmgpModel model;
  std::vector<EpochRecord> history;
};

/// Adam over all trainable groups with seeded minibatch shuffling. Throws
/// NonFiniteLoss naming the epoch when the objective stops being finite.
TrainResult train(DkmgpModel model, const RowMatrix& inputs, const RowMatrix& targets,
                  const TrainOptions& options,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});
TrainResult train(DkmgpModel model, const ResidualDataset& train_set,
                  const TrainOptions& options,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Columns epoch,elbo[,wall_ms].
void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path, bool include_timing = true);

// ---------------------------------------------------------------------------
// Checkpoints: versioned JSON, float64 arrays as little-endian base64.

void save_checkpoint(const DkmgpModel& model, const std::filesystem::path& path);
DkmgpModel load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_string(const DkmgpModel& model);
DkmgpModel checkpoint_from_string(const std::string& text);

// ---------------------------------------------------------------------------
// Per-task exact GP baseline: three independent single-step GP regressors on
// the raw normalized inputs, no feature extractor, no task coupling.

struct ExactGpConfig {
  double lengthscale = 2.0;
  double signal_var = 1.0;
  double noise_var = 0.01;
};

class PerTaskExactGp {
 public:
  PerTaskExactGp() = default;

  /// Mean of each task for a raw 9-vector, denormalized.
  Vector predict_raw(const Vector& d_raw) const;
  /// Normalized-space mean per task.
  Vector predict_mean(const Vector& d) const;
  /// Normalized-space latent variance per task (O(N^2) per task).
  Vector predict_variance(const Vector& d) const;

  std::size_t size() const { return static_cast<std::size_t>(train_t_.cols()); }
  const NormalizationStats& input_stats() const { return input_stats_; }
  const NormalizationStats& target_stats() const { return target_stats_; }

  friend PerTaskExactGp per_task_baseline_train(const RowMatrix& inputs,
                                                const RowMatrix& targets,
                                                const ExactGpConfig& config,
                                                NormalizationStats input_stats,
                                                NormalizationStats target_stats);

 private:
  struct Task {
    Vector alpha;
    Matrix chol;
    Vector inv_len_sq;
    double signal_var = 1.0;
  };
  RowMatrix train_t_;  // D x N
  std::vector<Task> tasks_;
  NormalizationStats input_stats_;
  NormalizationStats target_stats_;
};

PerTaskExactGp per_task_baseline_train(const RowMatrix& inputs, const RowMatrix& targets,
                                       const ExactGpConfig& config,
                                       NormalizationStats input_stats,
                                       NormalizationStats target_stats);
PerTaskExactGp per_task_baseline_train(const ResidualDataset& train_set,
                                       const ExactGpConfig& config);
Vector per_task_baseline_predict(const PerTaskExactGp& gp, const Vector& d_raw);

}  // namespace dkmgp
