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

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "dkmgp/errors.hpp"
#include "dkmgp/io_util.hpp"
#include "dkmgp/mtgp.hpp"

namespace dkmgp {

TrainResult train(DkmgpModel model, const RowMatrix& inputs, const RowMatrix& targets,
                  const TrainOptions& options,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  model.validate();
  if (inputs.rows() == 0) throw InsufficientData("training set is empty");
  if (inputs.rows() != targets.rows()) {
    throw DimensionMismatch("training inputs and targets differ in row count");
  }
  if (options.batch_size < 1 || options.epochs < 0 || !(options.learning_rate > 0.0)) {
    throw InvalidArgument("batch_size >= 1, epochs >= 0 and learning_rate > 0 are required");
  }

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };

  const auto n = static_cast<std::size_t>(inputs.rows());
  const double data_size = static_cast<double>(n);
  const ParamLayout layout = param_layout(model);
  std::vector<double> theta = pack_parameters(model);
  std::vector<char> mask(theta.size(), 0);
  for (std::size_t gi = 0; gi < kParamGroupCount; ++gi) {
    if (!options.trainable[gi]) continue;
    const auto g = static_cast<ParamGroup>(gi);
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(layout.begin(g)),
              mask.begin() + static_cast<std::ptrdiff_t>(layout.end(g)), 1);
  }
  std::vector<double> m1(theta.size(), 0.0);
  std::vector<double> m2(theta.size(), 0.0);
  std::uint64_t step = 0;

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto batch = std::min<std::size_t>(static_cast<std::size_t>(options.batch_size), n);

  TrainResult result;
  const double initial = elbo(model, Batch{inputs, targets, {}, data_size});
  if (!std::isfinite(initial)) throw NonFiniteLoss("ELBO is not finite at epoch 0");
  result.history.push_back({0, initial, elapsed_ms()});
  if (on_epoch) on_epoch(result.history.back());

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t first = 0; first < n; first += batch) {
      const std::size_t count = std::min(batch, n - first);
      const std::span<const std::size_t> rows(order.data() + first, count);
      const ElboWithGradient eg = elbo_gradients(model, Batch{inputs, targets, rows, data_size});
      if (!std::isfinite(eg.elbo)) {
        throw NonFiniteLoss("ELBO became non-finite during epoch " + std::to_string(epoch));
      }
      const std::vector<double> grad = pack_gradient(eg.grad, model);
      ++step;
      const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!mask[i]) continue;
        const double gi = -grad[i];  // minimize -ELBO
        m1[i] = options.beta1 * m1[i] + (1.0 - options.beta1) * gi;
        m2[i] = options.beta2 * m2[i] + (1.0 - options.beta2) * gi * gi;
        theta[i] -= options.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + options.epsilon);
      }
      unpack_parameters(theta, model);
    }
    const double value = elbo(model, Batch{inputs, targets, {}, data_size});
    if (!std::isfinite(value)) {
      throw NonFiniteLoss("ELBO is not finite after epoch " + std::to_string(epoch));
    }
    result.history.push_back({epoch, value, elapsed_ms()});
    if (on_epoch) on_epoch(result.history.back());
  }
  result.model = std::move(model);
  return result;
}

TrainResult train(DkmgpModel model, const ResidualDataset& train_set,
                  const TrainOptions& options,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  return train(std::move(model), train_set.inputs, train_set.targets, options, on_epoch);
}

void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path, bool include_timing) {
  std::ostringstream out;
  out << (include_timing ? "epoch,elbo,wall_ms\n" : "epoch,elbo\n");
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << format_double(r.elbo);
    if (include_timing) out << ',' << format_double(r.wall_ms);
    out << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace dkmgp
