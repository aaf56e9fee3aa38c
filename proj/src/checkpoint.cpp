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

#include <string>

#include "dkmgp/errors.hpp"
#include "dkmgp/io_util.hpp"
#include "dkmgp/mtgp.hpp"

namespace dkmgp {

namespace {

using nlohmann::json;

template <typename Derived>
std::string encode(const Eigen::DenseBase<Derived>& m) {
  // Row-major flattening regardless of storage order.
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return encode_f64_base64(flat);
}

json encode_matrix(const Eigen::Ref<const Matrix>& m) {
  return {{"shape", {m.rows(), m.cols()}}, {"data", encode(m)}};
}

Matrix decode_matrix(const json& j, const char* what) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0) {
    throw SchemaError(std::string(what) + ": bad shape");
  }
  const std::vector<double> flat = decode_f64_base64(j.at("data").get<std::string>());
  if (static_cast<Eigen::Index>(flat.size()) != shape[0] * shape[1]) {
    throw SchemaError(std::string(what) + ": payload does not match shape");
  }
  Matrix m(shape[0], shape[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = flat[static_cast<std::size_t>(r * m.cols() + c)];
    }
  }
  return m;
}

Vector decode_vector(const json& j, const char* what) {
  const std::vector<double> flat = decode_f64_base64(j.get<std::string>());
  (void)what;
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

std::string encode_vector(const Vector& v) {
  return encode_f64_base64(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

json encode_stats(const NormalizationStats& s) {
  return {{"mean", encode_vector(s.mean)}, {"std", encode_vector(s.std)},
          {"degenerate", s.degenerate}};
}

NormalizationStats decode_stats(const json& j) {
  NormalizationStats s;
  s.mean = decode_vector(j.at("mean"), "stats.mean");
  s.std = decode_vector(j.at("std"), "stats.std");
  s.degenerate = j.at("degenerate").get<std::vector<bool>>();
  if (s.std.size() != s.mean.size() || s.degenerate.size() != s.dim()) {
    throw SchemaError("normalization stats lengths disagree");
  }
  return s;
}

}  // namespace

std::string checkpoint_to_string(const DkmgpModel& model) {
  model.validate();
  json j;
  j["format"] = "dkmgp-checkpoint";
  j["schema_version"] = DkmgpModel::kSchemaVersion;
  j["horizon"] = model.horizon;
  j["jitter"] = encode_f64_base64(std::span<const double>(&model.jitter, 1));
  j["dims"] = {{"tasks", model.num_tasks()},
               {"latent", model.num_latent()},
               {"inducing", model.num_inducing()},
               {"features", model.feature_dim()}};

  json layers = json::array();
  for (const DenseLayer& l : model.mlp.layers) {
    layers.push_back({{"weight", encode_matrix(l.weight)}, {"bias", encode_vector(l.bias)}});
  }
  j["mlp"] = {{"layer_sizes", model.mlp_config.layer_sizes},
              {"activation", activation_name(model.mlp.activation)},
              {"seed", model.mlp_config.seed},
              {"layers", layers}};

  json kernels = json::array();
  for (const KernelHyper& k : model.kernels) {
    kernels.push_back(
        {{"log_lengthscale", encode_vector(k.log_lengthscale)},
         {"log_signal_var", encode_f64_base64(std::span<const double>(&k.log_signal_var, 1))}});
  }
  j["kernels"] = kernels;
  j["mixing"] = encode_matrix(model.mixing);
  j["inducing"] = encode_matrix(model.inducing);
  json variational = json::array();
  for (std::size_t q = 0; q < model.var_mean.size(); ++q) {
    variational.push_back({{"mean", encode_vector(model.var_mean[q])},
                           {"chol", encode_matrix(model.var_chol[q])}});
  }
  j["variational"] = variational;
  j["log_noise"] = encode_vector(model.log_noise);
  j["input_stats"] = encode_stats(model.input_stats);
  j["target_stats"] = encode_stats(model.target_stats);
  return j.dump(1) + "\n";
}

DkmgpModel checkpoint_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "dkmgp-checkpoint") {
      throw SchemaError("not a dkmgp checkpoint");
    }
    const int version = j.at("schema_version").get<int>();
    if (version != DkmgpModel::kSchemaVersion) {
      throw VersionMismatch("checkpoint schema_version " + std::to_string(version) +
                            ", this build reads " + std::to_string(DkmgpModel::kSchemaVersion));
    }
    DkmgpModel model;
    model.horizon = j.at("horizon").get<int>();
    const std::vector<double> jitter = decode_f64_base64(j.at("jitter").get<std::string>());
    if (jitter.size() != 1) throw SchemaError("jitter must hold one value");
    model.jitter = jitter[0];

    const json& mlp = j.at("mlp");
    model.mlp_config.layer_sizes = mlp.at("layer_sizes").get<std::vector<int>>();
    model.mlp_config.activation = activation_from_name(mlp.at("activation").get<std::string>());
    model.mlp_config.seed = mlp.at("seed").get<std::uint64_t>();
    model.mlp.activation = model.mlp_config.activation;
    for (const json& l : mlp.at("layers")) {
      model.mlp.layers.push_back(
          {decode_matrix(l.at("weight"), "mlp weight"), decode_vector(l.at("bias"), "mlp bias")});
    }
    if (model.mlp.layers.size() + 1 != model.mlp_config.layer_sizes.size()) {
      throw SchemaError("mlp layer count disagrees with layer_sizes");
    }
    for (std::size_t i = 0; i < model.mlp.layers.size(); ++i) {
      const DenseLayer& l = model.mlp.layers[i];
      if (l.weight.cols() != model.mlp_config.layer_sizes[i] ||
          l.weight.rows() != model.mlp_config.layer_sizes[i + 1] ||
          l.bias.size() != l.weight.rows()) {
        throw SchemaError("mlp layer " + std::to_string(i) + " has inconsistent shape");
      }
    }

    for (const json& k : j.at("kernels")) {
      const std::vector<double> sig = decode_f64_base64(k.at("log_signal_var").get<std::string>());
      if (sig.size() != 1) throw SchemaError("log_signal_var must hold one value");
      model.kernels.push_back({decode_vector(k.at("log_lengthscale"), "lengthscale"), sig[0]});
    }
    model.mixing = decode_matrix(j.at("mixing"), "mixing");
    model.inducing = decode_matrix(j.at("inducing"), "inducing");
    for (const json& v : j.at("variational")) {
      model.var_mean.push_back(decode_vector(v.at("mean"), "variational mean"));
      model.var_chol.push_back(decode_matrix(v.at("chol"), "variational chol"));
    }
    model.log_noise = decode_vector(j.at("log_noise"), "log_noise");
    model.input_stats = decode_stats(j.at("input_stats"));
    model.target_stats = decode_stats(j.at("target_stats"));

    try {
      model.validate();
    } catch (const Error& e) {
      throw SchemaError(std::string("checkpoint is inconsistent: ") + e.what());
    }
    return model;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const DkmgpModel& model, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_to_string(model));
}

DkmgpModel load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_string(read_text_file(path));
}

}  // namespace dkmgp
