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

#include "dkmgp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "dkmgp/errors.hpp"
#include "dkmgp/io_util.hpp"
#include "json.hpp"

namespace dkmgp {

namespace {

constexpr std::array<const char*, 10> kLogColumns{"t",   "x",     "y",     "vx", "vy",
                                                  "psi", "delta", "omega", "ax", "delta_dot"};
constexpr int kDatasetSchemaVersion = 1;

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a <= 0.0) a += two_pi;
  return a - std::numbers::pi;
}

}  // namespace

std::vector<ControlInput> TrajectoryLog::inputs(std::size_t first, std::size_t count) const {
  std::vector<ControlInput> out;
  out.reserve(count);
  for (std::size_t i = first; i < first + count; ++i) out.push_back(samples.at(i).input);
  return out;
}

void validate_log(TrajectoryLog& log, double spacing_tolerance) {
  if (log.size() < 2) throw InsufficientData("trajectory log needs at least 2 samples");
  for (std::size_t i = 0; i < log.size(); ++i) {
    const LogSample& s = log.samples[i];
    if (!std::isfinite(s.t) || !s.state.is_finite() || !std::isfinite(s.input.ax) ||
        !std::isfinite(s.input.delta_dot) || !std::isfinite(s.bank_theta)) {
      throw ParseError("non-finite value in sample " + std::to_string(i));
    }
  }
  const double dt = log.samples[1].t - log.samples[0].t;
  if (!(dt > 0.0)) throw NonUniformSampling("timestamps must be strictly increasing");
  for (std::size_t i = 1; i < log.size(); ++i) {
    const double step = log.samples[i].t - log.samples[i - 1].t;
    if (std::abs(step - dt) > spacing_tolerance) {
      throw NonUniformSampling("spacing " + format_double(step) + " s at sample " +
                               std::to_string(i) + " deviates from " + format_double(dt) + " s");
    }
  }
  log.dt = dt;
}

TrajectoryLog load_log_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open log " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("log " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line, ',');

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const bool known = header[i] == "bank_theta" ||
                       std::find(kLogColumns.begin(), kLogColumns.end(), header[i]) !=
                           kLogColumns.end();
    if (!known) throw SchemaError("unknown column '" + header[i] + "'");
    if (!column.emplace(header[i], i).second) {
      throw SchemaError("duplicate column '" + header[i] + "'");
    }
  }
  for (const char* name : kLogColumns) {
    if (!column.count(name)) throw SchemaError(std::string("missing column '") + name + "'");
  }

  TrajectoryLog log;
  log.has_bank = column.count("bank_theta") > 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(cells.size()));
    }
    auto get = [&](const char* name) {
      const std::string& cell = cells[column.at(name)];
      double v = 0.0;
      if (!parse_double(cell, v) || !std::isfinite(v)) {
        throw ParseError("row " + std::to_string(line_no) + ": bad value '" + cell +
                         "' in column " + name);
      }
      return v;
    };
    LogSample s;
    s.t = get("t");
    s.state = {get("x"), get("y"), get("vx"), get("vy"), get("psi"), get("delta"), get("omega")};
    s.input = {get("ax"), get("delta_dot")};
    if (log.has_bank) s.bank_theta = get("bank_theta");
    log.samples.push_back(s);
  }
  validate_log(log);
  return log;
}

void write_log_csv(const TrajectoryLog& log, const std::filesystem::path& path) {
  std::ostringstream out;
  for (std::size_t i = 0; i < kLogColumns.size(); ++i) out << (i ? "," : "") << kLogColumns[i];
  if (log.has_bank) out << ",bank_theta";
  out << '\n';
  for (const LogSample& s : log.samples) {
    const auto a = s.state.to_array();
    out << format_double(s.t);
    for (double v : a) out << ',' << format_double(v);
    out << ',' << format_double(s.input.ax) << ',' << format_double(s.input.delta_dot);
    if (log.has_bank) out << ',' << format_double(s.bank_theta);
    out << '\n';
  }
  write_text_file(path, out.str());
}

ControlInput ManeuverSpec::input_at(double t) const {
  if (segments.empty()) return {};
  double cycle = 0.0;
  for (const ManeuverSegment& seg : segments) cycle += seg.duration;
  if (!(cycle > 0.0)) return {};
  double local = std::fmod(t, cycle);
  for (const ManeuverSegment& seg : segments) {
    if (local < seg.duration) return {seg.ax, seg.delta_dot};
    local -= seg.duration;
  }
  return {segments.back().ax, segments.back().delta_dot};
}

TrajectoryLog generate_synthetic_log(const ModelContext& ctx, const ManeuverSpec& maneuver,
                                     double duration, double dt, std::uint64_t seed) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (!(duration >= dt)) throw InvalidArgument("duration must be at least dt");
  const auto steps = static_cast<std::size_t>(std::floor(duration / dt + 1e-9));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  TrajectoryLog log;
  log.dt = dt;
  log.samples.reserve(steps + 1);
  VehicleState truth = maneuver.initial;
  if (maneuver.wrap_heading) truth.psi = wrap_angle(truth.psi);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    LogSample s;
    s.t = t;
    s.input = maneuver.input_at(t + 0.5 * dt);
    s.bank_theta = ctx.vehicle.bank_theta;
    auto a = truth.to_array();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (maneuver.noise_std[i] > 0.0) a[i] += maneuver.noise_std[i] * unit(rng);
    }
    s.state = VehicleState::from_array(a);
    log.samples.push_back(s);
    if (k < steps) {
      truth = rk4_step(DynamicsModel::kSingleTrack, ctx, truth, s.input, dt);
      if (maneuver.wrap_heading) truth.psi = wrap_angle(truth.psi);
    }
  }
  return log;
}

NormalizationStats NormalizationStats::identity(std::size_t dim) {
  NormalizationStats s;
  s.mean = Vector::Zero(static_cast<Eigen::Index>(dim));
  s.std = Vector::Ones(static_cast<Eigen::Index>(dim));
  s.degenerate.assign(dim, false);
  return s;
}

NormalizationStats NormalizationStats::from_rows(const RowMatrix& rows) {
  if (rows.rows() == 0) throw InsufficientData("cannot compute statistics of zero rows");
  NormalizationStats s;
  const auto n = static_cast<double>(rows.rows());
  s.mean = rows.colwise().sum().transpose() / n;
  s.std.resize(rows.cols());
  s.degenerate.assign(static_cast<std::size_t>(rows.cols()), false);
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const double var = (rows.col(j).array() - s.mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    if (sd > 1e-12 * std::max(1.0, std::abs(s.mean(j)))) {
      s.std(j) = sd;
    } else {
      s.std(j) = 1.0;
      s.degenerate[static_cast<std::size_t>(j)] = true;
    }
  }
  return s;
}

Vector normalize(const Vector& v, const NormalizationStats& stats) {
  if (static_cast<std::size_t>(v.size()) != stats.dim()) {
    throw DimensionMismatch("normalize: vector has " + std::to_string(v.size()) +
                            " entries, stats have " + std::to_string(stats.dim()));
  }
  return ((v - stats.mean).array() / stats.std.array()).matrix();
}

Vector denormalize(const Vector& v, const NormalizationStats& stats) {
  if (static_cast<std::size_t>(v.size()) != stats.dim()) {
    throw DimensionMismatch("denormalize: vector has " + std::to_string(v.size()) +
                            " entries, stats have " + std::to_string(stats.dim()));
  }
  return (v.array() * stats.std.array()).matrix() + stats.mean;
}

RowMatrix normalize_rows(const RowMatrix& rows, const NormalizationStats& stats) {
  if (static_cast<std::size_t>(rows.cols()) != stats.dim()) {
    throw DimensionMismatch("normalize_rows: column count does not match stats");
  }
  RowMatrix out = rows.rowwise() - stats.mean.transpose();
  out.array().rowwise() /= stats.std.transpose().array();
  return out;
}

ResidualSample ResidualDataset::sample(std::size_t i) const {
  const auto r = static_cast<Eigen::Index>(i);
  return {inputs.row(r).transpose(), targets.row(r).transpose(), horizon};
}

void ResidualDataset::apply_stats(NormalizationStats in, NormalizationStats out) {
  input_stats = std::move(in);
  target_stats = std::move(out);
  inputs = normalize_rows(raw_inputs, input_stats);
  targets = normalize_rows(raw_targets, target_stats);
}

Vector anchor_features(const VehicleState& s, const ControlInput& u) {
  Vector d(kInputDim);
  d << s.x, s.y, s.vx, s.vy, s.psi, s.delta, s.omega, u.ax, u.delta_dot;
  return d;
}

Vector residual_target(const VehicleState& truth, const VehicleState& predicted) {
  return Eigen::Vector3d(truth.vx - predicted.vx, truth.vy - predicted.vy,
                         truth.omega - predicted.omega);
}

ResidualDataset build_residual_dataset(const TrajectoryLog& log, int horizon,
                                       const VehicleParams& vp) {
  if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
  const auto n = static_cast<std::size_t>(horizon);
  if (log.size() <= n) {
    throw InsufficientData("log of " + std::to_string(log.size()) +
                           " rows is too short for horizon " + std::to_string(horizon));
  }
  const ModelContext ctx{vp, {}, {}};
  const std::size_t count = log.size() - n;

  ResidualDataset ds;
  ds.horizon = horizon;
  ds.raw_inputs.resize(static_cast<Eigen::Index>(count), kInputDim);
  ds.raw_targets.resize(static_cast<Eigen::Index>(count), kTargetDim);
  ds.anchors.resize(count);
  for (std::size_t t = 0; t < count; ++t) {
    const LogSample& anchor = log.samples[t];
    VehicleState s = anchor.state;
    for (std::size_t k = 0; k < n; ++k) {
      s = rk4_step(DynamicsModel::kEkin, ctx, s, log.samples[t + k].input, log.dt);
    }
    const auto r = static_cast<Eigen::Index>(t);
    ds.raw_inputs.row(r) = anchor_features(anchor.state, anchor.input).transpose();
    ds.raw_targets.row(r) = residual_target(log.samples[t + n].state, s).transpose();
    ds.anchors[t] = t;
  }
  ds.source = {log.size(), log.dt, "full"};
  ds.apply_stats(NormalizationStats::from_rows(ds.raw_inputs),
                 NormalizationStats::from_rows(ds.raw_targets));
  return ds;
}

std::pair<ResidualDataset, ResidualDataset> split_contiguous(const ResidualDataset& ds,
                                                             double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  }
  const auto n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(ds.size())));
  const std::size_t n_test = ds.size() - n_train;
  if (n_train == 0 || n_test == 0) {
    throw InsufficientData("split leaves an empty side (" + std::to_string(n_train) + "/" +
                           std::to_string(n_test) + ")");
  }
  auto slice = [&](std::size_t first, std::size_t count, const char* role) {
    ResidualDataset part;
    part.horizon = ds.horizon;
    const auto f = static_cast<Eigen::Index>(first);
    const auto c = static_cast<Eigen::Index>(count);
    part.raw_inputs = ds.raw_inputs.middleRows(f, c);
    part.raw_targets = ds.raw_targets.middleRows(f, c);
    part.anchors.assign(ds.anchors.begin() + static_cast<std::ptrdiff_t>(first),
                        ds.anchors.begin() + static_cast<std::ptrdiff_t>(first + count));
    part.source = ds.source;
    part.source.role = role;
    return part;
  };
  ResidualDataset train = slice(0, n_train, "train");
  ResidualDataset test = slice(n_train, n_test, "test");
  NormalizationStats in = NormalizationStats::from_rows(train.raw_inputs);
  NormalizationStats out = NormalizationStats::from_rows(train.raw_targets);
  train.apply_stats(in, out);
  test.apply_stats(std::move(in), std::move(out));
  return {std::move(train), std::move(test)};
}

namespace {

nlohmann::json stats_to_json(const NormalizationStats& s) {
  return {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
          {"std", std::vector<double>(s.std.data(), s.std.data() + s.std.size())},
          {"degenerate", s.degenerate}};
}

NormalizationStats stats_from_json(const nlohmann::json& j) {
  NormalizationStats s;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("std").get<std::vector<double>>();
  if (mean.size() != sd.size()) throw SchemaError("stats mean/std length mismatch");
  s.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  s.std = Eigen::Map<const Vector>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  s.degenerate = j.at("degenerate").get<std::vector<bool>>();
  if (s.degenerate.size() != mean.size()) throw SchemaError("stats flag length mismatch");
  return s;
}

nlohmann::json rows_to_json(const RowMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.row(i).data(), m.row(i).data() + m.cols()));
  }
  return rows;
}

RowMatrix rows_from_json(const nlohmann::json& j, Eigen::Index cols) {
  RowMatrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto row = j.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw SchemaError("row " + std::to_string(i) + " has " + std::to_string(row.size()) +
                        " entries, expected " + std::to_string(cols));
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

void save_dataset_json(const ResidualDataset& ds, const std::filesystem::path& path) {
  nlohmann::json j;
  j["schema_version"] = kDatasetSchemaVersion;
  j["horizon"] = ds.horizon;
  j["source"] = {{"log_rows", ds.source.log_rows}, {"dt", ds.source.dt}, {"role", ds.source.role}};
  j["stats"] = {{"input", stats_to_json(ds.input_stats)},
                {"target", stats_to_json(ds.target_stats)}};
  j["anchors"] = ds.anchors;
  j["raw_inputs"] = rows_to_json(ds.raw_inputs);
  j["raw_targets"] = rows_to_json(ds.raw_targets);
  write_text_file(path, j.dump(1) + "\n");
}

ResidualDataset load_dataset_json(const std::filesystem::path& path) {
  const nlohmann::json j = read_json_file(path);
  try {
    if (j.at("schema_version").get<int>() != kDatasetSchemaVersion) {
      throw VersionMismatch("dataset schema_version " + j.at("schema_version").dump() +
                            " is not supported");
    }
    ResidualDataset ds;
    ds.horizon = j.at("horizon").get<int>();
    const auto& src = j.at("source");
    ds.source = {src.at("log_rows").get<std::size_t>(), src.at("dt").get<double>(),
                 src.at("role").get<std::string>()};
    ds.anchors = j.at("anchors").get<std::vector<std::size_t>>();
    ds.raw_inputs = rows_from_json(j.at("raw_inputs"), kInputDim);
    ds.raw_targets = rows_from_json(j.at("raw_targets"), kTargetDim);
    if (ds.raw_targets.rows() != ds.raw_inputs.rows() ||
        ds.anchors.size() != ds.size()) {
      throw SchemaError("dataset row arrays disagree in length");
    }
    ds.apply_stats(stats_from_json(j.at("stats").at("input")),
                   stats_from_json(j.at("stats").at("target")));
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("dataset " + path.string() + ": " + e.what());
  }
}

}  // namespace dkmgp
