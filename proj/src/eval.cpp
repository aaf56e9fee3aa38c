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

#include "dkmgp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dkmgp/errors.hpp"
#include "dkmgp/io_util.hpp"

namespace dkmgp {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw LengthMismatch(std::string(what) + ": lengths " + std::to_string(a) + " and " +
                         std::to_string(b) + " differ");
  }
  if (a == 0) throw LengthMismatch(std::string(what) + ": empty series");
}

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len_sq = dx * dx + dy * dy;
  double u = 0.0;
  if (len_sq > 0.0) u = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq, 0.0, 1.0);
  return std::hypot(p.x - (a.x + u * dx), p.y - (a.y + u * dy));
}

constexpr std::array<const char*, 3> kTargets{"vx", "vy", "omega"};

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred.size(), truth.size(), "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred.size(), truth.size(), "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

std::vector<double> cross_track_error(std::span<const Point2> pred, std::span<const Point2> truth) {
  if (truth.size() < 2) throw LengthMismatch("cross_track_error: truth needs at least 2 points");
  std::vector<double> out;
  out.reserve(pred.size());
  for (const Point2& p : pred) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < truth.size(); ++i) {
      best = std::min(best, segment_distance(p, truth[i], truth[i + 1]));
    }
    out.push_back(best);
  }
  return out;
}

SectionalCte sectional_cte_at(std::span<const double> times, std::span<const double> cte,
                              double section_seconds) {
  check_lengths(times.size(), cte.size(), "sectional_cte");
  if (!(section_seconds > 0.0)) throw InvalidArgument("section length must be positive");
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < cte.size(); ++i) {
    const auto k = static_cast<std::size_t>(std::floor(times[i] / section_seconds + 1e-9));
    if (k >= sums.size()) {
      sums.resize(k + 1, 0.0);
      counts.resize(k + 1, 0);
    }
    sums[k] += cte[i];
    ++counts[k];
  }
  SectionalCte out;
  const std::size_t full = *std::max_element(counts.begin(), counts.end());
  for (std::size_t k = 0; k < sums.size(); ++k) {
    if (counts[k] == 0) continue;
    out.means.push_back(sums[k] / static_cast<double>(counts[k]));
    out.counts.push_back(counts[k]);
  }
  out.last_partial = out.counts.size() > 1 && out.counts.back() < full;
  return out;
}

SectionalCte sectional_cte(std::span<const double> cte, double dt, double section_seconds) {
  if (cte.empty()) throw LengthMismatch("sectional_cte: empty series");
  if (!(dt > 0.0)) throw InvalidArgument("sectional_cte: dt must be positive");
  std::vector<double> times(cte.size());
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = static_cast<double>(i) * dt;
  SectionalCte out = sectional_cte_at(times, cte, section_seconds);
  const double duration = static_cast<double>(cte.size()) * dt;
  out.last_partial = std::fmod(duration, section_seconds) > 1e-9 * section_seconds &&
                     section_seconds - std::fmod(duration, section_seconds) > 1e-9 * section_seconds;
  return out;
}

std::vector<MetricReport> compare_models(const TrajectoryLog& truth,
                                         std::span<const NamedTraces> models,
                                         double section_seconds) {
  std::vector<MetricReport> reports;
  for (const NamedTraces& named : models) {
    if (!reports.empty()) {
      const NamedTraces& first = models.front();
      check_lengths(named.traces.size(), first.traces.size(), "compare_models rollouts");
      for (std::size_t r = 0; r < named.traces.size(); ++r) {
        if (named.traces[r].anchor_index != first.traces[r].anchor_index ||
            named.traces[r].states.size() != first.traces[r].states.size()) {
          throw LengthMismatch("compare_models: model '" + named.model +
                               "' is not aligned with '" + first.model + "'");
        }
      }
    }
    MetricReport rep;
    rep.model = named.model;
    rep.policy = named.policy;
    rep.rollouts = named.traces.size();
    std::array<std::vector<double>, 3> pred;
    std::array<std::vector<double>, 3> real;
    std::vector<double> times;
    for (const PredictionTrace& t : named.traces) {
      const std::size_t m = t.states.size() - 1;
      if (t.anchor_index + m >= truth.size()) {
        throw LengthMismatch("compare_models: rollout at " + std::to_string(t.anchor_index) +
                             " runs past the end of the log");
      }
      rep.horizon = static_cast<int>(m);
      std::vector<Point2> path;
      std::vector<Point2> truth_path;
      for (std::size_t k = 0; k <= m; ++k) {
        const VehicleState& s = truth.samples[t.anchor_index + k].state;
        truth_path.push_back({s.x, s.y});
        if (k == 0) continue;
        const VehicleState& p = t.states[k];
        path.push_back({p.x, p.y});
        pred[0].push_back(p.vx);
        pred[1].push_back(p.vy);
        pred[2].push_back(p.omega);
        real[0].push_back(s.vx);
        real[1].push_back(s.vy);
        real[2].push_back(s.omega);
        times.push_back(truth.samples[t.anchor_index + k].t - truth.samples.front().t);
      }
      const std::vector<double> cte = cross_track_error(path, truth_path);
      rep.cte.insert(rep.cte.end(), cte.begin(), cte.end());
    }
    rep.points = rep.cte.size();
    if (rep.points == 0) throw LengthMismatch("compare_models: model '" + named.model + "' has no rollouts");
    for (std::size_t j = 0; j < 3; ++j) {
      rep.mae[j] = mae(pred[j], real[j]);
      rep.rmse[j] = rmse(pred[j], real[j]);
    }
    rep.cte_mean = std::accumulate(rep.cte.begin(), rep.cte.end(), 0.0) /
                   static_cast<double>(rep.points);
    rep.scte = sectional_cte_at(times, rep.cte, section_seconds);
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::string report_table(std::span<const MetricReport> reports) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s %-9s %10s %10s %10s %10s %10s %10s %10s\n", "model",
                "policy", "mae_vx", "mae_vy", "mae_omega", "rmse_vx", "rmse_vy", "rmse_omega",
                "cte_mean");
  out << buf;
  for (const MetricReport& r : reports) {
    std::snprintf(buf, sizeof(buf), "%-16s %-9s %10.5f %10.5f %10.5f %10.5f %10.5f %10.5f %10.5f\n",
                  r.model.c_str(), r.policy.c_str(), r.mae[0], r.mae[1], r.mae[2], r.rmse[0],
                  r.rmse[1], r.rmse[2], r.cte_mean);
    out << buf;
  }
  return out.str();
}

void write_report_csv(std::span<const MetricReport> reports, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "model,metric,target,value\n";
  for (const MetricReport& r : reports) {
    for (std::size_t j = 0; j < 3; ++j) {
      out << r.model << ",mae," << kTargets[j] << ',' << format_double(r.mae[j]) << '\n';
    }
    for (std::size_t j = 0; j < 3; ++j) {
      out << r.model << ",rmse," << kTargets[j] << ',' << format_double(r.rmse[j]) << '\n';
    }
    out << r.model << ",cte_mean,xy," << format_double(r.cte_mean) << '\n';
    for (std::size_t k = 0; k < r.scte.means.size(); ++k) {
      out << r.model << ",scte,section_" << k << ',' << format_double(r.scte.means[k]) << '\n';
    }
  }
  write_text_file(path, out.str());
}

void write_report_json(std::span<const MetricReport> reports, double dt,
                       const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["format"] = "dkmgp-report";
  doc["schema_version"] = 1;
  doc["dt"] = dt;
  doc["models"] = nlohmann::ordered_json::array();
  for (const MetricReport& r : reports) {
    nlohmann::ordered_json m;
    m["model"] = r.model;
    m["policy"] = r.policy;
    m["horizon"] = r.horizon;
    m["rollouts"] = r.rollouts;
    m["points"] = r.points;
    for (std::size_t j = 0; j < 3; ++j) {
      m["mae"][kTargets[j]] = r.mae[j];
      m["rmse"][kTargets[j]] = r.rmse[j];
    }
    m["cte_mean"] = r.cte_mean;
    m["scte"] = r.scte.means;
    m["scte_counts"] = r.scte.counts;
    m["scte_last_partial"] = r.scte.last_partial;
    doc["models"].push_back(std::move(m));
  }
  write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace dkmgp
