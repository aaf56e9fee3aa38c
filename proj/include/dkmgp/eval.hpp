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

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dkmgp/dataset.hpp"
#include "dkmgp/predictor.hpp"

namespace dkmgp {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

double mae(std::span<const double> pred, std::span<const double> truth);
double rmse(std::span<const double> pred, std::span<const double> truth);

/// Distance from each predicted point to the nearest segment of the truth polyline.
std::vector<double> cross_track_error(std::span<const Point2> pred, std::span<const Point2> truth);

struct SectionalCte {
  std::vector<double> means;
  std::vector<std::size_t> counts;
  bool last_partial = false;
};

/// Sample i sits at time i * dt.
SectionalCte sectional_cte(std::span<const double> cte, double dt, double section_seconds = 2.0);
/// Samples at arbitrary non-negative times; empty sections are dropped.
SectionalCte sectional_cte_at(std::span<const double> times, std::span<const double> cte,
                              double section_seconds = 2.0);

struct NamedTraces {
  std::string model;
  std::string policy;
  std::vector<PredictionTrace> traces;
};

struct MetricReport {
  std::string model;
  std::string policy;
  int horizon = 0;
  std::size_t rollouts = 0;
  std::size_t points = 0;
  std::array<double, 3> mae{};   // vx, vy, omega
  std::array<double, 3> rmse{};
  std::vector<double> cte;       // every predicted row, trace order
  double cte_mean = 0.0;
  SectionalCte scte;
};

/// Predicted rows (index >= 1) of every trace are scored against the log.
/// All entries must cover the same anchors with the same horizon.
std::vector<MetricReport> compare_models(const TrajectoryLog& truth,
                                         std::span<const NamedTraces> models,
                                         double section_seconds = 2.0);

std::string report_table(std::span<const MetricReport> reports);
void write_report_csv(std::span<const MetricReport> reports, const std::filesystem::path& path);
void write_report_json(std::span<const MetricReport> reports, double dt,
                       const std::filesystem::path& path);

}  // namespace dkmgp
