// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "attnreg/error.hpp"
#include "attnreg/objective.hpp"

namespace attnreg {

std::size_t RunRecord::slot(int layer) const {
  const auto it = std::find(layer_ids.begin(), layer_ids.end(), layer);
  require(it != layer_ids.end(), "RunRecord: no layer " + std::to_string(layer));
  return static_cast<std::size_t>(it - layer_ids.begin());
}

std::vector<std::vector<double>> head_max_stats(const RunRecord& record, int layer, int step) {
  require(step >= 0 && step < record.steps, "head_max_stats: step " + std::to_string(step) +
                                                 " not in record");
  const std::size_t s = record.slot(layer);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(record.tokens));
  for (int t = 0; t < record.tokens; ++t) {
    for (int h = 0; h < record.heads; ++h) {
      out[static_cast<std::size_t>(t)].push_back(record.stat_max[record.stat_index(step, s, h, t)]);
    }
  }
  return out;
}

namespace {

double head_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<std::vector<double>> head_max_map(const AttentionMap& map) {
  const std::size_t H = map.heads();
  const std::size_t N = map.tokens();
  std::vector<std::vector<double>> out(N, std::vector<double>(H, 0.0));
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t i = 0; i < map.cells(); ++i) {
      for (std::size_t t = 0; t < N; ++t) out[t][h] = std::max(out[t][h], map.values(h, i, t));
    }
  }
  return out;
}

double dominance_index(const std::vector<std::vector<double>>& stats,
                       std::span<const std::size_t> targets) {
  require(targets.size() >= 2, "dominance_index: needs at least two targets");
  double mx = 0.0;
  double sum = 0.0;
  for (std::size_t t : targets) {
    require(t < stats.size(), "dominance_index: target out of range");
    const double m = head_mean(stats[t]);
    mx = std::max(mx, m);
    sum += m;
  }
  const double mean = sum / static_cast<double>(targets.size());
  require(mean > 0.0, "dominance_index: all target peaks are zero");
  // max >= mean in exact arithmetic; clamp the rounding case.
  return std::max(1.0, mx / mean);
}

namespace {

std::vector<double> mean_target_quantiles(std::span<const AttentionMap> maps,
                                          std::span<const std::size_t> targets, double q) {
  require(!maps.empty(), "coverage: no attention maps");
  require(!targets.empty(), "coverage: empty target set");
  std::vector<double> acc(targets.size(), 0.0);
  for (const AttentionMap& a : maps) {
    const Matrix avg = head_average(a);
    std::vector<double> column(avg.rows);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      require(targets[k] < avg.cols, "coverage: target out of range");
      for (std::size_t i = 0; i < avg.rows; ++i) column[i] = avg(i, targets[k]);
      acc[k] += quantile(column, q).value;
    }
  }
  for (double& v : acc) v /= static_cast<double>(maps.size());
  return acc;
}

}  // namespace

double target_coverage(std::span<const AttentionMap> maps, std::span<const std::size_t> targets,
                       double threshold, double q) {
  require(threshold > 0.0 && threshold < 1.0, "target_coverage: threshold must lie in (0,1)");
  const auto qs = mean_target_quantiles(maps, targets, q);
  const auto hit = std::count_if(qs.begin(), qs.end(), [&](double v) { return v >= threshold; });
  return static_cast<double>(hit) / static_cast<double>(qs.size());
}

double min_target_quantile(std::span<const AttentionMap> maps, std::span<const std::size_t> targets,
                           double q) {
  const auto qs = mean_target_quantiles(maps, targets, q);
  return *std::min_element(qs.begin(), qs.end());
}

double overhead(double t_reg, double t_base) {
  require(t_base > 0.0, "overhead: baseline time must be > 0");
  return (t_reg - t_base) / t_base;
}

double latent_distance(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "latent_distance: size mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(acc);
}

MockBackend::MockBackend(std::map<std::string, std::vector<Detection>> fixture,
                         std::vector<std::string> failing)
    : fixture_(std::move(fixture)), failing_(std::move(failing)) {}

MockBackend MockBackend::from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  std::map<std::string, std::vector<Detection>> fixture;
  for (const auto& [label, dets] : j.at("detections").items()) {
    auto& list = fixture[label];
    for (const auto& d : dets) {
      const auto& b = d.at("box");
      list.push_back({{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                       b.at(3).get<double>()},
                      d.at("similarity").get<double>()});
    }
  }
  std::vector<std::string> failing;
  if (j.contains("failing")) failing = j.at("failing").get<std::vector<std::string>>();
  return MockBackend(std::move(fixture), std::move(failing));
}

MockBackend MockBackend::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BackendError("mock backend: cannot open fixture " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::vector<Detection> MockBackend::locate(const Matrix& /*image*/, const std::string& label) const {
  if (std::find(failing_.begin(), failing_.end(), label) != failing_.end()) {
    throw BackendError("mock backend: scripted failure for '" + label + "'");
  }
  const auto it = fixture_.find(label);
  return it == fixture_.end() ? std::vector<Detection>{} : it->second;
}

double object_score(const Matrix& image, const std::string& label, const ScoreBackend& backend) {
  const std::vector<Detection> dets = backend.locate(image, label);
  double best = 0.0;
  for (const Detection& d : dets) {
    if (!(d.similarity >= 0.0 && d.similarity <= 1.0)) {
      throw BackendError("backend returned similarity outside [0,1] for '" + label + "'");
    }
    best = std::max(best, d.similarity);
  }
  return best;
}

double composite_score(const Matrix& image, std::span<const std::string> objects,
                       const ScoreBackend& backend) {
  require(!objects.empty(), "composite_score: no objects");
  double score = 1.0;
  for (const auto& o : objects) score = std::min(score, object_score(image, o, backend));
  return score;
}

}  // namespace attnreg
