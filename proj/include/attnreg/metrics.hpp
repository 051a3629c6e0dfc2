// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "attnreg/attention.hpp"
#include "attnreg/run_record.hpp"
#include "attnreg/tensor.hpp"

namespace attnreg {

/// For each token, the per-head maxima at (layer, step): result[token][head].
std::vector<std::vector<double>> head_max_stats(const RunRecord& record, int layer, int step);

/// Same layout as head_max_stats, read directly from one map.
std::vector<std::vector<double>> head_max_map(const AttentionMap& map);

/// (max over targets of head-mean peak) / (mean over targets of head-mean peak).
double dominance_index(const std::vector<std::vector<double>>& stats,
                       std::span<const std::size_t> targets);

/// Fraction of targets whose head-averaged q-quantile, averaged over the
/// supplied layer maps, reaches `threshold`.
double target_coverage(std::span<const AttentionMap> maps, std::span<const std::size_t> targets,
                       double threshold, double q = 0.9);

/// Smallest over targets of the head-averaged q-quantile (averaged over maps).
double min_target_quantile(std::span<const AttentionMap> maps, std::span<const std::size_t> targets,
                           double q = 0.9);

/// (t_reg - t_base) / t_base.
double overhead(double t_reg, double t_base);

/// L2 distance between two latents of equal size.
double latent_distance(std::span<const double> a, std::span<const double> b);

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

struct Detection {
  Box box;
  double similarity = 0.0;
};

/// Locates an object label in an image and scores each region.
class ScoreBackend {
 public:
  virtual ~ScoreBackend() = default;
  virtual std::string capability() const = 0;
  /// Throws BackendError on failure; an empty result means "not found".
  virtual std::vector<Detection> locate(const Matrix& image, const std::string& label) const = 0;
};

/// Fixture-driven backend: detections per label are fixed in advance and the
/// image is ignored. Labels listed as failing raise BackendError.
class MockBackend : public ScoreBackend {
 public:
  MockBackend() = default;
  MockBackend(std::map<std::string, std::vector<Detection>> fixture,
              std::vector<std::string> failing = {});

  /// Reads {"detections": {label: [{"box":[x0,y0,x1,y1],"similarity":s}, ...]},
  ///        "failing": [label, ...]}.
  static MockBackend from_json_file(const std::string& path);
  static MockBackend from_json_text(const std::string& text);

  std::string capability() const override { return "mock:fixture"; }
  std::vector<Detection> locate(const Matrix& image, const std::string& label) const override;

 private:
  std::map<std::string, std::vector<Detection>> fixture_;
  std::vector<std::string> failing_;
};

/// psi(I, O): best similarity over detected boxes, 0 when none.
double object_score(const Matrix& image, const std::string& label, const ScoreBackend& backend);

/// min over objects of psi(I, O).
double composite_score(const Matrix& image, std::span<const std::string> objects,
                       const ScoreBackend& backend);

}  // namespace attnreg
