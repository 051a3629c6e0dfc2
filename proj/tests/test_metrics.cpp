// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "doctest.h"

#include "attnreg/error.hpp"
#include "attnreg/metrics.hpp"
#include "attnreg/suites.hpp"

using namespace attnreg;

TEST_CASE("dominance index is at least one and one for equal peaks") {
  const std::vector<std::size_t> targets = {0, 1};
  CHECK(dominance_index({{0.4, 0.4}, {0.4, 0.4}}, targets) == 1.0);
  CHECK(dominance_index({{0.9, 0.7}, {0.1, 0.3}}, targets) == doctest::Approx(1.6));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const AttentionMap a = compute_attention(random_logits(seed, 2, 4, 5, 4));
    const std::vector<std::size_t> t3 = {1, 2, 3};
    CHECK(dominance_index(head_max_map(a), t3) >= 1.0);
  }
  const std::vector<std::size_t> one = {0};
  CHECK_THROWS_AS(dominance_index({{0.4}}, one), std::invalid_argument);
  CHECK_THROWS_AS(dominance_index({{0.0}, {0.0}}, targets), std::invalid_argument);
}

TEST_CASE("coverage and quantile proxy") {
  // One head, M=4, N=2; column 1 holds the quantile values.
  Tensor3 v(1, 4, 2);
  const double col1[] = {0.9, 0.2, 0.6, 0.1};
  for (std::size_t i = 0; i < 4; ++i) {
    v(0, i, 1) = col1[i];
    v(0, i, 0) = 1.0 - col1[i];
  }
  const std::vector<AttentionMap> maps = {AttentionMap{v, 1, 0, 2}};
  const std::vector<std::size_t> targets = {0, 1};
  // floor(0.9 * 3) = 2: column 0 sorted {0.1,0.4,0.8,0.9} -> 0.8; column 1 -> 0.6.
  CHECK(min_target_quantile(maps, targets) == doctest::Approx(0.6));
  CHECK(target_coverage(maps, targets, 0.7) == 0.5);
  CHECK(target_coverage(maps, targets, 0.5) == 1.0);
  CHECK_THROWS_AS(target_coverage(maps, targets, 1.0), std::invalid_argument);
  const std::vector<AttentionMap> none;
  CHECK_THROWS_AS(min_target_quantile(none, targets), std::invalid_argument);
}

TEST_CASE("overhead and latent distance") {
  CHECK(overhead(1.5, 1.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(overhead(1.0, 0.0), std::invalid_argument);
  const std::vector<double> a = {0.0, 3.0}, b = {4.0, 0.0};
  CHECK(latent_distance(a, b) == 5.0);
  const std::vector<double> c = {1.0};
  CHECK_THROWS_AS(latent_distance(a, c), std::invalid_argument);
}

TEST_CASE("composite score is min over objects of max over boxes") {
  const MockBackend backend = MockBackend::from_json_text(R"({
    "detections": {
      "cat": [{"box": [0, 0, 1, 1], "similarity": 0.3}, {"box": [0, 0, 2, 2], "similarity": 0.7}],
      "dog": [{"box": [1, 1, 2, 2], "similarity": 0.5}],
      "fox": []
    },
    "failing": ["owl"]
  })");
  const Matrix img(4, 4);
  CHECK(backend.capability() == "mock:fixture");
  CHECK(object_score(img, "cat", backend) == 0.7);
  CHECK(object_score(img, "fox", backend) == 0.0);
  CHECK(object_score(img, "emu", backend) == 0.0);
  const std::vector<std::string> cd = {"cat", "dog"};
  CHECK(composite_score(img, cd, backend) == 0.5);
  const std::vector<std::string> cf = {"cat", "fox"};
  CHECK(composite_score(img, cf, backend) == 0.0);
  const std::vector<std::string> owl = {"cat", "owl"};
  CHECK_THROWS_AS(composite_score(img, owl, backend), BackendError);
  const std::vector<std::string> empty;
  CHECK_THROWS_AS(composite_score(img, empty, backend), std::invalid_argument);
}

TEST_CASE("backend similarities outside [0,1] are errors") {
  const MockBackend bad = MockBackend::from_json_text(
      R"({"detections": {"cat": [{"box": [0, 0, 1, 1], "similarity": 1.5}]}})");
  CHECK_THROWS_AS(object_score(Matrix(2, 2), "cat", bad), BackendError);
  CHECK_THROWS_AS(MockBackend::from_json_file("/nonexistent/fixture.json"), BackendError);
}
