// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include <optional>
#include <string>
#include <vector>

#include "doctest.h"

#include "attnreg/error.hpp"
#include "attnreg/metrics.hpp"
#include "attnreg/regulators.hpp"
#include "attnreg/suites.hpp"
#include "attnreg/toy_diffusion.hpp"
#include "oracles/goldens.hpp"

using namespace attnreg;

namespace {

SamplerConfig short_sampler() {
  SamplerConfig s;
  s.steps = 10;
  return s;
}

}  // namespace

TEST_CASE("noise schedule matches the reference values") {
  const ToyModel model(ToyModelConfig{});
  const Simulator sim(model, SamplerConfig{});
  const auto& ab = sim.alphas_cumprod();
  REQUIRE(ab.size() == 1000);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(ab[static_cast<std::size_t>(goldens::kAlphaBarIndex[k])] ==
          doctest::Approx(goldens::kAlphaBarExpected[k]).epsilon(1e-13));
  }
  CHECK(sim.timesteps().front() == 980);
  CHECK(sim.timesteps().back() == 0);
  CHECK(sim.timesteps().size() == 50);
}

TEST_CASE("sampler config validation") {
  SamplerConfig s;
  s.steps = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = {};
  s.train_steps = 10;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = {};
  s.beta_end = s.beta_start;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = {};
  s.cfg_scale = -1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("prompt encoding pads with BOS, EOS and PAD") {
  const ToyModel model(ToyModelConfig{});
  const std::vector<std::string> words = {"cat", "dog"};
  const std::vector<int> ids = model.encode(words);
  REQUIRE(ids.size() == 16);
  CHECK(ids[0] == kBosId);
  CHECK(ids[1] == model.token_id("cat"));
  CHECK(ids[3] == kEosId);
  CHECK(ids[15] == kPadId);
  CHECK(model.token_id("cat") >= 3);
  CHECK(model.token_id("cat") == ToyModel(ToyModelConfig{}).token_id("cat"));
  const std::vector<std::string> too_long(15, "x");
  CHECK_THROWS_AS(model.encode(too_long), std::invalid_argument);
  const PromptInfo info = prompt_info(ids);
  CHECK(info.eos_index == 3);
  CHECK(info.pad_index == 4);
}

TEST_CASE("model config validation") {
  ToyModelConfig c;
  c.sides = {16, 8};
  CHECK_THROWS_AS(ToyModel{c}, std::invalid_argument);
  c = {};
  c.sides = {16, 5, 16};
  CHECK_THROWS_AS(ToyModel{c}, std::invalid_argument);
  c = {};
  c.dominance_bias = {{99, 1.0}};
  CHECK_THROWS_AS(ToyModel{c}, std::invalid_argument);
}

TEST_CASE("generation is deterministic in the seed") {
  const ToyModel model(ToyModelConfig{});
  const std::vector<std::string> words = {"cat", "dog"};
  const auto ids = model.encode(words);
  const RunRecord a = run_generation(model, ids, short_sampler(), std::nullopt, 5);
  const RunRecord b = run_generation(model, ids, short_sampler(), std::nullopt, 5);
  const RunRecord c = run_generation(model, ids, short_sampler(), std::nullopt, 6);
  CHECK(a.latents == b.latents);
  CHECK(a.stat_max == b.stat_max);
  CHECK(a.latents != c.latents);
  CHECK(a.latents.size() == 10);
  CHECK(a.layer_ids.size() == 7);
  CHECK(a.latents.front().size() == 8 * 16 * 16);
}

TEST_CASE("recorded statistics describe row-stochastic maps") {
  const ToyModel model(ToyModelConfig{});
  const std::vector<std::string> words = {"kite", "tree"};
  const auto ids = model.encode(words);
  RunOptions opt;
  opt.keep_debug_maps = true;
  const RunRecord r = run_generation(model, ids, short_sampler(), std::nullopt, 1, opt);
  REQUIRE(r.debug_maps.size() == 10);
  for (const auto& [layer, map] : r.debug_maps[3]) {
    CHECK(map.is_row_stochastic(1e-12));
    const auto hm = head_max_map(map);
    CHECK(hm[2][1] == r.max_at(3, layer, 1, 2));
  }
  for (const auto& [layer, map] : probe_attention(model, ids, r.final_latent())) {
    CHECK(map.is_row_stochastic(1e-12));
  }
  const Matrix img = decode_latent(model, r.final_latent());
  for (double v : img.data) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("hooks that break the contract are caught") {
  const ToyModel model(ToyModelConfig{});
  const std::vector<std::string> words = {"cat"};
  const auto ids = model.encode(words);
  {
    Simulator sim(model, short_sampler());
    sim.register_hook(2, [](int, int, const LogitBlock& z) {
      AttentionMap a = compute_attention(z);
      a.values.data[0] += 0.5;
      return a;
    });
    CHECK_THROWS_AS(sim.run(ids, 1), ContractViolation);
  }
  {
    Simulator sim(model, short_sampler());
    sim.register_hook(2, [](int, int, const LogitBlock&) { return AttentionMap{}; });
    CHECK_THROWS_AS(sim.run(ids, 1), ContractViolation);
  }
  Simulator sim(model, short_sampler());
  CHECK_THROWS_AS(sim.register_hook(9, [](int, int, const LogitBlock& z) {
    return compute_attention(z);
  }), std::invalid_argument);
  sim.register_hook(2, [](int, int, const LogitBlock& z) { return compute_attention(z); });
  CHECK_THROWS_AS(sim.register_hook(2, [](int, int, const LogitBlock& z) {
    return compute_attention(z);
  }), std::invalid_argument);
}

TEST_CASE("identity hook reproduces the plain run") {
  const ToyModel model(ToyModelConfig{});
  const std::vector<std::string> words = {"cat", "dog"};
  const auto ids = model.encode(words);
  Simulator sim(model, short_sampler());
  sim.register_hook(4, [](int, int, const LogitBlock& z) { return compute_attention(z); });
  const RunRecord hooked = sim.run(ids, 3);
  const RunRecord plain = run_generation(model, ids, short_sampler(), std::nullopt, 3);
  CHECK(hooked.latents == plain.latents);
}

TEST_CASE("edited layers follow the regulation config") {
  const ToyModel model(ToyModelConfig{});
  RegulationConfig c;
  CHECK(edited_layers(model, c) == std::vector<int>{2, 4});
  c.layer_count = 0;
  CHECK(edited_layers(model, c).empty());
  c.edit_layers = {6, 0};
  CHECK(edited_layers(model, c) == std::vector<int>{0, 6});
  c.edit_layers = {2, 2};
  CHECK_THROWS_AS(edited_layers(model, c), std::invalid_argument);
  c.edit_layers = {8};
  CHECK_THROWS_AS(edited_layers(model, c), std::invalid_argument);
}

TEST_CASE("regulation rejects PAD targets") {
  const ToyModel model(ToyModelConfig{});
  const std::vector<std::string> words = {"cat", "dog"};
  const auto ids = model.encode(words);
  RegulationConfig c;
  c.targets = {1, 6};
  CHECK_THROWS_AS(run_generation(model, ids, short_sampler(), c, 1), std::invalid_argument);
  c.targets = {};
  CHECK_THROWS_AS(run_generation(model, ids, short_sampler(), c, 1), std::invalid_argument);
}

TEST_CASE("demo: dominated token recovers under regulation") {
  const SuitePrompt demo = demo_prompt();
  const ToyModel model(demo.model);
  const PairedRun pr = run_pair(demo, SamplerConfig{}, RegulationConfig{});
  const int layer = readout_layer(model);
  const int last = pr.base.steps - 1;

  // Unregulated: the biased word's head-max exceeds every other ordinary token's.
  const auto base = head_max_stats(pr.base, layer, last);
  auto mean = [](const std::vector<double>& v) { return (v[0] + v[1]) / 2.0; };
  for (std::size_t t = 0; t < base.size(); ++t) {
    if (t != demo.dominant && demo.ids[t] > kPadId) CHECK(mean(base[demo.dominant]) > mean(base[t]));
  }
  CHECK(pr.suppressed_regulated > pr.suppressed_base);
  CHECK(pr.dominance_regulated < pr.dominance_base);
}
