// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks, one line per criterion. Exit status is
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "attnreg/edit_param.hpp"
#include "attnreg/legacy_scaler.hpp"
#include "attnreg/metrics.hpp"
#include "attnreg/objective.hpp"
#include "attnreg/optimizer.hpp"
#include "attnreg/rng.hpp"
#include "attnreg/schedule.hpp"
#include "attnreg/suites.hpp"
#include "attnreg/toy_diffusion.hpp"

using namespace attnreg;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- 1 ---------------------------------------------------------------------

Outcome zero_edit_identity() {
  const auto t0 = Clock::now();
  const SuitePrompt demo = demo_prompt();
  const ToyModel model(demo.model);
  RegulationConfig cfg;
  cfg.targets = demo.targets;
  cfg.max_iters = 0;
  const RunRecord base = run_generation(model, demo.ids, SamplerConfig{}, std::nullopt, demo.seed);
  const RunRecord reg = run_generation(model, demo.ids, SamplerConfig{}, cfg, demo.seed);
  const double secs = seconds_since(t0);
  const bool same = base.latents == reg.latents;
  return {same && secs < 5.0,
          fmt("final latents %s, %zu regulator events, %.2fs (limit 5s)",
              same ? "bit-identical" : "DIFFER", reg.events.size(), secs)};
}

// ---- 2 ---------------------------------------------------------------------

Outcome normalization() {
  constexpr int kRuns = 100;
  std::vector<double> worst(kRuns, 0.0);
  std::vector<std::size_t> maps(kRuns, 0);
  const char* paths[] = {"optimize/logit", "optimize/map", "scaling"};
#pragma omp parallel for schedule(dynamic)
  for (int run = 0; run < kRuns; ++run) {
    Rng rng(derive_seed(2024, static_cast<std::uint64_t>(run)));
    ToyModelConfig mc;
    const ToyModel probe(mc);
    const int words = 2 + static_cast<int>(rng.below(3));
    std::vector<std::string> prompt;
    for (int w = 0; w < words; ++w) prompt.push_back("w" + std::to_string(rng.below(1000)));
    mc.dominance_bias = {{probe.token_id(prompt[0]), rng.uniform(0.0, 4.0)}};
    const ToyModel model(mc);
    const auto ids = model.encode(prompt);

    RegulationConfig cfg;
    for (int w = 1; w <= words; ++w) cfg.targets.push_back(static_cast<std::size_t>(w));
    cfg.layer_count = 2 + 2 * static_cast<int>(rng.below(2));
    switch (run % 3) {
      case 0: break;
      case 1: cfg.schedule_space = ScheduleSpace::map; break;
      default:
        cfg.regulator = RegulatorKind::scaling;
        cfg.kappa_eos = rng.uniform(0.0, 1.0);
    }
    RunOptions opt;
    opt.keep_debug_maps = true;
    const RunRecord r = run_generation(model, ids, SamplerConfig{}, cfg, rng.next_u64(), opt);
    for (const auto& step : r.debug_maps) {
      for (const auto& [layer, a] : step) {
        worst[static_cast<std::size_t>(run)] =
            std::max(worst[static_cast<std::size_t>(run)], a.max_row_deviation());
        ++maps[static_cast<std::size_t>(run)];
      }
    }
  }
  double w = 0.0;
  std::size_t n = 0;
  for (int run = 0; run < kRuns; ++run) {
    w = std::max(w, worst[static_cast<std::size_t>(run)]);
    n += maps[static_cast<std::size_t>(run)];
  }
  return {w <= 1e-9, fmt("%d runs over %s, %s, %s; %zu maps, max |row sum - 1| = %.2e (limit 1e-9)",
                         kRuns, paths[0], paths[1], paths[2], n, w)};
}

// ---- 3 ---------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  const GradcheckReport r = run_gradcheck(50, 1, 1e-5);
  const double secs = seconds_since(t0);
  return {r.completed == 50 && r.max_rel_error < 1e-4 && secs < 30.0,
          fmt("%d instances (%d tie-adjacent skipped), max rel error %.2e (limit 1e-4), %.2fs",
              r.completed, r.skipped, r.max_rel_error, secs)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome optimization_efficacy() {
  int monotone = 0;
  int raised = 0;
  for (std::uint64_t seed = 13; seed <= 32; ++seed) {
    const SuppressedInstance inst = suppressed_instance(seed);
    const OptResult r = optimize(inst.logits, inst.config);
    if (r.final_loss <= r.initial_loss) ++monotone;
    auto q90 = [&](const AttentionMap& a) {
      const Matrix avg = head_average(a);
      std::vector<double> col(avg.rows);
      for (std::size_t i = 0; i < avg.rows; ++i) col[i] = avg(i, inst.suppressed);
      return quantile(col, 0.9).value;
    };
    if (q90(r.a_star) > q90(compute_attention(inst.logits))) ++raised;
  }
  return {monotone == 20 && raised >= 19,
          fmt("final <= initial loss on %d/20, suppressed 90th quantile up on %d/20 (need 19)",
              monotone, raised)};
}

// ---- 5 ---------------------------------------------------------------------

Outcome property_one() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(derive_seed(5, seed));
    const std::size_t w = 4 + 4 * rng.below(3);
    const std::size_t n = 2 + rng.below(4);
    const AttentionMap a = compute_attention(random_logits(rng.next_u64(), 1, w, n + 2, 8));
    std::vector<TokenMap2D> tokens;
    for (std::size_t t = 1; t <= n; ++t) tokens.push_back(unravel(a, 0, t));
    const TokenMap2D eos = unravel(a, 0, n + 1);
    const ScalerParams p = make_scaler_params(tokens, eos, 0.0, 1.1, 0.0);
    const double gamma = gamma_for(p.maxima[p.dominant_index], p.i_avg);
    const TokenMap2D scaled = scale_dominant(tokens[p.dominant_index], gamma);
    worst = std::max(worst, std::fabs(map_max(scaled) - p.i_avg));
  }
  return {worst <= 1e-12, fmt("1000 maps, max |max(A(1-gamma)) - I_avg| = %.2e (limit 1e-12)", worst)};
}

// ---- 6 ---------------------------------------------------------------------

Outcome property_two() {
  const auto t0 = Clock::now();
  std::size_t violations = 0;
  std::string per;
  for (double kappa : {0.0, 0.5, 1.0}) {
    const BoundTrialReport r = run_bound_trials(10000, 6, 1.1, kappa);
    violations += r.violations;
    per += fmt(" kappa=%.1f:%zu", kappa, r.violations);
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 60.0,
          fmt("10000 trials per kappa, violations%s, %.2fs (limit 60s)", per.c_str(), secs)};
}

// ---- 7 ---------------------------------------------------------------------

Outcome schedule_cutoff() {
  constexpr int kT = 25;
  int cutoff_ok = 0;
  int monotone_ok = 0;
  constexpr int kCases = 40;
  for (int c = 0; c < kCases; ++c) {
    const LogitBlock z = random_logits(derive_seed(7, static_cast<std::uint64_t>(c)), 2, 8, 5, 8, 1);
    const AttentionMap orig = compute_attention(z);
    RegulationConfig cfg;
    cfg.targets = {1, 2};
    const OptResult opt = optimize(z, cfg);
    ScheduleState st;
    ema_update(st, 1, opt.a_star, cfg.kappa_ema);
    ema_update_edit(st, 1, opt.s_full, cfg.kappa_ema);

    auto dist = [&](const AttentionMap& a) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.values.data.size(); ++k) {
        const double d = a.values.data[k] - orig.values.data[k];
        s += d * d;
      }
      return std::sqrt(s);
    };
    bool cut = true;
    bool mono = true;
    double prev_l = INFINITY, prev_m = INFINITY;
    for (int t = 0; t < 50; ++t) {
      const AttentionMap al = apply_edit_schedule(z, orig, st, 1, cfg.lambda, t, kT);
      const AttentionMap am = apply_schedule(orig, st, 1, cfg.lambda, t, kT);
      if (t >= kT) cut = cut && al.values == orig.values && am.values == orig.values;
      const double dl = dist(al), dm = dist(am);
      mono = mono && dl <= prev_l && dm <= prev_m;
      prev_l = dl;
      prev_m = dm;
    }
    cutoff_ok += cut;
    monotone_ok += mono;
  }
  return {cutoff_ok == kCases && monotone_ok == kCases,
          fmt("exact identity for t >= 25 on %d/%d, edit distance non-increasing on %d/%d "
              "(logit and map schedules)",
              cutoff_ok, kCases, monotone_ok, kCases)};
}

// ---- 8 and 9 share the suite ------------------------------------------------

Outcome dominance_mitigation(const std::vector<SuitePrompt>& suite) {
  int reduced = 0;
  int raised = 0;
  std::vector<PairedRun> runs(suite.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < suite.size(); ++k) runs[k] = run_pair(suite[k], SamplerConfig{}, RegulationConfig{});
  double db = 0.0, dr = 0.0;
  for (const PairedRun& r : runs) {
    reduced += r.dominance_regulated < r.dominance_base;
    raised += r.suppressed_regulated > r.suppressed_base;
    db += r.dominance_base / static_cast<double>(runs.size());
    dr += r.dominance_regulated / static_cast<double>(runs.size());
  }
  const int n = static_cast<int>(suite.size());
  return {reduced == n && raised >= 9,
          fmt("%d prompts: dominance index lower on %d/%d (mean %.3f -> %.3f), suppressed "
              "head-max up on %d/%d (need 9)",
              n, reduced, n, db, dr, raised, n)};
}

Outcome ablation_saturation(const std::vector<SuitePrompt>& suite) {
  const auto steps = run_sweep(SweepKind::steps, {25, 50}, suite, SamplerConfig{}, RegulationConfig{});
  const auto layers = run_sweep(SweepKind::layers, {2, 4}, suite, SamplerConfig{}, RegulationConfig{});
  const double ds = std::fabs(steps[0].proxy - steps[1].proxy) / steps[1].proxy;
  const double dl = std::fabs(layers[0].proxy - layers[1].proxy) / layers[1].proxy;
  return {ds <= 0.02 && dl <= 0.05,
          fmt("proxy t_thres 25 vs 50: %.5f vs %.5f (%.2f%%, limit 2%%); k 2 vs 4: %.5f vs %.5f "
              "(%.2f%%, limit 5%%)",
              steps[0].proxy, steps[1].proxy, 100.0 * ds, layers[0].proxy, layers[1].proxy,
              100.0 * dl)};
}

// ---- 10 --------------------------------------------------------------------

Outcome overhead_ratio() {
  const SuitePrompt demo = demo_prompt();
  const ToyModel model(demo.model);
  RegulationConfig cfg;
  cfg.targets = demo.targets;
  // Median of interleaved repeats to damp scheduler noise.
  std::vector<double> tb, tr;
  for (int rep = 0; rep < 7; ++rep) {
    tb.push_back(run_generation(model, demo.ids, SamplerConfig{}, std::nullopt, demo.seed)
                     .timing.total_seconds);
    tr.push_back(run_generation(model, demo.ids, SamplerConfig{}, cfg, demo.seed).timing.total_seconds);
  }
  std::sort(tb.begin(), tb.end());
  std::sort(tr.begin(), tr.end());
  const double ratio = tr[3] / tb[3];
  return {ratio <= 2.0,
          fmt("default regulated %.3fs vs unregulated %.3fs (median of 7), ratio %.2f (limit 2.0)",
              tr[3], tb[3], ratio)};
}

// ---- 11 --------------------------------------------------------------------

Outcome composition() {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(ATTNREG_FIXTURE_DIR)) {
    if (e.path().filename().string().rfind("mock_", 0) == 0) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  int ok = 0;
  bool saw_empty = false;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto j = nlohmann::json::parse(buf.str());
    const auto objects = j.at("objects").get<std::vector<std::string>>();
    const MockBackend backend = MockBackend::from_json_text(buf.str());

    // Hand composition: min over objects of the best box similarity, 0 when no box.
    double expected = 1.0;
    for (const auto& o : objects) {
      double best = 0.0;
      const auto& dets = j.at("detections");
      if (dets.contains(o)) {
        if (dets.at(o).empty()) saw_empty = true;
        for (const auto& d : dets.at(o)) best = std::max(best, d.at("similarity").get<double>());
      } else {
        saw_empty = true;
      }
      expected = std::min(expected, best);
    }
    const double got = composite_score(Matrix(16, 16), objects, backend);
    ok += got == expected && got == j.at("expected").get<double>();
  }
  const int n = static_cast<int>(files.size());
  return {n == 5 && ok == n && saw_empty,
          fmt("%d/%d fixtures equal the hand-computed min-of-max%s", ok, n,
              saw_empty ? ", empty detection case included" : ", NO empty case")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("criterion %2d  %-26s %s  %s [%.1fs]\n", id, name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "zero-edit identity", zero_edit_identity);
  report(2, "normalization", normalization);
  report(3, "gradient fidelity", gradient_fidelity);
  report(4, "optimization efficacy", optimization_efficacy);
  report(5, "scaled peak exactness", property_one);
  report(6, "peak bound", property_two);
  report(7, "schedule cutoff", schedule_cutoff);

  std::vector<SuitePrompt> suite;
  std::string suite_error;
  try {
    suite = dominance_suite();
  } catch (const std::exception& e) {
    suite_error = e.what();
  }
  auto with_suite = [&](Outcome (*f)(const std::vector<SuitePrompt>&)) {
    return [&, f]() -> Outcome {
      if (suite.empty()) return {false, "no suite: " + suite_error};
      return f(suite);
    };
  };
  report(8, "dominance mitigation", with_suite(dominance_mitigation));
  report(9, "ablation saturation", with_suite(ablation_saturation));
  report(10, "overhead", overhead_ratio);
  report(11, "score composition", composition);

  std::printf("%d/11 criteria passed\n", 11 - failures);
  return failures == 0 ? 0 : 1;
}
