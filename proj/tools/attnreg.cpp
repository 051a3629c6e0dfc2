// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

// attnreg: generate, ablate, gradcheck, bounds, config.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "attnreg/config_io.hpp"
#include "attnreg/legacy_scaler.hpp"
#include "attnreg/record_io.hpp"
#include "attnreg/suites.hpp"
#include "attnreg/toy_diffusion.hpp"

namespace fs = std::filesystem;
using namespace attnreg;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

CliConfig load(const CommonOpts& o) {
  CliConfig c = o.config_path.empty() ? CliConfig{} : load_config(o.config_path);
  apply_env_overrides(c);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  return c;
}

struct GenerateOpts {
  std::vector<std::string> prompt;
  std::optional<std::string> regulator;
  std::optional<double> kappa_eos;
  std::optional<int> max_iters;
  bool no_baseline = false;
};

int cmd_generate(const CommonOpts& common, const GenerateOpts& g) {
  CliConfig c = load(common);
  if (!g.prompt.empty()) c.prompt = g.prompt;
  if (g.regulator) c.regulation.regulator = regulator_from_string(*g.regulator);
  if (g.kappa_eos) c.regulation.kappa_eos = *g.kappa_eos;
  if (g.max_iters) c.regulation.max_iters = *g.max_iters;
  // Flags bypass the JSON reader, so re-run the same checks on the result.
  c = parse_config(config_to_json(c));

  const ToyModel model(resolved_model(c));
  const std::vector<int> ids = prompt_ids(c);
  const RegulationConfig reg = resolved_regulation(c);

  std::optional<RunRecord> baseline;
  if (reg.regulator != RegulatorKind::none && !g.no_baseline) {
    baseline = run_generation(model, ids, c.sampler, std::nullopt, c.seed);
  }
  const RunRecord rec = run_generation(model, ids, c.sampler, reg, c.seed);

  const fs::path out(c.output_dir);
  fs::create_directories(out);
  write_attention_csv(rec, out / "attention.csv");
  fs::remove_all(out / "latents");
  write_latent_frames(model, rec, out / "latents");
  ManifestInput in;
  in.config = &c;
  in.record = &rec;
  in.baseline = baseline ? &*baseline : nullptr;
  in.readout_layer = readout_layer(model);
  write_text(out / "manifest.json", manifest_json(in));

  std::printf("regulator %s, %zu events, edited layers:", to_string(reg.regulator).c_str(),
              rec.events.size());
  for (int l : rec.edited_layers) std::printf(" %d", l);
  std::printf("\n");
  if (baseline) {
    std::printf("wall time %.3fs vs %.3fs unregulated (ratio %.2f)\n", rec.timing.total_seconds,
                baseline->timing.total_seconds,
                rec.timing.total_seconds / baseline->timing.total_seconds);
  }
  std::printf("wrote %s\n", out.string().c_str());
  return 0;
}

struct AblateOpts {
  std::string sweep;
  std::vector<double> values;
  int count = 10;
};

int cmd_ablate(const CommonOpts& common, const AblateOpts& a) {
  const SweepKind kind = sweep_from_string(a.sweep);
  const CliConfig c = load(common);
  const std::vector<double> values = a.values.empty() ? default_sweep_values(kind) : a.values;
  const auto suite = dominance_suite(c.model, c.sampler, a.count);
  const auto rows = run_sweep(kind, values, suite, c.sampler, c.regulation);

  const fs::path out(c.output_dir);
  write_sweep_csv(rows, out / "sweep.csv");
  std::printf("%-8s %10s %10s %10s %10s %9s\n", "value", "proxy", "coverage", "dominance",
              "overhead", "diverged");
  for (const SweepRow& r : rows) {
    std::printf("%-8g %10.5f %10.5f %10.5f %10.3f %9d\n", r.value, r.proxy, r.coverage,
                r.dominance, r.overhead, r.diverged);
  }
  std::printf("baseline proxy %.5f, coverage %.5f, dominance %.5f\n", rows.front().proxy_base,
              rows.front().coverage_base, rows.front().dominance_base);
  std::printf("wrote %s\n", (out / "sweep.csv").string().c_str());
  return 0;
}

int cmd_gradcheck(int trials, std::uint64_t seed, double tol) {
  if (trials < 1) throw std::invalid_argument("--trials: must be at least 1");
  const GradcheckReport r = run_gradcheck(trials, seed);
  for (const auto& t : r.trials) {
    if (t.skipped) std::printf("seed %llu skipped (quantile tie)\n", static_cast<unsigned long long>(t.seed));
  }
  const bool ok = r.max_rel_error < tol;
  std::printf("gradcheck: %d trials, %d skipped, max relative error %.3e (limit %.0e) %s\n",
              r.completed, r.skipped, r.max_rel_error, tol, ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

int cmd_bounds(std::size_t trials, double tau, double kappa, const std::string& avg,
               std::uint64_t seed) {
  AvgMode mode;
  if (avg == "exclude") mode = AvgMode::exclude_dominant;
  else if (avg == "all") mode = AvgMode::all_targets;
  else throw std::invalid_argument("--avg: expected exclude|all, got '" + avg + "'");
  const BoundTrialReport r = run_bound_trials(trials, seed, tau, kappa, mode);
  if (r.violations > 0) {
    const BoundCheck& w = r.first_violation;
    std::printf("violation at seed %llu: token %zu peak %.17g > bound %.17g\n",
                static_cast<unsigned long long>(r.first_violation_seed), w.witness, w.m_prime,
                w.bound);
  }
  std::printf("bounds: %zu trials, tau %g, kappa %g, %zu violations, min slack %.3e %s\n",
              r.trials, tau, kappa, r.violations, r.min_slack, r.violations == 0 ? "PASS" : "FAIL");
  return r.violations == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention regulation on a toy latent diffusion model"};
  app.require_subcommand(1);

  CommonOpts common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "run seed (overrides config and ATTNREG_SEED)");
    sub->add_option("-o,--out", common.out, "output directory");
  };

  GenerateOpts gen;
  auto* generate = app.add_subcommand("generate", "run one generation and write its record");
  add_common(generate);
  generate->add_option("-p,--prompt", gen.prompt, "prompt words");
  generate->add_option("--regulator", gen.regulator, "none|optimize|scaling");
  generate->add_option("--kappa-eos", gen.kappa_eos, "EOS injection weight for scaling");
  generate->add_option("--max-iters", gen.max_iters, "optimizer iterations per layer and step");
  generate->add_flag("--no-baseline", gen.no_baseline, "skip the unregulated comparison run");

  AblateOpts abl;
  auto* ablate = app.add_subcommand("ablate", "sweep one setting over the dominance suite");
  add_common(ablate);
  ablate->add_option("--sweep", abl.sweep, "layers|steps|beta|kappa")->required();
  ablate->add_option("--values", abl.values, "sweep values (default grid when omitted)");
  ablate->add_option("--count", abl.count, "suite size")->check(CLI::PositiveNumber);

  int gc_trials = 50;
  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  gradcheck->add_option("--trials", gc_trials, "completed instances required");
  gradcheck->add_option("--seed", gc_seed, "first instance seed");
  gradcheck->add_option("--tol", gc_tol, "relative error limit");

  std::size_t b_trials = 10000;
  double b_tau = 1.1;
  double b_kappa = 0.0;
  std::string b_avg = "exclude";
  std::uint64_t b_seed = 1;
  auto* bounds = app.add_subcommand("bounds", "randomized check of the scaler peak bound");
  bounds->add_option("--trials", b_trials, "number of instances");
  bounds->add_option("--tau", b_tau, "scale trigger factor");
  bounds->add_option("--kappa-eos", b_kappa, "EOS injection weight");
  bounds->add_option("--avg", b_avg, "exclude|all: how the average peak is formed");
  bounds->add_option("--seed", b_seed, "trial seed");

  auto* config = app.add_subcommand("config", "print the resolved config as JSON");
  add_common(config);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return cmd_generate(common, gen);
    if (*ablate) return cmd_ablate(common, abl);
    if (*gradcheck) return cmd_gradcheck(gc_trials, gc_seed, gc_tol);
    if (*bounds) return cmd_bounds(b_trials, b_tau, b_kappa, b_avg, b_seed);
    if (*config) {
      std::cout << config_to_json(load(common)) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "attnreg: %s\n", e.what());
    return 2;
  }
  return 0;
}
