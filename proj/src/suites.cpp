// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/suites.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "attnreg/error.hpp"
#include "attnreg/metrics.hpp"
#include "attnreg/rng.hpp"

namespace attnreg {

LogitBlock random_logits(std::uint64_t seed, std::size_t heads, std::size_t side,
                         std::size_t tokens, int d, int layer_id) {
  Rng rng(seed);
  Tensor3 z(heads, side * side, tokens);
  const double s = std::sqrt(static_cast<double>(d));
  for (double& v : z.data) v = s * rng.normal();
  return make_logits(std::move(z), d, layer_id);
}

// ---- gradient check -------------------------------------------------------

namespace {

// Smallest gap to a neighbour across every target's head-averaged column.
double selection_margin(const RegulationProblem& problem, const std::vector<EditParams>& params) {
  const LossTerms terms = problem.terms(params);
  const Matrix avg = head_average(problem.edited(params));
  double margin = std::numeric_limits<double>::infinity();
  std::vector<double> column(avg.rows);
  for (std::size_t k = 0; k < problem.targets().size(); ++k) {
    for (std::size_t i = 0; i < avg.rows; ++i) column[i] = avg(i, problem.targets()[k]);
    margin = std::min(margin, quantile_margin(column, terms.picks[k]));
  }
  return margin;
}

constexpr double kTieMargin = 1e-4;

}  // namespace

double gradient_rel_error(const RegulationProblem& problem, const std::vector<EditParams>& params,
                          double h) {
  const LossGradient g = problem.gradient(params);
  double diff2 = 0.0;
  double a2 = 0.0;
  double f2 = 0.0;
  std::vector<EditParams> probe = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t c = 0; c < params[k].theta.data.size(); ++c) {
      const double t0 = params[k].theta.data[c];
      probe[k].theta.data[c] = t0 + h;
      const double lp = problem.loss(probe);
      probe[k].theta.data[c] = t0 - h;
      const double lm = problem.loss(probe);
      probe[k].theta.data[c] = t0;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = g.dtheta[k].data[c];
      diff2 += (an - fd) * (an - fd);
      a2 += an * an;
      f2 += fd * fd;
    }
  }
  const double scale = std::sqrt(std::max(a2, f2));
  return scale == 0.0 ? 0.0 : std::sqrt(diff2) / scale;
}

GradcheckReport run_gradcheck(int trials, std::uint64_t seed, double h) {
  require(trials >= 1, "gradcheck: trials must be >= 1");
  require(h > 0.0, "gradcheck: step must be > 0");
  GradcheckReport report;
  for (std::uint64_t s = seed; report.completed < trials; ++s) {
    Rng rng(derive_seed(s, 1));
    RegulationConfig cfg;
    const std::size_t a = rng.below(8);
    std::size_t b = rng.below(7);
    if (b >= a) ++b;
    cfg.targets = {a, b};
    const RegulationProblem problem(random_logits(derive_seed(s, 0), 2, 8, 8, 8), cfg, 1);
    std::vector<EditParams> params = problem.zero_params();
    for (EditParams& p : params) {
      for (double& v : p.theta.data) v = rng.normal();
    }
    GradcheckTrial trial;
    trial.seed = s;
    if (selection_margin(problem, params) < kTieMargin) {
      trial.skipped = true;
      ++report.skipped;
    } else {
      trial.rel_error = gradient_rel_error(problem, params, h);
      report.max_rel_error = std::max(report.max_rel_error, trial.rel_error);
      ++report.completed;
    }
    report.trials.push_back(trial);
    require(report.skipped <= 10 * trials, "gradcheck: too many tie-adjacent instances");
  }
  return report;
}

// ---- suppressed-token instances ------------------------------------------

SuppressedInstance suppressed_instance(std::uint64_t seed) {
  SuppressedInstance inst;
  LogitBlock z = random_logits(seed, 2, 8, 8, 8);
  const double s = std::sqrt(8.0);
  for (std::size_t h = 0; h < z.heads(); ++h) {
    for (std::size_t i = 0; i < z.cells(); ++i) {
      z.logits(h, i, inst.dominant) += 3.0 * s;
      z.logits(h, i, inst.suppressed) = z.logits(h, i, inst.dominant) - 5.0 * s;
    }
  }
  inst.logits = std::move(z);
  inst.config.targets = {inst.dominant, inst.suppressed};
  return inst;
}

// ---- dominance suite ------------------------------------------------------

namespace {

const std::vector<std::string>& nouns() {
  static const std::vector<std::string> words = {
      "cat",    "dog",    "apple",  "clock",  "bird",   "bench",  "horse",  "kite",   "bowl",
      "chair",  "train",  "bottle", "bear",   "cup",    "boat",   "vase",   "sheep",  "lamp",
      "car",    "book",   "frog",   "pizza",  "tree",   "truck",  "zebra",  "phone",  "cake",
      "mouse",  "tiger",  "sofa",   "duck",   "bread",  "lion",   "guitar", "rabbit", "hat",
      "cow",    "banana", "owl",    "bicycle", "fox",   "candle", "turtle", "piano",  "monkey",
      "orange", "whale",  "laptop", "penguin", "umbrella", "goat", "teapot", "deer",  "balloon",
      "panda",  "kettle", "snake",  "basket", "camel",  "mirror"};
  return words;
}

SuitePrompt make_prompt(const ToyModelConfig& base, std::vector<std::string> words, double bias,
                        std::uint64_t seed) {
  SuitePrompt p;
  p.words = std::move(words);
  p.model = base;
  const ToyModel probe(base);
  p.model.dominance_bias = {{probe.token_id(p.words[0]), bias}};
  p.ids = probe.encode(p.words);
  p.seed = seed;
  return p;
}

}  // namespace

std::vector<SuitePrompt> dominance_suite(const ToyModelConfig& base, const SamplerConfig& sampler,
                                         int count, double bias, std::uint64_t seed,
                                         double min_dominance) {
  require(count >= 1, "dominance_suite: count must be >= 1");
  std::vector<SuitePrompt> suite;
  std::uint64_t run_seed = seed;
  for (std::size_t i = 0; i + 1 < nouns().size() && static_cast<int>(suite.size()) < count;
       i += 2) {
    SuitePrompt p = make_prompt(base, {nouns()[i], nouns()[i + 1]}, bias, run_seed++);
    const ToyModel model(p.model);
    const RunRecord rec = run_generation(model, p.ids, sampler, std::nullopt, p.seed);
    const auto stats = head_max_stats(rec, readout_layer(model), sampler.steps - 1);
    if (dominance_index(stats, p.targets) >= min_dominance) suite.push_back(std::move(p));
  }
  require(static_cast<int>(suite.size()) == count,
          "dominance_suite: only " + std::to_string(suite.size()) + " of " +
              std::to_string(count) + " candidate prompts show dominance");
  return suite;
}

SuitePrompt demo_prompt(const ToyModelConfig& base) {
  return make_prompt(base, {"cat", "dog"}, kDemoBias, 42);
}

int readout_layer(const ToyModel& model) {
  for (const auto& l : model.layout()) {
    if (l.tag == LayerTag::up) return l.id;
  }
  fail("readout_layer: layout has no up-sampling layer");
}

std::vector<int> evaluation_layers(const ToyModel& model) {
  return select_layers(model.layout(), 2);
}

PairedRun run_pair(const SuitePrompt& prompt, const SamplerConfig& sampler,
                   RegulationConfig config) {
  config.targets = prompt.targets;
  const ToyModel model(prompt.model);
  PairedRun out;
  out.base = run_generation(model, prompt.ids, sampler, std::nullopt, prompt.seed);
  out.regulated = run_generation(model, prompt.ids, sampler, config, prompt.seed);
  const int layer = readout_layer(model);
  const int last = sampler.steps - 1;
  const auto sb = head_max_stats(out.base, layer, last);
  const auto sr = head_max_stats(out.regulated, layer, last);
  out.dominance_base = dominance_index(sb, prompt.targets);
  out.dominance_regulated = dominance_index(sr, prompt.targets);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  out.suppressed_base = mean(sb[prompt.suppressed]);
  out.suppressed_regulated = mean(sr[prompt.suppressed]);
  return out;
}

// ---- ablation sweeps ------------------------------------------------------

std::string to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::layers: return "layers";
    case SweepKind::steps: return "steps";
    case SweepKind::beta: return "beta";
    case SweepKind::kappa: return "kappa";
  }
  return "layers";
}

SweepKind sweep_from_string(const std::string& name) {
  if (name == "layers") return SweepKind::layers;
  if (name == "steps") return SweepKind::steps;
  if (name == "beta") return SweepKind::beta;
  if (name == "kappa") return SweepKind::kappa;
  fail("unknown sweep '" + name + "' (expected layers|steps|beta|kappa)");
}

std::vector<double> default_sweep_values(SweepKind kind) {
  switch (kind) {
    case SweepKind::layers: return {0, 2, 4, 6};
    case SweepKind::steps: return {0, 10, 20, 25, 30, 40, 50};
    case SweepKind::beta: return {0.01, 0.03, 0.1, 0.3, 1.0};
    case SweepKind::kappa: return {0, 0.25, 0.5, 0.75, 1.0};
  }
  return {};
}

namespace {

void check_sweep_value(SweepKind kind, double v) {
  switch (kind) {
    case SweepKind::layers:
      require(v == 0 || v == 2 || v == 4 || v == 6, "layers sweep: k must be one of 0,2,4,6");
      break;
    case SweepKind::steps:
      require(v >= 0 && v == std::floor(v), "steps sweep: t_thres must be a non-negative integer");
      break;
    case SweepKind::beta: require(v >= 0, "beta sweep: beta must be >= 0"); break;
    case SweepKind::kappa: require(v >= 0 && v <= 1, "kappa sweep: kappa must lie in [0,1]"); break;
  }
}

RegulationConfig apply_setting(SweepKind kind, double v, RegulationConfig cfg) {
  switch (kind) {
    case SweepKind::layers:
      cfg.edit_layers.clear();
      cfg.layer_count = static_cast<int>(v);
      break;
    case SweepKind::steps: cfg.t_thres = static_cast<int>(v); break;
    case SweepKind::beta: cfg.beta = v; break;
    case SweepKind::kappa:
      cfg.regulator = RegulatorKind::scaling;
      cfg.kappa_eos = v;
      break;
  }
  return cfg;
}

struct Outcome {
  double coverage = 0.0;
  double dominance = 0.0;
  double proxy = 0.0;
  double seconds = 0.0;
  int diverged = 0;
};

Outcome evaluate(const SuitePrompt& prompt, const SamplerConfig& sampler,
                 const std::optional<RegulationConfig>& cfg) {
  const ToyModel model(prompt.model);
  const RunRecord rec = run_generation(model, prompt.ids, sampler, cfg, prompt.seed);
  const auto probe = probe_attention(model, prompt.ids, rec.final_latent());
  std::vector<AttentionMap> maps;
  for (int l : evaluation_layers(model)) maps.push_back(probe.at(l));
  Outcome o;
  o.coverage = target_coverage(maps, prompt.targets, 0.5);
  o.proxy = min_target_quantile(maps, prompt.targets);
  o.dominance = dominance_index(head_max_map(probe.at(readout_layer(model))), prompt.targets);
  o.seconds = rec.timing.total_seconds;
  for (const auto& e : rec.events) o.diverged += e.diverged ? 1 : 0;
  return o;
}

}  // namespace

std::vector<SweepRow> run_sweep(SweepKind kind, const std::vector<double>& values,
                                const std::vector<SuitePrompt>& suite,
                                const SamplerConfig& sampler, const RegulationConfig& base) {
  require(!values.empty(), "sweep: no values");
  require(!suite.empty(), "sweep: empty suite");
  for (double v : values) check_sweep_value(kind, v);
  std::vector<RegulationConfig> configs;
  for (double v : values) {
    configs.push_back(apply_setting(kind, v, base));
    configs.back().validate();
  }

  const std::size_t P = suite.size();
  const std::size_t V = values.size();
  // Job j < P is the unregulated baseline of prompt j; the rest are
  // (value, prompt) pairs. Each job writes only its own slot.
  std::vector<Outcome> out(P * (V + 1));
  const auto jobs = static_cast<long>(out.size());
#pragma omp parallel for schedule(dynamic)
  for (long j = 0; j < jobs; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const SuitePrompt& prompt = suite[ju % P];
    if (ju < P) {
      out[ju] = evaluate(prompt, sampler, std::nullopt);
    } else {
      RegulationConfig cfg = configs[ju / P - 1];
      cfg.targets = prompt.targets;
      out[ju] = evaluate(prompt, sampler, cfg);
    }
  }

  std::vector<SweepRow> rows;
  const double n = static_cast<double>(P);
  for (std::size_t v = 0; v < V; ++v) {
    SweepRow row;
    row.sweep = to_string(kind);
    row.value = values[v];
    for (std::size_t p = 0; p < P; ++p) {
      const Outcome& b = out[p];
      const Outcome& r = out[(v + 1) * P + p];
      row.coverage += r.coverage / n;
      row.coverage_base += b.coverage / n;
      row.dominance += r.dominance / n;
      row.dominance_base += b.dominance / n;
      row.proxy += r.proxy / n;
      row.proxy_base += b.proxy / n;
      row.overhead += overhead(r.seconds, b.seconds) / n;
      row.diverged += r.diverged;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace attnreg
