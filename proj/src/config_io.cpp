// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/config_io.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "attnreg/error.hpp"

namespace attnreg {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_, "expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    read(*it, field(key), out);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) bad(field(key), "unknown key");
    }
  }

  [[noreturn]] static void bad(const std::string& where, const std::string& what) {
    throw std::invalid_argument(where + ": " + what);
  }

 private:
  static void read(const json& v, const std::string& where, double& out) {
    if (!v.is_number()) bad(where, "expected a number");
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& where, int& out) {
    if (!v.is_number_integer()) bad(where, "expected an integer");
    out = v.get<int>();
  }
  static void read(const json& v, const std::string& where, std::uint64_t& out) {
    if (!v.is_number_unsigned()) bad(where, "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, const std::string& where, std::string& out) {
    if (!v.is_string()) bad(where, "expected a string");
    out = v.get<std::string>();
  }
  static void read(const json& v, const std::string& where, std::vector<int>& out) {
    if (!v.is_array()) bad(where, "expected an array of integers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      int x = 0;
      read(v[i], where + "[" + std::to_string(i) + "]", x);
      out.push_back(x);
    }
  }
  static void read(const json& v, const std::string& where, std::vector<std::size_t>& out) {
    if (!v.is_array()) bad(where, "expected an array of token positions");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::uint64_t x = 0;
      read(v[i], where + "[" + std::to_string(i) + "]", x);
      out.push_back(static_cast<std::size_t>(x));
    }
  }
  static void read(const json& v, const std::string& where, std::vector<std::string>& out) {
    if (!v.is_array()) bad(where, "expected an array of strings");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::string x;
      read(v[i], where + "[" + std::to_string(i) + "]", x);
      out.push_back(x);
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void checked(const std::string& section, F&& validate) {
  try {
    validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(section + ": " + e.what());
  }
}

void read_regulation(const json& j, RegulationConfig& r) {
  Section s(j, "regulation");
  s.get("beta", r.beta);
  s.get("alpha", r.alpha);
  s.get("mu", r.mu);
  s.get("q_level", r.q_level);
  s.get("q_target", r.q_target);
  s.get("epsilon", r.epsilon);
  s.get("eta", r.eta);
  s.get("max_iters", r.max_iters);
  s.get("tol", r.tol);
  s.get("plateau_window", r.plateau_window);
  s.get("divergence_factor", r.divergence_factor);
  s.get("kappa_ema", r.kappa_ema);
  s.get("lambda", r.lambda);
  s.get("t_thres", r.t_thres);
  s.get("tau", r.tau);
  s.get("kappa_eos", r.kappa_eos);
  s.get("targets", r.targets);
  s.get("edit_layers", r.edit_layers);
  s.get("layer_count", r.layer_count);
  std::string name = to_string(r.regulator);
  s.get("regulator", name);
  checked("regulation", [&] { r.regulator = regulator_from_string(name); });
  name = to_string(r.schedule_space);
  s.get("schedule_space", name);
  checked("regulation", [&] { r.schedule_space = schedule_space_from_string(name); });
  s.finish();
  checked("regulation", [&] { r.validate(); });
}

void read_sampler(const json& j, SamplerConfig& c) {
  Section s(j, "sampler");
  s.get("steps", c.steps);
  s.get("train_steps", c.train_steps);
  s.get("beta_start", c.beta_start);
  s.get("beta_end", c.beta_end);
  s.get("cfg_scale", c.cfg_scale);
  s.finish();
  checked("sampler", [&] { c.validate(); });
}

void read_model(const json& j, ToyModelConfig& m) {
  Section s(j, "model");
  s.get("seed", m.seed);
  s.get("latent_side", m.latent_side);
  s.get("channels", m.channels);
  s.get("heads", m.heads);
  s.get("head_dim", m.head_dim);
  s.get("embed_dim", m.embed_dim);
  s.get("vocab", m.vocab);
  s.get("n_max", m.n_max);
  s.get("sides", m.sides);
  s.get("feedback", m.feedback);
  s.get("key_noise", m.key_noise);
  s.get("value_noise", m.value_noise);
  s.get("out_gain", m.out_gain);
  s.get("layer_weight_power", m.layer_weight_power);
  s.get("noise_input", m.noise_input);
  s.get("self_input", m.self_input);
  s.get("obs_gain", m.obs_gain);
  s.finish();
  checked("model", [&] { ToyModel probe(m); });
}

}  // namespace

CliConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: not valid JSON (") + e.what() + ")");
  }
  CliConfig c;
  Section top(j, "");
  if (const json* r = top.child("regulation")) read_regulation(*r, c.regulation);
  if (const json* r = top.child("sampler")) read_sampler(*r, c.sampler);
  if (const json* r = top.child("model")) read_model(*r, c.model);
  top.get("seed", c.seed);
  top.get("prompt", c.prompt);
  top.get("output_dir", c.output_dir);
  if (const json* d = top.child("dominance")) {
    if (!d->is_array()) Section::bad("dominance", "expected an array of {word, magnitude}");
    c.dominance.clear();
    for (std::size_t i = 0; i < d->size(); ++i) {
      Section e((*d)[i], "dominance[" + std::to_string(i) + "]");
      std::pair<std::string, double> entry;
      e.get("word", entry.first);
      e.get("magnitude", entry.second);
      e.finish();
      if (entry.first.empty()) Section::bad(e.field("word"), "missing");
      c.dominance.push_back(entry);
    }
  }
  top.finish();
  if (c.prompt.empty()) Section::bad("prompt", "needs at least one word");
  if (static_cast<int>(c.prompt.size()) + 2 > c.model.n_max) {
    Section::bad("prompt", "longer than model.n_max - 2 words");
  }
  return c;
}

CliConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const CliConfig& c, int indent) {
  const RegulationConfig& r = c.regulation;
  const SamplerConfig& s = c.sampler;
  const ToyModelConfig& m = c.model;
  json dom = json::array();
  for (const auto& [word, mag] : c.dominance) dom.push_back({{"word", word}, {"magnitude", mag}});
  const json j = {
      {"regulation",
       {{"beta", r.beta},
        {"alpha", r.alpha},
        {"mu", r.mu},
        {"q_level", r.q_level},
        {"q_target", r.q_target},
        {"epsilon", r.epsilon},
        {"eta", r.eta},
        {"max_iters", r.max_iters},
        {"tol", r.tol},
        {"plateau_window", r.plateau_window},
        {"divergence_factor", r.divergence_factor},
        {"kappa_ema", r.kappa_ema},
        {"lambda", r.lambda},
        {"t_thres", r.t_thres},
        {"schedule_space", to_string(r.schedule_space)},
        {"tau", r.tau},
        {"kappa_eos", r.kappa_eos},
        {"regulator", to_string(r.regulator)},
        {"targets", r.targets},
        {"edit_layers", r.edit_layers},
        {"layer_count", r.layer_count}}},
      {"sampler",
       {{"steps", s.steps},
        {"train_steps", s.train_steps},
        {"beta_start", s.beta_start},
        {"beta_end", s.beta_end},
        {"cfg_scale", s.cfg_scale}}},
      {"model",
       {{"seed", m.seed},
        {"latent_side", m.latent_side},
        {"channels", m.channels},
        {"heads", m.heads},
        {"head_dim", m.head_dim},
        {"embed_dim", m.embed_dim},
        {"vocab", m.vocab},
        {"n_max", m.n_max},
        {"sides", m.sides},
        {"feedback", m.feedback},
        {"key_noise", m.key_noise},
        {"value_noise", m.value_noise},
        {"out_gain", m.out_gain},
        {"layer_weight_power", m.layer_weight_power},
        {"noise_input", m.noise_input},
        {"self_input", m.self_input},
        {"obs_gain", m.obs_gain}}},
      {"seed", c.seed},
      {"prompt", c.prompt},
      {"dominance", dom},
      {"output_dir", c.output_dir}};
  return j.dump(indent);
}

void apply_env_overrides(CliConfig& config) {
  const char* v = std::getenv("ATTNREG_SEED");
  if (v == nullptr) return;
  const std::string text(v);
  std::size_t used = 0;
  unsigned long long seed = 0;
  try {
    seed = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (text.empty() || used != text.size() || text[0] == '-') {
    throw std::invalid_argument("ATTNREG_SEED: expected a non-negative integer, got '" + text + "'");
  }
  config.seed = seed;
}

ToyModelConfig resolved_model(const CliConfig& config) {
  ToyModelConfig m = config.model;
  const ToyModel probe(m);
  m.dominance_bias.clear();
  for (const auto& [word, mag] : config.dominance) m.dominance_bias.emplace_back(probe.token_id(word), mag);
  return m;
}

std::vector<int> prompt_ids(const CliConfig& config) {
  const ToyModel probe(config.model);
  return probe.encode(config.prompt);
}

RegulationConfig resolved_regulation(const CliConfig& config) {
  RegulationConfig r = config.regulation;
  if (r.targets.empty()) {
    for (std::size_t k = 1; k <= config.prompt.size(); ++k) r.targets.push_back(k);
  }
  return r;
}

}  // namespace attnreg
