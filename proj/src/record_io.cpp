// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/record_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "attnreg/error.hpp"
#include "attnreg/metrics.hpp"

namespace attnreg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& file, std::ios::openmode mode = std::ios::out) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, mode);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_text(const fs::path& file, const std::string& text) {
  auto out = open_out(file);
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

void write_attention_csv(const RunRecord& r, const fs::path& file) {
  auto out = open_out(file);
  out << "step,layer,head,token,max,sum\n";
  for (int step = 0; step < r.steps; ++step) {
    for (std::size_t slot = 0; slot < r.layer_ids.size(); ++slot) {
      for (int h = 0; h < r.heads; ++h) {
        for (int t = 0; t < r.tokens; ++t) {
          const std::size_t k = r.stat_index(step, slot, h, t);
          out << step << ',' << r.layer_ids[slot] << ',' << h << ',' << t << ','
              << num(r.stat_max[k]) << ',' << num(r.stat_sum[k]) << '\n';
        }
      }
    }
  }
}

void write_pgm(const Matrix& image, const fs::path& file) {
  auto out = open_out(file, std::ios::out | std::ios::binary);
  out << "P5\n" << image.cols << ' ' << image.rows << "\n255\n";
  for (double v : image.data) {
    const double c = std::clamp(v, 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * c))));
  }
}

void write_latent_frames(const ToyModel& model, const RunRecord& record, const fs::path& dir) {
  for (std::size_t s = 0; s < record.latents.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%04zu.pgm", s);
    write_pgm(decode_latent(model, record.latents[s]), dir / name);
  }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const fs::path& file) {
  auto out = open_out(file);
  out << "sweep,value,target_coverage,target_coverage_base,dominance_index,dominance_index_base,"
         "proxy,proxy_base,overhead,diverged\n";
  for (const SweepRow& r : rows) {
    out << r.sweep << ',' << num(r.value) << ',' << num(r.coverage) << ','
        << num(r.coverage_base) << ',' << num(r.dominance) << ',' << num(r.dominance_base) << ','
        << num(r.proxy) << ',' << num(r.proxy_base) << ',' << num(r.overhead) << ','
        << r.diverged << '\n';
  }
}

std::string manifest_json(const ManifestInput& in) {
  require(in.config != nullptr && in.record != nullptr, "manifest: missing config or record");
  const RunRecord& rec = *in.record;
  const CliConfig& cfg = *in.config;

  json events = json::array();
  int diverged = 0;
  for (const auto& e : rec.events) {
    events.push_back({{"step", e.step},
                      {"layer", e.layer},
                      {"initial_loss", e.initial_loss},
                      {"final_loss", e.final_loss},
                      {"iterations", e.iterations},
                      {"diverged", e.diverged}});
    diverged += e.diverged ? 1 : 0;
  }

  json results = {{"edited_layers", rec.edited_layers},
                  {"targets", rec.targets},
                  {"prompt_ids", rec.prompt_ids},
                  {"readout_layer", in.readout_layer},
                  {"diverged_events", diverged}};
  const int last = rec.steps - 1;
  if (rec.targets.size() >= 2) {
    const auto stats = head_max_stats(rec, in.readout_layer, last);
    results["dominance_index"] = dominance_index(stats, rec.targets);
  }
  json timings = {{"total_seconds", rec.timing.total_seconds},
                  {"regulation_seconds", rec.timing.regulation_seconds},
                  {"denoiser_seconds", rec.timing.denoiser_seconds}};
  if (in.baseline != nullptr) {
    results["latent_l2_to_unregulated"] =
        latent_distance(rec.final_latent(), in.baseline->final_latent());
    if (rec.targets.size() >= 2) {
      results["dominance_index_unregulated"] =
          dominance_index(head_max_stats(*in.baseline, in.readout_layer, last), rec.targets);
    }
    timings["unregulated_total_seconds"] = in.baseline->timing.total_seconds;
    timings["overhead_ratio"] = rec.timing.total_seconds / in.baseline->timing.total_seconds;
    timings["overhead"] = overhead(rec.timing.total_seconds, in.baseline->timing.total_seconds);
  }

  const json j = {{"config", json::parse(config_to_json(cfg))},
                  {"seeds", {{"model", cfg.model.seed}, {"run", cfg.seed}}},
                  {"regulator", to_string(cfg.regulation.regulator)},
                  {"results", results},
                  {"events", events},
                  {"timings", timings}};
  return j.dump(2);
}

}  // namespace attnreg
