// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "attnreg/config_io.hpp"
#include "attnreg/run_record.hpp"
#include "attnreg/suites.hpp"
#include "attnreg/tensor.hpp"

namespace attnreg {

/// Header `step,layer,head,token,max,sum`, one row per recorded statistic.
void write_attention_csv(const RunRecord& record, const std::filesystem::path& file);

/// Binary PGM (P5, maxval 255) of an image with values in [0,1].
void write_pgm(const Matrix& image, const std::filesystem::path& file);

/// latents/step_####.pgm for every step, rendered with decode_latent.
void write_latent_frames(const ToyModel& model, const RunRecord& record,
                         const std::filesystem::path& dir);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& file);

/// Inputs for manifest.json of a generate run. `baseline` is the
/// unregulated run with the same seed, when one was made.
struct ManifestInput {
  const CliConfig* config = nullptr;
  const RunRecord* record = nullptr;
  const RunRecord* baseline = nullptr;
  int readout_layer = 0;
};

/// Config echo, seeds, results and a separate "timings" object; every field
/// except "timings" is deterministic for a given config.
std::string manifest_json(const ManifestInput& input);

void write_text(const std::filesystem::path& file, const std::string& text);

}  // namespace attnreg
