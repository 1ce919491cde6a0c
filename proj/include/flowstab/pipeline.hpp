// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "flowstab/config.hpp"
#include "flowstab/report.hpp"

namespace flowstab {

enum class Stage { Mesh, Equilibrium, Spectrum, Design, Simulate, Verify, Run };
Stage parse_stage(const std::string& name);

struct PipelineOutput {
  Json report;
  int exit_code = 0;
};

/// Execute the pipeline up to (and including) the requested stage.
/// Deterministic for a fixed seed and config; partial failures mark the
/// failing stage in the report instead of losing earlier results.
PipelineOutput run_pipeline(const RunConfig& cfg, Stage stage,
                            bool write_files = true);

}  // namespace flowstab
