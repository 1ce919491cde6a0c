// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace flowstab {

/// Run configuration, parsed from a strict sectioned key=value file.
/// Unknown sections or keys are fatal; every downstream gate is checked at
/// load time.
struct RunConfig {
  // [mesh]
  std::array<int, 3> dims{16, 16, 1};
  std::array<double, 3> lengths{1.0, 1.0, 1.0};
  int d = 2;
  std::string patch_side = "left";
  double patch_fraction = 0.5;
  int collar_depth = 2;
  // [physics]
  double nu0 = -1.0;  // required
  std::string equilibrium = "manufactured";  // manufactured | newton
  double amplitude = 2.0;
  double pressure_amplitude = 0.0;
  int mode_x = 1, mode_y = 2;
  std::string force_file;  // optional body force for newton mode
  // [norms]
  double q = 4.0;
  double p = 9.0 / 8.0;
  // [design]
  double gamma1 = 0.0;         // explicit rate; 0 means use the factor
  double gamma1_factor = 1.0;  // gamma1 = factor * Re(lambda_1)
  std::string method = "shifted-lqr";  // shifted-lqr | place
  double svd_tol = 1e-8;
  // [sim]
  double T = 0.0;   // 0: 10 / gamma0
  double dt = 0.0;  // 0: automatic
  std::vector<double> amplitudes{1e-3, 1e-2};
  bool basin = true;
  std::uint64_t probe_seed = 1;
  // [output]
  std::string dir = "out";
  int snapshot_stride = 0;  // 0: no snapshot grid files
  std::string check_level = "quick";  // quick | full | none
  bool dump_matrices = false;
  std::uint64_t seed = 0;
};

RunConfig parse_config(const std::string& text, const std::string& origin);
RunConfig load_config(const std::string& path);

/// Canonical text form used for hashing and determinism checks.
std::string canonical_config(const RunConfig& cfg);
std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace flowstab
