// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"

#include "flowstab/simulate.hpp"

namespace flowstab {

using Json = nlohmann::json;

void write_text_file(const std::string& path, const std::string& content);

/// CSV: re, im, unstable_flag, cluster_id, multiplicity
void write_spectrum_csv(std::ostream& os, const SpectralData& sd);

/// CSV: t, l2, lq, besov, nu_1..nu_K, mu_1..mu_K, pressure_norm
void write_norms_csv(std::ostream& os, const Trajectory& tr, int n_channels);

/// Coordinate text format: header `rows cols nnz`, then `i j value` lines.
void write_coord_matrix(std::ostream& os, const Mat& m, double drop_tol = 0.0);

/// Cell-centered field magnitude components as a CSV grid (one row per y).
void write_field_csv(std::ostream& os, const DiscreteOperators2D& ops,
                     const Vec& interior_field, int component);

/// Deterministic serialization (indented, sorted keys).
std::string json_dump(const Json& j);

/// Strip volatile provenance (timestamp) for determinism comparisons.
Json without_timestamp(Json j);

}  // namespace flowstab
