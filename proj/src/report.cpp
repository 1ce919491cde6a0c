// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/report.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace flowstab {

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_spectrum_csv(std::ostream& os, const SpectralData& sd) {
  os << "re,im,unstable_flag,cluster_id,multiplicity\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < sd.eigenvalues.size(); ++i) {
    const auto lam = sd.eigenvalues[i];
    const bool unstable = int(i) < sd.n_unstable;
    int cluster = -1, mult = 0;
    if (unstable) {
      for (std::size_t c = 0; c < sd.clusters.size(); ++c)
        for (int m : sd.clusters[c])
          if (m == int(i)) {
            cluster = int(c);
            mult = sd.multiplicity[c];
          }
    }
    os << lam.real() << ',' << lam.imag() << ',' << (unstable ? 1 : 0) << ','
       << cluster << ',' << mult << '\n';
  }
}

void write_norms_csv(std::ostream& os, const Trajectory& tr, int n_channels) {
  os << "t,l2,lq,besov";
  for (int k = 1; k <= n_channels; ++k) os << ",nu_" << k;
  for (int k = 1; k <= n_channels; ++k) os << ",mu_" << k;
  os << ",pressure_norm\n";
  os << std::setprecision(17);
  for (int r = 0; r < int(tr.times.size()); ++r) {
    os << tr.times[std::size_t(r)];
    for (int c = 0; c < 3; ++c) os << ',' << tr.norms(r, c);
    for (int c = 0; c < 2 * n_channels; ++c)
      os << ',' << (c < tr.controls.cols() ? tr.controls(r, c) : 0.0);
    os << ',' << (r < tr.pressure_norms.size() ? tr.pressure_norms[r] : 0.0);
    os << '\n';
  }
}

void write_coord_matrix(std::ostream& os, const Mat& m, double drop_tol) {
  std::vector<std::tuple<int, int, double>> entries;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (std::abs(m(i, j)) > drop_tol)
        entries.emplace_back(i, j, m(i, j));
  os << m.rows() << ' ' << m.cols() << ' ' << entries.size() << '\n';
  os << std::setprecision(17);
  for (const auto& [i, j, v] : entries) os << i << ' ' << j << ' ' << v << '\n';
}

void write_field_csv(std::ostream& os, const DiscreteOperators2D& ops,
                     const Vec& interior_field, int component) {
  const Mat cc = ops.cell_center_values(interior_field);
  const int nx = ops.layout().nx, ny = ops.layout().ny;
  os << std::setprecision(17);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i)
      os << (i ? "," : "") << cc(ops.layout().ic(i, j), component);
    os << '\n';
  }
}

std::string json_dump(const Json& j) { return j.dump(2); }

Json without_timestamp(Json j) {
  if (j.contains("provenance") && j["provenance"].contains("timestamp"))
    j["provenance"].erase("timestamp");
  return j;
}

}  // namespace flowstab
