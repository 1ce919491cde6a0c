// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/norms.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace flowstab {

NormSuite make_norm_suite(double q, double p, int d, double h,
                          int grid_points) {
  if (q <= d) {
    std::ostringstream os;
    os << "norm suite gate: q > d violated (q=" << q << ", d=" << d << ")";
    throw std::invalid_argument(os.str());
  }
  const double bound = 2 * q / (2 * q - 1);
  if (!(p > 1.0 && p < bound)) {
    std::ostringstream os;
    os << "norm suite gate: 1 < p < 2q/(2q-1) violated (p=" << p
       << ", q=" << q << ", bound=" << bound << ")";
    throw std::invalid_argument(os.str());
  }
  NormSuite ns;
  ns.q = q;
  ns.p = p;
  ns.qprime = q / (q - 1.0);
  ns.theta = 1.0 - 1.0 / p;
  ns.t_grid.resize(grid_points);
  const double t0 = h * h, t1 = 1.0;
  for (int i = 0; i < grid_points; ++i)
    ns.t_grid[i] = t0 * std::pow(t1 / t0, double(i) / (grid_points - 1));
  return ns;
}

double lq_norm(const DiscreteOperators2D& ops, const Vec& x, double q) {
  if (q < 1) throw std::invalid_argument("lq norm needs q >= 1");
  const Mat cc = ops.cell_center_values(x);
  const Vec mag = cc.rowwise().norm();
  const double vol = ops.mesh().cell_volume();
  double s = 0.0;
  for (int i = 0; i < mag.size(); ++i) s += std::pow(mag[i], q) * vol;
  return std::pow(s, 1.0 / q);
}

StokesModes stokes_modes(const DiscreteOperators2D& ops) {
  Eigen::SelfAdjointEigenSolver<Mat> es(ops.stokes_reduced());
  if (es.info() != Eigen::Success)
    throw std::runtime_error("Stokes eigendecomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

namespace {

double w2q_leg(const DiscreteOperators2D& ops, const NormSuite& ns,
               const Vec& field) {
  const Vec second = ops.laplacian_ii() * field;
  return lq_norm(ops, field, ns.q) + lq_norm(ops, second, ns.q);
}

}  // namespace

double besov_surrogate(const DiscreteOperators2D& ops, const NormSuite& ns,
                       const StokesModes& modes, const Vec& xr) {
  if (modes.values.size() != xr.size())
    throw std::invalid_argument("besov surrogate: missing Stokes spectrum");
  const Vec coeff = modes.vectors.transpose() * xr;
  const int nt = int(ns.t_grid.size());
  double acc = 0.0;
  for (int j = 0; j < nt; ++j) {
    const double t = ns.t_grid[j];
    const double cutoff = 1.0 / t;
    Vec low = coeff;
    for (int i = 0; i < low.size(); ++i)
      if (modes.values[i] > cutoff) low[i] = 0.0;
    const Vec high = coeff - low;
    const Vec f_low = ops.apply_basis(modes.vectors * low);
    const Vec f_high = ops.apply_basis(modes.vectors * high);
    const double k_t = lq_norm(ops, f_high, ns.q) + t * w2q_leg(ops, ns, f_low);
    const double dlog =
        std::log(ns.t_grid[std::min(j + 1, nt - 1)] /
                 ns.t_grid[std::max(j - 1, 0)]) *
        0.5;
    acc += std::pow(std::pow(t, -ns.theta) * k_t, ns.p) * dlog;
  }
  return std::pow(acc, 1.0 / ns.p);
}

MaxRegResult maxreg_constant_core(
    const Mat& af, const std::function<double(const Vec&)>& space_norm,
    const std::function<double(const Vec&)>& sup_norm_hook, double p,
    int n_samples, double T, double dt,
    const std::function<Vec(std::mt19937_64&)>& sample_field,
    std::mt19937_64& rng) {
  const int n = int(af.rows());
  const int steps = std::max(10, int(std::llround(T / dt)));
  const double step = T / steps;
  const Mat m1 = Mat::Identity(n, n) - 0.5 * step * af;
  const Mat m2 = Mat::Identity(n, n) + 0.5 * step * af;
  Eigen::PartialPivLU<Mat> lu(m1);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  MaxRegResult out;
  for (int s = 0; s < n_samples; ++s) {
    // band-limited forcing: a few low temporal frequencies on random fields
    std::vector<Vec> fields;
    std::vector<double> omega, phase;
    for (int m = 0; m < 3; ++m) {
      fields.push_back(sample_field(rng));
      omega.push_back(2 * M_PI * (1 + m) / T);
      phase.push_back(2 * M_PI * uni(rng));
    }
    auto force = [&](double t) {
      Vec f = Vec::Zero(n);
      for (std::size_t m = 0; m < fields.size(); ++m)
        f += std::sin(omega[m] * t + phase[m]) * fields[m];
      return f;
    };
    Vec eta = Vec::Zero(n);
    double acc_dt = 0, acc_a = 0, acc_f = 0, sup_ratio_num = 0;
    auto accum = [&](double w, const Vec& e, const Vec& f) {
      const Vec de = af * e + f;
      acc_dt += w * std::pow(space_norm(de), p);
      acc_a += w * std::pow(space_norm(af * e), p);
      acc_f += w * std::pow(space_norm(f), p);
      if (sup_norm_hook) sup_ratio_num = std::max(sup_ratio_num, sup_norm_hook(e));
    };
    accum(0.5 * step, eta, force(0.0));
    for (int k = 1; k <= steps; ++k) {
      const double tm = (k - 0.5) * step;
      eta = lu.solve(m2 * eta + step * force(tm));
      accum((k == steps ? 0.5 : 1.0) * step, eta, force(k * step));
    }
    if (acc_f <= 0) continue;  // degenerate forcing: skip the sample
    const double num =
        std::pow(acc_dt, 1.0 / p) + std::pow(acc_a, 1.0 / p);
    const double den = std::pow(acc_f, 1.0 / p);
    out.constant = std::max(out.constant, num / den);
    if (sup_norm_hook && num > 0)
      out.embedding_constant =
          std::max(out.embedding_constant, sup_ratio_num / num);
    ++out.samples_used;
  }
  return out;
}

MaxRegResult maxreg_constant(const DiscreteOperators2D& ops, const Mat& af,
                             const NormSuite& ns, const StokesModes& modes,
                             int n_samples, double T, std::mt19937_64& rng) {
  auto space_norm = [&](const Vec& xr) {
    return lq_norm(ops, ops.apply_basis(xr), ns.q);
  };
  auto sup_hook = [&](const Vec& xr) {
    return besov_surrogate(ops, ns, modes, xr);
  };
  auto sample = [&](std::mt19937_64& r) {
    return ops.apply_basis_t(ops.random_smooth_field(r));
  };
  return maxreg_constant_core(af, space_norm, sup_hook, ns.p, n_samples, T,
                              T / 400, sample, rng);
}

}  // namespace flowstab
