// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/simulate.hpp"

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>

namespace flowstab {

namespace {

double field_cfl_max(const DiscreteOperators2D& ops, const Vec& xr) {
  const Vec x = ops.apply_basis(xr);
  const double vmax = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  return vmax / std::min(ops.layout().hx, ops.layout().hy);
}

void log_step(Trajectory& tr, const DiscreteOperators2D& ops,
              const RealFormLaw& law, const SimOptions& opt, int row,
              double t, const Vec& x) {
  tr.times[std::size_t(row)] = t;
  tr.norms(row, 0) = std::sqrt(ops.volume_element()) * x.norm();
  tr.norms(row, 1) = opt.lq_hook ? opt.lq_hook(x) : 0.0;
  tr.norms(row, 2) = opt.besov_hook ? opt.besov_hook(x) : 0.0;
  if (law.n_channels > 0) {
    tr.controls.row(row).head(law.n_channels) =
        (law.theta_boundary * x).transpose();
    tr.controls.row(row).tail(law.n_channels) =
        (law.theta_interior * x).transpose();
  }
  if (tr.stride > 0 && row % tr.stride == 0) {
    tr.snapshots.push_back(x);
    tr.snapshot_times.push_back(t);
  }
}

}  // namespace

Trajectory simulate_linear(const DiscreteOperators2D& ops, const Mat& af,
                           const RealFormLaw& law, const Vec& x0,
                           const SimOptions& opt) {
  double dt = opt.dt > 0 ? opt.dt : opt.T / 2000;
  dt = std::min(dt, opt.T / 100);
  const int steps = std::max(1, int(std::llround(opt.T / dt)));
  dt = opt.T / steps;

  Trajectory tr;
  tr.dt = dt;
  tr.stride = opt.snapshot_stride;
  tr.times.resize(std::size_t(steps) + 1);
  tr.norms = Mat::Zero(steps + 1, 3);
  tr.controls = Mat::Zero(steps + 1, 2 * std::max(0, law.n_channels));

  const int n = int(af.rows());
  const Mat m1 = Mat::Identity(n, n) - 0.5 * dt * af;
  const Mat m2 = Mat::Identity(n, n) + 0.5 * dt * af;
  Eigen::PartialPivLU<Mat> lu(m1);

  Vec x = x0;
  log_step(tr, ops, law, opt, 0, 0.0, x);
  for (int s = 1; s <= steps; ++s) {
    x = lu.solve(m2 * x);
    log_step(tr, ops, law, opt, s, s * dt, x);
    if (!x.allFinite()) {
      tr.blown_up = true;
      tr.truncated = true;
      tr.times.resize(std::size_t(s) + 1);
      tr.norms.conservativeResize(s + 1, 3);
      tr.controls.conservativeResize(s + 1, tr.controls.cols());
      break;
    }
  }
  return tr;
}

Vec nonlinear_term(const DiscreteOperators2D& ops, const Vec& zr,
                   const Vec& g_nodes) {
  return ops.apply_basis_t(
      ops.convect_quadratic(ops.apply_basis(zr), g_nodes));
}

Trajectory simulate_nonlinear(const DiscreteOperators2D& ops, const Mat& af,
                              const RealFormLaw& law, const Vec& z0,
                              const SimOptions& opt) {
  double dt = opt.dt > 0 ? opt.dt : opt.T / 2000;
  dt = std::min(dt, opt.T / 100);
  // advective CFL bound from the initial state
  const double c0 = field_cfl_max(ops, z0);
  if (c0 > 0) dt = std::min(dt, opt.cfl / c0);
  int steps = std::max(1, int(std::llround(opt.T / dt)));
  dt = opt.T / steps;

  const int n = int(af.rows());
  Trajectory tr;
  tr.dt = dt;
  tr.stride = opt.snapshot_stride;
  tr.times.resize(std::size_t(steps) + 1);
  tr.norms = Mat::Zero(steps + 1, 3);
  tr.controls = Mat::Zero(steps + 1, 2 * std::max(0, law.n_channels));

  auto factor = [&](double step) {
    return Eigen::PartialPivLU<Mat>(Mat::Identity(n, n) - 0.5 * step * af);
  };
  Eigen::PartialPivLU<Mat> lu = factor(dt);

  Vec z = z0;
  const double z0n = std::max(z0.norm(), 1e-300);
  Vec g = law.n_channels ? law.boundary_data(z) : Vec::Zero(ops.nb());
  Vec n_prev = nonlinear_term(ops, z, g);
  int halvings = 0;

  log_step(tr, ops, law, opt, 0, 0.0, z);
  int s = 1;
  double t = 0.0;
  while (s <= steps) {
    const Vec n_cur = nonlinear_term(ops, z, g);
    const Vec rhs =
        (Mat::Identity(n, n) + 0.5 * dt * af) * z -
        dt * (1.5 * n_cur - 0.5 * (s == 1 ? n_cur : n_prev));
    Vec z_new = lu.solve(rhs);
    const double cmax = field_cfl_max(ops, z_new);
    if (cmax * dt > opt.cfl && halvings < 4) {
      // restart the step with half the step size; the multistep history is
      // re-seeded from the current state
      ++halvings;
      dt *= 0.5;
      steps = s - 1 + 2 * (steps - (s - 1));
      tr.times.resize(std::size_t(steps) + 1);
      tr.norms.conservativeResize(steps + 1, 3);
      tr.controls.conservativeResize(steps + 1, tr.controls.cols());
      lu = factor(dt);
      n_prev = nonlinear_term(ops, z, g);
      continue;
    }
    if (cmax * dt > opt.cfl || !z_new.allFinite() ||
        z_new.norm() > opt.blowup_factor * z0n) {
      tr.blown_up = !z_new.allFinite() ||
                    z_new.norm() > opt.blowup_factor * z0n;
      tr.truncated = true;
      tr.times.resize(std::size_t(s));
      tr.norms.conservativeResize(s, 3);
      tr.controls.conservativeResize(s, tr.controls.cols());
      break;
    }
    n_prev = n_cur;
    z = z_new;
    t += dt;
    g = law.n_channels ? law.boundary_data(z) : Vec::Zero(ops.nb());
    log_step(tr, ops, law, opt, s, t, z);
    ++s;
  }
  return tr;
}

Vec recover_pressure_z(const DiscreteOperators2D& ops, const RealFormLaw& law,
                       const Vec& zr, const Vec& zt_r) {
  const Vec z = ops.apply_basis(zr);
  const Vec zt = ops.apply_basis(zt_r);
  const Vec g = law.n_channels ? law.boundary_data(zr) : Vec::Zero(ops.nb());
  const Vec wall = ops.wall_lift() * g;

  Vec r = ops.nu0() * (ops.laplacian_ii() * z + ops.laplacian_wall() * wall);
  if (ops.has_equilibrium())
    r -= ops.convection_ii() * z + ops.convection_wall() * wall;
  r -= ops.convect_quadratic(z, g);
  r -= zt;
  if (law.n_channels > 0) {
    const Vec mu = law.theta_interior * zr;
    r += ops.collar_restriction().transpose() * (law.u_channels * mu);
  }
  return ops.recover_pressure(r);
}

DecayFit fit_decay(const Trajectory& tr, double window_frac, int norm_column) {
  DecayFit fit;
  const int rows =
      int(std::min<std::size_t>(tr.times.size(), std::size_t(tr.norms.rows())));
  if (rows < 2) return fit;
  const double t_end = tr.times[std::size_t(rows) - 1];
  const double t_start = window_frac * t_end;
  std::vector<double> ts, ln;
  for (int i = 0; i < rows; ++i) {
    const double v = tr.norms(i, norm_column);
    if (tr.times[std::size_t(i)] >= t_start && v > 0)
      ts.push_back(tr.times[std::size_t(i)]), ln.push_back(std::log(v));
  }
  if (ts.size() < 10) {
    fit.low_confidence = true;
    return fit;
  }
  const int m = int(ts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    sx += ts[std::size_t(i)];
    sy += ln[std::size_t(i)];
    sxx += ts[std::size_t(i)] * ts[std::size_t(i)];
    sxy += ts[std::size_t(i)] * ln[std::size_t(i)];
  }
  const double denom = m * sxx - sx * sx;
  const double slope = (m * sxy - sx * sy) / denom;
  const double icept = (sy - slope * sx) / m;
  fit.gamma_fit = -slope;
  fit.c_fit = std::exp(icept);
  fit.window_start = t_start;
  fit.window_end = t_end;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / m;
  for (int i = 0; i < m; ++i) {
    const double pred = icept + slope * ts[std::size_t(i)];
    ss_res += (ln[std::size_t(i)] - pred) * (ln[std::size_t(i)] - pred);
    ss_tot += (ln[std::size_t(i)] - mean) * (ln[std::size_t(i)] - mean);
  }
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.low_confidence = fit.r2 < 0.9;
  // contraction factor over the horizon, measured as the envelope over the
  // last few percent so an oscillatory slowest mode cannot alias the phase
  double env = 0.0;
  for (int i = 0; i < rows; ++i)
    if (tr.times[std::size_t(i)] >= 0.95 * t_end)
      env = std::max(env, tr.norms(i, norm_column));
  fit.beta_T = env / std::max(tr.norms(0, norm_column), 1e-300);
  return fit;
}

ChainCheck contraction_chain(const Trajectory& tr, double horizon, int n_max) {
  ChainCheck out;
  auto env_at = [&](double t) {
    double env = 0.0;
    const double lo = std::max(0.0, t - 0.05 * horizon);
    for (std::size_t i = 0; i < tr.times.size(); ++i)
      if (tr.times[i] >= lo && tr.times[i] <= t + 1e-12)
        env = std::max(env, tr.norms(int(i), 0));
    return env;
  };
  double prev = std::max(env_at(0.0), tr.norms(0, 0));
  out.envelope.push_back(prev);
  out.contracts = true;
  for (int n = 1; n <= n_max; ++n) {
    const double cur = env_at(n * horizon);
    const double r = cur / std::max(prev, 1e-300);
    out.ratios.push_back(r);
    out.envelope.push_back(cur);
    out.beta_chain = std::max(out.beta_chain, r);
    if (r >= 1.0) out.contracts = false;
    prev = cur;
  }
  return out;
}

BasinResult basin_search(const DiscreteOperators2D& ops, const Mat& af,
                         const RealFormLaw& law, const Vec& probe,
                         const SimOptions& opt, double a_lo, double a_hi,
                         int iters) {
  BasinResult out;
  out.probe = probe / probe.norm();
  auto decays = [&](double amp) {
    const auto tr = simulate_nonlinear(ops, af, law, Vec(amp * out.probe), opt);
    const bool ok = !tr.blown_up && !tr.truncated &&
                    tr.final_norm() < tr.initial_norm();
    return ok;
  };
  if (!decays(a_lo)) {
    out.r1_est = 0.0;
    out.trace.emplace_back(a_lo, false);
    return out;
  }
  out.trace.emplace_back(a_lo, true);
  double lo = a_lo, hi = a_hi;
  if (decays(a_hi)) {
    out.trace.emplace_back(a_hi, true);
    out.r1_est = a_hi;
    return out;
  }
  out.trace.emplace_back(a_hi, false);
  for (int i = 0; i < iters; ++i) {
    const double mid = std::sqrt(lo * hi);
    const bool ok = decays(mid);
    out.trace.emplace_back(mid, ok);
    (ok ? lo : hi) = mid;
  }
  out.r1_est = lo;
  return out;
}

}  // namespace flowstab
