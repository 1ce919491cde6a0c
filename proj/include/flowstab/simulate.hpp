// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "flowstab/feedback.hpp"

namespace flowstab {

/// Per-step norms to log besides the solenoidal-basis l2 norm; optional.
using NormHook = std::function<double(const Vec& xr)>;

struct Trajectory {
  std::vector<double> times;
  Mat norms;     // steps+1 rows: {l2, lq, besov} (zero when no hook)
  Mat controls;  // steps+1 rows, one column per channel value
  Vec pressure_norms;  // filled by the caller when requested
  std::vector<Vec> snapshots;  // thinned reduced states
  std::vector<double> snapshot_times;
  int stride = 0;
  double dt = 0.0;
  bool blown_up = false;
  bool truncated = false;

  double initial_norm() const { return norms(0, 0); }
  double final_norm() const { return norms(norms.rows() - 1, 0); }
};

struct SimOptions {
  double T = 10.0;
  double dt = 0.0;           // 0: pick min(CFL bound, T/2000)
  int snapshot_stride = 50;
  double blowup_factor = 1e3;
  double cfl = 0.5;
  NormHook lq_hook;
  NormHook besov_hook;
};

/// Crank-Nicolson integration of the linear closed loop xr' = AF xr.
Trajectory simulate_linear(const DiscreteOperators2D& ops, const Mat& af,
                           const RealFormLaw& law, const Vec& x0,
                           const SimOptions& opt);

/// Projected quadratic convection at a reduced state with feedback wall data.
Vec nonlinear_term(const DiscreteOperators2D& ops, const Vec& zr,
                   const Vec& g_nodes = Vec());

/// IMEX integration of the nonlinear translated dynamics: implicit
/// Crank-Nicolson linear part, Adams-Bashforth-2 convection, feedback wall
/// data re-evaluated each step. Halves dt on CFL violation (up to 4 times),
/// flags blow-up and truncates.
Trajectory simulate_nonlinear(const DiscreteOperators2D& ops, const Mat& af,
                              const RealFormLaw& law, const Vec& z0,
                              const SimOptions& opt);

/// Pressure of the translated system from a state and its time derivative:
/// grad(chi) = nu Lap z - L_e z - (z.grad) z - z_t + collar forcing.
Vec recover_pressure_z(const DiscreteOperators2D& ops, const RealFormLaw& law,
                       const Vec& zr, const Vec& zt_r);

struct DecayFit {
  double gamma_fit = 0.0;
  double c_fit = 0.0;
  double r2 = 0.0;
  double beta_T = 0.0;
  double window_start = 0.0, window_end = 0.0;
  bool low_confidence = false;
};

/// Least-squares exponential fit of the tail of a norm series;
/// window_frac = 0.5 fits the second half.
DecayFit fit_decay(const Trajectory& tr, double window_frac = 0.5,
                   int norm_column = 0);

/// Envelope-based contraction factors over repeated horizons: ratio of the
/// trailing-window peak norms between consecutive multiples of T. A single
/// trajectory understates the semigroup constant when the probe is
/// transversal to the slowest branch, so the chained factor is the worst
/// per-horizon ratio.
struct ChainCheck {
  double beta_chain = 0.0;            // max per-horizon envelope ratio
  std::vector<double> ratios;         // one per horizon
  std::vector<double> envelope;       // peak norm near each n*T
  bool contracts = false;             // every ratio < 1
};
ChainCheck contraction_chain(const Trajectory& tr, double horizon, int n_max);

struct BasinResult {
  double r1_est = 0.0;
  Vec probe;
  std::vector<std::pair<double, bool>> trace;  // amplitude, accepted
};

/// Bisection over initial amplitudes along a probe direction; accepts an
/// amplitude when the contraction factor over the horizon is < 1 and no
/// blow-up was flagged.
BasinResult basin_search(const DiscreteOperators2D& ops, const Mat& af,
                         const RealFormLaw& law, const Vec& probe,
                         const SimOptions& opt, double a_lo = 1e-4,
                         double a_hi = 1.0, int iters = 10);

}  // namespace flowstab
