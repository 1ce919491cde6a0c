// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "flowstab/stabilizability.hpp"

namespace flowstab {

/// Projection of the boundary/interior-controlled dynamics onto the unstable
/// subspace, in the biorthogonal eigenbasis: coordinates c = psi^T x_r,
///   c' = Lambda_u c + B_boundary nu(t) + B_interior mu(t).
struct ProjectedSystem {
  CMat lambda_u;    // N x N, diagonal up to eigensolve accuracy
  CMat b_boundary;  // N x K
  CMat b_interior;  // N x K
  CMat phi, psi;    // reduced biorthogonal bases (copies)
  std::vector<Cplx> unstable_eigenvalues;
  std::vector<int> conj_partner;
  int channel_count = 0;

  int order() const { return int(lambda_u.rows()); }
  CMat input() const {
    CMat b(lambda_u.rows(), b_boundary.cols() + b_interior.cols());
    b << b_boundary, b_interior;
    return b;
  }
};

ProjectedSystem build_projected_system(const SpectralData& sd,
                                       const DiscreteOperators2D& ops,
                                       const ActuatorSet& act);

/// Hautus test at one unstable eigenvalue: rank [lambda I - Lambda_u | B].
bool hautus_controllable(const ProjectedSystem& ps, double svd_tol = 1e-8);

enum class GainMethod { ShiftedLqr, Place };

struct GainDesign {
  CMat gains;  // 2K x N; the boundary channels are the first K rows
  double gamma1 = 0.0;
  GainMethod method = GainMethod::ShiftedLqr;
  double projected_abscissa = 0.0;  // of Lambda_u - B K
};

/// Synthesize gains driving the projected system at rate gamma1. The default
/// solves the Riccati equation for the shifted pair (Lambda_u + gamma1 I, B)
/// with identity weights and falls back to explicit placement.
GainDesign design_gains(const ProjectedSystem& ps, double gamma1,
                        double gamma0, std::mt19937_64& rng,
                        GainMethod method = GainMethod::ShiftedLqr);

/// The synthesized feedback law: K channel functionals paired with the
/// actuators, their full-space representations, and the closed-loop
/// generator on the solenoidal basis.
struct FeedbackLaw {
  ActuatorSet actuators;
  CMat boundary_actuators;  // nb x K
  CMat interior_actuators;  // ncollar x K
  CMat theta_boundary;      // K x ns: nu(t) = theta_boundary * x_r
  CMat theta_interior;      // K x ns
  CMat p_functionals;       // ni x K full-space boundary-channel functionals
  CMat q_functionals;       // ni x K interior-channel functionals
  Mat closed_loop;          // ns x ns
  double gamma0 = 0.0, gamma1 = 0.0;
  int channel_count = 0;
  bool empty() const { return channel_count == 0; }

  /// Tangential boundary data produced by the feedback for a reduced state.
  Vec boundary_data(const Vec& xr) const;
  /// Channel values (nu, mu) for a reduced state; real parts.
  Vec channel_values(const Vec& xr) const;
};

FeedbackLaw lift_gains(const ProjectedSystem& ps, const GainDesign& gd,
                       const SpectralData& sd, const ActuatorSet& act,
                       const DiscreteOperators2D& ops);

struct ClosedLoopReport {
  double abscissa = 0.0;
  bool pass = false;  // abscissa <= -gamma0 (+ slack)
  std::vector<Cplx> spectrum_head;  // rightmost eigenvalues for diagnostics
};
ClosedLoopReport assemble_closed_loop(const DiscreteOperators2D& ops,
                                      FeedbackLaw& law);

/// The real-valued form: each complex channel (p_k, f_k) splits into the
/// pair (Re p_k -> Re f_k), (Im p_k -> -Im f_k); channel count K when every
/// unstable eigenvalue is real, else 2K.
struct RealFormLaw {
  Mat f_channels;        // nb x C
  Mat u_channels;        // ncollar x C
  Mat theta_boundary;    // C x ns
  Mat theta_interior;    // C x ns
  Mat closed_loop;       // ns x ns
  int n_channels = 0;
  Vec boundary_data(const Vec& xr) const {
    return n_channels ? Vec(f_channels * (theta_boundary * xr))
                      : Vec::Zero(f_channels.rows());
  }
};
RealFormLaw realify(const FeedbackLaw& law, const SpectralData& sd,
                    const DiscreteOperators2D& ops);

}  // namespace flowstab
