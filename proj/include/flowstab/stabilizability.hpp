// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "flowstab/spectral.hpp"

namespace flowstab {

/// Actuators for the feedback pair: K tangential boundary vectors drawn from
/// the span of the adjoint normal traces (supported on the patch) and K
/// interior tangential scalars supported on the collar cells.
struct ActuatorSet {
  Mat boundary;  // nb x K, tangential node coefficients, zero off the patch
  Mat interior;  // ncollar x K, per-cell tangential scalars
  int channel_count = 0;  // K
};

struct RankEntry {
  Cplx lambda;
  int ell = 0;  // required rank (geometric multiplicity)
  Vec singular_values;           // of the augmented matrix [-nu0 W | U]
  Vec singular_values_boundary;  // of W alone
  int rank_augmented = 0;
  int rank_boundary_only = 0;
  bool pass = false;
};

struct ControllabilityReport {
  std::vector<RankEntry> entries;
  std::vector<CMat> w_blocks;  // ell_i x K boundary pairings
  std::vector<CMat> u_blocks;  // ell_i x K interior pairings
  double svd_tol = 1e-8;
  bool pass = false;
};

/// Boundary pairing blocks (W): quadrature of actuator vs adjoint trace over
/// the patch, one ell_i x K block per distinct unstable eigenvalue.
std::vector<CMat> build_boundary_pairings(const SpectralData& sd,
                                          const AdjointTraces& traces,
                                          const ActuatorSet& act,
                                          const DiscreteOperators2D& ops);

/// Interior pairing blocks (U): collar-cell quadrature of the actuator
/// against the tangential component of the adjoint eigenvector.
std::vector<CMat> build_interior_pairings(const SpectralData& sd,
                                          const ActuatorSet& act,
                                          const DiscreteOperators2D& ops);

/// Augmented Kalman rank test per distinct unstable eigenvalue; the
/// boundary-only rank is reported as a diagnostic alongside.
ControllabilityReport rank_test(const SpectralData& sd,
                                const std::vector<CMat>& w_blocks,
                                const std::vector<CMat>& u_blocks, double nu0,
                                double svd_tol = 1e-8);

/// Greedy SVD selection of K = max multiplicity actuators from the stacked
/// adjoint traces, orthonormalized on their supports; falls back to random
/// augmentation if the rank test fails, then throws with a unique
/// continuation diagnostic.
ActuatorSet select_actuators(const SpectralData& sd,
                             const AdjointTraces& traces,
                             const DiscreteOperators2D& ops,
                             std::mt19937_64& rng, double svd_tol = 1e-8,
                             int max_retries = 8);

/// Evaluate the half-space Stokes counterexample fields u = (0, a x^2),
/// p = 2 a y on the grid: interior residual of Delta u = grad p and the
/// Cauchy data (|u| and |grad u|) on the face {x=0}. Both vanish to machine
/// precision; the fields defeat boundary-only overdetermination.
struct UcpCheck {
  double interior_residual = 0.0;
  double boundary_data = 0.0;
};
UcpCheck ucp_counterexample_check(const DomainMesh& mesh, double a);

}  // namespace flowstab
