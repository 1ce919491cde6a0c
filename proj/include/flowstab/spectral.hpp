// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

#include "flowstab/control_math.hpp"
#include "flowstab/operators.hpp"

namespace flowstab {

struct SpectralOptions {
  int n_wanted = 12;
  int dense_cutoff = 6000;
  double residual_tol = 1e-8;
  double tol_group_rel = 1e-6;  // grouping tol = rel * max |unstable lambda|
  double svd_tol = 1e-8;
  double gap_min = 1e-4;
  double margin = 0.05;  // gamma0 = (1 - margin) |Re lambda_{N+1}|
  int n_quad = 64;       // contour quadrature nodes
};

/// Spectrum of the (reduced) Oseen matrix, split into the unstable part with
/// biorthogonal direct/transpose eigenbases and its grouping into distinct
/// eigenvalues with geometric multiplicities.
struct SpectralData {
  std::vector<Cplx> eigenvalues;  // sorted by descending real part
  int n_unstable = 0;             // N

  CMat phi;  // reduced right eigenvectors of the unstable part (ns x N)
  CMat psi;  // transpose eigenvectors, normalized psi^T phi = I
  std::vector<int> conj_partner;  // column index of the conjugate, or self

  std::vector<std::vector<int>> clusters;  // distinct unstable eigenvalues
  std::vector<Cplx> cluster_lambda;
  std::vector<int> multiplicity;  // geometric multiplicity per cluster
  int channel_count = 0;          // K = max multiplicity

  double lambda_stable_re = 0.0;  // Re lambda_{N+1}
  double gamma0 = 0.0;
  double max_residual = 0.0;
  bool grouping_ambiguous = false;

  int distinct_count() const { return int(clusters.size()); }
};

/// Dense-path spectrum of a real matrix (direct and transpose eigenbases,
/// conjugate-pair bookkeeping enforced). Throws if the unstable/stable gap
/// is below gap_min.
SpectralData compute_spectrum(const Mat& a, const SpectralOptions& opt = {});

/// Cluster the unstable eigenvalues of an already-computed spectrum;
/// called by compute_spectrum, exposed for synthetic-operator tests.
void group_unstable(SpectralData& sd, const SpectralOptions& opt = {});

/// Rightmost eigenpairs of the sparse pencil  A x = lambda M x  by
/// shift-invert Arnoldi with M-inner-product orthogonalization. Eigenvectors
/// are returned in pencil coordinates. Retries with a larger subspace on
/// non-convergence, then throws.
struct ArnoldiResult {
  std::vector<Cplx> eigenvalues;
  CMat vectors;
  double max_residual = 0.0;
};
ArnoldiResult arnoldi_rightmost(const SpMat& a, const SpMat& m, int n_wanted,
                                double sigma, int subspace = 60,
                                double tol = 1e-9, int max_restart = 3);

/// Spectral projector onto the unstable invariant subspace.
Mat spectral_projector_schur(const Mat& a, const SpectralOptions& opt = {});
Mat spectral_projector_contour(const Mat& a, const SpectralData& sd,
                               const SpectralOptions& opt = {});
/// Oblique projector from the biorthogonal eigenbases (phi psi^T).
Mat spectral_projector_modes(const SpectralData& sd);

/// Boundary traces of the adjoint eigenbasis: outward-normal derivative of
/// the tangential component per boundary node, restricted to the patch.
struct AdjointTraces {
  CMat tangential;          // nb x N, zero off the patch
  CMat normal_component;    // nb x N raw normal component (diagnostic)
  std::vector<bool> degenerate;  // trace vanished: possible UCP failure
};
AdjointTraces adjoint_normal_traces(const SpectralData& sd,
                                    const DiscreteOperators2D& ops);

}  // namespace flowstab
