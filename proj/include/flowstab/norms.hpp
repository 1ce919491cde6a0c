// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "flowstab/operators.hpp"

namespace flowstab {

/// Integrability exponents of the norm suite. Construction enforces the
/// tight-index regime q > d and 1 < p < 2q/(2q-1), under which the
/// interpolation space carries no boundary compatibility conditions.
struct NormSuite {
  double q = 2.0;
  double p = 1.0;
  double qprime = 2.0;
  double theta = 0.0;  // 1 - 1/p
  Vec t_grid;          // geometric grid for the K-functional
};

NormSuite make_norm_suite(double q, double p, int d, double h,
                          int grid_points = 32);

/// Cell-quadrature L^q norm of a velocity field (interior DOF vector).
double lq_norm(const DiscreteOperators2D& ops, const Vec& x, double q);

/// Stokes eigenbasis on the solenoidal space: the spectral backbone of the
/// interpolation-norm surrogate.
struct StokesModes {
  Vec values;   // ascending, positive
  Mat vectors;  // reduced coordinates, orthonormal columns
};
StokesModes stokes_modes(const DiscreteOperators2D& ops);

/// Real-interpolation norm surrogate via the K-functional with
/// spectral-truncation splittings at cutoffs matched to t. For q != 2 the
/// legs use discrete l^q norms (L^q of the field, L^q of its second
/// differences); this is a documented surrogate, exact interpolation only
/// for q = 2.
double besov_surrogate(const DiscreteOperators2D& ops, const NormSuite& ns,
                       const StokesModes& modes, const Vec& xr);

/// Empirical maximal-regularity constant of a stable generator: the worst
/// ratio (|eta'|_{Lp(Lq)} + |A eta|_{Lp(Lq)}) / |f|_{Lp(Lq)} over random
/// band-limited forcings, eta' = A eta + f, eta(0) = 0.
struct MaxRegResult {
  double constant = 0.0;
  double embedding_constant = 0.0;  // sup_t besov(eta(t)) / maxreg norm
  int samples_used = 0;
};

/// Generic core over an abstract spatial norm; exposed for closed-form
/// scalar checks.
MaxRegResult maxreg_constant_core(
    const Mat& af, const std::function<double(const Vec&)>& space_norm,
    const std::function<double(const Vec&)>& sup_norm_hook, double p,
    int n_samples, double T, double dt,
    const std::function<Vec(std::mt19937_64&)>& sample_field,
    std::mt19937_64& rng);

MaxRegResult maxreg_constant(const DiscreteOperators2D& ops, const Mat& af,
                             const NormSuite& ns, const StokesModes& modes,
                             int n_samples, double T, std::mt19937_64& rng);

}  // namespace flowstab
