// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <random>

namespace flowstab {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Cplx = std::complex<double>;

/// Complex Schur factorization A = Q T Q^H with the eigenvalues satisfying
/// `select` moved to the leading diagonal positions. Returns their count.
int ordered_complex_schur(const CMat& a,
                          const std::function<bool(Cplx)>& select,
                          CMat& q, CMat& t);

/// Stabilizing solution of the continuous algebraic Riccati equation
///   A^H X + X A - X B B^H X + Q = 0
/// via the Hamiltonian Schur method.
CMat solve_care(const CMat& a, const CMat& b, const CMat& q);

/// Gain K with eig(A - B K) = targets (Sylvester parametric method).
/// Targets must be disjoint from eig(A).
CMat place_poles(const CMat& a, const CMat& b, const CVec& targets,
                 std::mt19937_64& rng);

double spectral_abscissa(const CMat& a);
double spectral_abscissa(const Eigen::MatrixXd& a);

}  // namespace flowstab
