// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/control_math.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace flowstab {

namespace {

// Exchange the diagonal entries t(i,i) and t(i+1,i+1) of the triangular
// factor with a unitary similarity, updating q accordingly.
void swap_adjacent(CMat& t, CMat& q, int i) {
  const Cplx t11 = t(i, i), t12 = t(i, i + 1), t22 = t(i + 1, i + 1);
  if (std::abs(t22 - t11) < 1e-300) return;  // identical eigenvalues
  // eigenvector of [[t11,t12],[0,t22]] for t22
  Eigen::Vector2cd v;
  v << t12, t22 - t11;
  v.normalize();
  Eigen::Matrix2cd g;
  g << v(0), -std::conj(v(1)), v(1), std::conj(v(0));
  t.middleCols(i, 2) = t.middleCols(i, 2) * g;
  t.middleRows(i, 2) = g.adjoint() * t.middleRows(i, 2);
  q.middleCols(i, 2) = q.middleCols(i, 2) * g;
  t(i + 1, i) = 0.0;
}

}  // namespace

int ordered_complex_schur(const CMat& a,
                          const std::function<bool(Cplx)>& select,
                          CMat& q, CMat& t) {
  Eigen::ComplexSchur<CMat> schur(a, true);
  if (schur.info() != Eigen::Success)
    throw std::runtime_error("complex Schur factorization failed");
  q = schur.matrixU();
  t = schur.matrixT();
  const int n = int(a.rows());
  int front = 0;
  for (int j = 0; j < n; ++j) {
    if (!select(t(j, j))) continue;
    for (int k = j; k > front; --k) swap_adjacent(t, q, k - 1);
    ++front;
  }
  return front;
}

CMat solve_care(const CMat& a, const CMat& b, const CMat& q) {
  const int n = int(a.rows());
  CMat ham(2 * n, 2 * n);
  ham.topLeftCorner(n, n) = a;
  ham.topRightCorner(n, n) = -b * b.adjoint();
  ham.bottomLeftCorner(n, n) = -q;
  ham.bottomRightCorner(n, n) = -a.adjoint();
  CMat sq, st;
  const int stable = ordered_complex_schur(
      ham, [](Cplx z) { return z.real() < 0.0; }, sq, st);
  if (stable != n)
    throw std::runtime_error(
        "riccati: Hamiltonian has no n-dimensional stable subspace");
  const CMat u1 = sq.topLeftCorner(n, n);
  const CMat u2 = sq.bottomLeftCorner(n, n);
  Eigen::FullPivLU<CMat> lu(u1);
  if (!lu.isInvertible())
    throw std::runtime_error("riccati: singular invariant-subspace block");
  CMat x = u2 * lu.inverse();
  x = 0.5 * (x + x.adjoint().eval());
  return x;
}

CMat place_poles(const CMat& a, const CMat& b, const CVec& targets,
                 std::mt19937_64& rng) {
  const int n = int(a.rows());
  const int m = int(b.cols());
  if (targets.size() != n) throw std::invalid_argument("need n targets");
  std::normal_distribution<double> gauss;
  for (int attempt = 0; attempt < 8; ++attempt) {
    CMat g(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = Cplx(gauss(rng), gauss(rng));
    // columns of X solve (A - target_j I) x_j = B g_j
    CMat x(n, n);
    for (int j = 0; j < n; ++j) {
      const CMat shifted = a - targets[j] * CMat::Identity(n, n);
      Eigen::FullPivLU<CMat> lu(shifted);
      if (!lu.isInvertible())
        throw std::invalid_argument("placement target hits eig(A)");
      x.col(j) = lu.solve(b * g.col(j));
    }
    const auto svd = x.jacobiSvd();
    const double smin = svd.singularValues()(n - 1);
    if (smin <= 1e-12 * svd.singularValues()(0)) continue;
    Eigen::FullPivLU<CMat> lux(x);
    return g * lux.inverse();
  }
  throw std::runtime_error(
      "pole placement failed to find a well-conditioned gain");
}

double spectral_abscissa(const CMat& a) {
  Eigen::ComplexEigenSolver<CMat> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

double spectral_abscissa(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

}  // namespace flowstab
