// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/norms.hpp"

#include <iostream>

#include "doctest.h"

using namespace flowstab;

namespace {

DomainMesh unit_mesh(int n) {
  auto m = build_mesh({n, n, 1}, {1.0, 1.0, 1.0}, 2);
  m = select_patch(m, Side::Left, 0.5);
  m = build_collar(m, 2);
  return m;
}

}  // namespace

TEST_CASE("norm suite gate accepts and rejects the documented exponents") {
  CHECK_NOTHROW(make_norm_suite(4.0, 9.0 / 8.0, 2, 1.0 / 16));
  CHECK_THROWS_WITH_AS(make_norm_suite(4.0, 1.2, 2, 1.0 / 16),
                       doctest::Contains("p < 2q/(2q-1)"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(make_norm_suite(2.0, 9.0 / 8.0, 2, 1.0 / 16),
                       doctest::Contains("q > d"), std::invalid_argument);
  const auto ns = make_norm_suite(4.0, 9.0 / 8.0, 2, 1.0 / 16);
  CHECK(ns.qprime == doctest::Approx(4.0 / 3.0));
  CHECK(ns.theta == doctest::Approx(1.0 - 8.0 / 9.0));
  CHECK(ns.t_grid.size() == 32);
  CHECK(ns.t_grid[0] == doctest::Approx(1.0 / 256));
  CHECK(ns.t_grid[31] == doctest::Approx(1.0));
}

TEST_CASE("lq norm: near-constant normalization, q=2 equivalence, Hoelder") {
  const int n = 32;
  DiscreteOperators2D ops(unit_mesh(n), 0.01);
  // constant-magnitude data on the interior DOFs; the implied zero boundary
  // faces leave an O(h) edge effect in the cell averages
  Vec x = Vec::Zero(ops.layout().ni());
  x.head(ops.layout().nui()).setConstant(1.0);
  CHECK(std::abs(lq_norm(ops, x, 3.0) - 1.0) <= 2.0 / n);

  std::mt19937_64 rng(3);
  const Vec f = ops.random_smooth_field(rng);
  const Mat cc = ops.cell_center_values(f);
  const double direct =
      std::sqrt(cc.rowwise().squaredNorm().sum() * ops.mesh().cell_volume());
  CHECK(lq_norm(ops, f, 2.0) == doctest::Approx(direct).epsilon(1e-14));

  for (int t = 0; t < 10; ++t) {
    const Vec g = ops.random_smooth_field(rng);
    CHECK(lq_norm(ops, g, 2.0) <= lq_norm(ops, g, 4.0) * 1.0 + 1e-12);
  }
}

TEST_CASE("besov surrogate: zero, homogeneity, sandwich ordering") {
  DiscreteOperators2D ops(unit_mesh(16), 0.01);
  const auto ns = make_norm_suite(4.0, 9.0 / 8.0, 2, ops.layout().hx);
  const auto modes = stokes_modes(ops);
  CHECK(besov_surrogate(ops, ns, modes, Vec::Zero(ops.layout().ns())) == 0.0);
  std::mt19937_64 rng(5);
  double c_lower = 0, c_upper = 0;  // lq <= C besov <= C C' W2q-surrogate
  for (int t = 0; t < 20; ++t) {
    const Vec xr = ops.apply_basis_t(ops.random_smooth_field(rng));
    const double b = besov_surrogate(ops, ns, modes, xr);
    const double b3 = besov_surrogate(ops, ns, modes, Vec(-3.0 * xr));
    CHECK(b3 == doctest::Approx(3.0 * b).epsilon(1e-10));
    const Vec field = ops.apply_basis(xr);
    const double lo = lq_norm(ops, field, ns.q);
    const double hi = lo + lq_norm(ops, Vec(ops.laplacian_ii() * field), ns.q);
    CHECK(b > 0);
    c_lower = std::max(c_lower, lo / b);
    c_upper = std::max(c_upper, b / hi);
  }
  std::cout << "sandwich constants: C=" << c_lower << " C'=" << c_upper
            << "\n";
  CHECK(c_lower > 0);
  CHECK(std::isfinite(c_lower));
  CHECK(c_upper > 0);
  CHECK(std::isfinite(c_upper));
}

TEST_CASE("scalar maximal regularity bound in L2") {
  Mat a = -Mat::Identity(1, 1);
  std::mt19937_64 rng(7);
  auto norm1 = [](const Vec& x) { return std::abs(x[0]); };
  auto sample = [](std::mt19937_64& r) {
    std::normal_distribution<double> g;
    Vec v(1);
    v[0] = g(r);
    return v;
  };
  const auto res = maxreg_constant_core(a, norm1, nullptr, 2.0, 10, 30.0,
                                        0.01, sample, rng);
  std::cout << "scalar maxreg constant=" << res.constant << "\n";
  CHECK(res.samples_used == 10);
  CHECK(res.constant <= 2.0 + 0.05);
}

TEST_CASE("pde maximal regularity constant is finite and refinement-stable") {
  double c[2];
  int idx = 0;
  for (int n : {8, 16}) {
    DiscreteOperators2D ops(unit_mesh(n), 0.01);
    const Mat a = ops.oseen_reduced();  // stable Stokes case
    const auto ns = make_norm_suite(4.0, 9.0 / 8.0, 2, ops.layout().hx);
    const auto modes = stokes_modes(ops);
    std::mt19937_64 rng(11);
    const auto res = maxreg_constant(ops, a, ns, modes, 5, 10.0, rng);
    CHECK(res.samples_used == 5);
    CHECK(std::isfinite(res.constant));
    CHECK(std::isfinite(res.embedding_constant));
    c[idx++] = res.constant;
  }
  std::cout << "maxreg constants: " << c[0] << " " << c[1] << "\n";
  CHECK(c[1] <= 2.0 * c[0]);
  CHECK(c[1] >= 0.5 * c[0]);
}

TEST_CASE("besov surrogate requires the matching Stokes spectrum") {
  DiscreteOperators2D ops(unit_mesh(12), 0.01);
  const auto ns = make_norm_suite(4.0, 9.0 / 8.0, 2, ops.layout().hx);
  StokesModes wrong;  // empty
  CHECK_THROWS(besov_surrogate(ops, ns, wrong, Vec::Zero(ops.layout().ns())));
}

TEST_CASE("zero forcing samples are skipped") {
  Mat a = -Mat::Identity(1, 1);
  std::mt19937_64 rng(9);
  auto zero_sample = [](std::mt19937_64&) { return Vec::Zero(1); };
  auto norm1 = [](const Vec& x) { return std::abs(x[0]); };
  const auto res =
      maxreg_constant_core(a, norm1, nullptr, 2.0, 4, 10.0, 0.05, zero_sample, rng);
  CHECK(res.samples_used == 0);
  CHECK(res.constant == 0.0);
}

TEST_CASE("norm axioms on random triples") {
  DiscreteOperators2D ops(unit_mesh(12), 0.01);
  const auto ns = make_norm_suite(4.0, 9.0 / 8.0, 2, ops.layout().hx);
  const auto modes = stokes_modes(ops);
  std::mt19937_64 rng(13);
  for (int t = 0; t < 10; ++t) {
    const Vec f = ops.random_smooth_field(rng);
    const Vec g = ops.random_smooth_field(rng);
    CHECK(lq_norm(ops, f, ns.q) >= 0.0);
    CHECK(lq_norm(ops, Vec(f + g), ns.q) <=
          lq_norm(ops, f, ns.q) + lq_norm(ops, g, ns.q) + 1e-10);
    const Vec fr = ops.apply_basis_t(f), gr = ops.apply_basis_t(g);
    CHECK(besov_surrogate(ops, ns, modes, Vec(fr + gr)) <=
          besov_surrogate(ops, ns, modes, fr) +
              besov_surrogate(ops, ns, modes, gr) + 1e-10);
  }
}
