// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/feedback.hpp"

#include <Eigen/Eigenvalues>
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

struct Design {
  DiscreteOperators2D ops;
  SpectralData sd;
  ActuatorSet act;
  ProjectedSystem ps;
};

Design make_design(int n) {
  DiscreteOperators2D ops(unit_mesh(n), 0.005);
  ops.solve_equilibrium_manufactured(2.0, 0.0, 1, 2);
  auto sd = compute_spectrum(ops.oseen_reduced());
  auto tr = adjoint_normal_traces(sd, ops);
  std::mt19937_64 rng(7);
  auto act = select_actuators(sd, tr, ops, rng);
  auto ps = build_projected_system(sd, ops, act);
  return {std::move(ops), std::move(sd), std::move(act), std::move(ps)};
}

}  // namespace

TEST_CASE("projected system is diagonal in eigencoordinates") {
  auto d = make_design(16);
  const int n = d.ps.order();
  REQUIRE(n == 3);
  for (int i = 0; i < n; ++i) {
    CHECK(std::abs(d.ps.lambda_u(i, i) -
                   d.sd.eigenvalues[std::size_t(i)]) <= 1e-7);
    for (int j = 0; j < n; ++j)
      if (i != j) CHECK(std::abs(d.ps.lambda_u(i, j)) <= 1e-7);
  }
}

TEST_CASE("hautus test agrees with the augmented rank test") {
  auto d = make_design(16);
  CHECK(hautus_controllable(d.ps));
  // wiping the inputs kills controllability
  ProjectedSystem dead = d.ps;
  dead.b_boundary.setZero();
  dead.b_interior.setZero();
  CHECK(!hautus_controllable(dead));
}

TEST_CASE("empty system short-circuits") {
  DiscreteOperators2D ops(unit_mesh(12), 0.01);
  const auto sd = compute_spectrum(ops.oseen_reduced());
  const auto tr = adjoint_normal_traces(sd, ops);
  std::mt19937_64 rng(1);
  const auto act = select_actuators(sd, tr, ops, rng);
  const auto ps = build_projected_system(sd, ops, act);
  CHECK(ps.order() == 0);
  GainDesign gd = design_gains(ps, 1.0, 0.5, rng);
  auto law = lift_gains(ps, gd, sd, act, ops);
  CHECK(law.empty());
  auto rep = assemble_closed_loop(ops, law);
  CHECK(rep.pass);
  CHECK(rep.abscissa < 0.0);
  CHECK((law.closed_loop - ops.oseen_reduced()).norm() == 0.0);
}

TEST_CASE("scalar shifted-lqr closed form") {
  // N=1, K=1: closed-loop eigenvalue is -gamma1 - sqrt((lam+gamma1)^2+|b|^2)
  ProjectedSystem ps;
  const double lam = 0.7, b = 0.9, gamma1 = 2.0;
  ps.lambda_u = CMat::Constant(1, 1, Cplx(lam, 0));
  ps.b_boundary = CMat::Constant(1, 1, Cplx(b, 0));
  ps.b_interior = CMat::Zero(1, 1);
  ps.channel_count = 1;
  ps.unstable_eigenvalues = {Cplx(lam, 0)};
  ps.conj_partner = {0};
  std::mt19937_64 rng(3);
  const auto gd = design_gains(ps, gamma1, 0.1, rng);
  const double expect = -gamma1 - std::hypot(lam + gamma1, b);
  CHECK(gd.projected_abscissa <= -gamma1 + 1e-6);
  CHECK(gd.projected_abscissa == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("zero input matrix is rejected as uncontrollable") {
  ProjectedSystem ps;
  ps.lambda_u = CMat::Constant(1, 1, Cplx(0.5, 0));
  ps.b_boundary = CMat::Zero(1, 1);
  ps.b_interior = CMat::Zero(1, 1);
  ps.channel_count = 1;
  ps.unstable_eigenvalues = {Cplx(0.5, 0)};
  ps.conj_partner = {0};
  std::mt19937_64 rng(3);
  CHECK_THROWS(design_gains(ps, 1.0, 0.1, rng));
}

TEST_CASE("gamma1 sweep: abscissa certified, gain norm nondecreasing") {
  auto d = make_design(16);
  std::mt19937_64 rng(11);
  const double re1 = d.sd.eigenvalues[0].real();
  double prev_gain = 0.0;
  for (double f : {0.5, 1.0, 2.0}) {
    const double g1 = f * re1;
    const auto gd = design_gains(d.ps, g1, d.sd.gamma0, rng);
    CHECK(gd.projected_abscissa <= -g1 + 1e-6);
    const double gn = gd.gains.norm();
    CHECK(gn >= prev_gain - 1e-9);
    prev_gain = gn;
  }
}

TEST_CASE("both design methods certify the rate") {
  auto d = make_design(16);
  std::mt19937_64 rng(13);
  const double g1 = d.sd.eigenvalues[0].real();
  for (auto m : {GainMethod::ShiftedLqr, GainMethod::Place}) {
    const auto gd = design_gains(d.ps, g1, d.sd.gamma0, rng, m);
    CHECK(gd.projected_abscissa <= -g1 + 1e-6);
  }
}

TEST_CASE("lifted law reproduces the gains and is supported correctly") {
  auto d = make_design(16);
  std::mt19937_64 rng(17);
  const double g1 = d.sd.eigenvalues[0].real();
  const auto gd = design_gains(d.ps, g1, d.sd.gamma0, rng);
  auto law = lift_gains(d.ps, gd, d.sd, d.act, d.ops);

  // channel coordinates on the unstable basis reproduce -gains columns
  for (int bcol = 0; bcol < d.ps.order(); ++bcol) {
    const CVec phib = d.ps.phi.col(bcol);
    const CVec nu = law.theta_boundary * phib;
    const CVec mu = law.theta_interior * phib;
    for (int kk = 0; kk < law.channel_count; ++kk) {
      CHECK(std::abs(nu[kk] - (-gd.gains(kk, bcol))) <= 1e-10 * (1 + std::abs(gd.gains(kk, bcol))));
      CHECK(std::abs(mu[kk] - (-gd.gains(law.channel_count + kk, bcol))) <= 1e-10);
    }
  }

  // the feedback sees only the unstable projection: stable directions give 0
  const Mat p = spectral_projector_modes(d.sd);
  std::mt19937_64 rng2(23);
  std::normal_distribution<double> gauss;
  for (int t = 0; t < 5; ++t) {
    Vec xr(d.ops.layout().ns());
    for (int i = 0; i < xr.size(); ++i) xr[i] = gauss(rng2);
    const Vec stable_part = xr - p * xr;
    CHECK(law.boundary_data(stable_part).norm() <= 1e-7 * xr.norm());
  }

  // boundary data is tangential by construction and supported on the patch
  std::mt19937_64 rng3(29);
  for (int t = 0; t < 100; ++t) {
    Vec xr(d.ops.layout().ns());
    for (int i = 0; i < xr.size(); ++i) xr[i] = gauss(rng3);
    const Vec g = law.boundary_data(xr);
    for (int b = 0; b < d.ops.nb(); ++b)
      if (!d.ops.mesh().in_patch(b)) CHECK(g[b] == 0.0);
  }

  // full-space functionals realize the duality pairing
  for (int t = 0; t < 3; ++t) {
    Vec xr(d.ops.layout().ns());
    for (int i = 0; i < xr.size(); ++i) xr[i] = gauss(rng2);
    const Vec x = d.ops.apply_basis(Vec(p * xr));
    for (int kk = 0; kk < law.channel_count; ++kk) {
      const Cplx by_theta = (law.theta_boundary * (p * xr).cast<Cplx>())(kk);
      const Cplx by_pair = d.ops.volume_element() *
                           (x.cast<Cplx>().dot(law.p_functionals.col(kk)));
      CHECK(std::abs(by_theta - by_pair) <= 1e-8 * (1 + std::abs(by_theta)));
    }
  }
}

TEST_CASE("closed loop: triangular structure and certified abscissa") {
  auto d = make_design(16);
  std::mt19937_64 rng(31);
  const double g1 = d.sd.eigenvalues[0].real();
  const auto gd = design_gains(d.ps, g1, d.sd.gamma0, rng);
  auto law = lift_gains(d.ps, gd, d.sd, d.act, d.ops);
  const auto rep = assemble_closed_loop(d.ops, law);
  std::cout << "closed-loop abscissa=" << rep.abscissa
            << " gamma0=" << law.gamma0
            << " stable branch=" << d.sd.lambda_stable_re << "\n";
  CHECK(rep.pass);
  CHECK(rep.abscissa <= -law.gamma0 + 1e-9);
  // the uncontrolled stable branch caps the closed loop
  CHECK(rep.abscissa == doctest::Approx(d.sd.lambda_stable_re).epsilon(1e-6));

  // P_N AF (I - P_N) = 0: the feedback only couples upward
  const Mat p = spectral_projector_modes(d.sd);
  const Mat upper = p * law.closed_loop * (Mat::Identity(p.rows(), p.cols()) - p);
  CHECK(upper.norm() <= 1e-7 * law.closed_loop.norm());

  // spectrum splits into the designed block and the stable branch
  Eigen::EigenSolver<Mat> es(law.closed_loop, false);
  double second_branch = -1e300;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double re = es.eigenvalues()(i).real();
    if (re > -0.99 * g1) second_branch = std::max(second_branch, re);
  }
  CHECK(second_branch == doctest::Approx(d.sd.lambda_stable_re).epsilon(1e-5));
}

TEST_CASE("feedback map has rank at most 2K") {
  auto d = make_design(16);
  std::mt19937_64 rng(37);
  const double g1 = d.sd.eigenvalues[0].real();
  const auto gd = design_gains(d.ps, g1, d.sd.gamma0, rng);
  auto law = lift_gains(d.ps, gd, d.sd, d.act, d.ops);
  assemble_closed_loop(d.ops, law);
  const Mat fb = law.closed_loop - d.ops.oseen_reduced();
  const auto sv = fb.jacobiSvd().singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * sv(0)) ++rank;
  CHECK(rank <= 2 * law.channel_count);
}

TEST_CASE("stronger designs do not move the stable branch") {
  auto d = make_design(16);
  std::mt19937_64 rng(41);
  const double base = d.sd.eigenvalues[0].real();
  for (double f : {1.0, 2.0}) {
    const auto gd = design_gains(d.ps, f * base, d.sd.gamma0, rng);
    auto law = lift_gains(d.ps, gd, d.sd, d.act, d.ops);
    const auto rep = assemble_closed_loop(d.ops, law);
    const double expect = std::max(-f * base, d.sd.lambda_stable_re);
    CHECK(std::abs(rep.abscissa - expect) <= 0.05 * std::abs(expect));
  }
}

TEST_CASE("realified law matches the complex design exactly") {
  auto d = make_design(16);
  std::mt19937_64 rng(43);
  const double g1 = d.sd.eigenvalues[0].real();
  const auto gd = design_gains(d.ps, g1, d.sd.gamma0, rng);
  auto law = lift_gains(d.ps, gd, d.sd, d.act, d.ops);
  assemble_closed_loop(d.ops, law);
  const auto rf = realify(law, d.sd, d.ops);
  // complex pair present: 2K channels
  CHECK(rf.n_channels == 2 * law.channel_count);
  CHECK((rf.closed_loop - law.closed_loop).norm() <=
        1e-7 * law.closed_loop.norm());
  // spectra match as sets
  Eigen::EigenSolver<Mat> e1(law.closed_loop, false), e2(rf.closed_loop, false);
  for (int i = 0; i < e1.eigenvalues().size(); ++i) {
    double best = 1e300;
    for (int j = 0; j < e2.eigenvalues().size(); ++j)
      best = std::min(best,
                      std::abs(e1.eigenvalues()(i) - e2.eigenvalues()(j)));
    CHECK(best <= 1e-7 * (1 + std::abs(e1.eigenvalues()(i))));
  }
}

TEST_CASE("realify handles phase-rotated complex channel data") {
  // rotating (p_k, f_k) by opposite phases leaves the operator unchanged;
  // the real form must reproduce the same closed loop through 2K channels
  auto d = make_design(16);
  std::mt19937_64 rng(47);
  const double g1 = d.sd.eigenvalues[0].real();
  const auto gd = design_gains(d.ps, g1, d.sd.gamma0, rng);
  auto law = lift_gains(d.ps, gd, d.sd, d.act, d.ops);
  assemble_closed_loop(d.ops, law);
  FeedbackLaw rotated = law;
  const Cplx phase = std::polar(1.0, 0.73);
  rotated.boundary_actuators *= phase;
  rotated.interior_actuators *= phase;
  rotated.theta_boundary /= phase;
  rotated.theta_interior /= phase;
  const auto rf = realify(rotated, d.sd, d.ops);
  CHECK(rf.n_channels == 2 * law.channel_count);
  CHECK((rf.closed_loop - law.closed_loop).norm() <=
        1e-7 * law.closed_loop.norm());
}

TEST_CASE("zero law realifies to a zero law") {
  DiscreteOperators2D ops(unit_mesh(12), 0.01);
  const auto sd = compute_spectrum(ops.oseen_reduced());
  const auto tr = adjoint_normal_traces(sd, ops);
  std::mt19937_64 rng(1);
  const auto act = select_actuators(sd, tr, ops, rng);
  const auto ps = build_projected_system(sd, ops, act);
  const auto gd = design_gains(ps, 1.0, 0.5, rng);
  auto law = lift_gains(ps, gd, sd, act, ops);
  assemble_closed_loop(ops, law);
  const auto rf = realify(law, sd, ops);
  CHECK(rf.n_channels == 0);
  CHECK((rf.closed_loop - ops.oseen_reduced()).norm() == 0.0);
}

TEST_CASE("closed loop agrees with the boundary-lifting route") {
  // independent assembly: A_F x = A(x - D F x) + k P D F x + G x, column by
  // column through the stationary boundary solve
  auto d = make_design(16);
  std::mt19937_64 rng(53);
  const double g1 = d.sd.eigenvalues[0].real();
  const auto gd = design_gains(d.ps, g1, d.sd.gamma0, rng);
  auto law = lift_gains(d.ps, gd, d.sd, d.act, d.ops);
  assemble_closed_loop(d.ops, law);

  const int ns = d.ops.layout().ns();
  const SpMat m_ii =
      d.ops.nu0() * d.ops.laplacian_ii() - d.ops.convection_ii();
  const Mat theta_b = law.theta_boundary.real();
  const Mat theta_q = law.theta_interior.real();
  const Mat fk = law.boundary_actuators.real();
  const Mat uk = law.interior_actuators.real();
  Mat af(ns, ns);
  for (int j = 0; j < ns; ++j) {
    Vec e = Vec::Zero(ns);
    e[j] = 1.0;
    const Vec x = d.ops.apply_basis(e);
    const Vec g = fk * (theta_b * e);
    const Vec psi = d.ops.dirichlet_solve(g);
    const double k = d.ops.dirichlet_shift();
    Vec col = d.ops.apply_basis_t(m_ii * (x - psi)) +
              k * d.ops.apply_basis_t(d.ops.leray(psi));
    col += d.ops.apply_basis_t(d.ops.collar_restriction().transpose() *
                               (uk * (theta_q * e)));
    af.col(j) = col;
  }
  CHECK((af - law.closed_loop).norm() <= 1e-7 * law.closed_loop.norm());
}
