// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/feedback.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace flowstab {

namespace {

// A complex matrix that must be real up to rounding; throws otherwise.
Mat assert_real(const CMat& m, double tol, const char* what) {
  const double scale = std::max(1.0, m.real().cwiseAbs().maxCoeff());
  if (m.imag().cwiseAbs().maxCoeff() > tol * scale)
    throw std::runtime_error(std::string(what) +
                             ": expected a real-valued operator (conjugate "
                             "bookkeeping is broken)");
  return m.real();
}

}  // namespace

ProjectedSystem build_projected_system(const SpectralData& sd,
                                       const DiscreteOperators2D& ops,
                                       const ActuatorSet& act) {
  ProjectedSystem ps;
  const int n = sd.n_unstable;
  const int k = act.channel_count;
  ps.phi = sd.phi;
  ps.psi = sd.psi;
  ps.conj_partner = sd.conj_partner;
  ps.channel_count = k;
  ps.unstable_eigenvalues.assign(sd.eigenvalues.begin(),
                                 sd.eigenvalues.begin() + n);
  if (n == 0) {
    ps.lambda_u.resize(0, 0);
    ps.b_boundary.resize(0, k);
    ps.b_interior.resize(0, k);
    return ps;
  }
  const Mat asr = ops.oseen_reduced();
  ps.lambda_u = sd.psi.transpose() * (asr * sd.phi).cast<Cplx>().eval();

  ps.b_boundary.resize(n, k);
  ps.b_interior.resize(n, k);
  for (int c = 0; c < k; ++c) {
    // boundary channel through the stationary lifting solve; with a nonzero
    // solvability shift the lifted coordinates pick up the exact correction
    // (shift - Lambda_u) instead of -Lambda_u
    const Vec df = ops.dirichlet_solve(act.boundary.col(c));
    const CVec coords = sd.psi.transpose() * ops.apply_basis_t(df).cast<Cplx>();
    const double shift = ops.dirichlet_shift();
    ps.b_boundary.col(c) =
        shift * coords - ps.lambda_u * coords;
    // interior channel: collar-supported tangential field, projected
    const Vec field = ops.collar_restriction().transpose() * act.interior.col(c);
    ps.b_interior.col(c) =
        sd.psi.transpose() * ops.apply_basis_t(field).cast<Cplx>();
  }
  return ps;
}

bool hautus_controllable(const ProjectedSystem& ps, double svd_tol) {
  const int n = ps.order();
  if (n == 0) return true;
  const CMat b = ps.input();
  if (b.norm() == 0.0) return false;
  for (const Cplx& lam : ps.unstable_eigenvalues) {
    CMat m(n, n + b.cols());
    m << lam * CMat::Identity(n, n) - ps.lambda_u, b;
    const auto sv = m.jacobiSvd().singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) > svd_tol * sv(0)) ++rank;
    if (rank < n) return false;
  }
  return true;
}

GainDesign design_gains(const ProjectedSystem& ps, double gamma1,
                        double gamma0, std::mt19937_64& rng,
                        GainMethod method) {
  GainDesign gd;
  gd.gamma1 = gamma1;
  gd.method = method;
  const int n = ps.order();
  const int k2 = 2 * ps.channel_count;
  if (n == 0) {
    gd.gains.resize(k2, 0);
    gd.projected_abscissa = 0.0;
    return gd;
  }
  if (gamma1 <= gamma0)
    throw std::invalid_argument("gamma1 must exceed gamma0");
  if (!hautus_controllable(ps))
    throw std::runtime_error("projected pair is not controllable");

  const CMat b = ps.input();
  auto closed_abscissa = [&](const CMat& kg) {
    return spectral_abscissa(CMat(ps.lambda_u - b * kg));
  };

  auto try_lqr = [&]() -> CMat {
    const CMat shifted =
        ps.lambda_u + gamma1 * CMat::Identity(n, n);
    const CMat x = solve_care(shifted, b, CMat::Identity(n, n));
    return CMat(b.adjoint() * x);
  };
  auto try_place = [&]() -> CMat {
    // conjugate-symmetric targets: keep the imaginary parts, push the real
    // parts to -gamma1 with a small spread for distinctness
    CVec targets(n);
    std::vector<bool> seen(std::size_t(n), false);
    int slot = 0;
    for (int i = 0; i < n; ++i) {
      if (seen[std::size_t(i)]) continue;
      const int p = ps.conj_partner[std::size_t(i)];
      const double re = -gamma1 * (1.0 + 0.07 * slot);
      targets[i] = Cplx(re, ps.unstable_eigenvalues[std::size_t(i)].imag());
      seen[std::size_t(i)] = true;
      if (p != i) {
        targets[p] = std::conj(targets[i]);
        seen[std::size_t(p)] = true;
      }
      ++slot;
    }
    return place_poles(ps.lambda_u, b, targets, rng);
  };

  CMat kg;
  if (method == GainMethod::ShiftedLqr) {
    try {
      kg = try_lqr();
      if (closed_abscissa(kg) > -gamma1 + 1e-6) kg = try_place();
    } catch (const std::exception&) {
      kg = try_place();
      gd.method = GainMethod::Place;
    }
  } else {
    kg = try_place();
  }
  gd.gains = kg;
  gd.projected_abscissa = closed_abscissa(kg);
  if (gd.projected_abscissa > -gamma1 + 1e-6)
    throw std::runtime_error("gain design missed the requested decay rate");
  return gd;
}

Vec FeedbackLaw::boundary_data(const Vec& xr) const {
  if (empty()) return Vec::Zero(boundary_actuators.rows());
  const CVec nu = theta_boundary * xr.cast<Cplx>();
  return (boundary_actuators * nu).real();
}

Vec FeedbackLaw::channel_values(const Vec& xr) const {
  Vec out(2 * channel_count);
  if (empty()) return out;
  const CVec nu = theta_boundary * xr.cast<Cplx>();
  const CVec mu = theta_interior * xr.cast<Cplx>();
  out.head(channel_count) = nu.real();
  out.tail(channel_count) = mu.real();
  return out;
}

FeedbackLaw lift_gains(const ProjectedSystem& ps, const GainDesign& gd,
                       const SpectralData& sd, const ActuatorSet& act,
                       const DiscreteOperators2D& ops) {
  FeedbackLaw law;
  law.channel_count = ps.channel_count;
  law.gamma1 = gd.gamma1;
  law.gamma0 = sd.gamma0;
  const int n = ps.order();
  const int k = ps.channel_count;
  const int ns = int(ops.layout().ns());
  law.actuators = act;
  law.boundary_actuators = act.boundary.cast<Cplx>();
  law.interior_actuators = act.interior.cast<Cplx>();
  law.theta_boundary = CMat::Zero(k, ns);
  law.theta_interior = CMat::Zero(k, ns);
  law.p_functionals = CMat::Zero(ops.layout().ni(), k);
  law.q_functionals = CMat::Zero(ops.layout().ni(), k);
  if (n == 0 || k == 0) {
    law.closed_loop = ops.oseen_reduced();
    return law;
  }

  const CMat theta_v = -gd.gains.topRows(k) * ps.psi.transpose();
  const CMat theta_q = -gd.gains.bottomRows(k) * ps.psi.transpose();
  law.theta_boundary = theta_v;
  law.theta_interior = theta_q;

  // full-space functionals: <P_N w, p_k> reproduces the channel coordinate
  const double inv_vol = 1.0 / ops.volume_element();
  for (int c = 0; c < k; ++c) {
    const Vec re_v = ops.apply_basis(theta_v.row(c).real().transpose());
    const Vec im_v = ops.apply_basis(theta_v.row(c).imag().transpose());
    law.p_functionals.col(c) =
        inv_vol * (re_v.cast<Cplx>() + Cplx(0, 1) * im_v.cast<Cplx>());
    const Vec re_q = ops.apply_basis(theta_q.row(c).real().transpose());
    const Vec im_q = ops.apply_basis(theta_q.row(c).imag().transpose());
    law.q_functionals.col(c) =
        inv_vol * (re_q.cast<Cplx>() + Cplx(0, 1) * im_q.cast<Cplx>());
  }
  return law;
}

ClosedLoopReport assemble_closed_loop(const DiscreteOperators2D& ops,
                                      FeedbackLaw& law) {
  const int ns = ops.layout().ns();
  Mat af = ops.oseen_reduced();
  if (!law.empty()) {
    const Mat b_in = ops.boundary_input_reduced();  // ns x nb
    const CMat bdry_op =
        b_in.cast<Cplx>() * (law.boundary_actuators * law.theta_boundary);
    // interior: collar embedding reduced column by column
    const int k = law.channel_count;
    CMat embed_c(ns, k);
    for (int c = 0; c < k; ++c) {
      const Vec re = ops.apply_basis_t(
          ops.collar_restriction().transpose() *
          law.interior_actuators.col(c).real());
      const Vec im = ops.apply_basis_t(
          ops.collar_restriction().transpose() *
          law.interior_actuators.col(c).imag());
      embed_c.col(c) = re + Cplx(0, 1) * im;
    }
    const CMat int_op = embed_c * law.theta_interior;
    af += assert_real(bdry_op + int_op, 1e-8, "closed-loop feedback");
  }
  law.closed_loop = af;
  ClosedLoopReport rep;
  Eigen::EigenSolver<Mat> es(af, false);
  std::vector<Cplx> ev(std::size_t(es.eigenvalues().size()));
  for (int i = 0; i < es.eigenvalues().size(); ++i) ev[std::size_t(i)] = es.eigenvalues()(i);
  std::sort(ev.begin(), ev.end(),
            [](const Cplx& a, const Cplx& b) { return a.real() > b.real(); });
  rep.abscissa = ev.empty() ? 0.0 : ev[0].real();
  const int head = std::min<std::size_t>(8, ev.size());
  rep.spectrum_head.assign(ev.begin(), ev.begin() + head);
  rep.pass = law.empty() ? rep.abscissa < 0.0
                         : rep.abscissa <= -law.gamma0 + 1e-9;
  return rep;
}

RealFormLaw realify(const FeedbackLaw& law, const SpectralData& sd,
                    const DiscreteOperators2D& ops) {
  RealFormLaw rf;
  const int ns = ops.layout().ns();
  const int k = law.channel_count;
  bool all_real = true;
  for (int i = 0; i < sd.n_unstable; ++i)
    if (sd.conj_partner[std::size_t(i)] != i) all_real = false;
  rf.n_channels = (k == 0) ? 0 : (all_real ? k : 2 * k);
  rf.f_channels = Mat::Zero(law.boundary_actuators.rows(), rf.n_channels);
  rf.u_channels = Mat::Zero(law.interior_actuators.rows(), rf.n_channels);
  rf.theta_boundary = Mat::Zero(rf.n_channels, ns);
  rf.theta_interior = Mat::Zero(rf.n_channels, ns);
  for (int c = 0; c < k; ++c) {
    if (all_real) {
      rf.f_channels.col(c) = law.boundary_actuators.col(c).real();
      rf.u_channels.col(c) = law.interior_actuators.col(c).real();
      rf.theta_boundary.row(c) = law.theta_boundary.row(c).real();
      rf.theta_interior.row(c) = law.theta_interior.row(c).real();
    } else {
      rf.f_channels.col(2 * c) = law.boundary_actuators.col(c).real();
      rf.f_channels.col(2 * c + 1) = -law.boundary_actuators.col(c).imag();
      rf.u_channels.col(2 * c) = law.interior_actuators.col(c).real();
      rf.u_channels.col(2 * c + 1) = -law.interior_actuators.col(c).imag();
      rf.theta_boundary.row(2 * c) = law.theta_boundary.row(c).real();
      rf.theta_boundary.row(2 * c + 1) = law.theta_boundary.row(c).imag();
      rf.theta_interior.row(2 * c) = law.theta_interior.row(c).real();
      rf.theta_interior.row(2 * c + 1) = law.theta_interior.row(c).imag();
    }
  }
  // assemble the real closed loop through the channel route
  Mat af = ops.oseen_reduced();
  if (rf.n_channels > 0) {
    const Mat b_in = ops.boundary_input_reduced();
    af += b_in * (rf.f_channels * rf.theta_boundary);
    Mat embed(ns, rf.n_channels);
    for (int c = 0; c < rf.n_channels; ++c)
      embed.col(c) = ops.apply_basis_t(ops.collar_restriction().transpose() *
                                       rf.u_channels.col(c));
    af += embed * rf.theta_interior;
  }
  rf.closed_loop = af;
  // the assembled matrices must agree: both realize the same operator
  if (!law.closed_loop.size())
    throw std::invalid_argument("realify needs an assembled closed loop");
  const double diff = (rf.closed_loop - law.closed_loop).norm();
  if (diff > 1e-7 * std::max(1.0, law.closed_loop.norm()))
    throw std::runtime_error(
        "real-form closed loop deviates from the complex design (basis "
        "bookkeeping bug)");
  return rf;
}

}  // namespace flowstab
