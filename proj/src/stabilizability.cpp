// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/stabilizability.hpp"

#include <Eigen/SVD>

#include <stdexcept>

namespace flowstab {

namespace {

int numerical_rank(const Vec& sv, double tol_rel) {
  if (sv.size() == 0 || sv(0) <= 0) return 0;
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol_rel * sv(0)) ++r;
  return r;
}

// K leading left singular vectors of the real stack [Re M | Im M], rows
// weighted by sqrt(w); returned orthonormal in the w-inner product.
Mat leading_directions(const CMat& m, const Vec& w, int k) {
  const int rows = int(m.rows());
  Mat stack(rows, 2 * m.cols());
  stack << m.real(), m.imag();
  const Vec sw = w.array().sqrt();
  stack = sw.asDiagonal() * stack;
  Eigen::JacobiSVD<Mat> svd(stack, Eigen::ComputeThinU);
  Mat out(rows, k);
  for (int j = 0; j < k; ++j) {
    if (j < svd.singularValues().size() && svd.singularValues()(j) > 0)
      out.col(j) = svd.matrixU().col(j).array() / sw.array();
    else
      out.col(j).setZero();
  }
  return out;
}

}  // namespace

std::vector<CMat> build_boundary_pairings(const SpectralData& sd,
                                          const AdjointTraces& traces,
                                          const ActuatorSet& act,
                                          const DiscreteOperators2D& ops) {
  const Vec w = ops.boundary_weights();
  std::vector<CMat> blocks;
  for (const auto& cl : sd.clusters) {
    CMat wi(cl.size(), act.channel_count);
    for (std::size_t j = 0; j < cl.size(); ++j)
      for (int k = 0; k < act.channel_count; ++k) {
        Cplx s(0, 0);
        for (int b : ops.mesh().patch)
          s += w[b] * act.boundary(b, k) * traces.tangential(b, cl[j]);
        wi(Eigen::Index(j), k) = s;
      }
    blocks.push_back(wi);
  }
  return blocks;
}

std::vector<CMat> build_interior_pairings(const SpectralData& sd,
                                          const ActuatorSet& act,
                                          const DiscreteOperators2D& ops) {
  const double vol = ops.mesh().cell_volume();
  const auto& rt = ops.collar_restriction();
  std::vector<CMat> blocks;
  for (const auto& cl : sd.clusters) {
    CMat ui(cl.size(), act.channel_count);
    for (std::size_t j = 0; j < cl.size(); ++j) {
      const Vec re = rt * ops.apply_basis(sd.psi.col(cl[j]).real());
      const Vec im = rt * ops.apply_basis(sd.psi.col(cl[j]).imag());
      for (int k = 0; k < act.channel_count; ++k) {
        const double pr = vol * act.interior.col(k).dot(re);
        const double pi = vol * act.interior.col(k).dot(im);
        ui(Eigen::Index(j), k) = Cplx(pr, pi);
      }
    }
    blocks.push_back(ui);
  }
  return blocks;
}

ControllabilityReport rank_test(const SpectralData& sd,
                                const std::vector<CMat>& w_blocks,
                                const std::vector<CMat>& u_blocks, double nu0,
                                double svd_tol) {
  ControllabilityReport rep;
  rep.svd_tol = svd_tol;
  rep.w_blocks = w_blocks;
  rep.u_blocks = u_blocks;
  rep.pass = true;
  for (std::size_t i = 0; i < sd.clusters.size(); ++i) {
    RankEntry e;
    e.lambda = sd.cluster_lambda[i];
    e.ell = sd.multiplicity[i];
    const CMat& wi = w_blocks[i];
    const CMat& ui = u_blocks[i];
    CMat aug(wi.rows(), wi.cols() + ui.cols());
    aug << -nu0 * wi, ui;
    e.singular_values = aug.jacobiSvd().singularValues();
    e.singular_values_boundary = wi.jacobiSvd().singularValues();
    e.rank_augmented = numerical_rank(e.singular_values, svd_tol);
    e.rank_boundary_only = numerical_rank(e.singular_values_boundary, svd_tol);
    e.pass = e.rank_augmented >= e.ell;
    rep.pass = rep.pass && e.pass;
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

ActuatorSet select_actuators(const SpectralData& sd,
                             const AdjointTraces& traces,
                             const DiscreteOperators2D& ops,
                             std::mt19937_64& rng, double svd_tol,
                             int max_retries) {
  ActuatorSet act;
  act.channel_count = sd.channel_count;
  const int nb = ops.nb();
  const int ncollar = int(ops.mesh().collar_cells.size());
  if (sd.channel_count == 0) {
    act.boundary = Mat::Zero(nb, 0);
    act.interior = Mat::Zero(ncollar, 0);
    return act;
  }
  const int k = sd.channel_count;
  const Vec wq = ops.boundary_weights();
  act.boundary = leading_directions(traces.tangential, wq, k);
  // exact support: the SVD leaves rounding dust on off-patch rows
  for (int b = 0; b < nb; ++b)
    if (!ops.mesh().in_patch(b)) act.boundary.row(b).setZero();

  const auto& rt = ops.collar_restriction();
  CMat collar_traces(ncollar, sd.n_unstable);
  for (int j = 0; j < sd.n_unstable; ++j) {
    const Vec re = rt * ops.apply_basis(sd.psi.col(j).real());
    const Vec im = rt * ops.apply_basis(sd.psi.col(j).imag());
    collar_traces.col(j) = re + Cplx(0, 1) * im;
  }
  const Vec wc = Vec::Constant(ncollar, ops.mesh().cell_volume());
  act.interior = leading_directions(collar_traces, wc, k);

  std::normal_distribution<double> gauss;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const auto wb = build_boundary_pairings(sd, traces, act, ops);
    const auto ub = build_interior_pairings(sd, act, ops);
    const auto rep = rank_test(sd, wb, ub, ops.nu0(), svd_tol);
    if (rep.pass) return act;
    // augment with random elements of the trace span and retry
    for (int c = 0; c < k; ++c) {
      Vec mix = Vec::Zero(nb);
      Vec mix_c = Vec::Zero(ncollar);
      for (int j = 0; j < sd.n_unstable; ++j) {
        const double a = gauss(rng), b = gauss(rng);
        mix += a * traces.tangential.col(j).real() +
               b * traces.tangential.col(j).imag();
        mix_c +=
            a * collar_traces.col(j).real() + b * collar_traces.col(j).imag();
      }
      act.boundary.col(c) += 0.5 * mix / std::max(1e-30, mix.norm());
      act.interior.col(c) += 0.5 * mix_c / std::max(1e-30, mix_c.norm());
      act.boundary.col(c) /= act.boundary.col(c).norm();
      act.interior.col(c) /= act.interior.col(c).norm();
    }
  }
  throw std::runtime_error(
      "actuator selection could not reach the required rank; this mirrors a "
      "unique-continuation failure of the overdetermined eigenproblem");
}

UcpCheck ucp_counterexample_check(const DomainMesh& mesh, double a) {
  if (mesh.d != 2) throw std::invalid_argument("counterexample check is 2D");
  const int nx = mesh.dims[0], ny = mesh.dims[1];
  const double hx = mesh.h[0], hy = mesh.h[1];
  // raw staggered samples of u1 = 0, u2 = a x^2, p = 2 a y
  Eigen::ArrayXXd v(nx, ny + 1), p(nx, ny);
  for (int i = 0; i < nx; ++i) {
    const double x = (i + 0.5) * hx;
    for (int j = 0; j <= ny; ++j) v(i, j) = a * x * x;
    for (int j = 0; j < ny; ++j) p(i, j) = 2.0 * a * (j + 0.5) * hy;
  }
  UcpCheck out;
  // momentum residual at interior stencil points; the u1 equation is
  // identically zero because p does not depend on x
  for (int i = 1; i <= nx - 2; ++i)
    for (int j = 1; j <= ny - 1; ++j) {
      const double lap =
          (v(i + 1, j) - 2 * v(i, j) + v(i - 1, j)) / (hx * hx) +
          (v(i, j + 1) - 2 * v(i, j) + v(i, j - 1)) / (hy * hy);
      const double dpy = (p(i, j) - p(i, j - 1)) / hy;
      out.interior_residual =
          std::max(out.interior_residual, std::abs(lap - dpy));
    }
  // Cauchy data on the face {x=0}: u vanishes there and so does the normal
  // derivative (one-sided second order is exact on quadratics)
  for (int j = 1; j <= ny - 1; ++j) {
    const double f1 = 0.5 * (v(0, j) + v(0, j + 1));
    const double f2 = 0.5 * (v(1, j) + v(1, j + 1));
    const double dv_dx = (9 * f1 - f2) / (3 * hx);  // v(0,y) = 0 exactly
    out.boundary_data = std::max(out.boundary_data, std::abs(dv_dx));
  }
  return out;
}

}  // namespace flowstab
