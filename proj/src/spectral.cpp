// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <stdexcept>

namespace flowstab {

namespace {

bool re_desc(const Cplx& a, const Cplx& b) {
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

}  // namespace

void group_unstable(SpectralData& sd, const SpectralOptions& opt) {
  sd.clusters.clear();
  sd.cluster_lambda.clear();
  sd.multiplicity.clear();
  sd.grouping_ambiguous = false;
  sd.channel_count = 0;
  const int n = sd.n_unstable;
  if (n == 0) return;

  double max_mod = 0.0;
  for (int i = 0; i < n; ++i)
    max_mod = std::max(max_mod, std::abs(sd.eigenvalues[std::size_t(i)]));
  const double tol = opt.tol_group_rel * std::max(max_mod, 1e-30);

  // transitive chaining: a cluster is a connected component of the
  // proximity graph, so near-coincident chains merge and an overly wide
  // component is flagged as ambiguous below
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    if (used[std::size_t(i)]) continue;
    std::vector<int> cl{i};
    used[std::size_t(i)] = true;
    for (std::size_t head = 0; head < cl.size(); ++head) {
      for (int j = 0; j < n; ++j) {
        if (used[std::size_t(j)]) continue;
        if (std::abs(sd.eigenvalues[std::size_t(j)] -
                     sd.eigenvalues[std::size_t(cl[head])]) <= tol) {
          cl.push_back(j);
          used[std::size_t(j)] = true;
        }
      }
    }
    double diam = 0.0;
    for (int a : cl)
      for (int b : cl)
        diam = std::max(diam, std::abs(sd.eigenvalues[std::size_t(a)] -
                                       sd.eigenvalues[std::size_t(b)]));
    if (diam > 10 * tol) sd.grouping_ambiguous = true;

    Cplx mean(0, 0);
    for (int a : cl) mean += sd.eigenvalues[std::size_t(a)];
    mean /= double(cl.size());

    int ell = int(cl.size());
    if (sd.phi.cols() >= n && !cl.empty()) {
      CMat block(sd.phi.rows(), cl.size());
      for (std::size_t c = 0; c < cl.size(); ++c)
        block.col(Eigen::Index(c)) = sd.phi.col(cl[c]);
      const auto sv = block.jacobiSvd().singularValues();
      ell = 0;
      for (int c = 0; c < sv.size(); ++c)
        if (sv(c) > opt.svd_tol * sv(0)) ++ell;
    }
    sd.clusters.push_back(cl);
    sd.cluster_lambda.push_back(mean);
    sd.multiplicity.push_back(ell);
    sd.channel_count = std::max(sd.channel_count, ell);
  }
}

SpectralData compute_spectrum(const Mat& a, const SpectralOptions& opt) {
  const int n = int(a.rows());
  if (n > opt.dense_cutoff)
    throw std::invalid_argument(
        "matrix exceeds the dense cutoff; use the Arnoldi path");
  SpectralData sd;

  Eigen::ComplexEigenSolver<CMat> es(a.cast<Cplx>(), true);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("dense eigensolve failed");
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[std::size_t(i)] = i;
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    return re_desc(es.eigenvalues()(i), es.eigenvalues()(j));
  });
  sd.eigenvalues.resize(std::size_t(n));
  for (int i = 0; i < n; ++i)
    sd.eigenvalues[std::size_t(i)] = es.eigenvalues()(order[std::size_t(i)]);

  int nu = 0;
  while (nu < n && sd.eigenvalues[std::size_t(nu)].real() >= 0.0) ++nu;
  sd.n_unstable = nu;
  sd.lambda_stable_re = nu < n ? sd.eigenvalues[std::size_t(nu)].real() : 0.0;
  sd.gamma0 = (1.0 - opt.margin) * std::abs(sd.lambda_stable_re);

  if (nu > 0 && nu < n) {
    const double gap =
        sd.eigenvalues[std::size_t(nu - 1)].real() - sd.lambda_stable_re;
    if (gap < opt.gap_min)
      throw std::runtime_error(
          "unstable/stable spectral gap below gap_min; perturb nu0 to "
          "separate the spectrum");
  }

  sd.phi.resize(n, nu);
  sd.psi.resize(n, nu);
  sd.conj_partner.assign(std::size_t(nu), -1);
  if (nu == 0) {
    group_unstable(sd, opt);
    return sd;
  }

  for (int i = 0; i < nu; ++i)
    sd.phi.col(i) = es.eigenvectors().col(order[std::size_t(i)]);

  // transpose eigenvectors matched to the same eigenvalues
  Eigen::ComplexEigenSolver<CMat> est(a.transpose().cast<Cplx>(), true);
  if (est.info() != Eigen::Success)
    throw std::runtime_error("transpose eigensolve failed");
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  for (int i = 0; i < nu; ++i) {
    const Cplx lam = sd.eigenvalues[std::size_t(i)];
    int best = -1;
    double bd = 1e300;
    for (int j = 0; j < n; ++j) {
      if (taken[std::size_t(j)]) continue;
      const double d = std::abs(est.eigenvalues()(j) - lam);
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    taken[std::size_t(best)] = true;
    if (bd > 1e-8 * (1.0 + std::abs(lam)))
      throw std::runtime_error(
          "transpose eigenvalues do not match the direct spectrum");
    sd.psi.col(i) = est.eigenvectors().col(best);
  }

  // conjugate-pair bookkeeping: the -Im member of each pair is replaced by
  // the exact conjugate of the +Im member
  for (int i = 0; i < nu; ++i) {
    const Cplx lam = sd.eigenvalues[std::size_t(i)];
    if (std::abs(lam.imag()) < 1e-12) {
      sd.conj_partner[std::size_t(i)] = i;
      continue;
    }
    if (sd.conj_partner[std::size_t(i)] >= 0) continue;
    int best = -1;
    double bd = 1e300;
    for (int j = 0; j < nu; ++j) {
      if (j == i || sd.conj_partner[std::size_t(j)] >= 0) continue;
      const double d = std::abs(sd.eigenvalues[std::size_t(j)] - std::conj(lam));
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    if (best < 0)
      throw std::runtime_error("unstable spectrum is not conjugate closed");
    const int hi = lam.imag() > 0 ? i : best;
    const int lo = hi == i ? best : i;
    sd.eigenvalues[std::size_t(lo)] =
        std::conj(sd.eigenvalues[std::size_t(hi)]);
    sd.phi.col(lo) = sd.phi.col(hi).conjugate();
    sd.psi.col(lo) = sd.psi.col(hi).conjugate();
    sd.conj_partner[std::size_t(i)] = best;
    sd.conj_partner[std::size_t(best)] = i;
  }

  // canonical phase: eigenvectors of real eigenvalues are made exactly real
  for (int i = 0; i < nu; ++i) {
    if (sd.conj_partner[std::size_t(i)] != i) continue;
    for (CMat* m : {&sd.phi, &sd.psi}) {
      auto col = m->col(i);
      int kmax = 0;
      for (int k = 1; k < col.size(); ++k)
        if (std::abs(col[k]) > std::abs(col[kmax])) kmax = k;
      const Cplx phase = col[kmax] / std::abs(col[kmax]);
      col /= phase;
      if (col.imag().norm() > 1e-6 * col.real().norm())
        throw std::runtime_error(
            "eigenvector of a real eigenvalue is not phase-alignable");
      col = col.real().cast<Cplx>();
      col /= col.norm();
    }
  }

  group_unstable(sd, opt);

  // biorthogonalize cluster blocks: psi^T phi = I
  for (const auto& cl : sd.clusters) {
    CMat phic(n, cl.size()), psic(n, cl.size());
    for (std::size_t c = 0; c < cl.size(); ++c) {
      phic.col(Eigen::Index(c)) = sd.phi.col(cl[c]);
      psic.col(Eigen::Index(c)) = sd.psi.col(cl[c]);
    }
    const CMat gram = psic.transpose() * phic;
    const auto sv = gram.jacobiSvd().singularValues();
    if (sv(sv.size() - 1) <= 0 || sv(0) / sv(sv.size() - 1) > 1e10)
      throw std::runtime_error(
          "biorthogonalization breakdown (defective unstable cluster)");
    psic = psic * gram.inverse().transpose();
    for (std::size_t c = 0; c < cl.size(); ++c) sd.psi.col(cl[c]) = psic.col(Eigen::Index(c));
  }

  // keep exact conjugate symmetry after normalization
  for (int i = 0; i < nu; ++i) {
    const int p = sd.conj_partner[std::size_t(i)];
    if (p > i) {
      sd.phi.col(p) = sd.phi.col(i).conjugate();
      sd.psi.col(p) = sd.psi.col(i).conjugate();
    }
  }

  // eigenpair residuals
  double worst = 0.0;
  for (int i = 0; i < nu; ++i) {
    const Cplx lam = sd.eigenvalues[std::size_t(i)];
    worst = std::max(
        worst, (a * sd.phi.col(i) - lam * sd.phi.col(i)).norm() /
                   sd.phi.col(i).norm());
    worst = std::max(
        worst, (a.transpose() * sd.psi.col(i) - lam * sd.psi.col(i)).norm() /
                   sd.psi.col(i).norm());
  }
  sd.max_residual = worst;
  if (worst > opt.residual_tol)
    throw std::runtime_error("eigenpair residual exceeds tolerance");
  return sd;
}

ArnoldiResult arnoldi_rightmost(const SpMat& a, const SpMat& m, int n_wanted,
                                double sigma, int subspace, double tol,
                                int max_restart) {
  using CSpMat = Eigen::SparseMatrix<Cplx>;
  const int n = int(a.rows());
  const CSpMat ac = a.cast<Cplx>();
  const CSpMat mc = m.cast<Cplx>();
  CSpMat shifted = ac - Cplx(sigma, 0.0) * mc;
  Eigen::SparseLU<CSpMat> lu(shifted);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("arnoldi: shifted factorization failed");

  auto m_dot = [&](const CVec& x, const CVec& y) -> Cplx {
    return x.adjoint() * (mc * y);
  };

  std::string diag;
  for (int attempt = 0; attempt <= max_restart; ++attempt) {
    const int mdim = std::min(n, subspace);
    CMat v(n, mdim + 1);
    CMat h = CMat::Zero(mdim + 1, mdim);
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> gauss;
    CVec v0(n);
    for (int i = 0; i < n; ++i) v0[i] = Cplx(gauss(rng), gauss(rng));
    v0 /= std::sqrt(std::abs(m_dot(v0, v0)));
    v.col(0) = v0;

    int built = mdim;
    for (int j = 0; j < mdim; ++j) {
      CVec w = lu.solve(mc * v.col(j));
      // modified Gram-Schmidt with one re-orthogonalization pass
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const Cplx c = m_dot(v.col(i), w);
          h(i, j) += c;
          w -= c * v.col(i);
        }
      }
      const double beta = std::sqrt(std::abs(m_dot(w, w)));
      h(j + 1, j) = beta;
      if (beta < 1e-14) {
        built = j + 1;
        break;
      }
      v.col(j + 1) = w / beta;
    }

    const CMat hm = h.topLeftCorner(built, built);
    Eigen::ComplexEigenSolver<CMat> es(hm, true);
    std::vector<int> order(static_cast<std::size_t>(built));
    for (int i = 0; i < built; ++i) order[std::size_t(i)] = i;
    // shift-invert magnification: largest |theta| first
    std::sort(order.begin(), order.end(), [&](int i, int j) {
      return std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(j));
    });

    // shift-invert magnification does not rank by real part: sort all Ritz
    // values by real part and demand that the rightmost n_wanted converged
    std::sort(order.begin(), order.end(), [&](int i, int j) {
      const Cplx ti = es.eigenvalues()(i), tj = es.eigenvalues()(j);
      const Cplx li = std::abs(ti) < 1e-14 ? Cplx(-1e300, 0)
                                           : Cplx(sigma, 0.0) + 1.0 / ti;
      const Cplx lj = std::abs(tj) < 1e-14 ? Cplx(-1e300, 0)
                                           : Cplx(sigma, 0.0) + 1.0 / tj;
      return re_desc(li, lj);
    });
    ArnoldiResult out;
    const int keep = std::min(n_wanted, built);
    out.vectors.resize(n, keep);
    bool ok = keep == n_wanted;
    for (int c = 0; c < keep && ok; ++c) {
      const int j = order[std::size_t(c)];
      const Cplx theta = es.eigenvalues()(j);
      const Cplx lam = Cplx(sigma, 0.0) + 1.0 / theta;
      CVec x = v.leftCols(built) * es.eigenvectors().col(j);
      x /= x.norm();
      const double res = ((ac * x - lam * (mc * x)).norm()) /
                         std::max(1.0, std::abs(lam));
      out.max_residual = std::max(out.max_residual, res);
      if (res > tol) ok = false;
      out.eigenvalues.push_back(lam);
      out.vectors.col(c) = x;
    }
    if (ok) return out;
    diag = "rightmost Ritz residual " + std::to_string(out.max_residual) +
           " at subspace " + std::to_string(mdim);
    subspace = int(subspace * 1.7) + 8;
  }
  throw std::runtime_error("arnoldi failed to converge: " + diag);
}

Mat spectral_projector_schur(const Mat& a, const SpectralOptions& opt) {
  (void)opt;
  const int n = int(a.rows());
  auto unstable = [](Cplx z) { return z.real() >= 0.0; };
  CMat q, t, qt, tt;
  const int nu = ordered_complex_schur(a.cast<Cplx>(), unstable, q, t);
  if (nu == 0) return Mat::Zero(n, n);
  ordered_complex_schur(a.transpose().cast<Cplx>(), unstable, qt, tt);
  const CMat q1 = q.leftCols(nu);
  const CMat q1t = qt.leftCols(nu);
  const CMat gram = q1t.transpose() * q1;
  const CMat p = q1 * gram.inverse() * q1t.transpose();
  if (p.imag().cwiseAbs().maxCoeff() > 1e-8 * (1 + p.real().cwiseAbs().maxCoeff()))
    throw std::runtime_error("schur projector has a large imaginary part");
  return p.real();
}

Mat spectral_projector_contour(const Mat& a, const SpectralData& sd,
                               const SpectralOptions& opt) {
  const int n = int(a.rows());
  const int nu = sd.n_unstable;
  if (nu == 0) return Mat::Zero(n, n);

  double re_lo = 1e300, re_hi = -1e300, im_max = 0.0;
  for (int i = 0; i < nu; ++i) {
    re_lo = std::min(re_lo, sd.eigenvalues[std::size_t(i)].real());
    re_hi = std::max(re_hi, sd.eigenvalues[std::size_t(i)].real());
    im_max = std::max(im_max, std::abs(sd.eigenvalues[std::size_t(i)].imag()));
  }
  const double gap = re_lo - sd.lambda_stable_re;

  auto attempt = [&](double inflate) -> Mat {
    const double cx = 0.5 * (re_lo + re_hi);
    const double ax = 0.5 * (re_hi - re_lo) + 0.5 * gap;
    double worst = 0.0;
    for (int i = 0; i < nu; ++i) {
      const double t = (sd.eigenvalues[std::size_t(i)].real() - cx) / ax;
      worst = std::max(worst, t * t);
    }
    const double bx =
        inflate * (im_max + 0.5 + 0.3 * gap) /
        std::sqrt(std::max(1e-12, 1.0 - std::min(0.95, worst)));
    // verify separation on the scaled metric
    for (std::size_t i = 0; i < sd.eigenvalues.size(); ++i) {
      const Cplx lam = sd.eigenvalues[i];
      const double s = std::pow((lam.real() - cx) / ax, 2) +
                       std::pow(lam.imag() / bx, 2);
      const bool inside = int(i) < nu;
      if (inside && s > 0.93) throw std::runtime_error("contour excludes an unstable eigenvalue");
      if (!inside && s < 1.04) throw std::runtime_error("contour swallows a stable eigenvalue");
    }
    // eccentric contours need proportionally more trapezoid nodes
    const int nq = opt.n_quad *
                   std::max(1, int(std::ceil(2.0 * bx / std::max(ax, 1e-12))));
    CMat p = CMat::Zero(n, n);
    const CMat ac = a.cast<Cplx>();
    for (int k = 0; k < nq; ++k) {
      const double th = 2 * M_PI * (k + 0.5) / nq;
      const Cplx z(cx + ax * std::cos(th), bx * std::sin(th));
      const Cplx dz(-ax * std::sin(th), bx * std::cos(th));
      const CMat res = (z * CMat::Identity(n, n) - ac).partialPivLu().inverse();
      p += res * dz;
    }
    p *= Cplx(0.0, -1.0) / double(nq);  // (1/2pi i) * (2pi/nq) sum
    if (p.imag().cwiseAbs().maxCoeff() >
        1e-6 * (1 + p.real().cwiseAbs().maxCoeff()))
      throw std::runtime_error("contour projector has a large imaginary part");
    return p.real();
  };

  try {
    return attempt(1.25);
  } catch (const std::exception&) {
    return attempt(1.8);  // one retry with an enlarged contour
  }
}

Mat spectral_projector_modes(const SpectralData& sd) {
  const int n = int(sd.phi.rows());
  if (sd.n_unstable == 0) return Mat::Zero(n, n);
  const CMat p = sd.phi * sd.psi.transpose();
  return p.real();
}

AdjointTraces adjoint_normal_traces(const SpectralData& sd,
                                    const DiscreteOperators2D& ops) {
  const int nb = ops.nb();
  const int nu = sd.n_unstable;
  AdjointTraces tr;
  tr.tangential = CMat::Zero(nb, nu);
  tr.normal_component = CMat::Zero(nb, nu);
  tr.degenerate.assign(std::size_t(nu), false);
  const auto& mesh = ops.mesh();
  for (int j = 0; j < nu; ++j) {
    const Vec re = ops.apply_basis(sd.psi.col(j).real());
    const Vec im = ops.apply_basis(sd.psi.col(j).imag());
    const Vec t_re = ops.tangential_dn_trace(re);
    const Vec t_im = ops.tangential_dn_trace(im);
    const Vec n_re = ops.normal_dn_trace(re);
    const Vec n_im = ops.normal_dn_trace(im);
    for (int b : mesh.patch) {
      tr.tangential(b, j) = Cplx(t_re[b], t_im[b]);
      tr.normal_component(b, j) = Cplx(n_re[b], n_im[b]);
    }
    if (tr.tangential.col(j).norm() < 1e-12) tr.degenerate[std::size_t(j)] = true;
  }
  return tr;
}

}  // namespace flowstab
