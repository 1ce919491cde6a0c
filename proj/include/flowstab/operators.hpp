// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "flowstab/mesh.hpp"

namespace flowstab {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Indexing of the 2D MAC degrees of freedom.
///
/// Interior velocity DOFs exclude faces on the boundary: normal-boundary
/// faces carry the (zero) normal trace and tangential boundary values are
/// separate explicit DOFs, one per boundary node, lifted into wall slots.
struct Layout2D {
  int nx = 0, ny = 0;
  double hx = 0, hy = 0;

  int nui() const { return (nx - 1) * ny; }
  int nvi() const { return nx * (ny - 1); }
  int ni() const { return nui() + nvi(); }
  int nc() const { return nx * ny; }
  int ns() const { return (nx - 1) * (ny - 1); }  // interior stream vertices
  int nw() const { return 2 * (nx - 1) + 2 * (ny - 1); }  // wall slots

  // u interior: i in [1, nx-1], j in [0, ny-1]; position (i hx, (j+1/2) hy)
  int iu(int i, int j) const { return (i - 1) * ny + j; }
  // v interior: i in [0, nx-1], j in [1, ny-1]; position ((i+1/2) hx, j hy)
  int iv(int i, int j) const { return nui() + i * (ny - 1) + (j - 1); }
  int ic(int i, int j) const { return i * ny + j; }
  int istream(int i, int j) const { return (i - 1) * (ny - 1) + (j - 1); }

  // wall slots: bottom u(1..nx-1), top u(1..nx-1), left v(1..ny-1), right v
  int wb(int i) const { return i - 1; }
  int wt(int i) const { return (nx - 1) + (i - 1); }
  int wl(int j) const { return 2 * (nx - 1) + (j - 1); }
  int wr(int j) const { return 2 * (nx - 1) + (ny - 1) + (j - 1); }
};

struct Equilibrium {
  Vec xe;       // interior velocity DOFs (solenoidal, zero trace)
  Vec pe;       // cell pressures
  Vec f;        // body force on interior velocity DOFs
  double residual_norm = 0.0;
  bool converged = true;
  int iterations = 0;
};

/// Closed-form manufactured equilibrium on [0,Lx]x[0,Ly]: a Taylor-Green
/// style cellular vortex array with zero trace,
///   stream   psi ~ a sin^2(mx pi x/Lx) sin^2(my pi y/Ly)
///   pressure pe  = b cos(mx pi x/Lx) cos(my pi y/Ly)
/// normalized so max|u| = a.
struct ManufacturedFlow {
  double lx = 1.0, ly = 1.0;
  double amplitude = 1.0;
  double pressure_amplitude = 0.0;
  int mode_x = 1, mode_y = 1;

  double stream(double x, double y) const;
  double u(double x, double y) const;
  double v(double x, double y) const;
  double pressure(double x, double y) const;
  // body force f = -nu Lap(ye) + (ye.grad)ye + grad(pe), componentwise
  double force_u(double x, double y, double nu0) const;
  double force_v(double x, double y, double nu0) const;
};

struct AdjointIdentityResult {
  double residual = 0.0;   // relative, unless flagged_absolute
  double duality_pairing = 0.0;  // <A* v, D g>
  double trace_pairing = 0.0;    // nu0 <dv/dnu, g> on the boundary
  bool flagged_absolute = false;
};

/// Assembled discrete operators on one 2D mesh: divergence/gradient pair,
/// Leray projection, vector Laplacian with explicit tangential wall
/// coupling, Oseen convection blocks, the orthonormal solenoidal basis, and
/// the boundary-to-interior Dirichlet solve.
class DiscreteOperators2D {
 public:
  DiscreteOperators2D(const DomainMesh& mesh, double nu0);

  const DomainMesh& mesh() const { return mesh_; }
  const Layout2D& layout() const { return lay_; }
  double nu0() const { return nu0_; }
  double volume_element() const { return lay_.hx * lay_.hy; }
  int nb() const { return int(mesh_.boundary.size()); }

  const SpMat& divergence() const { return div_; }
  const SpMat& laplacian_ii() const { return lap_ii_; }
  const SpMat& laplacian_wall() const { return lap_wall_; }
  const SpMat& wall_lift() const { return blift_; }
  const SpMat& stream_curl() const { return scurl_; }

  // --- Leray projection -----------------------------------------------
  Vec leray(const Vec& x) const;
  Mat leray_dense() const;  // small meshes only
  bool pressure_poisson_pinned() const { return true; }

  // --- solenoidal orthonormal basis Z (ni x ns) ------------------------
  Vec apply_basis(const Vec& xr) const;        // Z xr
  Vec apply_basis_t(const Vec& x) const;       // Z^T x
  Mat reduce_dense(const SpMat& op_ii) const;  // Z^T op Z
  Mat basis_dense() const;                     // Z materialized

  // --- equilibrium ------------------------------------------------------
  Equilibrium solve_equilibrium_manufactured(double amplitude,
                                             double pressure_amplitude = 0.0,
                                             int mode_x = 1, int mode_y = 1);
  Equilibrium solve_equilibrium_newton(const Vec& f, const Vec& xr_guess,
                                       int max_iter = 30, double tol = 1e-10);
  void set_equilibrium(const Vec& xe);
  bool has_equilibrium() const { return has_ye_; }
  const Vec& equilibrium_field() const { return ye_; }

  // --- Oseen pieces -----------------------------------------------------
  const SpMat& convection_ii() const { return conv_ii_; }
  const SpMat& convection_wall() const { return conv_wall_; }
  /// Oseen operator on the solenoidal basis: Z^T (nu0 Lap - Conv) Z.
  Mat oseen_reduced() const;
  /// Stokes operator A = -P Lap (no viscosity factor), reduced: SPD.
  Mat stokes_reduced() const;
  /// Boundary input block: Z^T (nu0 Lap_wall - Conv_wall) Blift, ns x nb.
  Mat boundary_input_reduced() const;

  /// Quadratic convection (z.grad)z with tangential wall data g (node
  /// values); pass empty g for zero trace.
  Vec convect_quadratic(const Vec& x, const Vec& g_nodes = Vec()) const;

  // --- Dirichlet map ----------------------------------------------------
  /// Solve (k + A_oseen) psi + grad(pi) = 0, div psi = 0, psi|_G = g.
  /// k escalates over {k0, 1, 10, 100} until the solve is well conditioned.
  Vec dirichlet_solve(const Vec& g_nodes) const;
  struct DirichletSolution {
    Vec velocity;
    Vec pressure;
  };
  DirichletSolution dirichlet_solve_full(const Vec& g_nodes) const;
  double dirichlet_shift() const { return k_used_; }
  void set_dirichlet_shift(double k0) { k_request_ = k0; dir_.reset(); }

  // --- boundary traces --------------------------------------------------
  /// Outward-normal derivative of the tangential component at each boundary
  /// node (one-sided second order, zero-trace assumption).
  Vec tangential_dn_trace(const Vec& x) const;
  /// Outward-normal derivative of the normal component at each node.
  Vec normal_dn_trace(const Vec& x) const;
  /// Quadrature weights per boundary node (face measure).
  Vec boundary_weights() const;

  AdjointIdentityResult adjoint_identity_residual(const Vec& v,
                                                  const Vec& g_nodes) const;

  // --- interpolation / collar -------------------------------------------
  /// Cell-centered components (nc x 2) by face averaging.
  Mat cell_center_values(const Vec& x) const;
  /// Zero-mean pressure whose gradient is the non-solenoidal part of r.
  Vec recover_pressure(const Vec& r) const;
  /// Pairing from faces to collar-cell tangential scalars (ncollar x ni).
  const SpMat& collar_restriction() const { return rtau_; }
  double div_inf_norm(const Vec& x) const;

  // --- deterministic smooth random data ---------------------------------
  Vec random_smooth_field(std::mt19937_64& rng, int max_mode = 3) const;
  Vec random_smooth_boundary(std::mt19937_64& rng, int max_mode = 3,
                             bool patch_only = false) const;

 private:
  void assemble_static();
  void assemble_convection();
  void build_dirichlet(double k) const;

  DomainMesh mesh_;
  Layout2D lay_;
  double nu0_;

  SpMat div_, lap_ii_, lap_wall_, blift_, scurl_, rtau_;
  SpMat conv_ii_, conv_wall_;
  Vec ye_;
  bool has_ye_ = false;

  std::unique_ptr<Eigen::SimplicialLDLT<SpMat>> poisson_;  // pinned Div Div^T
  std::unique_ptr<Eigen::SimplicialLLT<SpMat>> gram_;      // S^T S

  double k_request_ = 0.0;
  mutable double k_used_ = 0.0;
  mutable std::unique_ptr<Eigen::SparseLU<SpMat>> dir_;
};

}  // namespace flowstab
