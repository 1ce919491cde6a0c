// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/operators.hpp"

#include <cmath>
#include <limits>

namespace flowstab {

namespace {

constexpr double kCondMax = 1e12;

using Arr = Eigen::ArrayXXd;

struct SideIndex {
  std::vector<int> left, right, bottom, top;
};

SideIndex side_index(const DomainMesh& mesh) {
  SideIndex s;
  s.left.resize(std::size_t(mesh.dims[1]), -1);
  s.right.resize(std::size_t(mesh.dims[1]), -1);
  s.bottom.resize(std::size_t(mesh.dims[0]), -1);
  s.top.resize(std::size_t(mesh.dims[0]), -1);
  for (std::size_t id = 0; id < mesh.boundary.size(); ++id) {
    const auto& b = mesh.boundary[id];
    switch (b.side) {
      case Side::Left: s.left[std::size_t(b.cell[1])] = int(id); break;
      case Side::Right: s.right[std::size_t(b.cell[1])] = int(id); break;
      case Side::Bottom: s.bottom[std::size_t(b.cell[0])] = int(id); break;
      case Side::Top: s.top[std::size_t(b.cell[0])] = int(id); break;
      default: break;
    }
  }
  return s;
}

}  // namespace

double ManufacturedFlow::stream(double x, double y) const {
  const double kx = mode_x * M_PI / lx, ky = mode_y * M_PI / ly;
  const double sx = std::sin(kx * x), sy = std::sin(ky * y);
  return amplitude / ky * sx * sx * sy * sy;
}
double ManufacturedFlow::u(double x, double y) const {
  const double kx = mode_x * M_PI / lx, ky = mode_y * M_PI / ly;
  const double sx = std::sin(kx * x);
  return amplitude * sx * sx * std::sin(2 * ky * y);
}
double ManufacturedFlow::v(double x, double y) const {
  const double kx = mode_x * M_PI / lx, ky = mode_y * M_PI / ly;
  const double sy = std::sin(ky * y);
  return -amplitude * kx / ky * std::sin(2 * kx * x) * sy * sy;
}
double ManufacturedFlow::pressure(double x, double y) const {
  const double kx = mode_x * M_PI / lx, ky = mode_y * M_PI / ly;
  return pressure_amplitude * std::cos(kx * x) * std::cos(ky * y);
}
double ManufacturedFlow::force_u(double x, double y, double nu0) const {
  const double kx = mode_x * M_PI / lx, ky = mode_y * M_PI / ly;
  const double a = amplitude;
  const double sx = std::sin(kx * x), s2x = std::sin(2 * kx * x);
  const double sy = std::sin(ky * y), s2y = std::sin(2 * ky * y);
  const double c2x = std::cos(2 * kx * x), c2y = std::cos(2 * ky * y);
  const double uu = a * sx * sx * s2y;
  const double vv = -a * kx / ky * s2x * sy * sy;
  const double lap_u = 2 * a * kx * kx * c2x * s2y - 4 * a * ky * ky * sx * sx * s2y;
  const double du_dx = a * kx * s2x * s2y;
  const double du_dy = 2 * a * ky * sx * sx * c2y;
  const double dp_dx = -pressure_amplitude * kx * std::sin(kx * x) * std::cos(ky * y);
  return -nu0 * lap_u + uu * du_dx + vv * du_dy + dp_dx;
}
double ManufacturedFlow::force_v(double x, double y, double nu0) const {
  const double kx = mode_x * M_PI / lx, ky = mode_y * M_PI / ly;
  const double a = amplitude;
  const double b = a * kx / ky;
  const double sx = std::sin(kx * x), s2x = std::sin(2 * kx * x);
  const double sy = std::sin(ky * y), s2y = std::sin(2 * ky * y);
  const double c2x = std::cos(2 * kx * x), c2y = std::cos(2 * ky * y);
  const double uu = a * sx * sx * s2y;
  const double vv = -b * s2x * sy * sy;
  const double lap_v = 4 * b * kx * kx * s2x * sy * sy - 2 * b * ky * ky * s2x * c2y;
  const double dv_dx = -2 * b * kx * c2x * sy * sy;
  const double dv_dy = -b * ky * s2x * s2y;
  const double dp_dy = -pressure_amplitude * ky * std::cos(kx * x) * std::sin(ky * y);
  return -nu0 * lap_v + uu * dv_dx + vv * dv_dy + dp_dy;
}

DiscreteOperators2D::DiscreteOperators2D(const DomainMesh& mesh, double nu0)
    : mesh_(mesh), nu0_(nu0) {
  if (mesh.d != 2)
    throw std::invalid_argument("operators are implemented for d=2 meshes");
  if (nu0 <= 0) throw std::invalid_argument("nu0 must be positive");
  lay_.nx = mesh.dims[0];
  lay_.ny = mesh.dims[1];
  lay_.hx = mesh.h[0];
  lay_.hy = mesh.h[1];
  assemble_static();
}

void DiscreteOperators2D::assemble_static() {
  const int nx = lay_.nx, ny = lay_.ny;
  const double hx = lay_.hx, hy = lay_.hy;
  using T = Eigen::Triplet<double>;

  // divergence, cells x interior faces
  {
    std::vector<T> t;
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j) {
        const int r = lay_.ic(i, j);
        if (i + 1 <= nx - 1) t.emplace_back(r, lay_.iu(i + 1, j), 1.0 / hx);
        if (i >= 1) t.emplace_back(r, lay_.iu(i, j), -1.0 / hx);
        if (j + 1 <= ny - 1) t.emplace_back(r, lay_.iv(i, j + 1), 1.0 / hy);
        if (j >= 1) t.emplace_back(r, lay_.iv(i, j), -1.0 / hy);
      }
    div_.resize(lay_.nc(), lay_.ni());
    div_.setFromTriplets(t.begin(), t.end());
  }

  // vector Laplacian: interior-interior block and wall coupling.
  // Tangential walls enter through ghost reflection (ghost = 2 g - first
  // interior value); normal-boundary faces sit on the grid and are zero.
  {
    std::vector<T> tii, tw;
    const double ax = 1.0 / (hx * hx), ay = 1.0 / (hy * hy);
    for (int i = 1; i <= nx - 1; ++i)
      for (int j = 0; j < ny; ++j) {
        const int r = lay_.iu(i, j);
        tii.emplace_back(r, r, -2.0 * ax);
        if (i + 1 <= nx - 1) tii.emplace_back(r, lay_.iu(i + 1, j), ax);
        if (i - 1 >= 1) tii.emplace_back(r, lay_.iu(i - 1, j), ax);
        if (j == 0) {
          tii.emplace_back(r, r, -3.0 * ay);
          tii.emplace_back(r, lay_.iu(i, 1), ay);
          tw.emplace_back(r, lay_.wb(i), 2.0 * ay);
        } else if (j == ny - 1) {
          tii.emplace_back(r, r, -3.0 * ay);
          tii.emplace_back(r, lay_.iu(i, ny - 2), ay);
          tw.emplace_back(r, lay_.wt(i), 2.0 * ay);
        } else {
          tii.emplace_back(r, r, -2.0 * ay);
          tii.emplace_back(r, lay_.iu(i, j + 1), ay);
          tii.emplace_back(r, lay_.iu(i, j - 1), ay);
        }
      }
    for (int i = 0; i < nx; ++i)
      for (int j = 1; j <= ny - 1; ++j) {
        const int r = lay_.iv(i, j);
        tii.emplace_back(r, r, -2.0 * ay);
        if (j + 1 <= ny - 1) tii.emplace_back(r, lay_.iv(i, j + 1), ay);
        if (j - 1 >= 1) tii.emplace_back(r, lay_.iv(i, j - 1), ay);
        if (i == 0) {
          tii.emplace_back(r, r, -3.0 * ax);
          tii.emplace_back(r, lay_.iv(1, j), ax);
          tw.emplace_back(r, lay_.wl(j), 2.0 * ax);
        } else if (i == nx - 1) {
          tii.emplace_back(r, r, -3.0 * ax);
          tii.emplace_back(r, lay_.iv(nx - 2, j), ax);
          tw.emplace_back(r, lay_.wr(j), 2.0 * ax);
        } else {
          tii.emplace_back(r, r, -2.0 * ax);
          tii.emplace_back(r, lay_.iv(i + 1, j), ax);
          tii.emplace_back(r, lay_.iv(i - 1, j), ax);
        }
      }
    lap_ii_.resize(lay_.ni(), lay_.ni());
    lap_ii_.setFromTriplets(tii.begin(), tii.end());
    lap_wall_.resize(lay_.ni(), lay_.nw());
    lap_wall_.setFromTriplets(tw.begin(), tw.end());
  }

  // wall lift: node-centered tangential data averaged onto wall slots
  {
    const SideIndex s = side_index(mesh_);
    std::vector<T> t;
    for (int i = 1; i <= nx - 1; ++i) {
      t.emplace_back(lay_.wb(i), s.bottom[std::size_t(i - 1)], 0.5);
      t.emplace_back(lay_.wb(i), s.bottom[std::size_t(i)], 0.5);
      t.emplace_back(lay_.wt(i), s.top[std::size_t(i - 1)], 0.5);
      t.emplace_back(lay_.wt(i), s.top[std::size_t(i)], 0.5);
    }
    for (int j = 1; j <= ny - 1; ++j) {
      t.emplace_back(lay_.wl(j), s.left[std::size_t(j - 1)], 0.5);
      t.emplace_back(lay_.wl(j), s.left[std::size_t(j)], 0.5);
      t.emplace_back(lay_.wr(j), s.right[std::size_t(j - 1)], 0.5);
      t.emplace_back(lay_.wr(j), s.right[std::size_t(j)], 0.5);
    }
    blift_.resize(lay_.nw(), nb());
    blift_.setFromTriplets(t.begin(), t.end());
  }

  // discrete curl of interior stream vertices: exactly divergence-free
  {
    std::vector<T> t;
    for (int i = 1; i <= nx - 1; ++i)
      for (int j = 0; j < ny; ++j) {
        const int r = lay_.iu(i, j);
        if (j + 1 <= ny - 1) t.emplace_back(r, lay_.istream(i, j + 1), 1.0 / hy);
        if (j >= 1) t.emplace_back(r, lay_.istream(i, j), -1.0 / hy);
      }
    for (int i = 0; i < nx; ++i)
      for (int j = 1; j <= ny - 1; ++j) {
        const int r = lay_.iv(i, j);
        if (i + 1 <= nx - 1) t.emplace_back(r, lay_.istream(i + 1, j), -1.0 / hx);
        if (i >= 1) t.emplace_back(r, lay_.istream(i, j), 1.0 / hx);
      }
    scurl_.resize(lay_.ni(), lay_.ns());
    scurl_.setFromTriplets(t.begin(), t.end());
  }

  // pinned pressure Poisson operator Div Div^T
  {
    SpMat lpos = div_ * SpMat(div_.transpose());
    std::vector<T> t;
    for (int k = 0; k < lpos.outerSize(); ++k)
      for (SpMat::InnerIterator it(lpos, k); it; ++it)
        if (it.row() != 0 && it.col() != 0)
          t.emplace_back(int(it.row()), int(it.col()), it.value());
    t.emplace_back(0, 0, 1.0);
    SpMat pinned(lay_.nc(), lay_.nc());
    pinned.setFromTriplets(t.begin(), t.end());
    poisson_ = std::make_unique<Eigen::SimplicialLDLT<SpMat>>(pinned);
    if (poisson_->info() != Eigen::Success)
      throw std::runtime_error("pressure Poisson factorization failed");
  }

  // Gram factor of the stream basis
  {
    SpMat gram = SpMat(scurl_.transpose()) * scurl_;
    gram_ = std::make_unique<Eigen::SimplicialLLT<SpMat>>(gram);
    if (gram_->info() != Eigen::Success)
      throw std::runtime_error("stream Gram factorization failed");
  }

  // collar tangential restriction
  {
    std::vector<T> t;
    for (std::size_t c = 0; c < mesh_.collar_cells.size(); ++c) {
      const int flat = mesh_.collar_cells[c];
      const int i = flat / ny, j = flat % ny;
      const Vec3 tau = mesh_.collar_tangent[c][0];
      if (i >= 1) t.emplace_back(int(c), lay_.iu(i, j), 0.5 * tau[0]);
      if (i + 1 <= nx - 1) t.emplace_back(int(c), lay_.iu(i + 1, j), 0.5 * tau[0]);
      if (j >= 1) t.emplace_back(int(c), lay_.iv(i, j), 0.5 * tau[1]);
      if (j + 1 <= ny - 1) t.emplace_back(int(c), lay_.iv(i, j + 1), 0.5 * tau[1]);
    }
    rtau_.resize(int(mesh_.collar_cells.size()), lay_.ni());
    rtau_.setFromTriplets(t.begin(), t.end());
  }

  conv_ii_.resize(lay_.ni(), lay_.ni());
  conv_wall_.resize(lay_.ni(), lay_.nw());
}

Vec DiscreteOperators2D::leray(const Vec& x) const {
  Vec r = div_ * x;
  r[0] = 0.0;
  Vec q = poisson_->solve(r);
  return x - div_.transpose() * q;
}

Mat DiscreteOperators2D::leray_dense() const {
  const int n = lay_.ni();
  Mat p(n, n);
  Vec e = Vec::Zero(n);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    p.col(j) = leray(e);
    e[j] = 0.0;
  }
  return p;
}

Vec DiscreteOperators2D::apply_basis(const Vec& xr) const {
  Vec y = gram_->matrixU().solve(xr);
  return scurl_ * (gram_->permutationP().transpose() * y);
}

Vec DiscreteOperators2D::apply_basis_t(const Vec& x) const {
  Vec y = gram_->permutationP() * Vec(scurl_.transpose() * x);
  return gram_->matrixL().solve(y);
}

Mat DiscreteOperators2D::reduce_dense(const SpMat& op_ii) const {
  const int n = lay_.ns();
  Mat out(n, n);
  Vec e = Vec::Zero(n);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    out.col(j) = apply_basis_t(op_ii * apply_basis(e));
    e[j] = 0.0;
  }
  return out;
}

Mat DiscreteOperators2D::basis_dense() const {
  const int n = lay_.ns();
  Mat z(lay_.ni(), n);
  Vec e = Vec::Zero(n);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    z.col(j) = apply_basis(e);
    e[j] = 0.0;
  }
  return z;
}

Mat DiscreteOperators2D::oseen_reduced() const {
  SpMat m = nu0_ * lap_ii_;
  if (has_ye_) m = m - conv_ii_;
  return reduce_dense(m);
}

Mat DiscreteOperators2D::stokes_reduced() const {
  SpMat m = -1.0 * lap_ii_;
  return reduce_dense(m);
}

Mat DiscreteOperators2D::boundary_input_reduced() const {
  SpMat w = nu0_ * lap_wall_;
  if (has_ye_) w = w - conv_wall_;
  SpMat win = w * blift_;
  Mat out(lay_.ns(), nb());
  for (int j = 0; j < nb(); ++j) out.col(j) = apply_basis_t(Vec(win.col(j)));
  return out;
}

namespace {

// full staggered arrays with zero boundary faces
Arr u_array(const Layout2D& l, const Vec& x) {
  Arr u = Arr::Zero(l.nx + 1, l.ny);
  for (int i = 1; i <= l.nx - 1; ++i)
    for (int j = 0; j < l.ny; ++j) u(i, j) = x[l.iu(i, j)];
  return u;
}
Arr v_array(const Layout2D& l, const Vec& x) {
  Arr v = Arr::Zero(l.nx, l.ny + 1);
  for (int i = 0; i < l.nx; ++i)
    for (int j = 1; j <= l.ny - 1; ++j) v(i, j) = x[l.iv(i, j)];
  return v;
}

// (A . grad) B at interior DOFs; wallB holds tangential wall values of B
Vec advect(const Layout2D& l, const Arr& au, const Arr& av, const Arr& bu,
           const Arr& bv, const Vec& wallB) {
  const int nx = l.nx, ny = l.ny;
  const double hx = l.hx, hy = l.hy;
  Vec out(l.ni());
  auto wall = [&](int slot) { return wallB.size() ? wallB[slot] : 0.0; };
  for (int i = 1; i <= nx - 1; ++i)
    for (int j = 0; j < ny; ++j) {
      const double a1 = au(i, j);
      const double a2 =
          0.25 * (av(i - 1, j) + av(i - 1, j + 1) + av(i, j) + av(i, j + 1));
      const double dxb = (bu(i + 1, j) - bu(i - 1, j)) / (2 * hx);
      double dyb;
      if (j == 0)
        dyb = (bu(i, 1) + bu(i, 0) - 2 * wall(l.wb(i))) / (2 * hy);
      else if (j == ny - 1)
        dyb = (2 * wall(l.wt(i)) - bu(i, ny - 1) - bu(i, ny - 2)) / (2 * hy);
      else
        dyb = (bu(i, j + 1) - bu(i, j - 1)) / (2 * hy);
      out[l.iu(i, j)] = a1 * dxb + a2 * dyb;
    }
  for (int i = 0; i < nx; ++i)
    for (int j = 1; j <= ny - 1; ++j) {
      const double a2 = av(i, j);
      const double a1 =
          0.25 * (au(i, j - 1) + au(i, j) + au(i + 1, j - 1) + au(i + 1, j));
      const double dyb = (bv(i, j + 1) - bv(i, j - 1)) / (2 * hy);
      double dxb;
      if (i == 0)
        dxb = (bv(1, j) + bv(0, j) - 2 * wall(l.wl(j))) / (2 * hx);
      else if (i == nx - 1)
        dxb = (2 * wall(l.wr(j)) - bv(nx - 1, j) - bv(nx - 2, j)) / (2 * hx);
      else
        dxb = (bv(i + 1, j) - bv(i - 1, j)) / (2 * hx);
      out[l.iv(i, j)] = a1 * dxb + a2 * dyb;
    }
  return out;
}

}  // namespace

Vec DiscreteOperators2D::convect_quadratic(const Vec& x, const Vec& g_nodes) const {
  const Arr u = u_array(lay_, x), v = v_array(lay_, x);
  Vec wall;
  if (g_nodes.size()) wall = blift_ * g_nodes;
  return advect(lay_, u, v, u, v, wall);
}

void DiscreteOperators2D::assemble_convection() {
  const int nx = lay_.nx, ny = lay_.ny;
  const double hx = lay_.hx, hy = lay_.hy;
  const Arr yu = u_array(lay_, ye_), yv = v_array(lay_, ye_);
  using T = Eigen::Triplet<double>;
  std::vector<T> tii, tw;

  auto add_u = [&](int r, int a, int b, double c) {
    if (a >= 1 && a <= nx - 1) tii.emplace_back(r, lay_.iu(a, b), c);
  };
  auto add_v = [&](int r, int a, int b, double c) {
    if (b >= 1 && b <= ny - 1) tii.emplace_back(r, lay_.iv(a, b), c);
  };

  for (int i = 1; i <= nx - 1; ++i)
    for (int j = 0; j < ny; ++j) {
      const int r = lay_.iu(i, j);
      const double ye1 = yu(i, j);
      const double ye2 =
          0.25 * (yv(i - 1, j) + yv(i - 1, j + 1) + yv(i, j) + yv(i, j + 1));
      const double dx_ye1 = (yu(i + 1, j) - yu(i - 1, j)) / (2 * hx);
      double dy_ye1;
      if (j == 0)
        dy_ye1 = (yu(i, 1) + yu(i, 0)) / (2 * hy);
      else if (j == ny - 1)
        dy_ye1 = (-yu(i, ny - 1) - yu(i, ny - 2)) / (2 * hy);
      else
        dy_ye1 = (yu(i, j + 1) - yu(i, j - 1)) / (2 * hy);

      add_u(r, i + 1, j, ye1 / (2 * hx));
      add_u(r, i - 1, j, -ye1 / (2 * hx));
      if (j == 0) {
        add_u(r, i, 1, ye2 / (2 * hy));
        add_u(r, i, 0, ye2 / (2 * hy));
        tw.emplace_back(r, lay_.wb(i), -ye2 / hy);
      } else if (j == ny - 1) {
        add_u(r, i, ny - 1, -ye2 / (2 * hy));
        add_u(r, i, ny - 2, -ye2 / (2 * hy));
        tw.emplace_back(r, lay_.wt(i), ye2 / hy);
      } else {
        add_u(r, i, j + 1, ye2 / (2 * hy));
        add_u(r, i, j - 1, -ye2 / (2 * hy));
      }
      tii.emplace_back(r, r, dx_ye1);
      add_v(r, i - 1, j, dy_ye1 / 4);
      add_v(r, i - 1, j + 1, dy_ye1 / 4);
      add_v(r, i, j, dy_ye1 / 4);
      add_v(r, i, j + 1, dy_ye1 / 4);
    }

  for (int i = 0; i < nx; ++i)
    for (int j = 1; j <= ny - 1; ++j) {
      const int r = lay_.iv(i, j);
      const double ye2 = yv(i, j);
      const double ye1 =
          0.25 * (yu(i, j - 1) + yu(i, j) + yu(i + 1, j - 1) + yu(i + 1, j));
      const double dy_ye2 = (yv(i, j + 1) - yv(i, j - 1)) / (2 * hy);
      double dx_ye2;
      if (i == 0)
        dx_ye2 = (yv(1, j) + yv(0, j)) / (2 * hx);
      else if (i == nx - 1)
        dx_ye2 = (-yv(nx - 1, j) - yv(nx - 2, j)) / (2 * hx);
      else
        dx_ye2 = (yv(i + 1, j) - yv(i - 1, j)) / (2 * hx);

      if (i == 0) {
        add_v(r, 1, j, ye1 / (2 * hx));
        add_v(r, 0, j, ye1 / (2 * hx));
        tw.emplace_back(r, lay_.wl(j), -ye1 / hx);
      } else if (i == nx - 1) {
        add_v(r, nx - 1, j, -ye1 / (2 * hx));
        add_v(r, nx - 2, j, -ye1 / (2 * hx));
        tw.emplace_back(r, lay_.wr(j), ye1 / hx);
      } else {
        add_v(r, i + 1, j, ye1 / (2 * hx));
        add_v(r, i - 1, j, -ye1 / (2 * hx));
      }
      add_v(r, i, j + 1, ye2 / (2 * hy));
      add_v(r, i, j - 1, -ye2 / (2 * hy));
      add_u(r, i, j - 1, dx_ye2 / 4);
      add_u(r, i, j, dx_ye2 / 4);
      add_u(r, i + 1, j - 1, dx_ye2 / 4);
      add_u(r, i + 1, j, dx_ye2 / 4);
      tii.emplace_back(r, r, dy_ye2);
    }

  conv_ii_.setFromTriplets(tii.begin(), tii.end());
  conv_wall_.setFromTriplets(tw.begin(), tw.end());
}

void DiscreteOperators2D::set_equilibrium(const Vec& ye) {
  if (ye.size() != lay_.ni())
    throw std::invalid_argument("equilibrium field has wrong size");
  ye_ = ye;
  has_ye_ = true;
  conv_ii_.setZero();
  conv_wall_.setZero();
  assemble_convection();
  dir_.reset();  // the Dirichlet system depends on the equilibrium
}

Equilibrium DiscreteOperators2D::solve_equilibrium_manufactured(
    double amplitude, double pressure_amplitude, int mode_x, int mode_y) {
  const int nx = lay_.nx, ny = lay_.ny;
  ManufacturedFlow mf{mesh_.lengths[0], mesh_.lengths[1], amplitude,
                      pressure_amplitude, mode_x, mode_y};
  Vec psi(lay_.ns());
  for (int i = 1; i <= nx - 1; ++i)
    for (int j = 1; j <= ny - 1; ++j)
      psi[lay_.istream(i, j)] = mf.stream(i * lay_.hx, j * lay_.hy);
  Equilibrium eq;
  eq.xe = scurl_ * psi;
  eq.pe.resize(lay_.nc());
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      eq.pe[lay_.ic(i, j)] =
          mf.pressure((i + 0.5) * lay_.hx, (j + 0.5) * lay_.hy);
  eq.f = -nu0_ * (lap_ii_ * eq.xe) + convect_quadratic(eq.xe) -
         div_.transpose() * eq.pe;
  const Vec res = -nu0_ * (lap_ii_ * eq.xe) + convect_quadratic(eq.xe) -
                  div_.transpose() * eq.pe - eq.f;
  eq.residual_norm = std::sqrt(volume_element()) * res.norm();
  eq.converged = true;
  eq.iterations = 0;
  set_equilibrium(eq.xe);
  return eq;
}

Equilibrium DiscreteOperators2D::solve_equilibrium_newton(const Vec& f,
                                                          const Vec& xr_guess,
                                                          int max_iter,
                                                          double tol) {
  const double scale = std::sqrt(volume_element());
  Vec xr = xr_guess.size() ? xr_guess : Vec::Zero(lay_.ns());
  auto residual = [&](const Vec& r) {
    const Vec x = apply_basis(r);
    return Vec(apply_basis_t(-nu0_ * (lap_ii_ * x) + convect_quadratic(x) - f));
  };
  Equilibrium eq;
  Vec res = residual(xr);
  double rn = scale * res.norm();
  int it = 0;
  for (; it < max_iter && rn > tol; ++it) {
    set_equilibrium(apply_basis(xr));
    const Mat jac =
        reduce_dense(SpMat(-nu0_ * lap_ii_ + conv_ii_));
    const Vec step = jac.partialPivLu().solve(res);
    double alpha = 1.0;
    Vec xr_new = xr - alpha * step;
    Vec res_new = residual(xr_new);
    // halve the step a few times if the residual does not decrease
    for (int ls = 0; ls < 6 && res_new.norm() > res.norm(); ++ls) {
      alpha *= 0.5;
      xr_new = xr - alpha * step;
      res_new = residual(xr_new);
    }
    xr = xr_new;
    res = res_new;
    rn = scale * res.norm();
  }
  eq.xe = apply_basis(xr);
  eq.pe = Vec::Zero(lay_.nc());
  eq.f = f;
  eq.residual_norm = rn;
  eq.iterations = it;
  eq.converged = rn <= tol;
  set_equilibrium(eq.xe);
  return eq;
}

void DiscreteOperators2D::build_dirichlet(double k) const {
  const int n = lay_.ni() + lay_.nc();
  SpMat a = k * SpMat(Vec::Ones(lay_.ni()).asDiagonal()) - nu0_ * lap_ii_;
  if (has_ye_) a = a + conv_ii_;
  using T = Eigen::Triplet<double>;
  std::vector<T> t;
  for (int c = 0; c < a.outerSize(); ++c)
    for (SpMat::InnerIterator it(a, c); it; ++it)
      t.emplace_back(int(it.row()), int(it.col()), it.value());
  const SpMat g = SpMat(div_.transpose());
  for (int c = 0; c < g.outerSize(); ++c)
    for (SpMat::InnerIterator it(g, c); it; ++it)
      t.emplace_back(int(it.row()), lay_.ni() + int(it.col()), -it.value());
  // continuity rows; cell 0 replaced by pressure pin (its divergence is
  // implied by the other cells, total boundary flux being zero)
  for (int c = 0; c < div_.outerSize(); ++c)
    for (SpMat::InnerIterator it(div_, c); it; ++it)
      if (it.row() != 0)
        t.emplace_back(lay_.ni() + int(it.row()), int(it.col()), it.value());
  t.emplace_back(lay_.ni(), lay_.ni(), 1.0);
  SpMat kkt(n, n);
  kkt.setFromTriplets(t.begin(), t.end());

  auto lu = std::make_unique<Eigen::SparseLU<SpMat>>();
  lu->compute(kkt);
  if (lu->info() != Eigen::Success)
    throw std::runtime_error("dirichlet factorization failed");

  // 1-norm condition estimate from a few random solves
  double norm_a = 0.0;
  Vec colsum = Vec::Zero(n);
  for (int c = 0; c < kkt.outerSize(); ++c)
    for (SpMat::InnerIterator it(kkt, c); it; ++it)
      colsum[it.col()] += std::abs(it.value());
  norm_a = colsum.maxCoeff();
  std::mt19937_64 rng(12345);
  double inv_est = 0.0;
  for (int s = 0; s < 4; ++s) {
    Vec b(n);
    for (int i = 0; i < n; ++i) b[i] = (rng() & 1) ? 1.0 : -1.0;
    const Vec x = lu->solve(b);
    inv_est = std::max(inv_est, x.lpNorm<1>() / b.lpNorm<1>());
  }
  if (norm_a * inv_est > kCondMax)
    throw std::runtime_error("dirichlet system ill conditioned");
  dir_ = std::move(lu);
  k_used_ = k;
}

Vec DiscreteOperators2D::dirichlet_solve(const Vec& g_nodes) const {
  return dirichlet_solve_full(g_nodes).velocity;
}

DiscreteOperators2D::DirichletSolution DiscreteOperators2D::dirichlet_solve_full(
    const Vec& g_nodes) const {
  if (!dir_) {
    std::vector<double> schedule{k_request_};
    for (double k : {1.0, 10.0, 100.0})
      if (k > k_request_) schedule.push_back(k);
    std::string last;
    for (double k : schedule) {
      try {
        build_dirichlet(k);
        break;
      } catch (const std::exception& e) {
        last = e.what();
        dir_.reset();
      }
    }
    if (!dir_)
      throw std::runtime_error(
          "dirichlet solve failed for every shift in the escalation "
          "schedule: " + last);
  }
  const Vec wall = blift_ * g_nodes;
  Vec rhs = Vec::Zero(lay_.ni() + lay_.nc());
  rhs.head(lay_.ni()) = nu0_ * (lap_wall_ * wall);
  if (has_ye_) rhs.head(lay_.ni()) -= conv_wall_ * wall;
  const Vec sol = dir_->solve(rhs);
  return {sol.head(lay_.ni()), sol.tail(lay_.nc())};
}

Vec DiscreteOperators2D::tangential_dn_trace(const Vec& x) const {
  const int nx = lay_.nx, ny = lay_.ny;
  const Arr u = u_array(lay_, x), v = v_array(lay_, x);
  Vec out(nb());
  for (int id = 0; id < nb(); ++id) {
    const auto& b = mesh_.boundary[std::size_t(id)];
    double f1 = 0, f2 = 0, h = 0;
    switch (b.side) {
      case Side::Bottom: {
        const int i = b.cell[0];
        f1 = 0.5 * (u(i, 0) + u(i + 1, 0));
        f2 = 0.5 * (u(i, 1) + u(i + 1, 1));
        h = lay_.hy;
      } break;
      case Side::Top: {
        const int i = b.cell[0];
        f1 = 0.5 * (u(i, ny - 1) + u(i + 1, ny - 1));
        f2 = 0.5 * (u(i, ny - 2) + u(i + 1, ny - 2));
        h = lay_.hy;
      } break;
      case Side::Left: {
        const int j = b.cell[1];
        f1 = 0.5 * (v(0, j) + v(0, j + 1));
        f2 = 0.5 * (v(1, j) + v(1, j + 1));
        h = lay_.hx;
      } break;
      case Side::Right: {
        const int j = b.cell[1];
        f1 = 0.5 * (v(nx - 1, j) + v(nx - 1, j + 1));
        f2 = 0.5 * (v(nx - 2, j) + v(nx - 2, j + 1));
        h = lay_.hx;
      } break;
      default:
        throw std::logic_error("2d trace on 3d side");
    }
    out[id] = -(9 * f1 - f2) / (3 * h);
  }
  return out;
}

Vec DiscreteOperators2D::normal_dn_trace(const Vec& x) const {
  const int nx = lay_.nx, ny = lay_.ny;
  const Arr u = u_array(lay_, x), v = v_array(lay_, x);
  Vec out(nb());
  for (int id = 0; id < nb(); ++id) {
    const auto& b = mesh_.boundary[std::size_t(id)];
    double f1 = 0, f2 = 0, h = 0;
    switch (b.side) {
      case Side::Bottom:
        f1 = v(b.cell[0], 1);
        f2 = v(b.cell[0], 2);
        h = lay_.hy;
        break;
      case Side::Top:
        f1 = v(b.cell[0], ny - 1);
        f2 = v(b.cell[0], ny - 2);
        h = lay_.hy;
        break;
      case Side::Left:
        f1 = u(1, b.cell[1]);
        f2 = u(2, b.cell[1]);
        h = lay_.hx;
        break;
      case Side::Right:
        f1 = u(nx - 1, b.cell[1]);
        f2 = u(nx - 2, b.cell[1]);
        h = lay_.hx;
        break;
      default:
        throw std::logic_error("2d trace on 3d side");
    }
    out[id] = -(4 * f1 - f2) / (2 * h);
  }
  return out;
}

Vec DiscreteOperators2D::boundary_weights() const {
  Vec w(nb());
  for (int id = 0; id < nb(); ++id)
    w[id] = mesh_.face_measure(mesh_.boundary[std::size_t(id)]);
  return w;
}

AdjointIdentityResult DiscreteOperators2D::adjoint_identity_residual(
    const Vec& v, const Vec& g_nodes) const {
  SpMat m = nu0_ * lap_ii_;
  if (has_ye_) m = m - conv_ii_;
  const Vec adj = leray(SpMat(m.transpose()) * v);
  const Vec dg = dirichlet_solve(g_nodes);
  AdjointIdentityResult r;
  r.duality_pairing = volume_element() * adj.dot(dg);
  const Vec tt = tangential_dn_trace(v);
  const Vec w = boundary_weights();
  r.trace_pairing = nu0_ * (w.array() * tt.array() * g_nodes.array()).sum();
  const double num = std::abs(r.duality_pairing - r.trace_pairing);
  const double den = std::abs(r.trace_pairing);
  if (den < 1e-300 && num > 1e-12) {
    r.residual = num;
    r.flagged_absolute = true;
  } else {
    r.residual = num / (den + std::numeric_limits<double>::epsilon());
  }
  return r;
}

Mat DiscreteOperators2D::cell_center_values(const Vec& x) const {
  const Arr u = u_array(lay_, x), v = v_array(lay_, x);
  Mat out(lay_.nc(), 2);
  for (int i = 0; i < lay_.nx; ++i)
    for (int j = 0; j < lay_.ny; ++j) {
      out(lay_.ic(i, j), 0) = 0.5 * (u(i, j) + u(i + 1, j));
      out(lay_.ic(i, j), 1) = 0.5 * (v(i, j) + v(i, j + 1));
    }
  return out;
}

double DiscreteOperators2D::div_inf_norm(const Vec& x) const {
  return (div_ * x).lpNorm<Eigen::Infinity>();
}

Vec DiscreteOperators2D::recover_pressure(const Vec& r) const {
  Vec rr = div_ * r;
  rr[0] = 0.0;
  Vec chi = -poisson_->solve(rr);
  chi.array() -= chi.mean();
  return chi;
}

Vec DiscreteOperators2D::random_smooth_field(std::mt19937_64& rng,
                                             int max_mode) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int nx = lay_.nx, ny = lay_.ny;
  Mat coeff(max_mode, max_mode);
  for (int m = 0; m < max_mode; ++m)
    for (int n = 0; n < max_mode; ++n)
      coeff(m, n) = gauss(rng) / double((m + 1) * (m + 1) + (n + 1) * (n + 1));
  Vec psi = Vec::Zero(lay_.ns());
  for (int i = 1; i <= nx - 1; ++i)
    for (int j = 1; j <= ny - 1; ++j) {
      const double x = i * lay_.hx / mesh_.lengths[0];
      const double y = j * lay_.hy / mesh_.lengths[1];
      double s = 0.0;
      for (int m = 0; m < max_mode; ++m)
        for (int n = 0; n < max_mode; ++n)
          s += coeff(m, n) * std::cos(m * M_PI * x) * std::cos(n * M_PI * y);
      // quadratic bubble: the velocity trace vanishes on the boundary while
      // its normal derivative stays generic
      const double bx = std::sin(M_PI * x), by = std::sin(M_PI * y);
      psi[lay_.istream(i, j)] = s * bx * bx * by * by;
    }
  Vec x = scurl_ * psi;
  const double nrm = x.norm();
  return nrm > 0 ? Vec(x / nrm) : x;
}

Vec DiscreteOperators2D::random_smooth_boundary(std::mt19937_64& rng,
                                                int max_mode,
                                                bool patch_only) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec g = Vec::Zero(nb());
  if (patch_only) {
    std::vector<double> c(static_cast<std::size_t>(max_mode));
    for (auto& ck : c) ck = gauss(rng);
    const int np = int(mesh_.patch.size());
    for (int idx = 0; idx < np; ++idx) {
      const double t = (idx + 0.5) / np;
      double s = 0.0;
      for (int m = 0; m < max_mode; ++m)
        s += c[std::size_t(m)] * std::sin((m + 1) * M_PI * t);
      g[mesh_.patch[std::size_t(idx)]] = s;
    }
  } else {
    std::array<std::vector<double>, 4> c;
    for (auto& side_c : c) {
      side_c.resize(std::size_t(max_mode));
      for (auto& ck : side_c) ck = gauss(rng);
    }
    for (int id = 0; id < nb(); ++id) {
      const auto& b = mesh_.boundary[std::size_t(id)];
      int si = 0;
      double t = 0;
      switch (b.side) {
        case Side::Left: si = 0; t = b.pos[1] / mesh_.lengths[1]; break;
        case Side::Right: si = 1; t = b.pos[1] / mesh_.lengths[1]; break;
        case Side::Bottom: si = 2; t = b.pos[0] / mesh_.lengths[0]; break;
        case Side::Top: si = 3; t = b.pos[0] / mesh_.lengths[0]; break;
        default: continue;
      }
      double s = 0.0;
      for (int m = 0; m < max_mode; ++m)
        s += c[std::size_t(si)][std::size_t(m)] * std::sin((m + 1) * M_PI * t);
      g[id] = s;
    }
  }
  const double nrm = g.norm();
  return nrm > 0 ? Vec(g / nrm) : g;
}

}  // namespace flowstab
