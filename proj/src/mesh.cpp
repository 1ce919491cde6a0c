// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <ostream>
#include <queue>
#include <stdexcept>

namespace flowstab {

const char* side_name(Side s) {
  switch (s) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::Bottom: return "bottom";
    case Side::Top: return "top";
    case Side::Front: return "front";
    case Side::Back: return "back";
    case Side::All: return "all";
  }
  return "?";
}

Side parse_side(const std::string& name) {
  for (Side s : {Side::Left, Side::Right, Side::Bottom, Side::Top, Side::Front,
                 Side::Back, Side::All}) {
    if (name == side_name(s)) return s;
  }
  throw std::invalid_argument("unknown boundary side: " + name);
}

namespace {

struct SideGeom {
  int axis;      // axis normal to the side
  bool at_zero;  // side at coordinate 0 (else at lengths[axis])
};

SideGeom side_geom(Side s) {
  switch (s) {
    case Side::Left: return {0, true};
    case Side::Right: return {0, false};
    case Side::Bottom: return {1, true};
    case Side::Top: return {1, false};
    case Side::Front: return {2, true};
    case Side::Back: return {2, false};
    default: throw std::invalid_argument("side has no geometry");
  }
}

// In-face axes, ordered; they define the tangent frame.
std::array<int, 2> face_axes(int normal_axis, int d) {
  if (d == 2) return {normal_axis == 0 ? 1 : 0, -1};
  switch (normal_axis) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

}  // namespace

double DomainMesh::face_measure(const BoundaryNode& b) const {
  const SideGeom g = side_geom(b.side);
  const auto axes = face_axes(g.axis, d);
  double m = h[axes[0]];
  if (d == 3) m *= h[axes[1]];
  return m;
}

bool DomainMesh::in_patch(int boundary_id) const {
  return std::find(patch.begin(), patch.end(), boundary_id) != patch.end();
}

DomainMesh build_mesh(std::array<int, 3> dims, std::array<double, 3> lengths,
                      int d) {
  if (d != 2 && d != 3) throw std::invalid_argument("d must be 2 or 3");
  if (d == 2) dims[2] = 1;
  for (int a = 0; a < d; ++a) {
    if (dims[a] < 4)
      throw std::invalid_argument("dims must be >= 4 per axis (stencils undefined)");
    if (lengths[a] <= 0) throw std::invalid_argument("lengths must be positive");
  }
  DomainMesh m;
  m.d = d;
  m.dims = dims;
  m.lengths = lengths;
  if (d == 2) m.lengths[2] = 1.0;
  for (int a = 0; a < 3; ++a)
    m.h[a] = (a < d) ? lengths[a] / dims[a] : 0.0;

  const std::vector<Side> sides =
      d == 2 ? std::vector<Side>{Side::Left, Side::Right, Side::Bottom, Side::Top}
             : std::vector<Side>{Side::Left,  Side::Right, Side::Bottom,
                                 Side::Top,   Side::Front, Side::Back};
  for (Side s : sides) {
    const SideGeom g = side_geom(s);
    const auto axes = face_axes(g.axis, d);
    const int na = dims[axes[0]];
    const int nb = (d == 3) ? dims[axes[1]] : 1;
    for (int a = 0; a < na; ++a) {
      for (int b = 0; b < nb; ++b) {
        BoundaryNode node;
        node.side = s;
        std::array<int, 3> cell{0, 0, 0};
        cell[g.axis] = g.at_zero ? 0 : dims[g.axis] - 1;
        cell[axes[0]] = a;
        if (d == 3) cell[axes[1]] = b;
        node.cell = cell;
        Vec3 pos{0.0, 0.0, 0.0};
        pos[g.axis] = g.at_zero ? 0.0 : lengths[g.axis];
        pos[axes[0]] = (a + 0.5) * m.h[axes[0]];
        if (d == 3) pos[axes[1]] = (b + 0.5) * m.h[axes[1]];
        node.pos = pos;
        Vec3 nu{0.0, 0.0, 0.0};
        nu[g.axis] = g.at_zero ? -1.0 : 1.0;
        node.normal = nu;
        node.tangent = {Vec3{0.0, 0.0, 0.0}, Vec3{0.0, 0.0, 0.0}};
        node.tangent[0][axes[0]] = 1.0;
        if (d == 3) node.tangent[1][axes[1]] = 1.0;
        m.boundary.push_back(node);
      }
    }
  }
  m.patch.resize(m.boundary.size());
  for (std::size_t i = 0; i < m.patch.size(); ++i) m.patch[i] = int(i);
  return m;
}

DomainMesh select_patch(DomainMesh mesh, Side side, double fraction) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("patch fraction must be in (0, 1]");
  if (side == Side::All) {
    if (fraction < 1.0)
      throw std::invalid_argument("side=all requires fraction=1");
    mesh.patch.resize(mesh.boundary.size());
    for (std::size_t i = 0; i < mesh.patch.size(); ++i) mesh.patch[i] = int(i);
    return mesh;
  }
  const SideGeom g = side_geom(side);
  if (mesh.d == 2 && g.axis == 2)
    throw std::invalid_argument("front/back sides need d=3");
  const auto axes = face_axes(g.axis, mesh.d);

  std::vector<int> on_side;
  for (std::size_t i = 0; i < mesh.boundary.size(); ++i)
    if (mesh.boundary[i].side == side) on_side.push_back(int(i));

  const int na = mesh.dims[axes[0]];
  const int nb = (mesh.d == 3) ? mesh.dims[axes[1]] : 1;
  // Centered run along each in-face axis; for d=3 the per-axis fraction is
  // sqrt(fraction) so the selected area covers ~fraction of the side.
  const double fa = (mesh.d == 3) ? std::sqrt(fraction) : fraction;
  const int ca = int(std::floor(fa * na + 1e-12));
  const int cb = (mesh.d == 3) ? int(std::floor(fa * nb + 1e-12)) : 1;
  if (ca < 1 || cb < 1)
    throw std::invalid_argument("patch fraction too small: empty patch");
  const int a0 = (na - ca) / 2;
  const int b0 = (nb - cb) / 2;

  mesh.patch.clear();
  for (int id : on_side) {
    const auto& cell = mesh.boundary[id].cell;
    const int a = cell[axes[0]];
    const int b = (mesh.d == 3) ? cell[axes[1]] : 0;
    if (a >= a0 && a < a0 + ca && (mesh.d == 2 || (b >= b0 && b < b0 + cb)))
      mesh.patch.push_back(id);
  }
  std::sort(mesh.patch.begin(), mesh.patch.end());
  return mesh;
}

DomainMesh build_collar(DomainMesh mesh, int depth) {
  if (depth < 1) throw std::invalid_argument("collar depth must be >= 1");
  if (mesh.patch.empty()) throw std::invalid_argument("collar needs a nonempty patch");
  int min_dim = mesh.dims[0];
  for (int a = 1; a < mesh.d; ++a) min_dim = std::min(min_dim, mesh.dims[a]);
  if (2 * depth > min_dim)
    throw std::invalid_argument("collar depth exceeds half the domain width");

  const int nz = mesh.dims[2];
  mesh.collar_mask.assign(std::size_t(mesh.cell_count()), 0);
  mesh.collar_cells.clear();
  mesh.collar_tangent.clear();
  mesh.collar_normal.clear();
  mesh.collar_depth = depth;

  auto cheb = [&](const std::array<int, 3>& a, const std::array<int, 3>& b) {
    int dmax = 0;
    for (int ax = 0; ax < mesh.d; ++ax)
      dmax = std::max(dmax, std::abs(a[ax] - b[ax]));
    return dmax;
  };

  for (int i = 0; i < mesh.dims[0]; ++i) {
    for (int j = 0; j < mesh.dims[1]; ++j) {
      for (int k = 0; k < nz; ++k) {
        const std::array<int, 3> cell{i, j, k};
        int best = -1, best_d = depth;  // need distance <= depth-1
        for (int pid : mesh.patch) {
          const int dd = cheb(cell, mesh.boundary[pid].cell);
          if (dd < best_d) {
            best_d = dd;
            best = pid;
          }
        }
        if (best >= 0) {
          const int flat = mesh.cell_index(i, j, k);
          mesh.collar_mask[std::size_t(flat)] = 1;
          mesh.collar_cells.push_back(flat);
          mesh.collar_tangent.push_back(mesh.boundary[best].tangent);
          mesh.collar_normal.push_back(mesh.boundary[best].normal);
        }
      }
    }
  }
  return mesh;
}

bool patch_connected(const DomainMesh& mesh) {
  if (mesh.patch.empty()) return false;
  if (mesh.patch.size() == 1) return true;

  // Boundary adjacency: same side and neighboring cells along one in-face
  // axis, or different sides sharing the same corner cell.
  auto adjacent = [&](int a, int b) {
    const auto& na = mesh.boundary[a];
    const auto& nb = mesh.boundary[b];
    int diff = 0, axdiff = -1;
    for (int ax = 0; ax < mesh.d; ++ax) {
      const int dd = std::abs(na.cell[ax] - nb.cell[ax]);
      if (dd > 1) return false;
      if (dd == 1) {
        ++diff;
        axdiff = ax;
      }
    }
    if (na.side == nb.side) return diff == 1 && axdiff != side_geom(na.side).axis;
    return diff == 0;  // corner crossing: same cell
  };

  std::map<int, int> pos;  // boundary id -> position in patch list
  for (std::size_t i = 0; i < mesh.patch.size(); ++i) pos[mesh.patch[i]] = int(i);
  std::vector<char> seen(mesh.patch.size(), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  std::size_t count = 1;
  while (!q.empty()) {
    const int cur = q.front();
    q.pop();
    for (std::size_t j = 0; j < mesh.patch.size(); ++j) {
      if (!seen[j] && adjacent(mesh.patch[std::size_t(cur)], mesh.patch[j])) {
        seen[j] = 1;
        ++count;
        q.push(int(j));
      }
    }
  }
  return count == mesh.patch.size();
}

void dump_boundary(const DomainMesh& mesh, std::ostream& os) {
  for (std::size_t i = 0; i < mesh.boundary.size(); ++i) {
    const auto& b = mesh.boundary[i];
    os << i << ' ' << b.pos[0] << ' ' << b.pos[1];
    if (mesh.d == 3) os << ' ' << b.pos[2];
    os << ' ' << b.normal[0] << ' ' << b.normal[1];
    if (mesh.d == 3) os << ' ' << b.normal[2];
    os << '\n';
  }
}

}  // namespace flowstab
