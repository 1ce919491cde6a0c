// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace flowstab {

using Vec3 = std::array<double, 3>;

enum class Side { Left, Right, Bottom, Top, Front, Back, All };

const char* side_name(Side s);
Side parse_side(const std::string& name);

/// One node of the boundary index set: the center of a boundary cell face.
/// Carries the outward normal and an orthonormal tangent frame (one tangent
/// vector for d=2, two for d=3).
struct BoundaryNode {
  Side side;
  std::array<int, 3> cell;  // adjacent interior cell (multi-index)
  Vec3 pos;
  Vec3 normal;
  std::array<Vec3, 2> tangent;
};

/// Box domain discretized on a MAC-staggered grid: velocity components on
/// faces, pressure at cell centers. Holds the boundary set, the control
/// patch (a connected subset of the boundary) and the interior collar
/// adjacent to the patch.
struct DomainMesh {
  int d = 2;
  std::array<int, 3> dims{0, 0, 1};
  std::array<double, 3> lengths{1.0, 1.0, 1.0};
  std::array<double, 3> h{0.0, 0.0, 0.0};

  std::vector<BoundaryNode> boundary;
  std::vector<int> patch;  // indices into `boundary`

  // Collar mask m (0/1), row-major over cells; empty until build_collar.
  std::vector<std::uint8_t> collar_mask;
  std::vector<int> collar_cells;  // flat indices of cells with m=1
  // Tangent frame carried by each collar cell (inherited from the nearest
  // seeding boundary node).
  std::vector<std::array<Vec3, 2>> collar_tangent;
  std::vector<Vec3> collar_normal;
  int collar_depth = 0;

  int cell_count() const { return dims[0] * dims[1] * dims[2]; }
  int cell_index(int i, int j, int k = 0) const {
    return (i * dims[1] + j) * dims[2] + k;
  }
  double cell_volume() const {
    double v = h[0] * h[1];
    return d == 3 ? v * h[2] : v;
  }
  /// Surface measure carried by one boundary node (face length / area).
  double face_measure(const BoundaryNode& b) const;
  bool in_patch(int boundary_id) const;
};

DomainMesh build_mesh(std::array<int, 3> dims, std::array<double, 3> lengths,
                      int d);

/// Restrict the control patch to a centered connected run covering `fraction`
/// of the chosen side. Side::All requires fraction == 1 and selects the whole
/// boundary.
DomainMesh select_patch(DomainMesh mesh, Side side, double fraction);

/// Mark the interior collar: cells within Chebyshev distance depth-1 of the
/// cells adjacent to the patch. Each collar cell inherits the frame of its
/// nearest seeding node.
DomainMesh build_collar(DomainMesh mesh, int depth);

/// True if the patch is edge-connected as a subset of the boundary graph
/// (checked by BFS).
bool patch_connected(const DomainMesh& mesh);

/// Debug dump, one line per boundary node: index x y [z] nu_x nu_y [nu_z].
void dump_boundary(const DomainMesh& mesh, std::ostream& os);

}  // namespace flowstab
