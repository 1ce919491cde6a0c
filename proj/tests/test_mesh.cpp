// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/mesh.hpp"

#include <cmath>
#include <sstream>

#include "doctest.h"

using namespace flowstab;

namespace {
double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
}  // namespace

TEST_CASE("8x8 unit box has 32 boundary nodes and h=1/8") {
  const auto m = build_mesh({8, 8, 1}, {1.0, 1.0, 1.0}, 2);
  CHECK(m.boundary.size() == 32);
  CHECK(m.h[0] == doctest::Approx(1.0 / 8));
  CHECK(m.h[1] == doctest::Approx(1.0 / 8));
}

TEST_CASE("frames are orthonormal at every boundary node") {
  for (int d : {2, 3}) {
    const auto m = d == 2 ? build_mesh({4, 4, 1}, {1, 1, 1}, 2)
                          : build_mesh({8, 8, 8}, {1, 1, 1}, 3);
    for (const auto& b : m.boundary) {
      CHECK(std::abs(dot(b.normal, b.normal) - 1.0) < 1e-12);
      CHECK(std::abs(dot(b.tangent[0], b.normal)) < 1e-12);
      CHECK(std::abs(dot(b.tangent[0], b.tangent[0]) - 1.0) < 1e-12);
      if (d == 3) {
        CHECK(std::abs(dot(b.tangent[1], b.normal)) < 1e-12);
        CHECK(std::abs(dot(b.tangent[0], b.tangent[1])) < 1e-12);
        CHECK(std::abs(dot(b.tangent[1], b.tangent[1]) - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("build_mesh rejects bad arguments") {
  CHECK_THROWS(build_mesh({3, 8, 1}, {1, 1, 1}, 2));
  CHECK_THROWS(build_mesh({8, 8, 1}, {1, 1, 1}, 4));
  CHECK_THROWS(build_mesh({8, 8, 1}, {1, 1, 1}, 1));
}

TEST_CASE("full-boundary patch") {
  auto m = build_mesh({8, 8, 1}, {1, 1, 1}, 2);
  m = select_patch(m, Side::All, 1.0);
  CHECK(m.patch.size() == m.boundary.size());
  CHECK(patch_connected(m));
}

TEST_CASE("quarter patch on the left side of a 16x16 mesh has 4 nodes") {
  auto m = build_mesh({16, 16, 1}, {1, 1, 1}, 2);
  m = select_patch(m, Side::Left, 0.25);
  CHECK(m.patch.size() == 4);
  for (int id : m.patch) CHECK(m.boundary[std::size_t(id)].side == Side::Left);
  // centered: rows 6..9
  for (int id : m.patch) {
    const int j = m.boundary[std::size_t(id)].cell[1];
    CHECK(j >= 6);
    CHECK(j <= 9);
  }
  CHECK(patch_connected(m));
}

TEST_CASE("degenerate patch fraction is rejected") {
  auto m = build_mesh({16, 16, 1}, {1, 1, 1}, 2);
  CHECK_THROWS(select_patch(m, Side::Left, 1.0 / 32));
  CHECK_THROWS(select_patch(m, Side::Left, 0.0));
}

TEST_CASE("depth-1 collar of a 4-node patch has exactly 4 cells") {
  auto m = build_mesh({16, 16, 1}, {1, 1, 1}, 2);
  m = select_patch(m, Side::Left, 0.25);
  m = build_collar(m, 1);
  CHECK(m.collar_cells.size() == 4);
  for (int flat : m.collar_cells) CHECK(flat / 16 == 0);  // first column
}

TEST_CASE("full-boundary collar of depth 2 is the 2-cell boundary layer") {
  auto m = build_mesh({8, 8, 1}, {1, 1, 1}, 2);
  m = select_patch(m, Side::All, 1.0);
  m = build_collar(m, 2);
  int expect = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      if (i < 2 || i >= 6 || j < 2 || j >= 6) ++expect;
  CHECK(int(m.collar_cells.size()) == expect);
}

TEST_CASE("oversized collar depth is rejected") {
  auto m = build_mesh({8, 8, 1}, {1, 1, 1}, 2);
  m = select_patch(m, Side::All, 1.0);
  CHECK_THROWS(build_collar(m, 8 / 2 + 1));
}

TEST_CASE("collar mask is 0/1 and every collar cell is near the patch") {
  auto m = build_mesh({16, 16, 1}, {2, 1, 1}, 2);
  m = select_patch(m, Side::Bottom, 0.5);
  m = build_collar(m, 3);
  int total = 0;
  for (auto v : m.collar_mask) {
    CHECK((v == 0 || v == 1));
    total += v;
  }
  CHECK(total == int(m.collar_cells.size()));
  CHECK(total <= m.cell_count());
  for (std::size_t c = 0; c < m.collar_cells.size(); ++c) {
    const int flat = m.collar_cells[c];
    const int i = flat / 16, j = flat % 16;
    int best = 1 << 20;
    for (int pid : m.patch) {
      const auto& cell = m.boundary[std::size_t(pid)].cell;
      best = std::min(best, std::max(std::abs(cell[0] - i), std::abs(cell[1] - j)));
    }
    CHECK(best <= 2);  // depth-1
  }
}

TEST_CASE("3d patch and collar") {
  auto m = build_mesh({8, 8, 8}, {1, 1, 1}, 3);
  CHECK(m.boundary.size() == 6u * 64u);
  m = select_patch(m, Side::Front, 0.25);
  CHECK(m.patch.size() == 16);  // 4x4 centered block
  CHECK(patch_connected(m));
  m = build_collar(m, 2);
  CHECK(!m.collar_cells.empty());
}

TEST_CASE("boundary dump has one line per node") {
  auto m = build_mesh({4, 4, 1}, {1, 1, 1}, 2);
  std::ostringstream os;
  dump_boundary(m, os);
  int lines = 0;
  for (char c : os.str())
    if (c == '\n') ++lines;
  CHECK(lines == int(m.boundary.size()));
}
