// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/config.hpp"

#include <stdexcept>

#include "doctest.h"

using namespace flowstab;

namespace {
const char* kMinimal = R"(
[mesh]
dims = 16,16
d = 2
[physics]
nu0 = 0.005
[norms]
q = 4
p = 9/8
)";
}

TEST_CASE("minimal valid config loads with defaults") {
  const auto cfg = parse_config(kMinimal, "minimal");
  CHECK(cfg.dims[0] == 16);
  CHECK(cfg.nu0 == doctest::Approx(0.005));
  CHECK(cfg.q == doctest::Approx(4.0));
  CHECK(cfg.p == doctest::Approx(1.125));
  CHECK(cfg.patch_side == "left");
  CHECK(cfg.equilibrium == "manufactured");
}

TEST_CASE("index gate violation is named") {
  const std::string bad = std::string(kMinimal) + "\n[norms]\np = 1.2\n";
  CHECK_THROWS_WITH_AS(parse_config(bad, "bad"),
                       doctest::Contains("p < 2q/(2q-1)"),
                       std::invalid_argument);
}

TEST_CASE("missing nu0 is fatal with the key named") {
  const char* text = "[mesh]\ndims = 16,16\n[norms]\nq = 4\np = 9/8\n";
  CHECK_THROWS_WITH_AS(parse_config(text, "x"),
                       doctest::Contains("physics.nu0 required"),
                       std::invalid_argument);
}

TEST_CASE("unknown keys and sections are fatal with line numbers") {
  const std::string bad1 = std::string(kMinimal) + "[mesh]\nwidth = 3\n";
  CHECK_THROWS_WITH_AS(parse_config(bad1, "cfg"),
                       doctest::Contains("unknown key 'mesh.width'"),
                       std::invalid_argument);
  const std::string bad2 = std::string(kMinimal) + "[turbo]\nx = 1\n";
  CHECK_THROWS_WITH_AS(parse_config(bad2, "cfg"),
                       doctest::Contains("unknown section"),
                       std::invalid_argument);
  try {
    parse_config(std::string(kMinimal) + "[mesh]\nbad line\n", "cfg");
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("cfg:") == 0);  // carries a line number
  }
}

TEST_CASE("downstream gates are checked at load time") {
  CHECK_THROWS(parse_config(std::string(kMinimal) + "[mesh]\ndims = 3,16\n", "x"));
  CHECK_THROWS(parse_config(std::string(kMinimal) + "[mesh]\npatch_fraction = 0\n", "x"));
  CHECK_THROWS(parse_config(std::string(kMinimal) + "[mesh]\npatch_side = diagonal\n", "x"));
  CHECK_THROWS(parse_config(std::string(kMinimal) + "[physics]\nequilibrium = warp\n", "x"));
}

TEST_CASE("canonical form and hash are stable") {
  const auto c1 = parse_config(kMinimal, "a");
  const auto c2 = parse_config(kMinimal, "b");
  CHECK(canonical_config(c1) == canonical_config(c2));
  CHECK(fnv1a_hash(canonical_config(c1)) == fnv1a_hash(canonical_config(c2)));
  auto c3 = c1;
  c3.nu0 = 0.006;
  CHECK(fnv1a_hash(canonical_config(c3)) != fnv1a_hash(canonical_config(c1)));
}
