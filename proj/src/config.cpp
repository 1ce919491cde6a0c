// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "flowstab/mesh.hpp"
#include "flowstab/norms.hpp"

namespace flowstab {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, int line,
                       const std::string& msg) {
  std::ostringstream os;
  os << origin << ":" << line << ": " << msg;
  throw std::invalid_argument(os.str());
}

double to_double(const std::string& v, const std::string& origin, int line) {
  try {
    std::size_t pos = 0;
    // allow simple fractions like 9/8
    const auto slash = v.find('/');
    if (slash != std::string::npos) {
      const double num = std::stod(v.substr(0, slash));
      const double den = std::stod(v.substr(slash + 1));
      if (den == 0) fail(origin, line, "division by zero in value");
      return num / den;
    }
    const double d = std::stod(v, &pos);
    if (pos != v.size()) fail(origin, line, "trailing characters in number: " + v);
    return d;
  } catch (const std::invalid_argument&) {
    fail(origin, line, "expected a number, got '" + v + "'");
  }
}

int to_int(const std::string& v, const std::string& origin, int line) {
  const double d = to_double(v, origin, line);
  const int i = int(std::llround(d));
  if (double(i) != d) fail(origin, line, "expected an integer, got '" + v + "'");
  return i;
}

bool to_bool(const std::string& v, const std::string& origin, int line) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(origin, line, "expected a boolean, got '" + v + "'");
}

std::vector<double> to_list(const std::string& v, const std::string& origin,
                            int line) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(item, origin, line));
  }
  if (out.empty()) fail(origin, line, "expected a comma-separated list");
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  bool nu0_seen = false;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;

  using Handler = std::function<void(const std::string&, int)>;
  std::map<std::string, Handler> handlers;
  auto add = [&](const std::string& key, Handler h) { handlers[key] = h; };

  add("mesh.dims", [&](const std::string& v, int ln) {
    const auto list = to_list(v, origin, ln);
    if (list.size() < 2 || list.size() > 3)
      fail(origin, ln, "mesh.dims needs 2 or 3 entries");
    for (std::size_t i = 0; i < list.size(); ++i)
      cfg.dims[i] = int(std::llround(list[i]));
    if (list.size() == 2) cfg.dims[2] = 1;
  });
  add("mesh.lengths", [&](const std::string& v, int ln) {
    const auto list = to_list(v, origin, ln);
    if (list.size() < 2 || list.size() > 3)
      fail(origin, ln, "mesh.lengths needs 2 or 3 entries");
    for (std::size_t i = 0; i < list.size(); ++i) cfg.lengths[i] = list[i];
  });
  add("mesh.d", [&](const std::string& v, int ln) { cfg.d = to_int(v, origin, ln); });
  add("mesh.patch_side",
      [&](const std::string& v, int) { cfg.patch_side = v; });
  add("mesh.patch_fraction", [&](const std::string& v, int ln) {
    cfg.patch_fraction = to_double(v, origin, ln);
  });
  add("mesh.collar_depth", [&](const std::string& v, int ln) {
    cfg.collar_depth = to_int(v, origin, ln);
  });
  add("physics.nu0", [&](const std::string& v, int ln) {
    cfg.nu0 = to_double(v, origin, ln);
    nu0_seen = true;
  });
  add("physics.equilibrium",
      [&](const std::string& v, int) { cfg.equilibrium = v; });
  add("physics.amplitude", [&](const std::string& v, int ln) {
    cfg.amplitude = to_double(v, origin, ln);
  });
  add("physics.pressure_amplitude", [&](const std::string& v, int ln) {
    cfg.pressure_amplitude = to_double(v, origin, ln);
  });
  add("physics.mode_x",
      [&](const std::string& v, int ln) { cfg.mode_x = to_int(v, origin, ln); });
  add("physics.mode_y",
      [&](const std::string& v, int ln) { cfg.mode_y = to_int(v, origin, ln); });
  add("physics.force_file",
      [&](const std::string& v, int) { cfg.force_file = v; });
  add("norms.q", [&](const std::string& v, int ln) { cfg.q = to_double(v, origin, ln); });
  add("norms.p", [&](const std::string& v, int ln) { cfg.p = to_double(v, origin, ln); });
  add("design.gamma1", [&](const std::string& v, int ln) {
    cfg.gamma1 = to_double(v, origin, ln);
  });
  add("design.gamma1_factor", [&](const std::string& v, int ln) {
    cfg.gamma1_factor = to_double(v, origin, ln);
  });
  add("design.method", [&](const std::string& v, int) { cfg.method = v; });
  add("design.svd_tol", [&](const std::string& v, int ln) {
    cfg.svd_tol = to_double(v, origin, ln);
  });
  add("sim.T", [&](const std::string& v, int ln) { cfg.T = to_double(v, origin, ln); });
  add("sim.dt", [&](const std::string& v, int ln) { cfg.dt = to_double(v, origin, ln); });
  add("sim.amplitudes", [&](const std::string& v, int ln) {
    cfg.amplitudes = to_list(v, origin, ln);
  });
  add("sim.basin", [&](const std::string& v, int ln) { cfg.basin = to_bool(v, origin, ln); });
  add("sim.probe_seed", [&](const std::string& v, int ln) {
    cfg.probe_seed = std::uint64_t(to_int(v, origin, ln));
  });
  add("output.dir", [&](const std::string& v, int) { cfg.dir = v; });
  add("output.snapshot_stride", [&](const std::string& v, int ln) {
    cfg.snapshot_stride = to_int(v, origin, ln);
  });
  add("output.check_level",
      [&](const std::string& v, int) { cfg.check_level = v; });
  add("output.dump_matrices", [&](const std::string& v, int ln) {
    cfg.dump_matrices = to_bool(v, origin, ln);
  });
  add("output.seed", [&](const std::string& v, int ln) {
    cfg.seed = std::uint64_t(to_int(v, origin, ln));
  });

  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(origin, line, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section != "mesh" && section != "physics" && section != "norms" &&
          section != "design" && section != "sim" && section != "output")
        fail(origin, line, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(origin, line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (section.empty()) fail(origin, line, "key outside any section");
    const std::string full = section + "." + key;
    const auto it = handlers.find(full);
    if (it == handlers.end()) fail(origin, line, "unknown key '" + full + "'");
    it->second(value, line);
  }

  // load-time gates for every downstream module
  if (!nu0_seen) throw std::invalid_argument(origin + ": physics.nu0 required");
  if (cfg.nu0 <= 0) throw std::invalid_argument(origin + ": physics.nu0 must be positive");
  if (cfg.d != 2 && cfg.d != 3)
    throw std::invalid_argument(origin + ": mesh.d must be 2 or 3");
  for (int a = 0; a < cfg.d; ++a)
    if (cfg.dims[a] < 4)
      throw std::invalid_argument(origin + ": mesh.dims must be >= 4 per axis");
  if (cfg.patch_fraction <= 0 || cfg.patch_fraction > 1)
    throw std::invalid_argument(origin + ": mesh.patch_fraction must be in (0,1]");
  if (cfg.collar_depth < 1)
    throw std::invalid_argument(origin + ": mesh.collar_depth must be >= 1");
  parse_side(cfg.patch_side);  // throws on unknown side
  if (cfg.equilibrium != "manufactured" && cfg.equilibrium != "newton")
    throw std::invalid_argument(origin + ": physics.equilibrium must be manufactured or newton");
  if (cfg.method != "shifted-lqr" && cfg.method != "place")
    throw std::invalid_argument(origin + ": design.method must be shifted-lqr or place");
  if (cfg.check_level != "quick" && cfg.check_level != "full" &&
      cfg.check_level != "none")
    throw std::invalid_argument(origin + ": output.check_level must be quick, full or none");
  // the norm-suite gate names the violated inequality
  const double h = cfg.lengths[0] / cfg.dims[0];
  make_norm_suite(cfg.q, cfg.p, cfg.d, h);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string canonical_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "[mesh]\n"
     << "dims = " << c.dims[0] << "," << c.dims[1] << "," << c.dims[2] << "\n"
     << "lengths = " << c.lengths[0] << "," << c.lengths[1] << ","
     << c.lengths[2] << "\n"
     << "d = " << c.d << "\n"
     << "patch_side = " << c.patch_side << "\n"
     << "patch_fraction = " << c.patch_fraction << "\n"
     << "collar_depth = " << c.collar_depth << "\n"
     << "[physics]\n"
     << "nu0 = " << c.nu0 << "\n"
     << "equilibrium = " << c.equilibrium << "\n"
     << "amplitude = " << c.amplitude << "\n"
     << "pressure_amplitude = " << c.pressure_amplitude << "\n"
     << "mode_x = " << c.mode_x << "\n"
     << "mode_y = " << c.mode_y << "\n"
     << "force_file = " << c.force_file << "\n"
     << "[norms]\n"
     << "q = " << c.q << "\n"
     << "p = " << c.p << "\n"
     << "[design]\n"
     << "gamma1 = " << c.gamma1 << "\n"
     << "gamma1_factor = " << c.gamma1_factor << "\n"
     << "method = " << c.method << "\n"
     << "svd_tol = " << c.svd_tol << "\n"
     << "[sim]\n"
     << "T = " << c.T << "\n"
     << "dt = " << c.dt << "\n"
     << "amplitudes = ";
  for (std::size_t i = 0; i < c.amplitudes.size(); ++i)
    os << (i ? "," : "") << c.amplitudes[i];
  os << "\n"
     << "basin = " << (c.basin ? "true" : "false") << "\n"
     << "probe_seed = " << c.probe_seed << "\n"
     << "[output]\n"
     << "dir = " << c.dir << "\n"
     << "snapshot_stride = " << c.snapshot_stride << "\n"
     << "check_level = " << c.check_level << "\n"
     << "dump_matrices = " << (c.dump_matrices ? "true" : "false") << "\n"
     << "seed = " << c.seed << "\n";
  return os.str();
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace flowstab
