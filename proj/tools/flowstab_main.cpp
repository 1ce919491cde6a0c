// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "CLI11.hpp"

#include "flowstab/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Boundary feedback stabilization toolkit for incompressible flow "
      "near an unstable equilibrium"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool check_only = false;

  for (const std::string name :
       {"mesh", "equilibrium", "spectrum", "design", "simulate", "verify",
        "run"}) {
    auto* sub = app.add_subcommand(name, "run the pipeline through " + name);
    sub->add_option("--config", config_path, "configuration file")
        ->required();
    sub->add_option("--out", out_dir, "output directory override");
    sub->add_option("--seed", seed, "seed override")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_flag("--check-only", check_only,
                  "validate the configuration and exit");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string stage_name = app.get_subcommands().front()->get_name();

  try {
    auto cfg = flowstab::load_config(config_path);
    if (!out_dir.empty()) cfg.dir = out_dir;
    if (seed_set) cfg.seed = seed;
    if (check_only) {
      std::cout << "configuration ok\n";
      return 0;
    }
    const auto out =
        flowstab::run_pipeline(cfg, flowstab::parse_stage(stage_name));
    std::cout << flowstab::json_dump(out.report) << "\n";
    return out.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
