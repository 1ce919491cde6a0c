// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#include "flowstab/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flowstab/acceptance.hpp"
#include "flowstab/norms.hpp"

namespace flowstab {

namespace {

std::mt19937_64 stage_rng(std::uint64_t seed, const std::string& stage) {
  return std::mt19937_64(seed ^ fnv1a_hash(stage));
}

Json complex_json(const Cplx& z) { return Json::array({z.real(), z.imag()}); }

Json fit_json(const DecayFit& fit) {
  Json j;
  j["gamma_fit"] = fit.gamma_fit;
  j["c_fit"] = fit.c_fit;
  j["r2"] = fit.r2;
  j["beta_T"] = fit.beta_T;
  j["window"] = Json::array({fit.window_start, fit.window_end});
  j["low_confidence"] = fit.low_confidence;
  return j;
}

Vec read_force_file(const std::string& path, int expected) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open force file: " + path);
  std::vector<double> vals;
  double v;
  while (in >> v) vals.push_back(v);
  if (int(vals.size()) != expected) {
    std::ostringstream os;
    os << "force file " << path << " holds " << vals.size()
       << " values, expected " << expected;
    throw std::invalid_argument(os.str());
  }
  Vec f(expected);
  for (int i = 0; i < expected; ++i) f[i] = vals[std::size_t(i)];
  return f;
}

}  // namespace

Stage parse_stage(const std::string& name) {
  if (name == "mesh") return Stage::Mesh;
  if (name == "equilibrium") return Stage::Equilibrium;
  if (name == "spectrum") return Stage::Spectrum;
  if (name == "design") return Stage::Design;
  if (name == "simulate") return Stage::Simulate;
  if (name == "verify") return Stage::Verify;
  if (name == "run") return Stage::Run;
  throw std::invalid_argument("unknown stage: " + name);
}

PipelineOutput run_pipeline(const RunConfig& cfg, Stage stage,
                            bool write_files) {
  PipelineOutput out;
  Json& rep = out.report;
  {
    std::ostringstream hash;
    hash << std::hex << fnv1a_hash(canonical_config(cfg));
    rep["provenance"]["config_hash"] = hash.str();
    rep["provenance"]["seed"] = cfg.seed;
    rep["provenance"]["version"] = "0.1.0";
    rep["provenance"]["timestamp"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
  }
  const std::filesystem::path dir(cfg.dir);
  if (write_files) std::filesystem::create_directories(dir);

  auto want = [&](Stage s) { return int(stage) >= int(s) || stage == Stage::Run; };
  auto fail_stage = [&](const char* name, const std::exception& e) {
    rep["stages"][name] = "error";
    rep["errors"][name] = e.what();
    out.exit_code = 2;
  };

  // ---- mesh ------------------------------------------------------------
  DomainMesh mesh;
  try {
    mesh = build_mesh(cfg.dims, cfg.lengths, cfg.d);
    mesh = select_patch(mesh, parse_side(cfg.patch_side), cfg.patch_fraction);
    mesh = build_collar(mesh, cfg.collar_depth);
    rep["mesh"]["boundary_nodes"] = mesh.boundary.size();
    rep["mesh"]["patch_nodes"] = mesh.patch.size();
    rep["mesh"]["collar_cells"] = mesh.collar_cells.size();
    rep["mesh"]["patch_connected"] = patch_connected(mesh);
    rep["stages"]["mesh"] = "ok";
    if (write_files) {
      std::ostringstream os;
      dump_boundary(mesh, os);
      write_text_file((dir / "boundary.txt").string(), os.str());
    }
  } catch (const std::exception& e) {
    fail_stage("mesh", e);
    return out;
  }
  if (!want(Stage::Equilibrium)) return out;

  // ---- operators + equilibrium ------------------------------------------
  std::unique_ptr<DiscreteOperators2D> ops;
  Equilibrium eq;
  try {
    ops = std::make_unique<DiscreteOperators2D>(mesh, cfg.nu0);
    if (cfg.equilibrium == "manufactured") {
      eq = ops->solve_equilibrium_manufactured(
          cfg.amplitude, cfg.pressure_amplitude, cfg.mode_x, cfg.mode_y);
    } else {
      Vec f;
      if (!cfg.force_file.empty()) {
        f = read_force_file(cfg.force_file, ops->layout().ni());
      } else {
        const auto man = ops->solve_equilibrium_manufactured(
            cfg.amplitude, cfg.pressure_amplitude, cfg.mode_x, cfg.mode_y);
        f = man.f;
      }
      eq = ops->solve_equilibrium_newton(f, Vec());
    }
    rep["equilibrium"]["residual"] = eq.residual_norm;
    rep["equilibrium"]["converged"] = eq.converged;
    rep["equilibrium"]["iterations"] = eq.iterations;
    rep["equilibrium"]["div_inf"] = ops->div_inf_norm(eq.xe);
    rep["stages"]["equilibrium"] = eq.converged ? "ok" : "stagnated";
  } catch (const std::exception& e) {
    fail_stage("equilibrium", e);
    return out;
  }
  if (!want(Stage::Spectrum)) return out;

  // ---- spectrum -----------------------------------------------------------
  SpectralData sd;
  StokesModes modes;
  try {
    SpectralOptions sopt;
    sopt.svd_tol = cfg.svd_tol;
    sd = compute_spectrum(ops->oseen_reduced(), sopt);
    modes = stokes_modes(*ops);
    rep["spectrum"]["n_unstable"] = sd.n_unstable;
    rep["spectrum"]["n_distinct"] = sd.distinct_count();
    rep["spectrum"]["multiplicities"] = sd.multiplicity;
    rep["spectrum"]["channel_count"] = sd.channel_count;
    rep["spectrum"]["gamma0"] = sd.gamma0;
    rep["spectrum"]["lambda_stable_re"] = sd.lambda_stable_re;
    rep["spectrum"]["max_residual"] = sd.max_residual;
    rep["spectrum"]["grouping_ambiguous"] = sd.grouping_ambiguous;
    Json eigs = Json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(16, sd.eigenvalues.size()); ++i)
      eigs.push_back(complex_json(sd.eigenvalues[i]));
    rep["spectrum"]["rightmost"] = eigs;
    if (sd.n_unstable == 0) rep["spectrum"]["note"] = "no control needed";
    rep["stages"]["spectrum"] = "ok";
    if (write_files) {
      std::ostringstream os;
      write_spectrum_csv(os, sd);
      write_text_file((dir / "spectrum.csv").string(), os.str());
      if (cfg.dump_matrices) {
        std::ostringstream ms;
        write_coord_matrix(ms, ops->oseen_reduced(), 1e-14);
        write_text_file((dir / "oseen_reduced.txt").string(), ms.str());
      }
    }
  } catch (const std::exception& e) {
    fail_stage("spectrum", e);
    return out;
  }
  if (!want(Stage::Design)) return out;

  // ---- design ------------------------------------------------------------
  FeedbackLaw law;
  RealFormLaw rf;
  ClosedLoopReport clrep;
  try {
    auto rng = stage_rng(cfg.seed, "design");
    const auto traces = adjoint_normal_traces(sd, *ops);
    const auto act = select_actuators(sd, traces, *ops, rng, cfg.svd_tol);
    const auto wb = build_boundary_pairings(sd, traces, act, *ops);
    const auto ub = build_interior_pairings(sd, act, *ops);
    const auto rank = rank_test(sd, wb, ub, ops->nu0(), cfg.svd_tol);
    Json rk = Json::array();
    for (const auto& e : rank.entries) {
      Json je;
      je["lambda"] = complex_json(e.lambda);
      je["ell"] = e.ell;
      je["rank_augmented"] = e.rank_augmented;
      je["rank_boundary_only"] = e.rank_boundary_only;
      je["pass"] = e.pass;
      Json sv = Json::array();
      for (int i = 0; i < e.singular_values.size(); ++i)
        sv.push_back(e.singular_values[i]);
      je["singular_values"] = sv;
      Json svb = Json::array();
      for (int i = 0; i < e.singular_values_boundary.size(); ++i)
        svb.push_back(e.singular_values_boundary[i]);
      je["singular_values_boundary"] = svb;
      rk.push_back(je);
    }
    rep["rank_report"]["entries"] = rk;
    rep["rank_report"]["pass"] = rank.pass;
    rep["rank_report"]["svd_tol"] = cfg.svd_tol;

    const auto ps = build_projected_system(sd, *ops, act);
    double gamma1 = cfg.gamma1;
    if (gamma1 <= 0 && sd.n_unstable > 0)
      gamma1 = cfg.gamma1_factor * sd.eigenvalues[0].real();
    if (sd.n_unstable > 0 && gamma1 <= sd.gamma0)
      gamma1 = 1.5 * sd.gamma0;  // keep the design rate above gamma0
    const auto method = cfg.method == "place" ? GainMethod::Place
                                              : GainMethod::ShiftedLqr;
    const auto gd = design_gains(ps, sd.n_unstable ? gamma1 : 1.0, sd.gamma0,
                                 rng, method);
    law = lift_gains(ps, gd, sd, act, *ops);
    clrep = assemble_closed_loop(*ops, law);
    rf = realify(law, sd, *ops);

    rep["gains"]["gamma1"] = law.empty() ? 0.0 : gamma1;
    rep["gains"]["method"] =
        gd.method == GainMethod::ShiftedLqr ? "shifted-lqr" : "place";
    rep["gains"]["projected_abscissa"] = gd.projected_abscissa;
    Json pn = Json::array(), qn = Json::array();
    const double sv = std::sqrt(ops->volume_element());
    for (int c = 0; c < law.channel_count; ++c) {
      pn.push_back(sv * law.p_functionals.col(c).norm());
      qn.push_back(sv * law.q_functionals.col(c).norm());
    }
    rep["gains"]["p_norms"] = pn;
    rep["gains"]["q_norms"] = qn;
    rep["gains"]["dirichlet_shift"] = ops->dirichlet_shift();
    rep["closed_loop"]["abscissa"] = clrep.abscissa;
    rep["closed_loop"]["gamma0"] = law.gamma0;
    rep["closed_loop"]["pass"] = clrep.pass;
    Json head = Json::array();
    for (const auto& z : clrep.spectrum_head) head.push_back(complex_json(z));
    rep["closed_loop"]["rightmost"] = head;
    rep["real_form"]["channels"] = rf.n_channels;
    rep["stages"]["design"] = clrep.pass ? "ok" : "design-failure";
    if (write_files && cfg.dump_matrices) {
      std::ostringstream ms;
      write_coord_matrix(ms, law.closed_loop, 1e-14);
      write_text_file((dir / "closed_loop.txt").string(), ms.str());
    }
  } catch (const std::exception& e) {
    fail_stage("design", e);
    return out;
  }
  if (!want(Stage::Simulate)) return out;

  // ---- simulate ------------------------------------------------------------
  try {
    auto rng = stage_rng(cfg.seed ^ cfg.probe_seed, "simulate");
    const auto ns_suite = make_norm_suite(cfg.q, cfg.p, cfg.d,
                                          cfg.lengths[0] / cfg.dims[0]);
    SimOptions sopt;
    const double g0 = law.gamma0 > 0 ? law.gamma0
                                     : 0.95 * std::abs(sd.lambda_stable_re);
    sopt.T = cfg.T > 0 ? cfg.T : 10.0 / std::max(g0, 1e-3);
    sopt.dt = cfg.dt;
    sopt.snapshot_stride = 1;  // per-step states for the pressure series
    sopt.lq_hook = [&](const Vec& xr) {
      return lq_norm(*ops, ops->apply_basis(xr), ns_suite.q);
    };
    sopt.besov_hook = [&](const Vec& xr) {
      return besov_surrogate(*ops, ns_suite, modes, xr);
    };

    // linear closed-loop run from a random smooth state
    Vec w0 = ops->apply_basis_t(ops->random_smooth_field(rng));
    w0.normalize();
    auto lin = simulate_linear(*ops, law.closed_loop, rf, w0, sopt);
    const auto lin_fit = fit_decay(lin);
    rep["decay"]["linear"] = fit_json(lin_fit);
    if (write_files) {
      std::ostringstream os;
      write_norms_csv(os, lin, rf.n_channels);
      write_text_file((dir / "norms_linear.csv").string(), os.str());
    }

    // nonlinear runs along the dominant unstable probe
    Vec probe;
    if (sd.n_unstable > 0)
      probe = sd.phi.col(0).real().normalized();
    else
      probe = w0;
    Json nl = Json::array();
    for (double amp : cfg.amplitudes) {
      auto tr = simulate_nonlinear(*ops, law.closed_loop, rf,
                                   Vec(amp * probe), sopt);
      // pressure norms along the trajectory
      tr.pressure_norms.resize(int(tr.snapshots.size()));
      for (std::size_t s = 0; s < tr.snapshots.size(); ++s) {
        const Vec& zr = tr.snapshots[s];
        const Vec zt = law.closed_loop * zr -
                       nonlinear_term(*ops, zr, rf.boundary_data(zr));
        const Vec chi = recover_pressure_z(*ops, rf, zr, zt);
        tr.pressure_norms[int(s)] =
            std::sqrt(mesh.cell_volume()) * chi.norm();
      }
      const auto fit = fit_decay(tr);
      Json ja = fit_json(fit);
      ja["amplitude"] = amp;
      ja["blown_up"] = tr.blown_up;
      ja["truncated"] = tr.truncated;
      nl.push_back(ja);
      if (write_files) {
        std::ostringstream name;
        name << "norms_nonlinear_" << amp << ".csv";
        std::ostringstream os;
        write_norms_csv(os, tr, rf.n_channels);
        write_text_file((dir / name.str()).string(), os.str());
        if (cfg.snapshot_stride > 0) {
          std::filesystem::create_directories(dir / "snapshots");
          for (std::size_t s = 0; s < tr.snapshots.size();
               s += std::size_t(cfg.snapshot_stride)) {
            for (int comp = 0; comp < 2; ++comp) {
              std::ostringstream fn;
              fn << "amp" << amp << "_t" << tr.snapshot_times[s] << "_"
                 << (comp == 0 ? "ux" : "uy") << ".csv";
              std::ostringstream fs;
              write_field_csv(fs, *ops, ops->apply_basis(tr.snapshots[s]),
                              comp);
              write_text_file((dir / "snapshots" / fn.str()).string(),
                              fs.str());
            }
          }
        }
      }
    }
    rep["decay"]["nonlinear"] = nl;

    if (cfg.basin && sd.n_unstable > 0) {
      const auto basin =
          basin_search(*ops, law.closed_loop, rf, probe, sopt, 1e-4, 1.0, 8);
      rep["basin"]["r1_est"] = basin.r1_est;
      Json trace = Json::array();
      for (const auto& [a, ok] : basin.trace)
        trace.push_back(Json::array({a, ok}));
      rep["basin"]["trace"] = trace;
    }

    // maximal-regularity diagnostic on the stable closed loop
    auto mr_rng = stage_rng(cfg.seed, "maxreg");
    const auto mr = maxreg_constant(*ops, law.closed_loop, ns_suite, modes, 5,
                                    std::min(20.0, sopt.T), mr_rng);
    rep["maxreg"]["constant"] = mr.constant;
    rep["maxreg"]["embedding_constant"] = mr.embedding_constant;
    rep["maxreg"]["samples"] = mr.samples_used;
    rep["stages"]["simulate"] = "ok";
  } catch (const std::exception& e) {
    fail_stage("simulate", e);
    return out;
  }
  if (!want(Stage::Verify)) {
    if (write_files)
      write_text_file((dir / "report.json").string(), json_dump(rep) + "\n");
    return out;
  }

  // ---- verify ---------------------------------------------------------------
  try {
    if (cfg.check_level != "none") {
      const auto checks = run_acceptance_checks(cfg.check_level, nullptr);
      Json jc = Json::array();
      bool all_pass = true;
      for (const auto& c : checks) {
        Json e;
        e["id"] = c.id;
        e["status"] = c.status;
        e["detail"] = c.detail;
        jc.push_back(e);
        if (c.status == "fail") all_pass = false;
      }
      rep["checks"] = jc;
      rep["stages"]["verify"] = all_pass ? "ok" : "failed";
      if (!all_pass) out.exit_code = 1;
    } else {
      rep["stages"]["verify"] = "skipped";
    }
  } catch (const std::exception& e) {
    fail_stage("verify", e);
  }
  if (write_files)
    write_text_file((dir / "report.json").string(), json_dump(rep) + "\n");
  return out;
}

}  // namespace flowstab
