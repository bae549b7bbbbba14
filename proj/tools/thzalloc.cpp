#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thzalloc/error.hpp"
#include "thzalloc/harness.hpp"
#include "thzalloc/io.hpp"
#include "thzalloc/synthetic.hpp"

namespace fs = std::filesystem;
using namespace thz;

namespace {

enum Exit { kOk = 0, kInput = 2, kInfeasible = 3, kSolver = 4 };

struct LayoutSource {
  std::string layout_file;
  std::string absorption_file;
  std::string profile = "two-window";
  double prominence = 0.05;

  void add(CLI::App* app) {
    app->add_option("--layout", layout_file, "fitted layout file (from `fit`)");
    app->add_option("--absorption", absorption_file, "absorption CSV to segment and fit");
    app->add_option("--profile", profile, "synthetic profile when no file is given")
        ->check(CLI::IsMember({"two-window", "single-peak"}));
    app->add_option("--prominence", prominence, "peak prominence for segmentation (1/m)");
  }

  SpectrumLayout load() const {
    if (!layout_file.empty()) return read_layout(fs::path(layout_file));
    if (!absorption_file.empty()) return fit_layout(load_samples(fs::path(absorption_file)), prominence);
    auto p = profile == "single-peak" ? SyntheticProfile::single_peak() : SyntheticProfile::two_window();
    return fit_layout(generate_absorption(p), prominence);
  }
};

struct ScenarioFlags {
  std::string file;
  ScenarioParams p = default_params(8);
  double p_max_dbm = 0.0;

  void add(CLI::App* app) {
    app->add_option("--scenario", file, "scenario JSON; flags below override it");
    app->add_option("--users", p.n_users, "number of users");
    app->add_option("--seed", p.seed, "user-drop seed");
    app->add_option("--p-tot-dbm", p.p_tot_dbm, "total power budget (dBm)");
    app->add_option("--p-max-dbm", p_max_dbm, "per-user power limit (dBm), default 4 P_tot / 3|I|");
    app->add_option("--r-thr", p.r_thr_bps, "rate threshold (bit/s)");
    app->add_option("--b-g", p.b_g_hz, "guard band (Hz)");
    app->add_option("--b-max", p.b_max_hz, "largest sub-band (Hz)");
    app->add_option("--room-x", p.room_x_m, "room length (m)");
    app->add_option("--room-y", p.room_y_m, "room width (m)");
    app->add_option("--height", p.h_eps_m, "AP height above the user plane (m)");
  }

  ScenarioParams resolve(const CLI::App* app) const {
    ScenarioParams out = p;
    if (!file.empty()) {
      out = read_scenario_params(fs::path(file));
      auto take = [&](const char* flag, auto& dst, const auto& src) {
        if (app->count(flag)) dst = src;
      };
      take("--users", out.n_users, p.n_users);
      take("--seed", out.seed, p.seed);
      take("--p-tot-dbm", out.p_tot_dbm, p.p_tot_dbm);
      take("--r-thr", out.r_thr_bps, p.r_thr_bps);
      take("--b-g", out.b_g_hz, p.b_g_hz);
      take("--b-max", out.b_max_hz, p.b_max_hz);
      take("--room-x", out.room_x_m, p.room_x_m);
      take("--room-y", out.room_y_m, p.room_y_m);
      take("--height", out.h_eps_m, p.h_eps_m);
    }
    if (app->count("--p-max-dbm")) out.p_max_dbm = p_max_dbm;
    out.validate();
    return out;
  }
};

struct SolverFlags {
  BaselineConfig c;
  bool no_refine = false;
  bool no_continuation = false;

  void add(CLI::App* app) {
    app->add_option("--lambda", c.solver.lambda, "penalty weight");
    app->add_option("--epsilon", c.solver.epsilon, "penalty convergence threshold");
    app->add_option("--max-outer", c.solver.max_outer, "outer iteration limit");
    app->add_option("--inner-tol", c.solver.inner_kkt_tol, "inner barrier tolerance");
    app->add_option("--edge-threshold", c.edge_threshold, "K threshold defining B* (1/m)");
    app->add_flag("--no-refine", no_refine, "skip the assignment local search after rounding");
    app->add_flag("--no-continuation", no_continuation, "ASB_full skips the fixed-edge continuation");
  }

  BaselineConfig resolve() const {
    BaselineConfig out = c;
    out.solver.refine_assignment = !no_refine;
    out.edge_continuation = !no_continuation;
    return out;
  }
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ValidationError("bad axis value '" + item + "'");
    }
    if (used != item.size()) throw ValidationError("bad axis value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<Scheme> parse_schemes(const std::string& text) {
  std::vector<Scheme> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    auto s = parse_scheme(item);
    if (!s) throw ValidationError("unknown scheme '" + item + "'");
    out.push_back(*s);
  }
  return out;
}

int run_gen(const std::string& profile, const std::string& out_path) {
  auto p = profile == "single-peak" ? SyntheticProfile::single_peak() : SyntheticProfile::two_window();
  const auto samples = generate_absorption(p);
  std::vector<std::string> comments{"tool: thzalloc " + std::string(version()), "synthetic: " + p.describe()};
  if (out_path.empty() || out_path == "-") {
    write_samples_csv(std::cout, samples, comments);
  } else {
    auto out = open_out(out_path);
    write_samples_csv(out, samples, comments);
  }
  return kOk;
}

int run_fit(const LayoutSource& src, const std::string& out_path) {
  SpectrumLayout layout;
  if (!src.layout_file.empty()) throw ValidationError("fit reads --absorption or --profile, not --layout");
  layout = src.load();
  for (std::size_t r = 0; r < layout.size(); ++r) {
    const auto& m = layout.regions[r];
    std::printf("region %zu %s f_ref=%.6e B_tot=%.6e sigma1=%.6g sigma2=%.6g sigma3=%.6g rmse=%.3g\n", r,
                to_string(m.kind), m.f_ref, m.b_tot, m.sigma1, m.sigma2, m.sigma3, m.fit_rmse);
  }
  OutputHeader h;
  std::ostringstream canon;
  write_layout(canon, layout, h);
  h.config_hash = fnv1a(canon.str());
  if (out_path.empty() || out_path == "-") {
    write_layout(std::cout, layout, h);
  } else {
    auto out = open_out(out_path);
    write_layout(out, layout, h);
  }
  return kOk;
}

int run_solve(const ScenarioParams& params, const SpectrumLayout& full_layout, std::size_t regions,
              const BaselineConfig& config, Scheme scheme, std::size_t grid, const fs::path& dir) {
  if (regions < 1 || regions > full_layout.size())
    throw ValidationError("--regions must lie in 1.." + std::to_string(full_layout.size()));
  const auto layout = full_layout.prefix(regions);
  const Scenario sc = generate(params);
  const auto res = run_scheme(scheme, sc, layout, config, grid);

  OutputHeader h;
  h.seed = params.seed;
  h.config_hash = fnv1a(canonical_config(params, layout, config));
  h.extra = {{"scheme", to_string(scheme)}};
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "report.json");
    write_report(out, res, h);
  }
  if (res.allocation) {
    auto out = open_out(dir / "allocation.csv");
    write_allocation(out, sc, *res.allocation, h);
  }
  {
    auto out = open_out(dir / "trace.csv");
    write_trace(out, res.solve ? res.solve->trace : std::vector<IterationRecord>{}, h);
  }

  std::printf("scheme %s: %s, sum rate %.6g Gbps, %.1f ms\n", to_string(scheme),
              res.feasible ? "feasible" : "infeasible", res.sum_rate / 1e9, res.wall_ms);
  for (const auto& n : res.notes) std::printf("  note: %s\n", n.c_str());
  for (const auto* f : res.feasibility.failures())
    std::printf("  failed: %s residual %.6g\n", f->name.c_str(), f->residual);
  if (!res.feasible) {
    if (res.allocation || !res.solve || res.solve->status == SolveStatus::Infeasible) return kInfeasible;
    return kSolver;
  }
  if (res.solve && res.solve->status != SolveStatus::Converged) return kSolver;
  return kOk;
}

int run_experiment(const ExperimentSpec& spec, const fs::path& dir, bool feasibility_only) {
  std::fprintf(stderr, "%zu cells\n", spec.values.size() * spec.trials * spec.schemes.size());
  const auto rows = run_sweep(spec, [](std::size_t d, std::size_t n) {
    if (d == n || d % 10 == 0) std::fprintf(stderr, "\r%zu/%zu", d, n);
    if (d == n) std::fprintf(stderr, "\n");
  });
  const auto summary = summarize(spec, rows);
  OutputHeader h;
  h.seed = spec.scenario.seed;
  h.config_hash = spec_hash(spec);
  h.extra = {{"axis", to_string(spec.axis)}, {"trials", std::to_string(spec.trials)}};
  fs::create_directories(dir);
  if (feasibility_only) {
    auto out = open_out(dir / "feasibility.csv");
    write_feasibility_csv(out, summary, h);
  } else {
    auto out = open_out(dir / "sweep.csv");
    write_sweep_csv(out, spec, rows, h);
    auto sout = open_out(dir / "summary.csv");
    write_summary_csv(sout, summary, h);
  }
  for (const auto& s : summary)
    std::printf("%s=%g %-15s feasible %zu/%zu median %.6g Gbps mean B_delta %.4g GHz\n",
                to_string(spec.axis), s.axis_value, to_string(s.scheme), s.feasible, s.trials,
                s.median_sum_rate / 1e9, s.mean_b_delta / 1e9);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-band THz spectrum allocation with adaptive sub-band bandwidth"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  std::string gen_profile = "two-window", gen_out;
  auto* gen = app.add_subcommand("gen-absorption", "write a synthetic absorption CSV");
  gen->add_option("--profile", gen_profile)->check(CLI::IsMember({"two-window", "single-peak"}));
  gen->add_option("-o,--out", gen_out, "output path, - for stdout");

  LayoutSource fit_src;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit", "segment absorption data and fit each region");
  fit_src.add(fit);
  fit->add_option("-o,--out", fit_out, "layout file, - for stdout");

  LayoutSource solve_src;
  ScenarioFlags solve_sc;
  SolverFlags solve_cfg;
  std::string scheme_name = "ASB_full", solve_dir = "out";
  std::size_t solve_regions = 2, grid = 50;
  auto* solve = app.add_subcommand("solve", "allocate one scenario");
  solve_src.add(solve);
  solve_sc.add(solve);
  solve_cfg.add(solve);
  solve->add_option("--scheme", scheme_name, "ESB, ASB_fixed_edge, ASB_full or BruteForce");
  solve->add_option("--regions", solve_regions, "use the first n regions of the layout");
  solve->add_option("--grid", grid, "brute-force grid points");
  solve->add_option("-o,--out-dir", solve_dir, "output directory");

  struct ExperimentFlags {
    LayoutSource src;
    ScenarioFlags sc;
    SolverFlags cfg;
    std::string axis = "p_tot_dbm", values = "-20,-17.5,-15,-12.5,-10", schemes = "ESB,ASB_fixed_edge,ASB_full";
    std::size_t trials = 20, regions = 2, workers = 0;
    std::string dir = "out";
  };
  ExperimentFlags sweep_f, feas_f;
  feas_f.trials = 50;
  auto add_experiment = [](CLI::App* sub, ExperimentFlags& f) {
    f.src.add(sub);
    f.sc.add(sub);
    f.cfg.add(sub);
    sub->add_option("--axis", f.axis, "p_tot_dbm, n_regions, r_thr or b_max");
    sub->add_option("--values", f.values, "comma-separated ascending axis values");
    sub->add_option("--trials", f.trials, "user drops per axis value");
    sub->add_option("--schemes", f.schemes, "comma-separated schemes");
    sub->add_option("--regions", f.regions, "regions used when the axis is not n_regions");
    sub->add_option("--workers", f.workers, "worker threads (default THZ_WORKERS or all cores)");
    sub->add_option("-o,--out-dir", f.dir, "output directory");
  };
  auto* sweep = app.add_subcommand("sweep", "sum rate and B_delta along one axis");
  add_experiment(sweep, sweep_f);
  auto* feas = app.add_subcommand("feasibility", "percentage of feasible trials along one axis");
  add_experiment(feas, feas_f);

  CLI11_PARSE(app, argc, argv);

  auto experiment = [](const CLI::App* sub, const ExperimentFlags& f) {
    ExperimentSpec spec;
    spec.scenario = f.sc.resolve(sub);
    spec.layout = f.src.load();
    spec.n_regions = f.regions;
    const auto axis = parse_axis(f.axis);
    if (!axis) throw ValidationError("unknown axis '" + f.axis + "'");
    spec.axis = *axis;
    spec.values = parse_values(f.values);
    spec.trials = f.trials;
    spec.schemes = parse_schemes(f.schemes);
    spec.config = f.cfg.resolve();
    spec.workers = f.workers;
    return spec;
  };

  try {
    if (*gen) return run_gen(gen_profile, gen_out);
    if (*fit) return run_fit(fit_src, fit_out);
    if (*solve) {
      const auto scheme = parse_scheme(scheme_name);
      if (!scheme) throw ValidationError("unknown scheme '" + scheme_name + "'");
      return run_solve(solve_sc.resolve(solve), solve_src.load(), solve_regions, solve_cfg.resolve(),
                       *scheme, grid, solve_dir);
    }
    if (*sweep) return run_experiment(experiment(sweep, sweep_f), sweep_f.dir, false);
    if (*feas) return run_experiment(experiment(feas, feas_f), feas_f.dir, true);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const InsufficientDataError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const SizeGuardError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kSolver;
  }
  return kOk;
}
