#include "thzalloc/io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "thzalloc/error.hpp"

#ifndef THZALLOC_VERSION
#define THZALLOC_VERSION "0.0.0"
#endif

namespace thz {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json header_json(const OutputHeader& h) {
  json j;
  j["tool"] = "thzalloc";
  j["version"] = version();
  j["seed"] = h.seed;
  j["config_hash"] = hex64(h.config_hash);
  for (const auto& [k, v] : h.extra) j[k] = v;
  return j;
}

}  // namespace

const char* version() noexcept { return THZALLOC_VERSION; }

std::uint64_t fnv1a(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_header(std::ostream& out, const OutputHeader& h) {
  out << "# tool: thzalloc " << version() << '\n';
  out << "# seed: " << h.seed << '\n';
  out << "# config_hash: " << hex64(h.config_hash) << '\n';
  for (const auto& [k, v] : h.extra) out << "# " << k << ": " << v << '\n';
}

std::string canonical_config(const ScenarioParams& p, const SpectrumLayout& layout,
                             const BaselineConfig& c) {
  std::ostringstream os;
  write_scenario_params(os, p);
  for (const auto& r : layout.regions)
    os << to_string(r.kind) << ' ' << num(r.f_ref) << ' ' << num(r.b_tot) << ' ' << num(r.sigma1)
       << ' ' << num(r.sigma2) << ' ' << num(r.sigma3) << '\n';
  const auto& pc = c.problem;
  os << "xi " << num(pc.constants.xi) << " omega " << num(pc.constants.omega) << " varsigma "
     << num(pc.constants.varsigma) << " delta " << num(pc.delta_hz) << " d_margin "
     << num(pc.d_margin) << '\n';
  const auto& s = c.solver;
  os << "lambda " << num(s.lambda) << " epsilon " << num(s.epsilon) << " max_outer " << s.max_outer
     << " inner_tol " << num(s.inner_kkt_tol) << " inner_max " << s.inner_max_iter << " round "
     << num(s.rounding_threshold) << " mu " << num(s.mu_cold) << ' ' << num(s.mu_warm) << ' '
     << num(s.mu_final) << " refine " << s.refine_assignment << '\n';
  os << "edge_threshold " << num(c.edge_threshold) << " edge_continuation " << c.edge_continuation << '\n';
  return os.str();
}

void write_layout(std::ostream& out, const SpectrumLayout& layout, const OutputHeader& header) {
  json j;
  j["header"] = header_json(header);
  j["synthetic"] = layout.synthetic;
  j["regions"] = json::array();
  for (const auto& r : layout.regions)
    j["regions"].push_back({{"kind", to_string(r.kind)},
                            {"f_ref_hz", r.f_ref},
                            {"b_tot_hz", r.b_tot},
                            {"sigma1", r.sigma1},
                            {"sigma2_per_hz", r.sigma2},
                            {"sigma3_per_m", r.sigma3},
                            {"fit_rmse_per_m", r.fit_rmse}});
  j["tw_grouping"] = layout.tw_grouping;
  out << j.dump(2) << '\n';
}

SpectrumLayout read_layout(std::istream& in) {
  SpectrumLayout layout;
  try {
    const json j = json::parse(in);
    layout.synthetic = j.value("synthetic", false);
    for (const auto& r : j.at("regions")) {
      RegionModel m;
      m.kind = region_kind_from_string(r.at("kind").get<std::string>());
      m.f_ref = r.at("f_ref_hz").get<double>();
      m.b_tot = r.at("b_tot_hz").get<double>();
      m.sigma1 = r.at("sigma1").get<double>();
      m.sigma2 = r.at("sigma2_per_hz").get<double>();
      m.sigma3 = r.at("sigma3_per_m").get<double>();
      m.fit_rmse = r.value("fit_rmse_per_m", 0.0);
      layout.regions.push_back(m);
    }
    if (j.contains("tw_grouping"))
      layout.tw_grouping = j.at("tw_grouping").get<std::vector<std::vector<std::size_t>>>();
    else
      layout.tw_grouping = group_transmission_windows(layout.regions);
  } catch (const json::exception& e) {
    throw ParseError(std::string("layout file: ") + e.what(), 0);
  }
  if (layout.regions.empty()) throw ParseError("layout file has no regions", 0);
  return layout;
}

SpectrumLayout read_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return read_layout(in);
}

void write_allocation(std::ostream& out, const Scenario& sc, const Allocation& a,
                      const OutputHeader& header) {
  write_header(out, header);
  for (std::size_t r = 0; r < a.n_regions; ++r)
    out << "# b_delta_hz[" << r << "]: " << num(a.b_delta[r]) << '\n';
  out << "# sum_rate_bps: " << num(a.sum_rate()) << '\n';
  out << "region,slot,f_s_hz,b_s_hz,guard_hz,user,d_m,p_w,rate_bps\n";
  for (std::size_t r = 0; r < a.n_regions; ++r)
    for (std::size_t s = 0; s < a.slots; ++s) {
      const auto u = a.user_on(r, s);
      if (!u) continue;
      const std::size_t k = a.slot_index(r, s);
      out << r << ',' << s + 1 << ',' << num(a.center[k]) << ',' << num(a.bandwidth[k]) << ','
          << num(a.guard[k]) << ',' << *u << ',' << num(sc.users[*u].d_m) << ','
          << num(a.power[*u]) << ',' << num(a.rate[*u]) << '\n';
    }
}

void write_trace(std::ostream& out, const std::vector<IterationRecord>& trace,
                 const OutputHeader& header) {
  write_header(out, header);
  out << "kappa,psi,fp,inner_iters,wall_ms\n";
  for (const auto& t : trace)
    out << t.kappa << ',' << num(t.psi) << ',' << num(t.fp) << ',' << t.inner_iters << ','
        << num(t.wall_ms) << '\n';
}

void write_report(std::ostream& out, const BaselineResult& res, const OutputHeader& header) {
  json j;
  j["header"] = header_json(header);
  j["scheme"] = to_string(res.scheme);
  j["feasible"] = res.feasible;
  j["sum_rate_bps"] = res.sum_rate;
  j["wall_ms"] = res.wall_ms;
  if (res.solve) {
    j["status"] = to_string(res.solve->status);
    j["outer_iterations"] = res.solve->outer_iters;
    j["repaired"] = res.solve->repaired;
  }
  json items = json::array();
  for (const auto& c : res.feasibility.items)
    items.push_back({{"name", c.name}, {"passed", c.passed}, {"residual", c.residual}});
  j["checks"] = items;
  j["user_rates_bps"] = res.feasibility.user_rates;
  if (res.allocation) j["b_delta_hz"] = res.allocation->b_delta;
  j["notes"] = res.notes;
  out << j.dump(2) << '\n';
}

}  // namespace thz
