#include "thzalloc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "thzalloc/error.hpp"

namespace thz {

using nlohmann::json;

void ScenarioParams::validate() const {
  if (!(room_x_m > 0.0 && room_y_m > 0.0)) throw ValidationError("room dimensions must be > 0");
  if (!(h_eps_m > 0.0)) throw ValidationError("h_eps must be > 0");
  if (n_users < 1) throw ValidationError("need at least one user");
  if (!(r_thr_bps >= 0.0)) throw ValidationError("rate threshold must be >= 0");
  if (!(b_g_hz >= 0.0)) throw ValidationError("guard bandwidth must be >= 0");
  if (!(b_max_hz > 0.0)) throw ValidationError("B_max must be > 0");
  if (!std::isfinite(p_tot_dbm)) throw ValidationError("p_tot_dbm must be finite");
  if (p_max_dbm && !(dbm_to_watt(*p_max_dbm) <= dbm_to_watt(p_tot_dbm) * (1 + 1e-12)))
    throw ValidationError("P_max must not exceed P_tot");
}

LinkParams Scenario::link(std::size_t i, double power_w) const {
  LinkParams l;
  l.power_w = power_w;
  l.distance_m = users.empty() ? h_eps_m : users.at(i).d_m;
  l.gain_ap = g_a;
  l.gain_user = g_u;
  l.noise_density = n0;
  return l;
}

void Scenario::validate() const {
  if (users.empty()) throw ValidationError("scenario has no users");
  if (!(p_max > 0.0 && p_max <= p_tot * (1 + 1e-12)))
    throw ValidationError("need 0 < P_max <= P_tot");
  if (!(r_thr >= 0.0)) throw ValidationError("R_thr must be >= 0");
  if (!(b_g >= 0.0)) throw ValidationError("B_g must be >= 0");
  if (!(b_max > 0.0)) throw ValidationError("B_max must be > 0");
  if (!(g_a > 0.0 && g_u > 0.0 && n0 > 0.0)) throw ValidationError("gains and N0 must be > 0");
  const double half_diag = 0.5 * std::hypot(room_x_m, room_y_m);
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto& u = users[i];
    const double d = std::sqrt(h_eps_m * h_eps_m + u.l_m * u.l_m);
    if (std::abs(d - u.d_m) > 1e-9 * d)
      throw ValidationError("user " + std::to_string(i) + " distance inconsistent with h_eps");
    if (u.l_m > half_diag * (1 + 1e-12))
      throw ValidationError("user " + std::to_string(i) + " lies outside the room");
  }
}

ScenarioParams default_params(std::size_t n_users) {
  ScenarioParams p;
  p.n_users = n_users;
  return p;
}

namespace {

Scenario base_scenario(const ScenarioParams& params) {
  params.validate();
  Scenario s;
  s.room_x_m = params.room_x_m;
  s.room_y_m = params.room_y_m;
  s.h_eps_m = params.h_eps_m;
  s.g_a = db_to_linear(params.g_a_dbi);
  s.g_u = db_to_linear(params.g_u_dbi);
  s.n0 = dbm_to_watt(params.n0_dbm_per_hz);
  s.p_tot = dbm_to_watt(params.p_tot_dbm);
  s.p_max = params.p_max_dbm ? dbm_to_watt(*params.p_max_dbm)
                             : 4.0 * s.p_tot / (3.0 * double(params.n_users));
  s.p_max = std::min(s.p_max, s.p_tot);
  s.r_thr = params.r_thr_bps;
  s.b_g = params.b_g_hz;
  s.b_max = params.b_max_hz;
  s.seed = params.seed;
  return s;
}

User make_user(double x, double y, double h) {
  User u;
  u.x_m = x;
  u.y_m = y;
  u.l_m = std::hypot(x, y);
  u.d_m = std::sqrt(h * h + u.l_m * u.l_m);
  return u;
}

}  // namespace

Scenario generate(const ScenarioParams& params) {
  Scenario s = base_scenario(params);
  UniformStream rng(params.seed, 0);
  s.users.reserve(params.n_users);
  for (std::size_t i = 0; i < params.n_users; ++i) {
    const double x = (rng.next() - 0.5) * params.room_x_m;
    const double y = (rng.next() - 0.5) * params.room_y_m;
    s.users.push_back(make_user(x, y, params.h_eps_m));
  }
  s.validate();
  return s;
}

Scenario from_positions(const ScenarioParams& params,
                        const std::vector<std::pair<double, double>>& positions) {
  ScenarioParams p = params;
  p.n_users = positions.size();
  Scenario s = base_scenario(p);
  for (const auto& [x, y] : positions) s.users.push_back(make_user(x, y, p.h_eps_m));
  s.validate();
  return s;
}

double d_max(const Scenario& scenario) {
  if (scenario.users.empty()) throw ValidationError("scenario has no users");
  double m = 0.0;
  for (const auto& u : scenario.users) m = std::max(m, u.d_m);
  return m;
}

ScenarioParams read_scenario_params(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario config: ") + e.what(), 0);
  }
  ScenarioParams p;
  try {
    p.room_x_m = j.value("room_x_m", p.room_x_m);
    p.room_y_m = j.value("room_y_m", p.room_y_m);
    p.h_eps_m = j.value("h_eps_m", p.h_eps_m);
    p.n_users = j.value("n_users", p.n_users);
    p.seed = j.value("seed", p.seed);
    p.p_tot_dbm = j.value("p_tot_dbm", p.p_tot_dbm);
    if (j.contains("p_max_dbm") && !j["p_max_dbm"].is_null()) p.p_max_dbm = j["p_max_dbm"].get<double>();
    p.r_thr_bps = j.value("r_thr_bps", p.r_thr_bps);
    p.b_g_hz = j.value("b_g_hz", p.b_g_hz);
    p.b_max_hz = j.value("b_max_hz", p.b_max_hz);
    p.g_a_dbi = j.value("g_a_dbi", p.g_a_dbi);
    p.g_u_dbi = j.value("g_u_dbi", p.g_u_dbi);
    p.n0_dbm_per_hz = j.value("n0_dbm_per_hz", p.n0_dbm_per_hz);
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario config: ") + e.what(), 0);
  }
  p.validate();
  return p;
}

ScenarioParams read_scenario_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return read_scenario_params(in);
}

void write_scenario_params(std::ostream& out, const ScenarioParams& p) {
  json j;
  j["room_x_m"] = p.room_x_m;
  j["room_y_m"] = p.room_y_m;
  j["h_eps_m"] = p.h_eps_m;
  j["n_users"] = p.n_users;
  j["seed"] = p.seed;
  j["p_tot_dbm"] = p.p_tot_dbm;
  j["p_max_dbm"] = p.p_max_dbm ? json(*p.p_max_dbm) : json(nullptr);
  j["r_thr_bps"] = p.r_thr_bps;
  j["b_g_hz"] = p.b_g_hz;
  j["b_max_hz"] = p.b_max_hz;
  j["g_a_dbi"] = p.g_a_dbi;
  j["g_u_dbi"] = p.g_u_dbi;
  j["n0_dbm_per_hz"] = p.n0_dbm_per_hz;
  out << j.dump(2) << '\n';
}

UniformStream::UniformStream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                    std::uint32_t(stream >> 32)};
  engine_.seed(seq);
}

double UniformStream::next() {
  return double(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace thz
