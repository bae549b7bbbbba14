#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "thzalloc/channel.hpp"

namespace thz {

inline double db_to_linear(double db) noexcept { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) noexcept { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) noexcept { return 10.0 * std::log10(w) + 30.0; }

struct User {
  double x_m = 0.0;  // floor position relative to the room center
  double y_m = 0.0;
  double l_m = 0.0;  // horizontal distance to the AP
  double d_m = 0.0;  // 3D link distance
};

/// Deployment parameters as they appear in a scenario config file (dB units
/// where customary). `p_max_dbm` unset means 4 P_tot / (3 |I|).
struct ScenarioParams {
  double room_x_m = 20.0;
  double room_y_m = 20.0;
  double h_eps_m = 2.0;
  std::size_t n_users = 30;
  std::uint64_t seed = 1;
  double p_tot_dbm = -12.5;
  std::optional<double> p_max_dbm;
  double r_thr_bps = 2e9;
  double b_g_hz = 1e9;
  double b_max_hz = 4.5e9;
  double g_a_dbi = 35.0;
  double g_u_dbi = 20.0;
  double n0_dbm_per_hz = -174.0;

  void validate() const;
};

/// Indoor single-AP deployment with linear-unit parameters.
struct Scenario {
  double room_x_m = 20.0;
  double room_y_m = 20.0;
  double h_eps_m = 2.0;
  std::vector<User> users;
  double g_a = 1.0;
  double g_u = 1.0;
  double n0 = 1.0;     // W/Hz
  double p_tot = 0.0;  // W
  double p_max = 0.0;  // W
  double r_thr = 0.0;  // bit/s
  double b_g = 0.0;    // Hz
  double b_max = 0.0;  // Hz
  std::uint64_t seed = 0;

  std::size_t n_users() const noexcept { return users.size(); }
  LinkParams link(std::size_t i, double power_w) const;
  double rho() const noexcept { return link(0, 0.0).rho(); }
  /// Throws ValidationError on any broken invariant.
  void validate() const;
};

ScenarioParams default_params(std::size_t n_users = 30);

/// Users uniform on the floor, AP at the ceiling center. Deterministic per seed.
Scenario generate(const ScenarioParams& params);

/// Same parameters with explicit user floor positions (relative to the center).
Scenario from_positions(const ScenarioParams& params,
                        const std::vector<std::pair<double, double>>& positions);

double d_max(const Scenario& scenario);

ScenarioParams read_scenario_params(std::istream& in);
ScenarioParams read_scenario_params(const std::filesystem::path& path);
void write_scenario_params(std::ostream& out, const ScenarioParams& params);

/// Stable stream of uniform doubles in [0, 1): mt19937_64 seeded through
/// std::seed_seq{seed, stream} with 53-bit mantissa extraction, so results
/// reproduce across standard libraries.
class UniformStream {
 public:
  UniformStream(std::uint64_t seed, std::uint64_t stream = 0);
  double next();

 private:
  std::mt19937_64 engine_;
};

/// Mixes (seed, index) into a derived seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace thz
