#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "thzalloc/solver.hpp"

namespace thz {

enum class Scheme { ESB, ASB_fixed_edge, ASB_full, BruteForce };
const char* to_string(Scheme scheme) noexcept;
/// Accepts "ESB", "ASB_fixed_edge", "ASB_full", "BruteForce" (case-insensitive).
std::optional<Scheme> parse_scheme(std::string_view name);

struct BaselineConfig {
  double edge_threshold = 0.3;  // 1/m, defines B*
  ProblemConfig problem = [] {
    ProblemConfig c;
    c.convexity = ConvexityPolicy::Warn;
    return c;
  }();
  SolverConfig solver;
  // ASB_full also solves the fixed-edge problem, frees its edge and keeps the
  // better of the two allocations.
  bool edge_continuation = true;
};

struct BaselineResult {
  Scheme scheme = Scheme::ASB_full;
  std::optional<Allocation> allocation;
  double sum_rate = 0.0;  // bit/s, zero when infeasible
  bool feasible = false;
  FeasibilityReport feasibility;
  std::optional<SolveReport> solve;  // ASB schemes only
  std::vector<std::string> notes;
  double wall_ms = 0.0;
};

/// B* per region: the edge band where K-hat exceeds `threshold`.
std::vector<double> edge_bandwidths(const SpectrumLayout& layout, double threshold);

/// Sub-band counts per region proportional to usable bandwidth, largest
/// remainder first, ties to the region with more usable bandwidth.
std::vector<std::size_t> apportion_subbands(const std::vector<double>& usable, std::size_t n_users);

/// Equal sub-bands after B*, optimal assignment on the equal-power rate
/// matrix, then powers optimized with the assignment and widths held.
BaselineResult esb_allocate(const Scenario& scenario, const SpectrumLayout& layout,
                            const BaselineConfig& config = {});

/// run_sca with B_delta held at B* in every region.
BaselineResult fixed_edge_asb(const Scenario& scenario, const SpectrumLayout& layout,
                              const BaselineConfig& config = {});

/// run_sca with B_delta free, plus the fixed-edge continuation when enabled.
BaselineResult full_asb(const Scenario& scenario, const SpectrumLayout& layout,
                        const BaselineConfig& config = {});

/// Exhaustive search over placements, widths k B_max / G and powers
/// k min(P_max, P_tot) / G, k = 1..G. Requires |I| <= 3, |R| <= 2, G <= 60.
BaselineResult brute_force(const Scenario& scenario, const SpectrumLayout& layout,
                           std::size_t grid_points);

BaselineResult run_scheme(Scheme scheme, const Scenario& scenario, const SpectrumLayout& layout,
                          const BaselineConfig& config = {}, std::size_t grid_points = 50);

}  // namespace thz
