#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "thzalloc/baselines.hpp"
#include "thzalloc/io.hpp"
#include "thzalloc/synthetic.hpp"

namespace thz {

enum class SweepAxis { PTotDbm, NRegions, RThr, BMax };
const char* to_string(SweepAxis axis) noexcept;
/// Accepts p_tot_dbm, n_regions, r_thr, b_max.
std::optional<SweepAxis> parse_axis(std::string_view name);

/// Users per region count used by the region sweep: 10, 17, 27, 30 for 1..4.
std::size_t users_for_regions(std::size_t n_regions);

struct ExperimentSpec {
  ScenarioParams scenario = default_params(8);
  SpectrumLayout layout;  // every region; the sweep takes a prefix of n_regions
  std::size_t n_regions = 2;
  SweepAxis axis = SweepAxis::PTotDbm;
  std::vector<double> values;
  std::size_t trials = 20;
  std::vector<Scheme> schemes{Scheme::ESB, Scheme::ASB_fixed_edge, Scheme::ASB_full};
  BaselineConfig config;
  std::size_t grid_points = 50;  // brute force only
  std::size_t workers = 0;       // 0: THZ_WORKERS, else hardware concurrency

  void validate() const;
};

/// Scenario and layout of one (axis value, trial) cell. Trials share user
/// drops across axis values.
struct TrialSetup {
  ScenarioParams params;
  SpectrumLayout layout;
};
TrialSetup trial_setup(const ExperimentSpec& spec, double axis_value, std::size_t trial);

struct SweepRow {
  std::size_t axis_index = 0;
  double axis_value = 0.0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::ASB_full;
  bool feasible = false;
  double sum_rate = 0.0;
  std::vector<double> b_delta;  // Hz per region, empty when infeasible
  double spearman_d_khat = 0.0; // NaN when undefined
  std::string status;
  double wall_ms = 0.0;
};

struct SweepSummary {
  double axis_value = 0.0;
  Scheme scheme = Scheme::ASB_full;
  std::size_t trials = 0;
  std::size_t feasible = 0;
  double median_sum_rate = 0.0;  // over feasible trials
  double mean_b_delta = 0.0;     // Hz, over feasible trials and regions
};

/// Rows ordered by (axis value, trial, scheme).
std::vector<SweepRow> run_sweep(const ExperimentSpec& spec,
                                const std::function<void(std::size_t, std::size_t)>& progress = {});
std::vector<SweepSummary> summarize(const ExperimentSpec& spec, const std::vector<SweepRow>& rows);

void write_sweep_csv(std::ostream& out, const ExperimentSpec& spec, const std::vector<SweepRow>& rows,
                     const OutputHeader& header);
void write_summary_csv(std::ostream& out, const std::vector<SweepSummary>& summary,
                       const OutputHeader& header);
/// axis_value,scheme,trials,feasible,percent
void write_feasibility_csv(std::ostream& out, const std::vector<SweepSummary>& summary,
                           const OutputHeader& header);

/// Spearman rank correlation with average ranks for ties; NaN for constant input.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Rank correlation between user distance and K-hat at the assigned center.
double distance_absorption_correlation(const Scenario& scenario, const SpectrumLayout& layout,
                                       const Allocation& allocation);

double median(std::vector<double> v);

std::uint64_t spec_hash(const ExperimentSpec& spec);

}  // namespace thz
