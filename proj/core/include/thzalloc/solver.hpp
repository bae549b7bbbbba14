#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thzalloc/allocation.hpp"
#include "thzalloc/barrier.hpp"
#include "thzalloc/problem.hpp"

namespace thz {

struct SolverConfig {
  double lambda = 200.0;
  double epsilon = 1e-6;
  std::size_t max_outer = 200;
  double inner_kkt_tol = 1e-6;
  int inner_max_iter = 600;
  double rounding_threshold = 0.5;
  std::uint64_t seed = 0;
  double mu_cold = 1e-1;
  double mu_warm = 1e-1;
  double mu_final = 1e-9;
  bool refine_assignment = true;  // swap/relocate local search after rounding

  void validate() const;
};

enum class SubproblemStatus { Optimal, MaxIter, Stalled, Infeasible };

struct SubproblemResult {
  SubproblemStatus status = SubproblemStatus::Optimal;
  Eigen::VectorXd v;          // natural units, full layout of ProblemInstance
  PsiValue psi;
  int iterations = 0;
  double kkt = 0.0;
  bool kept_warm_start = false;  // the solve did not improve on the warm start
};

/// Minimizes Psi for the given anchor. Without a warm start the solve begins
/// at initial_point() and runs a phase-one search first.
SubproblemResult solve_subproblem(const ProblemInstance& inst, std::span<const double> x_anchor,
                                  const SolverConfig& config,
                                  const Eigen::VectorXd* warm_start = nullptr);

/// Strictly feasible point of the relaxed problem, if one exists.
std::optional<Eigen::VectorXd> find_feasible_point(const ProblemInstance& inst,
                                                   const SolverConfig& config);

struct VerifyTolerances {
  double rate_rel = 1e-6;
  double budget_rel = 1e-12;
  double power_rel = 1e-9;
};

struct CheckItem {
  std::string name;
  bool passed = true;
  double residual = 0.0;  // signed; > 0 means violation
};

struct FeasibilityReport {
  std::vector<CheckItem> items;
  double sum_rate = 0.0;
  std::vector<double> user_rates;

  bool all_passed() const noexcept;
  std::vector<const CheckItem*> failures() const;
};

FeasibilityReport verify(const Scenario& scenario, const SpectrumLayout& layout,
                         const Allocation& allocation, const VerifyTolerances& tol = {});
FeasibilityReport verify(const ProblemInstance& inst, const Allocation& allocation,
                         const VerifyTolerances& tol = {});

struct RestoreResult {
  std::optional<Allocation> allocation;
  bool repaired = false;        // assignment came from the max-weight repair
  bool reoptimized = false;     // powers and widths re-solved for the rounded assignment
  std::string failure;          // empty on success
  std::vector<double> user_rates;
};

/// Thresholds x, repairs a non-permutation by max-weight assignment on the
/// relaxed rates, decodes widths and guards and rebalances B_delta. When a rate
/// misses R_thr after decoding, powers and widths are re-optimized for the
/// rounded assignment before giving up.
RestoreResult round_and_restore(const ProblemInstance& inst, const Eigen::VectorXd& relaxed,
                                double threshold = 0.5);

/// Decodes a binary assignment at given widths and powers into an allocation:
/// guards follow the assignment, B_delta absorbs the slack, rates are recomputed.
/// With `fixed_b_delta` (one per region) the slack widens the sub-bands up to
/// B_max instead, and only what no sub-band can take is left at the edge.
/// Returns nullopt when the widths overflow a region.
std::optional<Allocation> decode_allocation(const Scenario& scenario, const SpectrumLayout& layout,
                                            const std::vector<std::pair<std::size_t, std::size_t>>& slot_of_user,
                                            const std::vector<double>& width,
                                            const std::vector<double>& power,
                                            std::span<const double> fixed_b_delta = {});

struct FixedAssignmentOptions {
  bool optimize_widths = true;     // false keeps the start widths and only moves powers
  std::vector<double> fixed_b_delta;  // per region; empty leaves B_delta to take the slack
  double delta_hz = 1e3;            // smallest admissible width
  nlp::Options barrier;
};

/// Maximizes the sum rate over powers (and widths) for the assignment held by
/// `start`, subject to P_tot, P_max, B_max, R_thr and the region budgets, with
/// B_delta taking each region's slack. Returns nullopt when no point meets
/// every rate threshold.
std::optional<Allocation> optimize_fixed_assignment(const Scenario& scenario,
                                                    const SpectrumLayout& layout,
                                                    const Allocation& start,
                                                    const FixedAssignmentOptions& options = {});

/// First-improvement local search over assignments: pairwise swaps and
/// single-user relocations, each re-solved by optimize_fixed_assignment.
/// Returns the best feasible allocation found (the input when nothing improves).
Allocation refine_assignment(const ProblemInstance& inst, const Allocation& allocation,
                             std::size_t* improvements = nullptr);

enum class SolveStatus { Converged, MaxIter, Infeasible };
const char* to_string(SolveStatus status) noexcept;

struct IterationRecord {
  std::size_t kappa = 0;
  double psi = 0.0;  // subproblem objective at its anchor
  double fp = 0.0;   // F_p at the updated anchor: sum x (1 - x)
  int inner_iters = 0;
  double wall_ms = 0.0;
  double kkt = 0.0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIter;
  std::vector<IterationRecord> trace;
  std::size_t outer_iters = 0;
  Eigen::VectorXd relaxed;
  std::optional<Allocation> allocation;
  FeasibilityReport feasibility;
  bool repaired = false;
  std::vector<std::string> diagnostics;
  double wall_ms = 0.0;

  std::vector<double> psi_trace() const;
  std::vector<double> fp_trace() const;
  bool feasible() const noexcept { return allocation.has_value() && feasibility.all_passed(); }
};

/// Penalized SCA: anchors start at 0.5, each subproblem warm starts from the
/// previous point, and the loop stops once F_p < epsilon or after max_outer.
SolveReport run_sca(const ProblemInstance& inst, const SolverConfig& config = {});

}  // namespace thz
