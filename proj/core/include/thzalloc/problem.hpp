#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thzalloc/absorption.hpp"
#include "thzalloc/channel.hpp"
#include "thzalloc/scenario.hpp"

namespace thz {

/// B = xi + omega * ln(varsigma * Z)
struct SubstitutionConstants {
  double xi = 5011872336.272722;      // 10^9.7 Hz
  double omega = 50118723362.72715;   // 10^10.7 Hz
  double varsigma = 1e-3;

  /// Z at which the substituted width is zero.
  double z_ref() const noexcept;
  void validate() const;
};

/// Throws DomainError for z <= 0.
double b_of_z(const SubstitutionConstants& c, double z);
double z_of_b(const SubstitutionConstants& c, double b) noexcept;

enum class ConvexityPolicy { Strict, Warn };

struct ProblemConfig {
  SubstitutionConstants constants;
  double lambda = 200.0;
  double delta_hz = 1e3;
  double d_margin = 1.1;          // D = d_margin * d_max
  double rate_unit_bps = 1e9;     // Psi is reported in this unit
  ConvexityPolicy convexity = ConvexityPolicy::Strict;
  /// Per-region B_delta clamp (fixed-edge mode).
  std::optional<std::vector<double>> fixed_b_delta;
};

struct ConvexityCheck {
  std::size_t region = 0;
  double omega_bar = 0.0;
  double inv_omega = 0.0;
  bool satisfied = false;
};

/// Variable vector layout (natural units):
///   x[i][r][s]   i*|R||I| + r*|I| + s          (s 0-based sub-band)
///   P[i]         n_x + i                         (W)
///   Z1[r][k]     n_x + |I| + r(|I|+1) + k        (k = 0 is B_delta, k = s+1 is sub-band s)
///   Z2[r][s]     n_x + |I| + |R|(|I|+1) + r|I| + s
class ProblemInstance {
 public:
  Scenario scenario;
  SpectrumLayout layout;
  ProblemConfig config;
  double d_bound = 0.0;  // D
  std::vector<ConvexityCheck> convexity;
  std::vector<std::string> warnings;

  std::size_t n_users() const noexcept { return n_users_; }
  std::size_t n_regions() const noexcept { return n_regions_; }
  std::size_t slots() const noexcept { return n_users_; }

  std::size_t n_x() const noexcept { return n_users_ * n_users_ * n_regions_; }
  std::size_t n_p() const noexcept { return n_users_; }
  std::size_t n_z1() const noexcept { return n_regions_ * (n_users_ + 1); }
  std::size_t n_z2() const noexcept { return n_regions_ * n_users_; }
  std::size_t n_z() const noexcept { return n_z1() + n_z2(); }
  std::size_t n_vars() const noexcept { return n_x() + n_p() + n_z(); }

  std::size_t x_index(std::size_t i, std::size_t r, std::size_t s) const noexcept {
    return i * n_users_ * n_regions_ + r * n_users_ + s;
  }
  std::size_t p_index(std::size_t i) const noexcept { return n_x() + i; }
  std::size_t z1_index(std::size_t r, std::size_t k) const noexcept {
    return n_x() + n_p() + r * (n_users_ + 1) + k;
  }
  std::size_t z2_index(std::size_t r, std::size_t s) const noexcept {
    return n_x() + n_p() + n_z1() + r * n_users_ + s;
  }
  bool is_z(std::size_t k) const noexcept { return k >= n_x() + n_p(); }

  /// Constants of a Z variable (full-vector index).
  const SubstitutionConstants& constants_of(std::size_t var) const;
  double z_ref(std::size_t var) const { return constants_of(var).z_ref(); }

  std::optional<double> fixed_b_delta(std::size_t r) const;
  std::string variable_name(std::size_t var) const;

 private:
  friend ProblemInstance build(const Scenario&, const SpectrumLayout&, const ProblemConfig&);
  std::size_t n_users_ = 0;
  std::size_t n_regions_ = 0;
  std::vector<SubstitutionConstants> z_constants_;
};

/// Validates inputs and the convexity condition. Under ConvexityPolicy::Strict
/// a violated condition throws ConvexityConditionError naming the region.
ProblemInstance build(const Scenario& scenario, const SpectrumLayout& layout,
                      const ProblemConfig& config = {});

/// omega_bar = |sigma2| (D K(f_ref) e^{D sigma3} - 1)
double convexity_omega_bar(const RegionModel& region, double d_bound) noexcept;

struct ZBound {
  double lo = 0.0;
  double hi = 0.0;
};

/// Bounds for every Z variable (index 0 = first Z variable). Guard slots are
/// pinned to Z_ref (1 + sum_i x (e^{B_g/omega} - 1)).
std::vector<ZBound> z_bounds(const ProblemInstance& inst, std::span<const double> x_tilde);

/// sum_k b(Z_k) - B_tot over every Z slot of region r, in Hz.
double product_constraint(const ProblemInstance& inst, const Eigen::VectorXd& v, std::size_t r);

struct PsiValue {
  double psi = 0.0;
  double fp = 0.0;
  double weighted_rate = 0.0;  // sum x R, bit/s
};

/// Psi = -sum x R / rate_unit + Lambda * F_p with anchor x_anchor.
PsiValue objective_psi(const ProblemInstance& inst, const Eigen::VectorXd& v,
                       std::span<const double> x_anchor);

/// F_p = sum (a^2 + x (1 - 2a))
double penalty_fp(std::span<const double> x, std::span<const double> anchor);

/// Rate of user i on sub-band s of region r at the point (checked).
double rate_in_z(const ProblemInstance& inst, const Eigen::VectorXd& v, std::size_t i,
                 std::size_t r, std::size_t s);

/// Geometry and rate partials at a point.
struct RateEvaluation {
  std::vector<double> width;   // Hz, per (r, s)
  std::vector<double> center;  // Hz, per (r, s)
  std::vector<double> b_value; // Hz, per Z variable
  std::vector<RatePartials> rate;  // per (i, r, s), same order as x
  std::vector<double> user_rate;   // sum_{r,s} x R, per user
};

RateEvaluation evaluate_rates(const ProblemInstance& inst, const Eigen::VectorXd& v);

/// out += scale * d(sum_{r,s} x_irs R_irs)/dv
void add_user_rate_gradient(const ProblemInstance& inst, const Eigen::VectorXd& v,
                            const RateEvaluation& ev, std::size_t i, double scale,
                            Eigen::Ref<Eigen::VectorXd> out);

/// H += sum_i weight[i] * Hessian of (sum_{r,s} x_irs R_irs)
void add_rate_hessian(const ProblemInstance& inst, const Eigen::VectorXd& v,
                      const RateEvaluation& ev, std::span<const double> weight,
                      Eigen::MatrixXd& H);

/// Psi and the P-degree constraints with analytic gradients (natural units).
struct ProblemGradients {
  double psi = 0.0;
  Eigen::VectorXd grad_psi;
  double power_residual = 0.0;          // sum P - P_tot
  Eigen::VectorXd grad_power;
  std::vector<double> rate_residual;    // R_thr - R_i
  std::vector<Eigen::VectorXd> grad_rate;
  std::vector<double> budget_residual;  // product constraint per region, Hz
  std::vector<Eigen::VectorXd> grad_budget;
  bool on_boundary = false;             // central differences not valid here
};

ProblemGradients gradients(const ProblemInstance& inst, const Eigen::VectorXd& v,
                           std::span<const double> x_anchor);

/// Feasible interior starting point for the relaxed problem: uniform x,
/// 0.9 of the per-user power share and moderate widths.
Eigen::VectorXd initial_point(const ProblemInstance& inst);

/// Sets each guard Z2 to the value pinned by the current x.
void tie_guards(const ProblemInstance& inst, Eigen::VectorXd& v);

/// Human-readable dump: variable names, bounds and constraint residuals.
std::string dump_problem(const ProblemInstance& inst, const Eigen::VectorXd& v);

}  // namespace thz
