#pragma once

#include <cstddef>
#include <numbers>
#include <span>

#include "thzalloc/absorption.hpp"

namespace thz {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

struct Allocation;
struct Scenario;

/// Per-link quantities entering the capacity density. All linear units.
struct LinkParams {
  double power_w = 0.0;
  double distance_m = 1.0;
  double gain_ap = 1.0;
  double gain_user = 1.0;
  double noise_density = 1.0;  // W/Hz

  /// (g_A g_U / N0) (c / 4 pi)^2
  double rho() const noexcept {
    const double k = kSpeedOfLight / (4.0 * std::numbers::pi);
    return gain_ap * gain_user / noise_density * k * k;
  }
  void validate() const;
};

/// Center of sub-band `s` (1-based) when the edge gap `b_delta` and the
/// preceding sub-bands and guards are laid out away from f_ref.
/// Throws LayoutOverflowError if the result leaves the region.
double center_frequency(const RegionModel& region, double b_delta,
                        std::span<const double> bandwidths, std::span<const double> guards,
                        std::size_t s);

/// N0 * B
double noise_power(double bandwidth_hz, double noise_density) noexcept;

/// Exact sub-band rate: the capacity density integrated over
/// [f_s - B_s/2, f_s + B_s/2] by adaptive Simpson (rel. tol 1e-8).
double rate_integral(const LinkParams& link, const RegionModel& region, double f_s, double b_s);

/// Midpoint rate B_s log2(1 + SNR(f_s)).
double rate_approx(const LinkParams& link, const RegionModel& region, double f_s, double b_s);

/// Midpoint rate and its first and second partials in power, width and
/// center frequency. bit/s with W, Hz.
struct RatePartials {
  double value = 0.0;
  double d_p = 0.0, d_w = 0.0, d_f = 0.0;
  double d_pp = 0.0, d_pw = 0.0, d_pf = 0.0;
  double d_ww = 0.0, d_wf = 0.0, d_ff = 0.0;
};

/// Requires width > 0.
RatePartials rate_partials(double rho, double distance_m, const RegionModel& region,
                           double power_w, double width_hz, double f_hz) noexcept;

/// Rate of user `i` on its assigned sub-band.
/// Throws AssignmentViolationError unless exactly one sub-band is assigned.
double user_rate(const Allocation& allocation, const Scenario& scenario,
                 const SpectrumLayout& layout, std::size_t i);

}  // namespace thz
