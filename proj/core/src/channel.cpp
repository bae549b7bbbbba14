#include "thzalloc/channel.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "thzalloc/allocation.hpp"
#include "thzalloc/error.hpp"
#include "thzalloc/scenario.hpp"

namespace thz {

namespace {

constexpr double kLn2 = std::numbers::ln2;

struct SimpsonPanel {
  double a, m, b, fa, fm, fb, whole;
};

double adaptive_simpson(const std::function<double(double)>& fn, const SimpsonPanel& p,
                        double tol, int depth) {
  const double lm = 0.5 * (p.a + p.m);
  const double rm = 0.5 * (p.m + p.b);
  const double flm = fn(lm);
  const double frm = fn(rm);
  const double left = (p.m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
  const double right = (p.b - p.m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
  const double delta = left + right - p.whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(fn, {p.a, lm, p.m, p.fa, flm, p.fm, left}, 0.5 * tol, depth - 1) +
         adaptive_simpson(fn, {p.m, rm, p.b, p.fm, frm, p.fb, right}, 0.5 * tol, depth - 1);
}

}  // namespace

void LinkParams::validate() const {
  if (!(power_w >= 0.0)) throw ValidationError("link power must be >= 0");
  if (!(distance_m > 0.0)) throw ValidationError("link distance must be > 0");
  if (!(gain_ap > 0.0 && gain_user > 0.0)) throw ValidationError("antenna gains must be > 0");
  if (!(noise_density > 0.0)) throw ValidationError("noise density must be > 0");
}

double center_frequency(const RegionModel& region, double b_delta,
                        std::span<const double> bandwidths, std::span<const double> guards,
                        std::size_t s) {
  if (s < 1 || s > bandwidths.size())
    throw DomainError("sub-band index " + std::to_string(s) + " out of range");
  if (guards.size() != bandwidths.size())
    throw DomainError("bandwidth and guard lists differ in length");
  double offset = b_delta;
  for (std::size_t k = 0; k + 1 < s; ++k) offset += bandwidths[k] + guards[k];
  offset += 0.5 * bandwidths[s - 1];
  const double f = region.f_ref - region.eta() * offset;
  if (!region.contains(f))
    throw LayoutOverflowError("sub-band " + std::to_string(s) + " center lies outside its region");
  return f;
}

double noise_power(double bandwidth_hz, double noise_density) noexcept {
  return noise_density * bandwidth_hz;
}

double rate_integral(const LinkParams& link, const RegionModel& region, double f_s, double b_s) {
  link.validate();
  if (!(b_s > 0.0)) throw DomainError("sub-band bandwidth must be positive");
  const double a = f_s - 0.5 * b_s;
  const double b = f_s + 0.5 * b_s;
  if (!region.contains(a) || !region.contains(b))
    throw DomainError("integration interval leaves the region");
  if (link.power_w == 0.0) return 0.0;

  const double scale = link.power_w * link.rho() / b_s;
  const double d = link.distance_m;
  const std::function<double(double)> density = [&](double f) {
    const double fd = f * d;
    return std::log1p(scale * std::exp(-region.absorption(f) * d) / (fd * fd)) / kLn2;
  };
  const double fa = density(a), fb = density(b), fm = density(f_s);
  const double whole = b_s / 6.0 * (fa + 4.0 * fm + fb);
  const double tol = 1e-8 * std::abs(whole) + 1e-300;
  return adaptive_simpson(density, {a, f_s, b, fa, fm, fb, whole}, tol, 40);
}

double rate_approx(const LinkParams& link, const RegionModel& region, double f_s, double b_s) {
  link.validate();
  if (b_s < 0.0) throw DomainError("sub-band bandwidth must be >= 0");
  if (!region.contains(f_s)) throw DomainError("center frequency outside the region");
  if (b_s == 0.0 || link.power_w == 0.0) return 0.0;
  const double fd = f_s * link.distance_m;
  const double snr = link.power_w * link.rho() *
                     std::exp(-region.absorption(f_s) * link.distance_m) / (fd * fd * b_s);
  return b_s * std::log1p(snr) / kLn2;
}

RatePartials rate_partials(double rho, double distance_m, const RegionModel& region,
                           double power_w, double width_hz, double f_hz) noexcept {
  const double d = distance_m;
  const double fd = f_hz * d;
  const double alpha = rho * std::exp(-region.absorption(f_hz) * d) / (fd * fd);
  const double w = width_hz;
  const double snr = alpha * power_w / w;
  const double one_s = 1.0 + snr;
  const double log1 = std::log1p(snr);
  // d/df ln(alpha) and its derivative
  const double q = -region.absorption_slope(f_hz) * d - 2.0 / f_hz;
  const double dq = -region.absorption_curvature(f_hz) * d + 2.0 / (f_hz * f_hz);

  RatePartials r;
  r.value = w * log1 / kLn2;
  r.d_p = alpha / one_s / kLn2;
  r.d_w = (log1 - snr / one_s) / kLn2;
  r.d_f = w * snr * q / one_s / kLn2;
  const double inv2 = 1.0 / (one_s * one_s);
  r.d_pp = -alpha * alpha / w * inv2 / kLn2;
  r.d_pw = alpha * snr / w * inv2 / kLn2;
  r.d_pf = alpha * q * inv2 / kLn2;
  r.d_ww = -snr * snr / w * inv2 / kLn2;
  r.d_wf = snr * snr * q * inv2 / kLn2;
  r.d_ff = w * (snr * q * q * inv2 + snr * dq / one_s) / kLn2;
  return r;
}

double user_rate(const Allocation& allocation, const Scenario& scenario,
                 const SpectrumLayout& layout, std::size_t i) {
  std::size_t count = 0;
  std::size_t r_hit = 0, s_hit = 0;
  for (std::size_t r = 0; r < allocation.n_regions; ++r)
    for (std::size_t s = 0; s < allocation.slots; ++s)
      if (allocation.assigned(i, r, s)) {
        ++count;
        r_hit = r;
        s_hit = s;
      }
  if (count != 1)
    throw AssignmentViolationError("user " + std::to_string(i) + " holds " +
                                   std::to_string(count) + " sub-bands; expected exactly one");
  const std::size_t k = allocation.slot_index(r_hit, s_hit);
  return rate_approx(scenario.link(i, allocation.power[i]), layout.regions[r_hit],
                     allocation.center[k], allocation.bandwidth[k]);
}

}  // namespace thz
