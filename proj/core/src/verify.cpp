#include <algorithm>
#include <cmath>
#include <string>

#include "thzalloc/error.hpp"
#include "thzalloc/solver.hpp"

namespace thz {

bool FeasibilityReport::all_passed() const noexcept {
  return std::all_of(items.begin(), items.end(), [](const CheckItem& c) { return c.passed; });
}

std::vector<const CheckItem*> FeasibilityReport::failures() const {
  std::vector<const CheckItem*> out;
  for (const auto& c : items)
    if (!c.passed) out.push_back(&c);
  return out;
}

namespace {

std::string indexed(const char* name, std::size_t k) {
  return std::string(name) + "[" + std::to_string(k) + "]";
}

}  // namespace

FeasibilityReport verify(const Scenario& scenario, const SpectrumLayout& layout,
                         const Allocation& allocation, const VerifyTolerances& tol) {
  FeasibilityReport rep;
  const std::size_t I = allocation.n_users, R = allocation.n_regions, S = allocation.slots;
  auto add = [&rep](std::string name, double residual, double allowed) {
    rep.items.push_back({std::move(name), residual <= allowed, residual});
  };
  if (I != scenario.n_users() || R != layout.size()) {
    add("dimensions", 1.0, 0.0);
    return rep;
  }

  Allocation a = allocation;
  a.recompute_centers(layout);

  double psum = 0.0;
  for (double p : a.power) psum += p;
  add("power_budget", psum - scenario.p_tot, tol.power_rel * scenario.p_tot);
  for (std::size_t i = 0; i < I; ++i)
    add(indexed("power_limit", i), std::max(a.power[i] - scenario.p_max, -a.power[i]),
        tol.power_rel * scenario.p_max);

  for (std::size_t i = 0; i < I; ++i) {
    double row = 0.0;
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t s = 0; s < S; ++s) row += a.assigned(i, r, s);
    rep.items.push_back({indexed("user_assignment", i), row == 1.0, row - 1.0});
  }

  rep.user_rates.assign(I, 0.0);
  for (std::size_t i = 0; i < I; ++i) {
    double rate = 0.0;
    try {
      rate = user_rate(a, scenario, layout, i);
    } catch (const Error&) {
      rate = 0.0;
    }
    rep.user_rates[i] = rate;
    rep.sum_rate += rate;
    add(indexed("rate_threshold", i), scenario.r_thr - rate, tol.rate_rel * scenario.r_thr);
  }

  for (std::size_t r = 0; r < R; ++r) {
    const auto& region = layout.regions[r];
    double col_excess = -1.0, width_excess = -scenario.b_max, guard_err = 0.0, spill = 0.0;
    double used = a.b_delta[r];
    for (std::size_t s = 0; s < S; ++s) {
      const std::size_t k = a.slot_index(r, s);
      double col = 0.0;
      for (std::size_t i = 0; i < I; ++i) col += a.assigned(i, r, s);
      col_excess = std::max(col_excess, col - 1.0);
      const double b = a.bandwidth[k];
      width_excess = std::max({width_excess, b - scenario.b_max, -b});
      const double want = b > 0.0 ? scenario.b_g : 0.0;
      guard_err = std::max(guard_err, std::abs(a.guard[k] - want));
      used += b + a.guard[k];
      if (b > 0.0) {
        const double lo = a.center[k] - 0.5 * b, hi = a.center[k] + 0.5 * b;
        spill = std::max({spill, region.f_lo() - lo, hi - region.f_hi()});
      }
    }
    add(indexed("subband_usage", r), col_excess, 0.0);
    add(indexed("subband_width", r), width_excess, 1e-9 * scenario.b_max);
    add(indexed("guard_rule", r), guard_err, 1e-9 * std::max(scenario.b_g, 1.0));
    add(indexed("edge_gap", r), std::max(-a.b_delta[r], a.b_delta[r] - region.b_tot),
        tol.budget_rel * region.b_tot);
    const double budget = used - region.b_tot;
    rep.items.push_back({indexed("bandwidth_budget", r),
                         std::abs(budget) <= tol.budget_rel * region.b_tot, budget});
    add(indexed("subband_placement", r), spill, tol.budget_rel * region.b_tot);
  }
  return rep;
}

FeasibilityReport verify(const ProblemInstance& inst, const Allocation& allocation,
                         const VerifyTolerances& tol) {
  auto rep = verify(inst.scenario, inst.layout, allocation, tol);
  for (std::size_t r = 0; r < inst.n_regions(); ++r)
    if (auto fixed = inst.fixed_b_delta(r)) {
      // B_delta may exceed the fixed edge only when every sub-band is at B_max.
      bool saturated = true;
      for (std::size_t s = 0; s < allocation.slots; ++s) {
        const double b = allocation.bandwidth[allocation.slot_index(r, s)];
        if (b > 0.0 && b < inst.scenario.b_max * (1.0 - 1e-9)) saturated = false;
      }
      const double gap = allocation.b_delta[r] - *fixed;
      const double err = saturated ? std::max(-gap, 0.0) : std::abs(gap);
      rep.items.push_back({indexed("edge_fixed", r), err <= 1e-9 * inst.layout.regions[r].b_tot, err});
    }
  return rep;
}

}  // namespace thz
