#include "thzalloc/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "thzalloc/assignment.hpp"
#include "thzalloc/error.hpp"

namespace thz {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void finish(BaselineResult& out, const Scenario& sc, const SpectrumLayout& layout) {
  if (out.allocation) {
    out.feasibility = verify(sc, layout, *out.allocation);
    out.feasible = out.feasibility.all_passed();
  }
  out.sum_rate = out.feasible ? out.allocation->sum_rate() : 0.0;
}

BaselineResult from_report(Scheme scheme, SolveReport rep) {
  BaselineResult out;
  out.scheme = scheme;
  out.allocation = rep.allocation;
  out.feasibility = rep.feasibility;
  out.feasible = rep.allocation.has_value() && rep.feasibility.all_passed();
  out.sum_rate = out.feasible ? rep.allocation->sum_rate() : 0.0;
  out.notes = rep.diagnostics;
  out.wall_ms = rep.wall_ms;
  out.solve = std::move(rep);
  return out;
}

}  // namespace

const char* to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::ESB: return "ESB";
    case Scheme::ASB_fixed_edge: return "ASB_fixed_edge";
    case Scheme::ASB_full: return "ASB_full";
    case Scheme::BruteForce: return "BruteForce";
  }
  return "?";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  auto lower = [](std::string_view s) {
    std::string o(s);
    for (auto& c : o) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return o;
  };
  const std::string key = lower(name);
  for (Scheme s : {Scheme::ESB, Scheme::ASB_fixed_edge, Scheme::ASB_full, Scheme::BruteForce})
    if (key == lower(to_string(s))) return s;
  return std::nullopt;
}

std::vector<double> edge_bandwidths(const SpectrumLayout& layout, double threshold) {
  std::vector<double> out;
  for (const auto& region : layout.regions) {
    try {
      out.push_back(edge_cutoff_bandwidth(region, threshold));
    } catch (const RegionUnusableError&) {
      out.push_back(region.b_tot);
    }
  }
  return out;
}

std::vector<std::size_t> apportion_subbands(const std::vector<double>& usable, std::size_t n_users) {
  const std::size_t R = usable.size();
  std::vector<std::size_t> count(R, 0);
  double total = 0.0;
  for (double u : usable) total += std::max(u, 0.0);
  if (!(total > 0.0)) return count;
  std::vector<double> remainder(R, 0.0);
  std::size_t given = 0;
  for (std::size_t r = 0; r < R; ++r) {
    const double quota = std::max(usable[r], 0.0) / total * static_cast<double>(n_users);
    count[r] = static_cast<std::size_t>(std::floor(quota));
    remainder[r] = quota - static_cast<double>(count[r]);
    given += count[r];
  }
  std::vector<std::size_t> order(R);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return usable[a] > usable[b];
  });
  for (std::size_t k = 0; given < n_users; k = (k + 1) % R)
    if (usable[order[k]] > 0.0) {
      ++count[order[k]];
      ++given;
    }
  return count;
}

BaselineResult esb_allocate(const Scenario& sc, const SpectrumLayout& layout,
                            const BaselineConfig& config) {
  const auto t0 = Clock::now();
  sc.validate();
  BaselineResult out;
  out.scheme = Scheme::ESB;
  out.notes.emplace_back("powers optimized jointly with the assignment and widths held fixed");
  const std::size_t I = sc.n_users(), R = layout.size();

  const auto b_star = edge_bandwidths(layout, config.edge_threshold);
  std::vector<double> usable(R);
  for (std::size_t r = 0; r < R; ++r) usable[r] = layout.regions[r].b_tot - b_star[r];
  const auto count = apportion_subbands(usable, I);

  std::vector<std::pair<std::size_t, std::size_t>> column;
  std::vector<double> column_center, column_width;
  for (std::size_t r = 0; r < R; ++r) {
    if (count[r] == 0) continue;
    const double n = static_cast<double>(count[r]);
    const double width = std::min(usable[r] / n - sc.b_g, sc.b_max);
    if (!(width > config.problem.delta_hz)) {
      out.notes.emplace_back("region " + std::to_string(r) + " cannot hold " +
                             std::to_string(count[r]) + " positive-width sub-bands");
      out.wall_ms = ms_since(t0);
      return out;
    }
    const double b_delta = layout.regions[r].b_tot - n * (width + sc.b_g);
    const auto& region = layout.regions[r];
    for (std::size_t s = 0; s < count[r]; ++s) {
      column.emplace_back(r, s);
      column_width.push_back(width);
      column_center.push_back(region.f_ref -
                              region.eta() * (b_delta + static_cast<double>(s) * (width + sc.b_g) + 0.5 * width));
    }
  }
  if (column.size() != I) {
    out.notes.emplace_back("no usable spectrum beyond the edge bands");
    out.wall_ms = ms_since(t0);
    return out;
  }

  // Candidate assignments: maximum sum rate at equal power, then minimum
  // total power needed to reach R_thr on every sub-band.
  const double p0 = std::min(sc.p_max, sc.p_tot / static_cast<double>(I));
  Eigen::MatrixXd weight(I, I), required(I, I);
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t c = 0; c < I; ++c) {
      const auto& region = layout.regions[column[c].first];
      weight(i, c) = rate_approx(sc.link(i, p0), region, column_center[c], column_width[c]);
      const double w = column_width[c];
      const double snr_per_watt =
          std::expm1(rate_approx(sc.link(i, 1.0), region, column_center[c], w) * std::log(2.0) / w);
      const double p_req = std::expm1(sc.r_thr * std::log(2.0) / w) / snr_per_watt;
      required(i, c) = std::isfinite(p_req) && p_req <= sc.p_max ? p_req : 1e3 * (sc.p_tot + sc.p_max);
    }

  FixedAssignmentOptions fo;
  fo.optimize_widths = false;
  fo.delta_hz = config.problem.delta_hz;
  fo.barrier.kkt_tol = config.solver.inner_kkt_tol;
  fo.barrier.max_iter = config.solver.inner_max_iter;
  for (const auto& col : {max_weight_assignment(weight), min_cost_assignment(required)}) {
    Allocation start(I, R, I);
    for (std::size_t i = 0; i < I; ++i) {
      const auto [r, s] = column[col[i]];
      start.assigned(i, r, s) = 1;
      start.bandwidth[start.slot_index(r, s)] = column_width[col[i]];
      start.power[i] = p0;
    }
    auto cand = optimize_fixed_assignment(sc, layout, start, fo);
    if (cand && verify(sc, layout, *cand).all_passed() &&
        (!out.allocation || cand->sum_rate() > out.allocation->sum_rate()))
      out.allocation = std::move(cand);
    if (out.allocation) break;
  }
  if (!out.allocation) out.notes.emplace_back("no power split meets every rate threshold");
  finish(out, sc, layout);
  out.wall_ms = ms_since(t0);
  return out;
}

BaselineResult fixed_edge_asb(const Scenario& sc, const SpectrumLayout& layout,
                              const BaselineConfig& config) {
  ProblemConfig pc = config.problem;
  pc.fixed_b_delta = edge_bandwidths(layout, config.edge_threshold);
  return from_report(Scheme::ASB_fixed_edge, run_sca(build(sc, layout, pc), config.solver));
}

BaselineResult full_asb(const Scenario& sc, const SpectrumLayout& layout, const BaselineConfig& config) {
  const auto t0 = Clock::now();
  ProblemConfig pc = config.problem;
  pc.fixed_b_delta.reset();
  const auto inst = build(sc, layout, pc);
  auto rep = run_sca(inst, config.solver);
  if (config.edge_continuation) {
    const auto fixed = fixed_edge_asb(sc, layout, config);
    if (fixed.feasible) {
      FixedAssignmentOptions fo;
      fo.delta_hz = pc.delta_hz;
      fo.barrier.kkt_tol = config.solver.inner_kkt_tol;
      fo.barrier.max_iter = config.solver.inner_max_iter;
      auto cand = optimize_fixed_assignment(sc, layout, *fixed.allocation, fo);
      if (cand && config.solver.refine_assignment) cand = refine_assignment(inst, *cand);
      if (cand) {
        auto check = verify(inst, *cand);
        if (check.all_passed() && (!rep.feasible() || cand->sum_rate() > rep.allocation->sum_rate())) {
          rep.allocation = std::move(cand);
          rep.feasibility = std::move(check);
          if (fixed.solve->status == SolveStatus::Converged) rep.status = SolveStatus::Converged;
          rep.diagnostics.emplace_back("allocation continued from the fixed-edge solution with the edge freed");
        }
      }
    }
  }
  auto out = from_report(Scheme::ASB_full, std::move(rep));
  out.wall_ms = ms_since(t0);
  return out;
}

BaselineResult brute_force(const Scenario& sc, const SpectrumLayout& layout, std::size_t G) {
  const auto t0 = Clock::now();
  sc.validate();
  const std::size_t I = sc.n_users(), R = layout.size();
  if (I == 0 || I > 3 || R == 0 || R > 2 || G == 0 || G > 60)
    throw SizeGuardError("brute force needs 1 <= |I| <= 3, 1 <= |R| <= 2 and 1 <= grid <= 60");

  BaselineResult out;
  out.scheme = Scheme::BruteForce;

  // Placements: region per user plus order inside the region.
  std::set<std::vector<std::pair<std::size_t, std::size_t>>> placements;
  std::vector<std::size_t> perm(I);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t maps = 1;
  for (std::size_t i = 0; i < I; ++i) maps *= R;
  do {
    for (std::size_t m = 0; m < maps; ++m) {
      std::vector<std::size_t> region(I);
      for (std::size_t i = 0, code = m; i < I; ++i, code /= R) region[i] = code % R;
      std::vector<std::size_t> next(R, 0);
      std::vector<std::pair<std::size_t, std::size_t>> slot(I);
      for (std::size_t u : perm) slot[u] = {region[u], next[region[u]]++};
      placements.insert(slot);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  const double w_step = sc.b_max / static_cast<double>(G);
  const double p_step = std::min(sc.p_max, sc.p_tot) / static_cast<double>(G);
  const std::size_t units = std::min<std::size_t>(
      G * I, static_cast<std::size_t>(std::floor(sc.p_tot / p_step * (1.0 + 1e-12))));
  constexpr double kNone = -std::numeric_limits<double>::infinity();

  double best = kNone;
  std::vector<std::pair<std::size_t, std::size_t>> best_slot;
  std::vector<double> best_w, best_p;

  std::vector<std::size_t> k(I);
  std::vector<double> w(I), center(I);
  std::vector<std::vector<double>> table(I, std::vector<double>(G + 1));
  std::vector<std::vector<double>> dp(I + 1, std::vector<double>(units + 1));
  std::vector<std::vector<std::size_t>> pick(I, std::vector<std::size_t>(units + 1));
  for (const auto& slot : placements) {
    std::fill(k.begin(), k.end(), 1);
    while (true) {
      for (std::size_t i = 0; i < I; ++i) w[i] = static_cast<double>(k[i]) * w_step;
      bool fits = true;
      for (std::size_t r = 0; r < R && fits; ++r) {
        const auto& region = layout.regions[r];
        double used = 0.0;
        for (std::size_t i = 0; i < I; ++i)
          if (slot[i].first == r) used += w[i] + sc.b_g;
        if (used > region.b_tot) {
          fits = false;
          break;
        }
        for (std::size_t i = 0; i < I; ++i) {
          if (slot[i].first != r) continue;
          double offset = region.b_tot - used;
          for (std::size_t j = 0; j < I; ++j)
            if (slot[j].first == r && slot[j].second < slot[i].second) offset += w[j] + sc.b_g;
          center[i] = region.f_ref - region.eta() * (offset + 0.5 * w[i]);
        }
      }
      if (fits) {
        for (std::size_t i = 0; i < I; ++i)
          for (std::size_t q = 1; q <= G; ++q) {
            const double rate = rate_approx(sc.link(i, static_cast<double>(q) * p_step),
                                            layout.regions[slot[i].first], center[i], w[i]);
            table[i][q] = rate >= sc.r_thr ? rate : kNone;
          }
        std::fill(dp[0].begin(), dp[0].end(), 0.0);
        for (std::size_t i = 0; i < I; ++i)
          for (std::size_t u = 0; u <= units; ++u) {
            dp[i + 1][u] = kNone;
            for (std::size_t q = 1; q <= std::min(G, u); ++q) {
              if (dp[i][u - q] == kNone || table[i][q] == kNone) continue;
              const double val = dp[i][u - q] + table[i][q];
              if (val > dp[i + 1][u]) {
                dp[i + 1][u] = val;
                pick[i][u] = q;
              }
            }
          }
        if (dp[I][units] > best) {
          best = dp[I][units];
          best_slot = slot;
          best_w = w;
          best_p.assign(I, 0.0);
          for (std::size_t i = I, u = units; i-- > 0;) {
            best_p[i] = static_cast<double>(pick[i][u]) * p_step;
            u -= pick[i][u];
          }
        }
      }
      std::size_t d = 0;
      while (d < I && ++k[d] > G) k[d++] = 1;
      if (d == I) break;
    }
  }

  if (best == kNone) {
    out.notes.emplace_back("no grid point meets every constraint");
  } else {
    out.allocation = decode_allocation(sc, layout, best_slot, best_w, best_p);
  }
  finish(out, sc, layout);
  out.wall_ms = ms_since(t0);
  return out;
}

BaselineResult run_scheme(Scheme scheme, const Scenario& sc, const SpectrumLayout& layout,
                          const BaselineConfig& config, std::size_t grid_points) {
  switch (scheme) {
    case Scheme::ESB: return esb_allocate(sc, layout, config);
    case Scheme::ASB_fixed_edge: return fixed_edge_asb(sc, layout, config);
    case Scheme::ASB_full: return full_asb(sc, layout, config);
    case Scheme::BruteForce: return brute_force(sc, layout, grid_points);
  }
  throw ValidationError("unknown scheme");
}

}  // namespace thz
