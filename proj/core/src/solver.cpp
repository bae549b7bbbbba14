#include "thzalloc/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "thzalloc/assignment.hpp"
#include "thzalloc/error.hpp"

namespace thz {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

const char* to_string(SolveStatus status) noexcept {
  switch (status) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::Infeasible: return "Infeasible";
  }
  return "?";
}

std::vector<double> SolveReport::psi_trace() const {
  std::vector<double> out;
  for (const auto& t : trace) out.push_back(t.psi);
  return out;
}

std::vector<double> SolveReport::fp_trace() const {
  std::vector<double> out;
  for (const auto& t : trace) out.push_back(t.fp);
  return out;
}

std::optional<Allocation> decode_allocation(
    const Scenario& scenario, const SpectrumLayout& layout,
    const std::vector<std::pair<std::size_t, std::size_t>>& slot_of_user,
    const std::vector<double>& width, const std::vector<double>& power,
    std::span<const double> fixed_b_delta) {
  const std::size_t I = scenario.n_users(), R = layout.size();
  if (slot_of_user.size() != I || width.size() != I || power.size() != I)
    throw ValidationError("decode needs one slot, width and power per user");
  if (!fixed_b_delta.empty() && fixed_b_delta.size() != R)
    throw ValidationError("fixed_b_delta needs one entry per region");
  Allocation a(I, R, I);
  for (std::size_t i = 0; i < I; ++i) {
    const auto [r, s] = slot_of_user[i];
    if (r >= R || s >= I) throw ValidationError("slot index out of range");
    if (a.user_on(r, s)) throw AssignmentViolationError("two users share one sub-band");
    if (!(width[i] > 0.0)) throw ValidationError("assigned sub-band needs a positive width");
    a.assigned(i, r, s) = 1;
    a.bandwidth[a.slot_index(r, s)] = width[i];
    a.guard[a.slot_index(r, s)] = scenario.b_g;
    a.power[i] = power[i];
  }
  for (std::size_t r = 0; r < R; ++r) {
    const double b_tot = layout.regions[r].b_tot;
    auto used = [&] {
      double u = 0.0;
      for (std::size_t s = 0; s < I; ++s) u += a.bandwidth[a.slot_index(r, s)] + a.guard[a.slot_index(r, s)];
      return u;
    };
    if (!fixed_b_delta.empty()) {
      double slack = b_tot - fixed_b_delta[r] - used();
      if (slack < -1e-9 * b_tot) return std::nullopt;
      if (slack < 0.0) {
        std::size_t widest = a.slot_index(r, 0);
        for (std::size_t s = 1; s < I; ++s)
          if (a.bandwidth[a.slot_index(r, s)] > a.bandwidth[widest]) widest = a.slot_index(r, s);
        if (a.bandwidth[widest] + slack <= 0.0) return std::nullopt;
        a.bandwidth[widest] += slack;
        slack = 0.0;
      }
      while (slack > 1e-12 * b_tot) {
        std::vector<std::size_t> open;
        for (std::size_t s = 0; s < I; ++s)
          if (a.bandwidth[a.slot_index(r, s)] > 0.0 && a.bandwidth[a.slot_index(r, s)] < scenario.b_max)
            open.push_back(a.slot_index(r, s));
        if (open.empty()) break;
        const double share = slack / static_cast<double>(open.size());
        for (std::size_t k : open) {
          const double add = std::min(share, scenario.b_max - a.bandwidth[k]);
          a.bandwidth[k] += add;
          slack -= add;
        }
      }
    }
    const double b_delta = b_tot - used();
    if (b_delta < 0.0) return std::nullopt;
    a.b_delta[r] = b_delta;
  }
  a.recompute_centers(layout);
  for (std::size_t i = 0; i < I; ++i) a.rate[i] = user_rate(a, scenario, layout, i);
  return a;
}

RestoreResult round_and_restore(const ProblemInstance& inst, const Eigen::VectorXd& relaxed,
                                double threshold) {
  const std::size_t I = inst.n_users(), R = inst.n_regions();
  const auto& sc = inst.scenario;
  RestoreResult out;

  std::vector<std::pair<std::size_t, std::size_t>> slot(I);
  std::vector<int> row_count(I, 0), col_count(R * I, 0);
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t s = 0; s < I; ++s)
        if (relaxed[inst.x_index(i, r, s)] >= threshold) {
          ++row_count[i];
          ++col_count[r * I + s];
          slot[i] = {r, s};
        }
  const bool valid = std::all_of(row_count.begin(), row_count.end(), [](int c) { return c == 1; }) &&
                     std::all_of(col_count.begin(), col_count.end(), [](int c) { return c <= 1; });

  const auto ev = evaluate_rates(inst, relaxed);
  if (!valid) {
    Eigen::MatrixXd w(I, R * I);
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t s = 0; s < I; ++s) w(i, r * I + s) = ev.rate[inst.x_index(i, r, s)].value;
    const auto col = max_weight_assignment(w);
    for (std::size_t i = 0; i < I; ++i) slot[i] = {col[i] / I, col[i] % I};
    out.repaired = true;
  }

  std::vector<double> width(I), power(I);
  double psum = 0.0;
  for (std::size_t i = 0; i < I; ++i) {
    const auto [r, s] = slot[i];
    width[i] = std::clamp(ev.width[r * I + s], inst.config.delta_hz, sc.b_max);
    power[i] = std::clamp(relaxed[inst.p_index(i)], 0.0, sc.p_max);
    psum += power[i];
  }
  if (psum > sc.p_tot)
    for (auto& p : power) p *= sc.p_tot / psum;

  std::vector<double> edge;
  if (inst.config.fixed_b_delta) edge = *inst.config.fixed_b_delta;
  auto alloc = decode_allocation(sc, inst.layout, slot, width, power, edge);
  std::string failure;
  if (!alloc) {
    failure = "bandwidth budget overflow after rounding";
  } else {
    for (std::size_t i = 0; i < I && failure.empty(); ++i)
      if (alloc->rate[i] < sc.r_thr * (1.0 - 1e-6)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "user %zu rate %.6e bit/s below threshold %.6e after rounding",
                      i, alloc->rate[i], sc.r_thr);
        failure = buf;
      }
  }
  if (alloc) out.user_rates = alloc->rate;
  if (failure.empty()) {
    out.allocation = std::move(alloc);
    return out;
  }

  Allocation seed(I, R, I);
  for (std::size_t i = 0; i < I; ++i) {
    const auto [r, s] = slot[i];
    seed.assigned(i, r, s) = 1;
    seed.bandwidth[seed.slot_index(r, s)] = width[i];
    seed.power[i] = power[i];
  }
  FixedAssignmentOptions fo;
  fo.delta_hz = inst.config.delta_hz;
  fo.fixed_b_delta = edge;
  auto polished = optimize_fixed_assignment(sc, inst.layout, seed, fo);
  if (polished && verify(inst, *polished).all_passed()) {
    out.reoptimized = true;
    out.user_rates = polished->rate;
    out.allocation = std::move(polished);
    return out;
  }
  out.failure = failure + "; re-optimizing powers and widths did not restore feasibility";
  return out;
}

SolveReport run_sca(const ProblemInstance& inst_in, const SolverConfig& config) {
  config.validate();
  const auto t0 = Clock::now();
  SolveReport rep;

  ProblemInstance local;
  const ProblemInstance* ip = &inst_in;
  if (inst_in.config.lambda != config.lambda) {
    local = inst_in;
    local.config.lambda = config.lambda;
    ip = &local;
  }
  const ProblemInstance& inst = *ip;
  rep.diagnostics = inst.warnings;

  if (config.max_outer == 0) {
    rep.status = SolveStatus::MaxIter;
    rep.diagnostics.emplace_back("max_outer = 0: no iterations run");
    rep.wall_ms = ms_since(t0);
    return rep;
  }

  auto start = find_feasible_point(inst, config);
  if (!start) {
    rep.status = SolveStatus::Infeasible;
    rep.diagnostics.emplace_back("phase one found no strictly feasible point of the relaxed problem");
    rep.wall_ms = ms_since(t0);
    return rep;
  }

  Eigen::VectorXd v = *start;
  std::vector<double> anchor(inst.n_x(), 0.5);
  bool converged = false;
  SolverConfig first = config;
  first.mu_warm = config.mu_cold;
  for (std::size_t kappa = 0; kappa < config.max_outer; ++kappa) {
    const auto ti = Clock::now();
    const auto sub = solve_subproblem(inst, anchor, kappa == 0 ? first : config, &v);
    IterationRecord rec;
    rec.kappa = kappa;
    rec.psi = sub.psi.psi;
    const std::span<const double> x_new(sub.v.data(), inst.n_x());
    rec.fp = penalty_fp(x_new, x_new);
    rec.inner_iters = sub.iterations;
    rec.kkt = sub.kkt;
    rec.wall_ms = ms_since(ti);
    if (sub.status != SubproblemStatus::Optimal) {
      char buf[120];
      std::snprintf(buf, sizeof buf, "outer %zu: inner solve ended %s (kkt %.2e)", kappa,
                    sub.status == SubproblemStatus::MaxIter ? "at the iteration limit" : "stalled",
                    sub.kkt);
      rep.diagnostics.emplace_back(buf);
    }
    if (!rep.trace.empty() && rec.psi > rep.trace.back().psi + 10.0 * config.inner_kkt_tol) {
      char buf[120];
      std::snprintf(buf, sizeof buf, "outer %zu: Psi rose from %.9g to %.9g", kappa,
                    rep.trace.back().psi, rec.psi);
      rep.diagnostics.emplace_back(buf);
    }
    rep.trace.push_back(rec);
    v = sub.v;
    if (rec.fp < config.epsilon) {
      converged = true;
      break;
    }
    if (sub.kept_warm_start && std::equal(anchor.begin(), anchor.end(), v.data())) {
      rep.diagnostics.emplace_back("outer loop stagnated: the subproblem kept its warm start at an unchanged anchor");
      break;
    }
    anchor.assign(v.data(), v.data() + inst.n_x());
  }
  rep.outer_iters = rep.trace.size();
  rep.status = converged ? SolveStatus::Converged : SolveStatus::MaxIter;
  if (!converged)
    rep.diagnostics.emplace_back("F_p stayed above epsilon; allocation extracted by rounding");
  rep.relaxed = v;

  auto restored = round_and_restore(inst, v, config.rounding_threshold);
  rep.repaired = restored.repaired;
  if (restored.repaired) rep.diagnostics.emplace_back("rounded assignment repaired by max-weight matching");
  if (restored.reoptimized)
    rep.diagnostics.emplace_back("powers and widths re-optimized for the rounded assignment");
  if (!restored.allocation) {
    rep.status = SolveStatus::Infeasible;
    rep.diagnostics.push_back(restored.failure);
  } else {
    rep.allocation = std::move(restored.allocation);
    if (config.refine_assignment) {
      std::size_t moves = 0;
      rep.allocation = refine_assignment(inst, *rep.allocation, &moves);
      if (moves > 0)
        rep.diagnostics.push_back("assignment local search improved the sum rate in " +
                                  std::to_string(moves) + " moves");
    }
    rep.feasibility = verify(inst, *rep.allocation);
  }
  rep.wall_ms = ms_since(t0);
  return rep;
}

}  // namespace thz
