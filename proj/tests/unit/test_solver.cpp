#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "thzalloc/error.hpp"
#include "thzalloc/solver.hpp"

using namespace thz;

namespace {

ProblemInstance instance(std::size_t users, std::size_t regions, std::uint64_t seed = 1) {
  auto p = default_params(users);
  p.seed = seed;
  return build(generate(p), fixture::regression_layout().prefix(regions), fixture::warn_config());
}

/// Binary relaxed point: user i on slot (0, i) with the given widths, guards tied.
Eigen::VectorXd binary_point(const ProblemInstance& inst, const std::vector<double>& widths,
                             double b_delta) {
  Eigen::VectorXd v = initial_point(inst);
  const std::size_t I = inst.n_users();
  for (std::size_t k = 0; k < inst.n_x(); ++k) v[k] = 0.0;
  for (std::size_t i = 0; i < I; ++i) {
    v[inst.x_index(i, 0, i)] = 1.0;
    v[inst.p_index(i)] = 0.9 * std::min(inst.scenario.p_max, inst.scenario.p_tot / double(I));
  }
  for (std::size_t r = 0; r < inst.n_regions(); ++r)
    for (std::size_t s = 0; s <= I; ++s) {
      const std::size_t var = inst.z1_index(r, s);
      const double b = r == 0 ? (s == 0 ? b_delta : widths[s - 1]) : (s == 0 ? 1e9 : 0.0);
      v[var] = b > 0.0 ? z_of_b(inst.constants_of(var), b) : inst.constants_of(var).z_ref();
    }
  tie_guards(inst, v);
  return v;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("single user takes the whole power and widest band") {
  const auto inst = instance(1, 1);
  const auto rep = run_sca(inst);
  REQUIRE(rep.status == SolveStatus::Converged);
  CHECK(rep.outer_iters == 1);
  CHECK(rep.trace.back().fp < 1e-6);
  REQUIRE(rep.feasible());
  const auto& a = *rep.allocation;
  CHECK(a.assigned(0, 0, 0) == 1);
  CHECK(a.power[0] == doctest::Approx(std::min(inst.scenario.p_max, inst.scenario.p_tot)).epsilon(1e-3));
  CHECK(a.bandwidth[0] == doctest::Approx(inst.scenario.b_max).epsilon(1e-3));
}

TEST_CASE("unreachable rate threshold is infeasible") {
  auto p = default_params(2);
  p.r_thr_bps = 1e13;
  const auto inst = build(generate(p), fixture::regression_layout().prefix(1), fixture::warn_config());
  const auto rep = run_sca(inst);
  CHECK(rep.status == SolveStatus::Infeasible);
  CHECK_FALSE(rep.feasible());
  CHECK_FALSE(rep.diagnostics.empty());
  SolverConfig c;
  CHECK_FALSE(find_feasible_point(inst, c).has_value());
}

TEST_CASE("max_outer = 0 runs nothing") {
  SolverConfig c;
  c.max_outer = 0;
  const auto rep = run_sca(instance(3, 1), c);
  CHECK(rep.status == SolveStatus::MaxIter);
  CHECK(rep.trace.empty());
  CHECK(rep.outer_iters == 0);
  CHECK_FALSE(rep.allocation.has_value());
}

TEST_CASE("invalid configuration") {
  SolverConfig c;
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("regression seeds descend and verify") {
  const auto layout = fixture::regression_layout();
  for (int seed : {1, 2}) {
    CAPTURE(seed);
    const auto inst = build(generate(fixture::regression_params(seed)), layout, fixture::warn_config());
    const SolverConfig c;
    const auto rep = run_sca(inst, c);
    REQUIRE(rep.status == SolveStatus::Converged);
    const auto psi = rep.psi_trace();
    for (std::size_t k = 1; k < psi.size(); ++k) CHECK(psi[k] <= psi[k - 1] + 10.0 * c.inner_kkt_tol);
    CHECK(rep.fp_trace().back() < 1e-6);
    CHECK(rep.outer_iters <= 200);
    REQUIRE(rep.allocation.has_value());
    const auto check = verify(inst, *rep.allocation);
    for (const auto* f : check.failures()) FAIL_CHECK(f->name << " residual " << f->residual);
    CHECK(check.sum_rate == doctest::Approx(rep.allocation->sum_rate()).epsilon(1e-12));

    std::vector<double> anchor(rep.relaxed.data(), rep.relaxed.data() + inst.n_x());
    const auto again = solve_subproblem(inst, anchor, c, &rep.relaxed);
    CHECK(again.psi.psi <= rep.trace.back().psi + 10.0 * c.inner_kkt_tol);
    CHECK(again.psi.fp < 1e-6);
  }
}

TEST_CASE("rounding a feasible binary point is the identity") {
  const auto inst = instance(2, 1);
  const auto v = binary_point(inst, {3e9, 4e9}, 2e9);
  const auto res = round_and_restore(inst, v);
  REQUIRE(res.allocation.has_value());
  CHECK_FALSE(res.repaired);
  CHECK_FALSE(res.reoptimized);
  const auto& a = *res.allocation;
  CHECK(a.assigned(0, 0, 0) == 1);
  CHECK(a.assigned(1, 0, 1) == 1);
  CHECK(a.bandwidth[0] == doctest::Approx(3e9).epsilon(1e-9));
  CHECK(a.bandwidth[1] == doctest::Approx(4e9).epsilon(1e-9));
  CHECK(a.power[0] == v[inst.p_index(0)]);
  CHECK(a.b_delta[0] == doctest::Approx(24e9 - 3e9 - 4e9 - 2e9).epsilon(1e-9));
  CHECK(verify(inst, a).all_passed());
}

TEST_CASE("colliding users are repaired by the best assignment") {
  const auto inst = instance(2, 1, 4);
  Eigen::VectorXd v = binary_point(inst, {1.5e9, 4e9}, 1e9);
  for (std::size_t k = 0; k < inst.n_x(); ++k) v[k] = 0.0;
  v[inst.x_index(0, 0, 0)] = v[inst.x_index(1, 0, 0)] = 0.5;
  v[inst.x_index(0, 0, 1)] = v[inst.x_index(1, 0, 1)] = 0.3;
  tie_guards(inst, v);
  Eigen::MatrixXd w(2, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t s = 0; s < 2; ++s) w(Eigen::Index(i), Eigen::Index(s)) = rate_in_z(inst, v, i, 0, s);
  const double best = oracle::best_assignment_weight(w);
  const auto res = round_and_restore(inst, v);
  CHECK(res.repaired);
  REQUIRE(res.allocation.has_value());
  const auto& a = *res.allocation;
  const auto s0 = a.slot_of(0), s1 = a.slot_of(1);
  REQUIRE(s0);
  REQUIRE(s1);
  CHECK(s0->second != s1->second);
  if (!res.reoptimized)
    CHECK(w(0, Eigen::Index(s0->second)) + w(1, Eigen::Index(s1->second)) == doctest::Approx(best));
}

TEST_CASE("zero-width assigned sub-band is raised to delta") {
  const auto inst = instance(2, 1);
  const auto v = binary_point(inst, {4e9, 0.0}, 2e9);
  const auto res = round_and_restore(inst, v);
  REQUIRE(res.allocation.has_value());
  const auto& a = *res.allocation;
  CHECK(a.bandwidth[1] >= inst.config.delta_hz);
  CHECK(verify(inst, a).all_passed());
}

TEST_CASE("decode") {
  const auto inst = instance(2, 1);
  const auto& sc = inst.scenario;
  const std::vector<std::pair<std::size_t, std::size_t>> slots{{0, 1}, {0, 0}};
  const auto a = decode_allocation(sc, inst.layout, slots, {2e9, 3e9}, {1e-5, 1e-5});
  REQUIRE(a.has_value());
  CHECK(a->guard[0] == sc.b_g);
  CHECK(a->guard[1] == sc.b_g);
  CHECK(a->b_delta[0] == doctest::Approx(24e9 - 2e9 - 3e9 - 2.0 * sc.b_g));
  const auto& region = inst.layout.regions[0];
  CHECK(a->center[1] == doctest::Approx(region.f_ref - (a->b_delta[0] + 3e9 + sc.b_g + 1e9)));
  const auto check = verify(sc, inst.layout, *a);
  for (const auto& item : check.items)
    if (item.name.rfind("rate_threshold", 0) != 0) CHECK_MESSAGE(item.passed, item.name);

  CHECK_FALSE(decode_allocation(sc, inst.layout, slots, {12e9, 12e9}, {1e-5, 1e-5}).has_value());
  CHECK_THROWS_AS(decode_allocation(sc, inst.layout, {{0, 0}, {0, 0}}, {1e9, 1e9}, {1e-5, 1e-5}),
                  AssignmentViolationError);
}

TEST_CASE("decode with a fixed edge") {
  const auto open = instance(2, 1);
  const auto& sc = open.scenario;
  const std::vector<std::pair<std::size_t, std::size_t>> slots{{0, 1}, {0, 0}};
  const std::vector<double> p{2e-5, 2e-5};

  SUBCASE("slack widens the sub-bands") {
    const std::vector<double> edge{24e9 - 5e9 - 2.0 * sc.b_g - 1e9};
    const auto a = decode_allocation(sc, open.layout, slots, {2e9, 3e9}, p, edge);
    REQUIRE(a.has_value());
    CHECK(a->b_delta[0] == doctest::Approx(edge[0]).epsilon(1e-12));
    CHECK(a->bandwidth[1] == doctest::Approx(2.5e9));
    CHECK(a->bandwidth[0] == doctest::Approx(3.5e9));
    const auto free = *decode_allocation(sc, open.layout, slots, {2e9, 3e9}, p);
    CHECK(a->sum_rate() > free.sum_rate());

    ProblemConfig pc = fixture::warn_config();
    pc.fixed_b_delta = edge;
    const auto pinned = build(sc, open.layout, pc);
    CHECK(verify(pinned, *a).all_passed());
    const auto rep = verify(pinned, *decode_allocation(sc, open.layout, slots, {2.5e9, 3.5e9}, p));
    CHECK(rep.all_passed());
    const auto moved = verify(pinned, free);
    const auto failures = moved.failures();
    REQUIRE(failures.size() == 1);
    CHECK(failures[0]->name == "edge_fixed[0]");
  }
  SUBCASE("saturated sub-bands leave the rest at the edge") {
    const std::vector<double> edge{7e9};
    const auto a = decode_allocation(sc, open.layout, slots, {2e9, 3e9}, p, edge);
    REQUIRE(a.has_value());
    CHECK(a->bandwidth[0] == sc.b_max);
    CHECK(a->bandwidth[1] == sc.b_max);
    CHECK(a->b_delta[0] == doctest::Approx(24e9 - 2.0 * (sc.b_max + sc.b_g)));
    ProblemConfig pc = fixture::warn_config();
    pc.fixed_b_delta = edge;
    CHECK(verify(build(sc, open.layout, pc), *a).all_passed());
  }
  SUBCASE("overflow") {
    CHECK_FALSE(decode_allocation(sc, open.layout, slots, {2e9, 3e9}, p, std::vector<double>{20e9}).has_value());
  }
}

TEST_CASE("fixed-edge polish keeps the edge") {
  const auto layout = fixture::regression_layout();
  ProblemConfig pc = fixture::warn_config();
  pc.fixed_b_delta = edge_bandwidths(layout, 0.3);
  const auto inst = build(generate(fixture::regression_params(3)), layout, pc);
  SolverConfig c;
  c.refine_assignment = false;
  const auto rep = run_sca(inst, c);
  REQUIRE(rep.feasible());
  FixedAssignmentOptions fo;
  fo.fixed_b_delta = *pc.fixed_b_delta;
  const auto polished = optimize_fixed_assignment(inst.scenario, layout, *rep.allocation, fo);
  REQUIRE(polished.has_value());
  const auto check = verify(inst, *polished);
  for (const auto* f : check.failures()) CHECK_MESSAGE(false, f->name);
  CHECK(polished->sum_rate() >= rep.allocation->sum_rate() * (1.0 - 1e-6));
}

TEST_CASE("verify flags a 1 Hz budget violation alone") {
  const auto inst = instance(2, 1);
  auto a = *decode_allocation(inst.scenario, inst.layout, {{0, 0}, {0, 1}}, {4e9, 4e9},
                              {2e-5, 2e-5});
  REQUIRE(verify(inst, a).all_passed());
  a.b_delta[0] += 1.0;
  const auto rep = verify(inst, a);
  const auto failures = rep.failures();
  REQUIRE(failures.size() == 1);
  CHECK(failures[0]->name == "bandwidth_budget[0]");
  CHECK(failures[0]->residual == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("verify item coverage") {
  const auto inst = instance(2, 1);
  auto a = *decode_allocation(inst.scenario, inst.layout, {{0, 0}, {0, 1}}, {4e9, 4e9},
                              {2e-5, 2e-5});
  auto failing = [&](const Allocation& b) {
    std::vector<std::string> names;
    const auto rep = verify(inst, b);
    for (const auto* f : rep.failures()) names.push_back(f->name);
    return names;
  };
  auto b = a;
  b.power[0] = inst.scenario.p_max * 1.01;
  const auto p = failing(b);
  CHECK(std::find(p.begin(), p.end(), "power_limit[0]") != p.end());
  b = a;
  b.guard[0] = 0.5 * inst.scenario.b_g;
  b.b_delta[0] += 0.5 * inst.scenario.b_g;
  const auto g = failing(b);
  CHECK(std::find(g.begin(), g.end(), "guard_rule[0]") != g.end());
  b = a;
  b.assigned(1, 0, 1) = 0;
  const auto u = failing(b);
  CHECK(std::find(u.begin(), u.end(), "user_assignment[1]") != u.end());
}

TEST_CASE("fixed-assignment re-optimization") {
  const auto layout = fixture::regression_layout();
  const auto inst = build(generate(fixture::regression_params(3)), layout, fixture::warn_config());
  SolverConfig c;
  c.refine_assignment = false;
  const auto rep = run_sca(inst, c);
  REQUIRE(rep.feasible());
  const auto polished = optimize_fixed_assignment(inst.scenario, layout, *rep.allocation);
  REQUIRE(polished.has_value());
  CHECK(verify(inst, *polished).all_passed());
  CHECK(polished->sum_rate() >= rep.allocation->sum_rate() * (1.0 - 1e-6));
  for (std::size_t i = 0; i < inst.n_users(); ++i) CHECK(polished->slot_of(i) == rep.allocation->slot_of(i));

  FixedAssignmentOptions held;
  held.optimize_widths = false;
  const auto powers_only = optimize_fixed_assignment(inst.scenario, layout, *rep.allocation, held);
  REQUIRE(powers_only.has_value());
  CHECK(powers_only->sum_rate() <= polished->sum_rate() * (1.0 + 1e-9));
  for (std::size_t k = 0; k < powers_only->bandwidth.size(); ++k)
    CHECK(powers_only->bandwidth[k] == doctest::Approx(rep.allocation->bandwidth[k]).epsilon(1e-12));

  std::size_t moves = 0;
  const auto refined = refine_assignment(inst, *rep.allocation, &moves);
  CHECK(verify(inst, refined).all_passed());
  CHECK(refined.sum_rate() >= rep.allocation->sum_rate() * (1.0 - 1e-9));
  if (moves == 0) CHECK(refined.sum_rate() == rep.allocation->sum_rate());
}

}
