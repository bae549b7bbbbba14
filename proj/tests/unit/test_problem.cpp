#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "thzalloc/error.hpp"
#include "thzalloc/problem.hpp"
#include "thzalloc/synthetic.hpp"

using namespace thz;

namespace {

ProblemInstance desk_instance(std::size_t users, std::size_t regions, std::uint64_t seed = 1) {
  auto p = default_params(users);
  p.seed = seed;
  return build(generate(p), fixture::regression_layout().prefix(regions), fixture::warn_config());
}

std::span<const double> x_part(const ProblemInstance& inst, const Eigen::VectorXd& v) {
  return {v.data(), inst.n_x()};
}

/// Interior point with random x, powers, widths and edge gaps; guards tied to x.
Eigen::VectorXd random_point(const ProblemInstance& inst, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(inst.n_vars());
  const std::size_t I = inst.n_users(), R = inst.n_regions();
  for (std::size_t k = 0; k < inst.n_x(); ++k) v[k] = 0.1 + 0.8 * u(rng) / double(R * I);
  for (std::size_t i = 0; i < I; ++i) v[inst.p_index(i)] = (0.2 + 0.6 * u(rng)) * inst.scenario.p_max;
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t d = inst.z1_index(r, 0);
    v[d] = z_of_b(inst.constants_of(d), 5e8 + 1.5e9 * u(rng));
    for (std::size_t s = 0; s < I; ++s) {
      const std::size_t var = inst.z1_index(r, s + 1);
      v[var] = z_of_b(inst.constants_of(var), 2e8 + 6e8 * u(rng));
    }
  }
  tie_guards(inst, v);
  return v;
}

double rel_inf(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).lpNorm<Eigen::Infinity>() / b.lpNorm<Eigen::Infinity>();
}

Eigen::VectorXd fd_steps(const ProblemInstance& inst, const Eigen::VectorXd& v) {
  Eigen::VectorXd h(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) h[k] = 1e-6 * std::max(std::abs(v[k]), 1e-3);
  for (std::size_t i = 0; i < inst.n_users(); ++i) h[inst.p_index(i)] = 1e-6 * inst.scenario.p_max;
  return h;
}

}  // namespace

TEST_SUITE("problem") {

TEST_CASE("variable counts") {
  const auto layout = fit_layout(generate_absorption(SyntheticProfile::two_window()));
  REQUIRE(layout.size() == 4);
  const auto inst = build(generate(default_params(30)), layout, fixture::warn_config());
  CHECK(inst.n_x() == 3600);
  CHECK(inst.n_p() == 30);
  CHECK(inst.n_z() == 244);

  const auto one = build(generate(default_params(1)), layout.prefix(1), fixture::warn_config());
  CHECK(one.n_x() == 1);
  CHECK(one.n_p() == 1);
  CHECK(one.n_z() == 3);
}

TEST_CASE("paper constants") {
  const ProblemConfig c;
  CHECK(c.constants.xi == doctest::Approx(std::pow(10.0, 9.7)));
  CHECK(c.constants.omega == doctest::Approx(std::pow(10.0, 10.7)));
  CHECK(c.constants.varsigma == 1e-3);
  CHECK(c.lambda == 200.0);
  CHECK(c.delta_hz == 1e3);
}

TEST_CASE("convexity condition") {
  const auto sc = generate(default_params(4));
  const auto layout = fixture::regression_layout();
  SUBCASE("desk layout violates it and strict mode names the region") {
    try {
      build(sc, layout, {});
      FAIL("expected ConvexityConditionError");
    } catch (const ConvexityConditionError& e) {
      CHECK(e.region() == 0);
    }
    const auto inst = build(sc, layout, fixture::warn_config());
    CHECK(inst.warnings.size() == 2);
    for (const auto& c : inst.convexity) {
      CHECK_FALSE(c.satisfied);
      CHECK(c.omega_bar == doctest::Approx(convexity_omega_bar(layout.regions[c.region], inst.d_bound)));
    }
    CHECK(inst.d_bound == doctest::Approx(1.1 * d_max(sc)));
  }
  SUBCASE("nearly flat absorption satisfies it") {
    auto flat = layout.prefix(1);
    flat.regions[0].sigma2 = 1e-14;
    flat.regions[0].sigma1 = std::log(0.01) - 1e-14 * flat.regions[0].f_ref;
    flat.regions[0].sigma3 = 0.0;
    const auto inst = build(sc, flat, {});
    CHECK(inst.convexity[0].satisfied);
    CHECK(inst.warnings.empty());
  }
}

TEST_CASE("substitution map") {
  const SubstitutionConstants c;
  CHECK(b_of_z(c, c.z_ref()) == doctest::Approx(0.0).epsilon(1e-9).scale(1e9));
  CHECK(std::abs(b_of_z(c, c.z_ref())) < 1e-3);
  CHECK(z_of_b(c, 4.5e9) == doctest::Approx(c.z_ref() * std::exp(4.5e9 / c.omega)).epsilon(1e-14));
  CHECK_THROWS_AS(b_of_z(c, 0.0), DomainError);
  CHECK_THROWS_AS(b_of_z(c, -1.0), DomainError);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 4.5e9);
  for (int k = 0; k < 1000; ++k) {
    const double b = u(rng);
    CHECK(std::abs(b_of_z(c, z_of_b(c, b)) - b) <= 1e-9 * std::max(b, 1.0) + 1e-4);
  }
}

TEST_CASE("guard bounds follow the assignment column") {
  const auto inst = desk_instance(3, 1);
  const auto& c = inst.constants_of(inst.z2_index(0, 0));
  std::vector<double> x(inst.n_x(), 0.0);
  x[inst.x_index(0, 0, 1)] = 1.0;
  x[inst.x_index(1, 0, 2)] = 0.25;
  x[inst.x_index(2, 0, 2)] = 0.15;
  const auto zb = z_bounds(inst, x);
  const std::size_t z0 = inst.n_x() + inst.n_p();
  auto guard = [&](std::size_t s) {
    const auto b = zb[inst.z2_index(0, s) - z0];
    CHECK(b.lo == b.hi);
    return b_of_z(c, b.lo);
  };
  CHECK(std::abs(guard(0)) < 1e-3);
  CHECK(guard(1) == doctest::Approx(inst.scenario.b_g).epsilon(1e-12));
  const double direct = c.omega * std::log(1.0 + 0.4 * (std::exp(inst.scenario.b_g / c.omega) - 1.0));
  CHECK(guard(2) == doctest::Approx(direct).epsilon(1e-9));
  CHECK(guard(2) > 0.0);
  CHECK(guard(2) < inst.scenario.b_g);

  const auto& d = zb[inst.z1_index(0, 0) - z0];
  CHECK(b_of_z(inst.constants_of(inst.z1_index(0, 0)), d.hi) == doctest::Approx(inst.layout.regions[0].b_tot));
  const auto& w = zb[inst.z1_index(0, 1) - z0];
  CHECK(b_of_z(c, w.lo) == doctest::Approx(inst.config.delta_hz).epsilon(1e-6));
  CHECK(b_of_z(c, w.hi) == doctest::Approx(inst.scenario.b_max));
}

TEST_CASE("bandwidth budget residual") {
  const auto inst = desk_instance(2, 1);
  const double b_tot = inst.layout.regions[0].b_tot;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(inst.n_vars());
  for (std::size_t k = 0; k <= 2; ++k) v[inst.z1_index(0, k)] = inst.constants_of(inst.z1_index(0, k)).z_ref();
  for (std::size_t s = 0; s < 2; ++s) v[inst.z2_index(0, s)] = inst.constants_of(inst.z2_index(0, s)).z_ref();
  CHECK(product_constraint(inst, v, 0) == doctest::Approx(-b_tot).epsilon(1e-12));

  const std::vector<double> widths{0.0, 10e9, 9e9};
  const std::vector<double> guards{1e9, 4e9};
  auto set = [&](double extra) {
    for (std::size_t k = 0; k <= 2; ++k) {
      const std::size_t var = inst.z1_index(0, k);
      v[var] = z_of_b(inst.constants_of(var), widths[k] + (k == 1 ? extra : 0.0));
    }
    for (std::size_t s = 0; s < 2; ++s) {
      const std::size_t var = inst.z2_index(0, s);
      v[var] = z_of_b(inst.constants_of(var), guards[s]);
    }
  };
  set(0.0);
  CHECK(std::abs(product_constraint(inst, v, 0)) <= 1e-9 * b_tot);
  set(1.0);
  CHECK(product_constraint(inst, v, 0) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("objective and penalty") {
  auto inst = desk_instance(2, 1);
  std::mt19937_64 rng(2);
  Eigen::VectorXd v = random_point(inst, rng);
  std::vector<double> anchor(inst.n_x(), 0.0);
  for (std::size_t k = 0; k < inst.n_x(); ++k) v[k] = 0.0;
  v[inst.x_index(0, 0, 0)] = v[inst.x_index(1, 0, 1)] = 1.0;
  anchor[inst.x_index(0, 0, 0)] = anchor[inst.x_index(1, 0, 1)] = 1.0;
  tie_guards(inst, v);
  const auto at_binary = objective_psi(inst, v, anchor);
  const double rates = rate_in_z(inst, v, 0, 0, 0) + rate_in_z(inst, v, 1, 0, 1);
  CHECK(at_binary.fp == 0.0);
  CHECK(at_binary.psi == doctest::Approx(-rates / 1e9).epsilon(1e-12));

  std::vector<double> half{0.5}, one{0.5};
  CHECK(penalty_fp(half, one) == doctest::Approx(0.25));

  inst.config.lambda = 0.0;
  for (std::size_t k = 0; k < inst.n_x(); ++k) v[k] = 0.3;
  double sum = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t s = 0; s < 2; ++s) sum += 0.3 * rate_in_z(inst, v, i, 0, s);
  CHECK(objective_psi(inst, v, anchor).psi == doctest::Approx(-sum / 1e9).epsilon(1e-12));
}

TEST_CASE("rates through the substitution") {
  const auto inst = desk_instance(3, 2);
  std::mt19937_64 rng(4);
  Eigen::VectorXd v = random_point(inst, rng);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t s = 0; s < 3; ++s) {
      const std::size_t var = inst.z1_index(r, s + 1);
      const double keep = v[var];
      v[var] = inst.constants_of(var).z_ref();
      CHECK(std::abs(rate_in_z(inst, v, 0, r, s)) < 1e-6);
      v[var] = keep;
    }

  for (int t = 0; t < 5; ++t) {
    v = random_point(inst, rng);
    double psi_direct = 0.0;
    for (std::size_t r = 0; r < 2; ++r) {
      const auto& region = inst.layout.regions[r];
      std::vector<double> w(3), g(3);
      for (std::size_t s = 0; s < 3; ++s) {
        w[s] = b_of_z(inst.constants_of(inst.z1_index(r, s + 1)), v[inst.z1_index(r, s + 1)]);
        g[s] = b_of_z(inst.constants_of(inst.z2_index(r, s)), v[inst.z2_index(r, s)]);
      }
      const double bd = b_of_z(inst.constants_of(inst.z1_index(r, 0)), v[inst.z1_index(r, 0)]);
      for (std::size_t s = 0; s < 3; ++s) {
        const double f = center_frequency(region, bd, w, g, s + 1);
        for (std::size_t i = 0; i < 3; ++i) {
          const double direct = rate_approx(inst.scenario.link(i, v[inst.p_index(i)]), region, f, w[s]);
          CHECK(rate_in_z(inst, v, i, r, s) == doctest::Approx(direct).epsilon(1e-12));
          psi_direct -= v[inst.x_index(i, r, s)] * direct;
        }
      }
    }
    std::vector<double> anchor(x_part(inst, v).begin(), x_part(inst, v).end());
    const auto psi = objective_psi(inst, v, anchor);
    CHECK(psi.weighted_rate == doctest::Approx(-psi_direct).epsilon(1e-9));
  }

  auto bigger = v;
  for (std::size_t i = 0; i < 3; ++i) bigger[inst.p_index(i)] *= 1.5;
  CHECK(rate_in_z(inst, bigger, 1, 0, 1) > rate_in_z(inst, v, 1, 0, 1));

  auto overflow = v;
  const std::size_t d = inst.z1_index(0, 0);
  overflow[d] = z_of_b(inst.constants_of(d), 23.9e9);
  CHECK_THROWS_AS(rate_in_z(inst, overflow, 0, 0, 2), LayoutOverflowError);
}

TEST_CASE("gradients match central differences") {
  auto inst = desk_instance(3, 2, 3);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 5; ++t) {
    const Eigen::VectorXd v = random_point(inst, rng);
    std::vector<double> anchor(inst.n_x());
    for (auto& a : anchor) a = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto g = gradients(inst, v, anchor);
    CHECK_FALSE(g.on_boundary);
    const auto h = fd_steps(inst, v);

    const auto fd_psi = oracle::central_gradient(
        [&](const Eigen::VectorXd& w) { return objective_psi(inst, w, anchor).psi; }, v, h);
    CHECK(rel_inf(g.grad_psi, fd_psi) <= 1e-4);
    CHECK(g.psi == doctest::Approx(objective_psi(inst, v, anchor).psi).epsilon(1e-12));

    const auto fd_power = oracle::central_gradient(
        [&](const Eigen::VectorXd& w) {
          double s = -inst.scenario.p_tot;
          for (std::size_t i = 0; i < 3; ++i) s += w[inst.p_index(i)];
          return s;
        },
        v, h);
    CHECK(rel_inf(g.grad_power, fd_power) <= 1e-4);

    for (std::size_t i = 0; i < 3; ++i) {
      const auto fd_rate = oracle::central_gradient(
          [&](const Eigen::VectorXd& w) { return inst.scenario.r_thr - evaluate_rates(inst, w).user_rate[i]; },
          v, h);
      CHECK(rel_inf(g.grad_rate[i], fd_rate) <= 1e-4);
    }
    for (std::size_t r = 0; r < 2; ++r) {
      const auto fd_budget = oracle::central_gradient(
          [&](const Eigen::VectorXd& w) { return product_constraint(inst, w, r); }, v, h);
      CHECK(rel_inf(g.grad_budget[r], fd_budget) <= 1e-4);
    }
  }
}

TEST_CASE("gradient special cases") {
  auto inst = desk_instance(2, 1);
  inst.config.lambda = 0.0;
  std::mt19937_64 rng(9);
  const Eigen::VectorXd v = random_point(inst, rng);
  std::vector<double> anchor(inst.n_x(), 0.5);
  const auto g = gradients(inst, v, anchor);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(g.grad_power[inst.p_index(i)] == 1.0);
    for (std::size_t s = 0; s < 2; ++s)
      CHECK(g.grad_psi[inst.x_index(i, 0, s)] == doctest::Approx(-rate_in_z(inst, v, i, 0, s) / 1e9).epsilon(1e-12));
  }
  auto edge = v;
  edge[inst.p_index(0)] = inst.scenario.p_max;
  CHECK(gradients(inst, edge, anchor).on_boundary);
}

TEST_CASE("Hessian matches differences of the gradient") {
  const auto inst = desk_instance(2, 2, 5);
  std::mt19937_64 rng(12);
  const Eigen::VectorXd v = random_point(inst, rng);
  const std::vector<double> weight{0.7, 1.3};
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(v.size(), v.size());
  add_rate_hessian(inst, v, evaluate_rates(inst, v), weight, H);
  const auto h = fd_steps(inst, v);
  auto grad = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(w.size());
    const auto ev = evaluate_rates(inst, w);
    for (std::size_t i = 0; i < 2; ++i) add_user_rate_gradient(inst, w, ev, i, weight[i], out);
    return out;
  };
  Eigen::MatrixXd fd(v.size(), v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    Eigen::VectorXd a = v, b = v;
    a[k] += h[k];
    b[k] -= h[k];
    fd.col(k) = (grad(a) - grad(b)) / (2.0 * h[k]);
  }
  const double scale = fd.lpNorm<Eigen::Infinity>();
  CHECK((H - fd).lpNorm<Eigen::Infinity>() <= 1e-4 * scale);
}

TEST_CASE("concavity of the rates where the condition holds") {
  auto layout = fixture::regression_layout().prefix(1);
  layout.regions[0].sigma2 = 1e-14;
  layout.regions[0].sigma1 = std::log(0.01) - 1e-14 * layout.regions[0].f_ref;
  layout.regions[0].sigma3 = 0.0;
  const auto inst = build(generate(default_params(3)), layout, {});
  REQUIRE(inst.convexity[0].satisfied);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::VectorXd base = random_point(inst, rng);
  const std::vector<double> anchor(base.data(), base.data() + inst.n_x());
  std::size_t checked = 0;
  while (checked < 100) {
    Eigen::VectorXd a = random_point(inst, rng), b = random_point(inst, rng);
    a.head(inst.n_x()) = base.head(inst.n_x());
    b.head(inst.n_x()) = base.head(inst.n_x());
    tie_guards(inst, a);
    tie_guards(inst, b);
    const Eigen::VectorXd m = 0.5 * (a + b);
    const double fa = objective_psi(inst, a, anchor).psi, fb = objective_psi(inst, b, anchor).psi;
    const double fm = objective_psi(inst, m, anchor).psi;
    CHECK(fm <= 0.5 * (fa + fb) + 1e-9 * std::max({std::abs(fa), std::abs(fb), 1.0}));
    ++checked;
  }
}

TEST_CASE("initial point is strictly inside") {
  const auto inst = desk_instance(6, 2);
  const auto v = initial_point(inst);
  const auto zb = z_bounds(inst, x_part(inst, v));
  const std::size_t z0 = inst.n_x() + inst.n_p();
  for (std::size_t k = 0; k < inst.n_x(); ++k) {
    CHECK(v[k] > 0.0);
    CHECK(v[k] < 1.0);
  }
  double p = 0.0;
  for (std::size_t i = 0; i < 6; ++i) p += v[inst.p_index(i)];
  CHECK(p < inst.scenario.p_tot);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(product_constraint(inst, v, r) < 0.0);
    for (std::size_t k = 0; k <= 6; ++k) {
      const auto& b = zb[inst.z1_index(r, k) - z0];
      CHECK(v[inst.z1_index(r, k)] > b.lo);
      CHECK(v[inst.z1_index(r, k)] < b.hi);
    }
  }
  const auto text = dump_problem(inst, v);
  CHECK(text.find(inst.variable_name(inst.p_index(0))) != std::string::npos);
}

}
