#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "thzalloc/allocation.hpp"
#include "thzalloc/channel.hpp"
#include "thzalloc/error.hpp"
#include "thzalloc/scenario.hpp"

using namespace thz;

namespace {

RegionModel region(RegionKind kind, double f_ref, double b_tot) {
  RegionModel m;
  m.kind = kind;
  m.f_ref = f_ref;
  m.b_tot = b_tot;
  m.sigma1 = kind == RegionKind::PACSR ? -107.0 : 108.7;
  m.sigma2 = kind == RegionKind::PACSR ? 2.84e-10 : -2.84e-10;
  m.sigma3 = 0.054;
  return m;
}

LinkParams desk_link(double p = 5e-6, double d = 5.0) {
  const Scenario sc = generate(default_params(8));
  auto l = sc.link(0, p);
  l.distance_m = d;
  return l;
}

/// Capacity density integrated by a fixed composite rule.
double simpson_rate(const LinkParams& l, const RegionModel& m, double f_s, double b_s) {
  const double scale = l.power_w * l.rho() / b_s;
  return oracle::simpson(
      [&](double f) {
        const double fd = f * l.distance_m;
        return std::log2(1.0 + scale * std::exp(-m.absorption(f) * l.distance_m) / (fd * fd));
      },
      f_s - 0.5 * b_s, f_s + 0.5 * b_s, 4000);
}

}  // namespace

TEST_SUITE("channel") {

TEST_CASE("center frequency layout") {
  const auto p = region(RegionKind::PACSR, 3.8e11, 24e9);
  const std::vector<double> b1{2e9}, g1{0.0};
  CHECK(center_frequency(p, 0.0, b1, g1, 1) == doctest::Approx(3.8e11 - 1e9));

  const auto n = region(RegionKind::NACSR, 3.8e11, 24e9);
  const std::vector<double> b2{2e9, 3e9}, g2{1e9, 1e9};
  double offset = 1e9;
  offset += b2[0] + g2[0];
  offset += 0.5 * b2[1];
  CHECK(center_frequency(n, 1e9, b2, g2, 2) == doctest::Approx(3.8e11 + offset));
  CHECK(center_frequency(n, 1e9, b2, g2, 2) == doctest::Approx(3.8e11 + 5.5e9));

  const std::vector<double> z{0.0, 0.0}, zg{0.0, 0.0};
  CHECK(center_frequency(p, 0.0, z, zg, 2) == 3.8e11);
  CHECK(center_frequency(n, 0.0, z, zg, 1) == 3.8e11);

  const std::vector<double> wide{50e9};
  CHECK_THROWS_AS(center_frequency(p, 0.0, wide, g1, 1), LayoutOverflowError);
  CHECK_THROWS_AS(center_frequency(p, 0.0, b1, g1, 2), DomainError);
}

TEST_CASE("noise power") {
  CHECK(noise_power(1e9, 1e-20) == doctest::Approx(1e-11));
  CHECK(noise_power(0.0, 1e-20) == 0.0);
  CHECK(noise_power(1e9, dbm_to_watt(-174.0)) == doctest::Approx(3.981e-12).epsilon(1e-3));
}

TEST_CASE("rate integral") {
  const auto m = region(RegionKind::PACSR, 3.8e11, 24e9);
  SUBCASE("zero power") {
    CHECK(rate_integral(desk_link(0.0), m, 3.7e11, 1e9) == 0.0);
  }
  SUBCASE("matches a fixed composite rule") {
    for (double b : {1e8, 1e9, 5e9}) {
      const auto l = desk_link();
      CHECK(rate_integral(l, m, 3.7e11, b) == doctest::Approx(simpson_rate(l, m, 3.7e11, b)).epsilon(1e-7));
    }
  }
  SUBCASE("constant absorption has a closed-form integrand") {
    auto flat = m;
    flat.sigma1 = -std::numeric_limits<double>::infinity();
    const auto l = desk_link();
    const double f_s = 3.7e11, b = 1e8;
    const double c = l.power_w * l.rho() / b * std::exp(-flat.sigma3 * l.distance_m) /
                     (l.distance_m * l.distance_m);
    const double exact = oracle::simpson([&](double f) { return std::log2(1.0 + c / (f * f)); },
                                         f_s - b / 2, f_s + b / 2, 2000);
    CHECK(rate_integral(l, flat, f_s, b) == doctest::Approx(exact).epsilon(1e-8));
    CHECK(rate_approx(l, flat, f_s, b) == doctest::Approx(b * std::log2(1.0 + c / (f_s * f_s))));
    CHECK(rate_approx(l, flat, f_s, b) == doctest::Approx(exact).epsilon(1e-6));
  }
  SUBCASE("interval outside the region") {
    CHECK_THROWS_AS(rate_integral(desk_link(), m, 3.79e11, 4e9), DomainError);
  }
}

TEST_CASE("rate approximation") {
  const auto m = region(RegionKind::PACSR, 3.8e11, 24e9);
  CHECK(rate_approx(desk_link(), m, 3.7e11, 0.0) == 0.0);

  SUBCASE("increasing in power") {
    double prev = 0.0;
    for (double p : {1e-7, 1e-6, 1e-5, 1e-4}) {
      const double r = rate_approx(desk_link(p), m, 3.7e11, 1e9);
      CHECK(r > prev);
      prev = r;
    }
  }
  SUBCASE("quarter SNR at twice the distance") {
    auto flat = m;
    flat.sigma1 = -std::numeric_limits<double>::infinity();
    flat.sigma3 = 0.0;
    const double b = 1e9;
    const double snr1 = std::exp2(rate_approx(desk_link(5e-6, 3.0), flat, 3.7e11, b) / b) - 1.0;
    const double snr2 = std::exp2(rate_approx(desk_link(5e-6, 6.0), flat, 3.7e11, b) / b) - 1.0;
    CHECK(snr2 / snr1 == doctest::Approx(0.25).epsilon(1e-9));
  }
  SUBCASE("error shrinks with the sub-band width") {
    const auto l = desk_link();
    double prev = std::numeric_limits<double>::infinity();
    for (double b : {1e9, 1e8, 1e7}) {
      const double ref = rate_integral(l, m, 3.65e11, b);
      const double err = std::abs(rate_approx(l, m, 3.65e11, b) - ref) / ref;
      CHECK(err <= 0.02);
      CHECK(err < prev);
      prev = err;
    }
  }
  SUBCASE("rates rise moving away from f_ref") {
    for (const auto kind : {RegionKind::PACSR, RegionKind::NACSR}) {
      const auto r = region(kind, 3.8e11, 24e9);
      double prev = 0.0;
      for (double off = 1e9; off < 23e9; off += 2e9) {
        const double rate = rate_approx(desk_link(), r, r.f_ref - r.eta() * off, 5e8);
        CHECK(rate > prev);
        prev = rate;
      }
    }
  }
}

TEST_CASE("rate partials match finite differences") {
  const auto m = region(RegionKind::NACSR, 3.8e11, 24e9);
  const auto l = desk_link(3e-6, 7.0);
  const double rho = l.rho(), d = l.distance_m;
  auto value = [&](double p, double w, double f) { return rate_partials(rho, d, m, p, w, f).value; };
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 5; ++t) {
    const double p = 1e-6 + 5e-6 * u(rng), w = 2e8 + 3e9 * u(rng), f = 3.85e11 + 1e10 * u(rng);
    const auto rp = rate_partials(rho, d, m, p, w, f);
    auto q = l;
    q.power_w = p;
    CHECK(rp.value == doctest::Approx(rate_approx(q, m, f, w)).epsilon(1e-12));
    const double hp = 1e-4 * p, hw = 1e-4 * w, hf = 1e3;
    CHECK(rp.d_p == doctest::Approx((value(p + hp, w, f) - value(p - hp, w, f)) / (2 * hp)).epsilon(1e-6));
    CHECK(rp.d_w == doctest::Approx((value(p, w + hw, f) - value(p, w - hw, f)) / (2 * hw)).epsilon(1e-6));
    CHECK(rp.d_f == doctest::Approx((value(p, w, f + hf) - value(p, w, f - hf)) / (2 * hf)).epsilon(1e-5));
    auto part = [&](double pp, double ww, double ff) { return rate_partials(rho, d, m, pp, ww, ff); };
    CHECK(rp.d_pp == doctest::Approx((part(p + hp, w, f).d_p - part(p - hp, w, f).d_p) / (2 * hp)).epsilon(1e-5));
    CHECK(rp.d_pw == doctest::Approx((part(p, w + hw, f).d_p - part(p, w - hw, f).d_p) / (2 * hw)).epsilon(1e-5));
    CHECK(rp.d_pf == doctest::Approx((part(p, w, f + hf).d_p - part(p, w, f - hf).d_p) / (2 * hf)).epsilon(1e-4));
    CHECK(rp.d_ww == doctest::Approx((part(p, w + hw, f).d_w - part(p, w - hw, f).d_w) / (2 * hw)).epsilon(1e-5));
    CHECK(rp.d_wf == doctest::Approx((part(p, w, f + hf).d_w - part(p, w, f - hf).d_w) / (2 * hf)).epsilon(1e-4));
    CHECK(rp.d_ff == doctest::Approx((part(p, w, f + hf).d_f - part(p, w, f - hf).d_f) / (2 * hf)).epsilon(1e-4));
  }
}

TEST_CASE("user rate") {
  auto params = default_params(3);
  const Scenario sc = generate(params);
  SpectrumLayout layout;
  layout.regions = {region(RegionKind::PACSR, 3.8e11, 24e9), region(RegionKind::NACSR, 3.8e11, 24e9)};
  Allocation a(3, 2, 3);
  a.power = {1e-5, 2e-5, 1.5e-5};
  a.assigned(0, 0, 0) = 1;
  a.assigned(1, 0, 1) = 1;
  a.assigned(2, 1, 0) = 1;
  a.b_delta = {1e9, 2e9};
  a.bandwidth[a.slot_index(0, 0)] = 2e9;
  a.bandwidth[a.slot_index(0, 1)] = 3e9;
  a.bandwidth[a.slot_index(1, 0)] = 4e9;
  a.guard[a.slot_index(0, 0)] = 1e9;
  a.guard[a.slot_index(0, 1)] = 1e9;
  a.guard[a.slot_index(1, 0)] = 1e9;
  a.recompute_centers(layout);

  const double f0 = 3.8e11 - (1e9 + 1e9);
  const double f1 = 3.8e11 - (1e9 + 2e9 + 1e9 + 1.5e9);
  const double f2 = 3.8e11 + (2e9 + 2e9);
  CHECK(a.center[a.slot_index(0, 0)] == doctest::Approx(f0));
  CHECK(a.center[a.slot_index(0, 1)] == doctest::Approx(f1));
  CHECK(a.center[a.slot_index(1, 0)] == doctest::Approx(f2));

  const double r0 = rate_approx(sc.link(0, 1e-5), layout.regions[0], f0, 2e9);
  const double r1 = rate_approx(sc.link(1, 2e-5), layout.regions[0], f1, 3e9);
  const double r2 = rate_approx(sc.link(2, 1.5e-5), layout.regions[1], f2, 4e9);
  CHECK(user_rate(a, sc, layout, 0) == doctest::Approx(r0).epsilon(1e-12));
  CHECK(user_rate(a, sc, layout, 1) == doctest::Approx(r1).epsilon(1e-12));
  CHECK(user_rate(a, sc, layout, 2) == doctest::Approx(r2).epsilon(1e-12));

  a.assigned(2, 1, 0) = 0;
  CHECK_THROWS_AS(user_rate(a, sc, layout, 2), AssignmentViolationError);
  a.assigned(1, 1, 0) = 1;
  CHECK_THROWS_AS(user_rate(a, sc, layout, 1), AssignmentViolationError);
}

}
