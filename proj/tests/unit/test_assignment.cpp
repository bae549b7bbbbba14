#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "thzalloc/assignment.hpp"

using namespace thz;

namespace {

double total(const Eigen::MatrixXd& w, const std::vector<std::size_t>& cols) {
  double s = 0.0;
  for (std::size_t i = 0; i < cols.size(); ++i) s += w(Eigen::Index(i), Eigen::Index(cols[i]));
  return s;
}

bool distinct(const std::vector<std::size_t>& cols) {
  return std::set<std::size_t>(cols.begin(), cols.end()).size() == cols.size();
}

}  // namespace

TEST_SUITE("assignment") {

TEST_CASE("square matrices match enumeration") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int t = 0; t < 50; ++t) {
    Eigen::MatrixXd w(4, 4);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = u(rng);
    const auto cols = max_weight_assignment(w);
    REQUIRE(cols.size() == 4);
    CHECK(distinct(cols));
    CHECK(total(w, cols) == doctest::Approx(oracle::best_assignment_weight(w)).epsilon(1e-12));
    const auto low = min_cost_assignment(w);
    CHECK(total(w, low) == doctest::Approx(-oracle::best_assignment_weight(-w)).epsilon(1e-12));
  }
}

TEST_CASE("rectangular matrices use distinct columns") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int t = 0; t < 30; ++t) {
    Eigen::MatrixXd w(3, 6);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = u(rng);
    const auto cols = max_weight_assignment(w);
    CHECK(distinct(cols));
    for (auto c : cols) CHECK(c < 6);
    CHECK(total(w, cols) == doctest::Approx(oracle::best_assignment_weight(w)).epsilon(1e-12));
  }
}

TEST_CASE("identity is optimal for a dominant diagonal") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(5, 5) + 10.0 * Eigen::MatrixXd::Identity(5, 5);
  const auto cols = max_weight_assignment(w);
  for (std::size_t i = 0; i < 5; ++i) CHECK(cols[i] == i);
}

}
