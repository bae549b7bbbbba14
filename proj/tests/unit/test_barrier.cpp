#include <doctest.h>

#include <cmath>
#include <limits>

#include "thzalloc/barrier.hpp"

using namespace thz;

namespace {

/// min sum_k c_k (v_k - t_k)^2  s.t.  v0 + v1 - cap < 0, box bounds, optional v2 = v0.
class Quadratic : public nlp::Problem {
 public:
  Eigen::VectorXd target, weight;
  double cap = 1.0;

  Quadratic(bool tie, double cap_value, double box = 5.0) : cap(cap_value) {
    const Eigen::Index n = tie ? 3 : 2;
    target = Eigen::VectorXd::Constant(n, 2.0);
    target[1] = 1.0;
    weight = Eigen::VectorXd::Ones(n);
    basis.resize(n, 2);
    basis.insert(0, 0) = 1.0;
    basis.insert(1, 1) = 1.0;
    if (tie) basis.insert(2, 0) = 1.0;
    basis.makeCompressed();
    offset = Eigen::VectorXd::Zero(n);
    pivot = {0, 1};
    lower = Eigen::VectorXd::Constant(n, -box);
    upper = Eigen::VectorXd::Constant(n, box);
  }

  Eigen::Index n_constraints() const override { return 1; }

  void evaluate(const Eigen::VectorXd& v, bool derivatives, nlp::Evaluation& out) const override {
    const Eigen::VectorXd d = v - target;
    out.f = d.cwiseProduct(d).dot(weight);
    out.g = Eigen::VectorXd::Constant(1, v[0] + v[1] - cap);
    if (derivatives) {
      out.grad_f = 2.0 * weight.cwiseProduct(d);
      out.jac_g = Eigen::MatrixXd::Zero(1, v.size());
      out.jac_g(0, 0) = out.jac_g(0, 1) = 1.0;
    }
  }

  void add_hessian(const Eigen::VectorXd&, double w0, const Eigen::VectorXd&, Eigen::MatrixXd& H) const override {
    H.diagonal() += 2.0 * w0 * weight;
  }
};

}  // namespace

TEST_SUITE("barrier") {

TEST_CASE("inequality-constrained quadratic") {
  const Quadratic q(false, 1.0);
  const Eigen::Vector2d start(-1.0, -1.0);
  REQUIRE(nlp::strictly_feasible(q, start));
  const auto res = nlp::minimize(q, start, {});
  CHECK(res.status == nlp::Status::Optimal);
  CHECK(res.v[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(res.v[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-4));
  CHECK(res.f - 2.0 >= -1e-9);
  CHECK(res.f - 2.0 <= res.kkt + 1e-9);
  CHECK(res.kkt <= 1e-6);
}

TEST_CASE("equality map through the basis") {
  const Quadratic q(true, 1.0);
  const Eigen::Vector3d start(-1.0, -1.0, -1.0);
  REQUIRE(nlp::strictly_feasible(q, start));
  CHECK_FALSE(nlp::strictly_feasible(q, Eigen::Vector3d(-1.0, -1.0, 0.0)));
  const auto res = nlp::minimize(q, start, {});
  CHECK(res.v[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-4));
  CHECK(res.v[1] == doctest::Approx(-1.0 / 3.0).epsilon(1e-4));
  CHECK(res.v[2] == res.v[0]);
}

TEST_CASE("inactive constraint recovers the unconstrained minimum") {
  const Quadratic q(false, 10.0);
  const auto res = nlp::minimize(q, Eigen::Vector2d(0.0, 0.0), {});
  CHECK(res.v[0] == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(res.v[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("phase one") {
  SUBCASE("finds an interior point") {
    const Quadratic q(false, 1.0);
    const Eigen::Vector2d start(4.0, 4.0);
    CHECK_FALSE(nlp::strictly_feasible(q, start));
    const auto p = nlp::find_interior(q, start, {});
    CHECK(p.feasible);
    CHECK(nlp::strictly_feasible(q, p.v));
    CHECK(p.v[0] + p.v[1] - 1.0 < 0.0);
  }
  SUBCASE("certifies an empty set") {
    const Quadratic q(false, -20.0);
    const auto p = nlp::find_interior(q, Eigen::Vector2d(0.0, 0.0), {});
    CHECK_FALSE(p.feasible);
    CHECK(p.max_violation == doctest::Approx(10.0).epsilon(1e-3));
  }
}

}
