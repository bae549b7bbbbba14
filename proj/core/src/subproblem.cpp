#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/QR>
#include <Eigen/SparseCore>

#include "thzalloc/barrier.hpp"
#include "thzalloc/error.hpp"
#include "thzalloc/solver.hpp"

namespace thz {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHz = 1e9;

// Relaxed problem in scaled coordinates: x as is, P / P_max and Z in units
// that move the substituted width by about 1 GHz.
class SubproblemNlp final : public nlp::Problem {
 public:
  SubproblemNlp(const ProblemInstance& inst, std::span<const double> anchor,
                const Eigen::VectorXd& reference)
      : inst_(inst), anchor_(anchor.begin(), anchor.end()) {
    const std::size_t n = inst.n_vars(), I = inst.n_users(), R = inst.n_regions();
    scale_ = Eigen::VectorXd::Ones(n);
    for (std::size_t i = 0; i < I; ++i) scale_[inst.p_index(i)] = inst.scenario.p_max;
    for (std::size_t k = inst.n_x() + inst.n_p(); k < n; ++k) {
      const auto& c = inst.constants_of(k);
      scale_[k] = c.z_ref() * kHz / c.omega;
    }
    column_rows_ = R >= 2;
    m_ = 1 + I + R + (column_rows_ ? R * I : 0);
    build_map(reference);
    build_bounds();
  }

  Eigen::Index n_constraints() const override { return static_cast<Eigen::Index>(m_); }

  Eigen::VectorXd to_natural(const Eigen::VectorXd& vs) const { return vs.cwiseProduct(scale_); }
  Eigen::VectorXd to_scaled(const Eigen::VectorXd& v) const { return v.cwiseQuotient(scale_); }

  void evaluate(const Eigen::VectorXd& vs, bool derivatives, nlp::Evaluation& out) const override {
    const std::size_t n = inst_.n_vars(), I = inst_.n_users(), R = inst_.n_regions();
    const Eigen::VectorXd v = to_natural(vs);
    const auto ev = evaluate_rates(inst_, v);
    const auto& sc = inst_.scenario;
    const double unit = inst_.config.rate_unit_bps;
    const double lambda = inst_.config.lambda;

    double wr = 0.0;
    for (double q : ev.user_rate) wr += q;
    const double fp = penalty_fp(std::span<const double>(v.data(), inst_.n_x()), anchor_);
    out.f = -wr / unit + lambda * fp;

    out.g.resize(m_);
    double psum = 0.0;
    for (std::size_t i = 0; i < I; ++i) psum += v[inst_.p_index(i)];
    out.g[0] = (psum - sc.p_tot) / sc.p_max;
    for (std::size_t i = 0; i < I; ++i) out.g[1 + i] = (sc.r_thr - ev.user_rate[i]) / unit;
    const std::size_t z0 = inst_.n_x() + inst_.n_p();
    for (std::size_t r = 0; r < R; ++r) {
      double sum = 0.0;
      for (std::size_t k = 0; k <= I; ++k) sum += ev.b_value[inst_.z1_index(r, k) - z0];
      for (std::size_t s = 0; s < I; ++s) sum += ev.b_value[inst_.z2_index(r, s) - z0];
      out.g[1 + I + r] = (sum - inst_.layout.regions[r].b_tot) / kHz;
    }
    if (column_rows_) {
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t s = 0; s < I; ++s) {
          double col = -1.0;
          for (std::size_t i = 0; i < I; ++i) col += v[inst_.x_index(i, r, s)];
          out.g[1 + I + R + r * I + s] = col;
        }
    }
    if (!derivatives) return;

    out.grad_f = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < I; ++i) add_user_rate_gradient(inst_, v, ev, i, -1.0 / unit, out.grad_f);
    for (std::size_t k = 0; k < inst_.n_x(); ++k) out.grad_f[k] += lambda * (1.0 - 2.0 * anchor_[k]);
    out.grad_f = out.grad_f.cwiseProduct(scale_);

    out.jac_g = Eigen::MatrixXd::Zero(m_, n);
    for (std::size_t i = 0; i < I; ++i) out.jac_g(0, inst_.p_index(i)) = 1.0;  // scale P_max / P_max
    for (std::size_t i = 0; i < I; ++i) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
      add_user_rate_gradient(inst_, v, ev, i, -1.0 / unit, row);
      out.jac_g.row(1 + i) = row.cwiseProduct(scale_).transpose();
    }
    for (std::size_t r = 0; r < R; ++r) {
      auto put = [&](std::size_t var) {
        out.jac_g(1 + I + r, var) = inst_.constants_of(var).omega / v[var] * scale_[var] / kHz;
      };
      for (std::size_t k = 0; k <= I; ++k) put(inst_.z1_index(r, k));
      for (std::size_t s = 0; s < I; ++s) put(inst_.z2_index(r, s));
    }
    if (column_rows_) {
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t s = 0; s < I; ++s)
          for (std::size_t i = 0; i < I; ++i) out.jac_g(1 + I + R + r * I + s, inst_.x_index(i, r, s)) = 1.0;
    }
  }

  void add_hessian(const Eigen::VectorXd& vs, double w0, const Eigen::VectorXd& w,
                   Eigen::MatrixXd& H) const override {
    const std::size_t n = inst_.n_vars(), I = inst_.n_users(), R = inst_.n_regions();
    const Eigen::VectorXd v = to_natural(vs);
    const auto ev = evaluate_rates(inst_, v);
    const double unit = inst_.config.rate_unit_bps;
    std::vector<double> weight(I);
    for (std::size_t i = 0; i < I; ++i) weight[i] = -(w0 + w[1 + i]) / unit;
    Eigen::MatrixXd hn = Eigen::MatrixXd::Zero(n, n);
    add_rate_hessian(inst_, v, ev, weight, hn);
    for (std::size_t r = 0; r < R; ++r) {
      const double wb = w[1 + I + r] / kHz;
      if (wb == 0.0) continue;
      auto put = [&](std::size_t var) {
        hn(var, var) -= wb * inst_.constants_of(var).omega / (v[var] * v[var]);
      };
      for (std::size_t k = 0; k <= I; ++k) put(inst_.z1_index(r, k));
      for (std::size_t s = 0; s < I; ++s) put(inst_.z2_index(r, s));
    }
    H += scale_.asDiagonal() * hn * scale_.asDiagonal();
  }

 private:
  // Equalities: user sums (and sub-band sums when |R| = 1), the fixed B_delta
  // slots, and the guard tie. Pivots of the user sums are chosen greedily
  // among the largest x of the reference point so dependent entries stay
  // away from their bounds.
  void build_map(const Eigen::VectorXd& reference) {
    const std::size_t n = inst_.n_vars(), I = inst_.n_users(), R = inst_.n_regions();
    const std::size_t nx = inst_.n_x();

    const std::size_t rows = I + (column_rows_ ? 0 : I);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, nx);
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t s = 0; s < I; ++s) {
          A(i, inst_.x_index(i, r, s)) = 1.0;
          if (!column_rows_) A(I + s, inst_.x_index(i, r, s)) = 1.0;
        }
    const Eigen::VectorXd b = Eigen::VectorXd::Ones(rows);

    std::vector<std::size_t> order(nx);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) { return reference[a] > reference[c]; });
    const Eigen::Index rank = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(A).rank();
    std::vector<std::size_t> dependent;
    Eigen::MatrixXd basis_cols(rows, 0);
    for (std::size_t k : order) {
      if (static_cast<Eigen::Index>(dependent.size()) == rank) break;
      Eigen::MatrixXd trial(rows, basis_cols.cols() + 1);
      trial << basis_cols, A.col(k);
      if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(trial).rank() == trial.cols()) {
        basis_cols = trial;
        dependent.push_back(k);
      }
    }
    std::vector<char> is_dep(nx, 0);
    for (std::size_t k : dependent) is_dep[k] = 1;
    std::vector<std::size_t> free_x;
    for (std::size_t k = 0; k < nx; ++k)
      if (!is_dep[k]) free_x.push_back(k);

    // x_D = pinv(A_D) (b - A_F x_F)
    Eigen::MatrixXd A_F(rows, free_x.size());
    for (std::size_t j = 0; j < free_x.size(); ++j) A_F.col(j) = A.col(free_x[j]);
    const auto qr = basis_cols.colPivHouseholderQr();
    Eigen::MatrixXd C = -qr.solve(A_F);
    Eigen::VectorXd d = qr.solve(b);
    auto clean = [](double& c) {
      if (std::abs(c) < 1e-13) c = 0.0;
      const double r = std::round(c);
      if (std::abs(c - r) < 1e-13) c = r;
    };
    for (Eigen::Index a = 0; a < C.rows(); ++a)
      for (Eigen::Index c = 0; c < C.cols(); ++c) clean(C(a, c));
    for (Eigen::Index a = 0; a < d.size(); ++a) clean(d[a]);

    // Free coordinates: free x, all P, unfixed Z1. Z2 follow x.
    std::vector<std::size_t> free_vars = free_x;
    for (std::size_t i = 0; i < I; ++i) free_vars.push_back(inst_.p_index(i));
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t k = 0; k <= I; ++k)
        if (!(k == 0 && inst_.fixed_b_delta(r))) free_vars.push_back(inst_.z1_index(r, k));
    std::vector<Eigen::Index> col_of(n, -1);
    for (std::size_t j = 0; j < free_vars.size(); ++j) col_of[free_vars[j]] = static_cast<Eigen::Index>(j);

    offset = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Triplet<double>> trip;
    // Row of the map for each x variable (as sparse list of (col, coef)) and its offset.
    std::vector<std::vector<std::pair<Eigen::Index, double>>> x_row(nx);
    std::vector<double> x_off(nx, 0.0);
    for (std::size_t k : free_x) x_row[k].push_back({col_of[k], 1.0});
    for (std::size_t a = 0; a < dependent.size(); ++a) {
      const std::size_t k = dependent[a];
      x_off[k] = d[a];
      for (std::size_t j = 0; j < free_x.size(); ++j)
        if (C(a, j) != 0.0) x_row[k].push_back({col_of[free_x[j]], C(a, j)});
    }
    for (std::size_t k = 0; k < nx; ++k) {
      offset[k] = x_off[k];
      for (auto [c, val] : x_row[k]) trip.emplace_back(k, c, val);
    }
    for (std::size_t j = free_x.size(); j < free_vars.size(); ++j)
      trip.emplace_back(free_vars[j], j, 1.0);
    for (std::size_t r = 0; r < R; ++r) {
      if (auto fixed = inst_.fixed_b_delta(r)) {
        const std::size_t var = inst_.z1_index(r, 0);
        offset[var] = z_of_b(inst_.constants_of(var), *fixed) / scale_[var];
      }
      for (std::size_t s = 0; s < I; ++s) {
        const std::size_t var = inst_.z2_index(r, s);
        const auto& c = inst_.constants_of(var);
        const double base = c.z_ref() / scale_[var];
        const double slope = base * std::expm1(inst_.scenario.b_g / c.omega);
        offset[var] = base;
        std::vector<std::pair<Eigen::Index, double>> acc;
        for (std::size_t i = 0; i < I; ++i) {
          const std::size_t xk = inst_.x_index(i, r, s);
          offset[var] += slope * x_off[xk];
          for (auto [col, val] : x_row[xk]) acc.push_back({col, slope * val});
        }
        for (auto [col, val] : acc) trip.emplace_back(var, col, val);
      }
    }
    basis.resize(n, free_vars.size());
    basis.setFromTriplets(trip.begin(), trip.end());  // duplicates are summed
    basis.prune(0.0);
    pivot.assign(free_vars.begin(), free_vars.end());
  }

  void build_bounds() {
    const std::size_t n = inst_.n_vars(), I = inst_.n_users(), R = inst_.n_regions();
    lower = Eigen::VectorXd::Constant(n, -kInf);
    upper = Eigen::VectorXd::Constant(n, kInf);
    for (std::size_t k = 0; k < inst_.n_x(); ++k) lower[k] = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
      lower[inst_.p_index(i)] = 0.0;
      upper[inst_.p_index(i)] = 1.0;
    }
    const auto zb = z_bounds(inst_, anchor_);  // x only affects the guard slots, skipped here
    const std::size_t z0 = inst_.n_x() + inst_.n_p();
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t k = 0; k <= I; ++k) {
        if (k == 0 && inst_.fixed_b_delta(r)) continue;
        const std::size_t var = inst_.z1_index(r, k);
        lower[var] = zb[var - z0].lo / scale_[var];
        upper[var] = zb[var - z0].hi / scale_[var];
      }
  }

  const ProblemInstance& inst_;
  std::vector<double> anchor_;
  Eigen::VectorXd scale_;
  bool column_rows_ = true;
  std::size_t m_ = 0;
};

nlp::Options barrier_options(const SolverConfig& config, bool warm) {
  nlp::Options o;
  o.mu_start = warm ? config.mu_warm : config.mu_cold;
  o.mu_final = config.mu_final;
  o.kkt_tol = config.inner_kkt_tol;
  o.max_iter = config.inner_max_iter;
  return o;
}

SubproblemStatus map_status(nlp::Status s) {
  switch (s) {
    case nlp::Status::Optimal: return SubproblemStatus::Optimal;
    case nlp::Status::MaxIter: return SubproblemStatus::MaxIter;
    case nlp::Status::Stalled: return SubproblemStatus::Stalled;
  }
  return SubproblemStatus::Stalled;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(lambda >= 0.0)) throw ValidationError("Lambda must be >= 0");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  if (!(inner_kkt_tol > 0.0)) throw ValidationError("inner tolerance must be > 0");
  if (inner_max_iter < 1) throw ValidationError("inner_max_iter must be >= 1");
  if (!(rounding_threshold > 0.0 && rounding_threshold < 1.0))
    throw ValidationError("rounding threshold must lie in (0, 1)");
  if (!(mu_final > 0.0 && mu_warm >= mu_final && mu_cold >= mu_final))
    throw ValidationError("barrier parameters must satisfy mu_cold, mu_warm >= mu_final > 0");
}

std::optional<Eigen::VectorXd> find_feasible_point(const ProblemInstance& inst,
                                                   const SolverConfig& config) {
  const Eigen::VectorXd start = initial_point(inst);
  std::vector<double> anchor(inst.n_x(), 0.5);
  SubproblemNlp nlp_problem(inst, anchor, start);
  const Eigen::VectorXd vs = nlp_problem.to_scaled(start);
  for (Eigen::Index k = 0; k < vs.size(); ++k)
    if (!(vs[k] > nlp_problem.lower[k] && vs[k] < nlp_problem.upper[k])) return std::nullopt;
  const auto p1 = nlp::find_interior(nlp_problem, vs, barrier_options(config, false));
  if (!p1.feasible) return std::nullopt;
  return nlp_problem.to_natural(p1.v);
}

SubproblemResult solve_subproblem(const ProblemInstance& inst, std::span<const double> x_anchor,
                                  const SolverConfig& config, const Eigen::VectorXd* warm_start) {
  if (x_anchor.size() != inst.n_x()) throw ValidationError("anchor has the wrong length");
  for (double a : x_anchor)
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("anchor entries must lie in [0, 1]");

  SubproblemResult out;
  Eigen::VectorXd start;
  if (warm_start) {
    start = *warm_start;
  } else {
    auto p = find_feasible_point(inst, config);
    if (!p) {
      out.status = SubproblemStatus::Infeasible;
      return out;
    }
    start = *p;
  }

  SubproblemNlp nlp_problem(inst, x_anchor, start);
  const Eigen::VectorXd vs = nlp_problem.to_scaled(start);
  if (!nlp::strictly_feasible(nlp_problem, vs))
    throw ValidationError("warm start is not strictly feasible for the subproblem");

  const auto res = nlp::minimize(nlp_problem, vs, barrier_options(config, warm_start != nullptr));
  out.status = map_status(res.status);
  out.iterations = res.iterations;
  out.kkt = res.kkt;
  out.v = nlp_problem.to_natural(res.v);
  tie_guards(inst, out.v);
  out.psi = objective_psi(inst, out.v, x_anchor);
  if (warm_start) {
    const PsiValue before = objective_psi(inst, start, x_anchor);
    if (!(out.psi.psi <= before.psi) || !nlp::strictly_feasible(nlp_problem, nlp_problem.to_scaled(out.v))) {
      out.v = start;
      out.psi = before;
      out.kept_warm_start = true;
    }
  }
  return out;
}

}  // namespace thz
