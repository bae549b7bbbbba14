#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace thz::nlp {

struct Evaluation {
  double f = 0.0;
  Eigen::VectorXd grad_f;
  Eigen::VectorXd g;       // inequality values; feasible when g < 0
  Eigen::MatrixXd jac_g;   // rows = constraints
};

/// Smooth problem  min f(v)  s.t.  g(v) < 0,  lower < v < upper,  v = offset + basis * y.
///
/// Every column j of `basis` owns a selector row `pivot[j]` holding a single 1,
/// so free coordinates read back as y_j = v[pivot[j]].
class Problem {
 public:
  virtual ~Problem() = default;

  Eigen::SparseMatrix<double> basis;
  Eigen::VectorXd offset;
  std::vector<Eigen::Index> pivot;
  Eigen::VectorXd lower;   // -inf when absent
  Eigen::VectorXd upper;   // +inf when absent

  Eigen::Index dim() const { return offset.size(); }
  Eigen::Index n_free() const { return basis.cols(); }
  virtual Eigen::Index n_constraints() const = 0;
  virtual void evaluate(const Eigen::VectorXd& v, bool derivatives, Evaluation& out) const = 0;
  /// H += w0 * hess f + sum_j w[j] * hess g_j
  virtual void add_hessian(const Eigen::VectorXd& v, double w0, const Eigen::VectorXd& w,
                           Eigen::MatrixXd& H) const = 0;
};

struct Options {
  double mu_start = 1e-1;
  double mu_final = 1e-9;  // lowered further if m * mu_final would exceed kkt_tol / 2
  double mu_factor = 10.0;
  double kkt_tol = 1e-6;
  int max_iter = 600;
  double decrement_tol = 1e-2;  // half squared Newton decrement, intermediate stages
};

enum class Status { Optimal, MaxIter, Stalled };

struct Result {
  Eigen::VectorXd v;
  Status status = Status::Optimal;
  int iterations = 0;
  double f = 0.0;
  double kkt = 0.0;  // m mu + half squared Newton decrement, bounds f - f* when convex
  double mu = 0.0;
};

/// True when bounds and constraints hold strictly and the equality map reproduces v.
bool strictly_feasible(const Problem& problem, const Eigen::VectorXd& v);

/// Primal log-barrier path following from a strictly feasible start.
Result minimize(const Problem& problem, const Eigen::VectorXd& v_start, const Options& options);

struct PhaseOneResult {
  bool feasible = false;
  Eigen::VectorXd v;
  double max_violation = 0.0;  // max_j g_j at the returned point
  int iterations = 0;
};

/// Minimizes the largest constraint value from a start that satisfies the
/// bounds, stopping once every constraint sits below -margin. Declares the
/// problem infeasible when the minimum exceeds `infeasible_tol`.
PhaseOneResult find_interior(const Problem& problem, const Eigen::VectorXd& v_start,
                             const Options& options, double margin = 1e-2,
                             double infeasible_tol = 1e-9);

}  // namespace thz::nlp
