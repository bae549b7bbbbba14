#include "thzalloc/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace thz::nlp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Log-barrier model in free coordinates. In phase one the last coordinate is
// the epigraph variable t and the constraints read g_j(v) < t.
class Model {
 public:
  Model(const Problem& p, bool phase_one) : p_(p), phase_one_(phase_one) {}

  Eigen::Index size() const { return p_.n_free() + (phase_one_ ? 1 : 0); }
  Eigen::VectorXd to_v(const Eigen::VectorXd& z) const {
    return p_.offset + p_.basis * z.head(p_.n_free());
  }
  double t(const Eigen::VectorXd& z) const { return phase_one_ ? z[size() - 1] : 0.0; }

  double t_lower = -kInf;

  double value(const Eigen::VectorXd& z, double mu) const {
    const Eigen::VectorXd v = to_v(z);
    double phi = 0.0;
    if (!bound_terms(v, mu, phi)) return kInf;
    p_.evaluate(v, false, ev_);
    const double tt = t(z);
    if (phase_one_) {
      phi += tt;
      if (!(tt > t_lower)) return kInf;
      phi -= mu * std::log(tt - t_lower);
    } else {
      if (!std::isfinite(ev_.f)) return kInf;
      phi += ev_.f;
    }
    for (Eigen::Index j = 0; j < ev_.g.size(); ++j) {
      const double s = tt - ev_.g[j];
      if (!(s > 0.0)) return kInf;
      phi -= mu * std::log(s);
    }
    return phi;
  }

  void derivatives(const Eigen::VectorXd& z, double mu, double& phi, Eigen::VectorXd& grad,
                   Eigen::MatrixXd& H) const {
    const Eigen::VectorXd v = to_v(z);
    const Eigen::Index n = p_.dim(), ny = p_.n_free(), m = p_.n_constraints();
    p_.evaluate(v, true, ev_);
    const double tt = t(z);

    Eigen::VectorXd gv = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd hdiag = Eigen::VectorXd::Zero(n);
    phi = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (std::isfinite(p_.lower[k])) {
        const double s = v[k] - p_.lower[k];
        phi -= mu * std::log(s);
        gv[k] -= mu / s;
        hdiag[k] += mu / (s * s);
      }
      if (std::isfinite(p_.upper[k])) {
        const double s = p_.upper[k] - v[k];
        phi -= mu * std::log(s);
        gv[k] += mu / s;
        hdiag[k] += mu / (s * s);
      }
    }
    if (!phase_one_) {
      phi += ev_.f;
      gv += ev_.grad_f;
    }
    Eigen::VectorXd slack(m), w(m), w2(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      slack[j] = tt - ev_.g[j];
      phi -= mu * std::log(slack[j]);
      w[j] = mu / slack[j];
      w2[j] = mu / (slack[j] * slack[j]);
    }
    if (m > 0) gv += ev_.jac_g.transpose() * w;

    Eigen::MatrixXd hv = Eigen::MatrixXd::Zero(n, n);
    p_.add_hessian(v, phase_one_ ? 0.0 : 1.0, w, hv);
    hv.diagonal() += hdiag;

    const Eigen::MatrixXd hn = hv * p_.basis;                // n x ny
    const Eigen::MatrixXd jy = m > 0 ? Eigen::MatrixXd(ev_.jac_g * p_.basis) : Eigen::MatrixXd(0, ny);

    const Eigen::Index nz = size();
    grad.resize(nz);
    H.resize(nz, nz);
    grad.head(ny) = p_.basis.transpose() * gv;
    H.topLeftCorner(ny, ny) = p_.basis.transpose() * hn;
    if (m > 0) H.topLeftCorner(ny, ny) += jy.transpose() * w2.asDiagonal() * jy;

    if (phase_one_) {
      const double st = tt - t_lower;
      phi += tt - mu * std::log(st);
      grad[ny] = 1.0 - w.sum() - mu / st;
      H(ny, ny) = w2.sum() + mu / (st * st);
      const Eigen::VectorXd cross = -(jy.transpose() * w2);
      H.col(ny).head(ny) = cross;
      H.row(ny).head(ny) = cross.transpose();
    }
  }

  // Largest step in (0, 1] keeping the simple bounds (and t) strictly satisfied.
  double max_step(const Eigen::VectorXd& z, const Eigen::VectorXd& dz) const {
    const Eigen::VectorXd v = to_v(z);
    const Eigen::VectorXd dv = p_.basis * dz.head(p_.n_free());
    double alpha = 1.0;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      if (dv[k] < 0.0 && std::isfinite(p_.lower[k]))
        alpha = std::min(alpha, 0.99 * (v[k] - p_.lower[k]) / -dv[k]);
      if (dv[k] > 0.0 && std::isfinite(p_.upper[k]))
        alpha = std::min(alpha, 0.99 * (p_.upper[k] - v[k]) / dv[k]);
    }
    if (phase_one_ && dz[size() - 1] < 0.0 && std::isfinite(t_lower))
      alpha = std::min(alpha, 0.99 * (t(z) - t_lower) / -dz[size() - 1]);
    return alpha;
  }

  const Evaluation& last() const { return ev_; }

 private:
  bool bound_terms(const Eigen::VectorXd& v, double mu, double& phi) const {
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      if (std::isfinite(p_.lower[k])) {
        const double s = v[k] - p_.lower[k];
        if (!(s > 0.0)) return false;
        phi -= mu * std::log(s);
      }
      if (std::isfinite(p_.upper[k])) {
        const double s = p_.upper[k] - v[k];
        if (!(s > 0.0)) return false;
        phi -= mu * std::log(s);
      }
    }
    return true;
  }

  const Problem& p_;
  bool phase_one_;
  mutable Evaluation ev_;
};

struct StageOutcome {
  bool converged = false;
  bool stalled = false;
  bool stopped = false;  // early-stop predicate fired
  double decrement = 0.0;  // Newton decrement at the last point
};

// Solves (D H D + tau I) y = -D g with D = diag(H)^(-1/2), dz = D y, raising
// tau until the factorization succeeds and dz is a descent direction. The
// scaling matters: barrier terms of nearly active bounds put entries of 1e20
// on the diagonal next to O(1) curvature elsewhere.
bool newton_direction(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, Eigen::VectorXd& dz) {
  const Eigen::Index n = H.rows();
  if (n == 0) {
    dz.resize(0);
    return true;
  }
  Eigen::VectorXd d(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double h = std::abs(H(k, k));
    d[k] = h > 0.0 && std::isfinite(h) ? 1.0 / std::sqrt(h) : 1.0;
  }
  const Eigen::MatrixXd hs = d.asDiagonal() * H * d.asDiagonal();
  const Eigen::VectorXd gs = d.cwiseProduct(g);
  double tau = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (int attempt = 0; attempt < 40; ++attempt) {
    if (tau == 0.0) {
      llt.compute(hs);
    } else {
      Eigen::MatrixXd shifted = hs;
      shifted.diagonal().array() += tau;
      llt.compute(shifted);
    }
    if (llt.info() == Eigen::Success) {
      dz = d.cwiseProduct(llt.solve(-gs));
      if (dz.allFinite() && g.dot(dz) < 0.0) return true;
      if (dz.allFinite() && g.squaredNorm() == 0.0) return true;
    }
    tau = tau == 0.0 ? 1e-10 : tau * 10.0;
  }
  return false;
}

template <class Stop>
StageOutcome newton_stage(const Model& model, Eigen::VectorXd& z, double mu, double dec_tol,
                          const Options& opt, int& iterations, Stop&& stop) {
  // Below this decrement Newton is in its quadratic regime and full steps are
  // taken without Armijo: with large multipliers the barrier value carries
  // rounding noise far above the decrease left to certify.
  constexpr double kLocal = 1.0 / 16.0;
  StageOutcome out;
  Eigen::VectorXd grad, dz;
  Eigen::MatrixXd H;
  double phi;
  double prev_local = kInf;
  int slow_local = 0;
  while (true) {
    model.derivatives(z, mu, phi, grad, H);
    if (grad.size() == 0 || grad.cwiseAbs().maxCoeff() == 0.0) {
      out.decrement = 0.0;
      out.converged = true;
      return out;
    }
    if (!newton_direction(H, grad, dz)) {
      out.stalled = true;
      return out;
    }
    const double dec = -grad.dot(dz);
    out.decrement = std::sqrt(std::max(dec, 0.0));
    if (0.5 * dec <= dec_tol) {
      out.converged = true;
      return out;
    }
    if (iterations >= opt.max_iter) return out;

    const double alpha_max = model.max_step(z, dz);
    double alpha = alpha_max;
    bool accepted = false;
    if (dec <= kLocal && alpha_max >= 1.0) {
      const Eigen::VectorXd trial = z + dz;
      const double phi_t = model.value(trial, mu);
      if (std::isfinite(phi_t) && phi_t <= phi + 1e-9 * std::max(1.0, std::abs(phi))) {
        slow_local = dec > 0.25 * prev_local ? slow_local + 1 : 0;
        prev_local = dec;
        if (slow_local >= 8) {
          out.stalled = true;
          return out;
        }
        z = trial;
        accepted = true;
      }
    }
    for (int k = 0; !accepted && k < 60; ++k) {
      const Eigen::VectorXd trial = z + alpha * dz;
      const double phi_t = model.value(trial, mu);
      if (phi_t < phi && phi_t <= phi - 1e-4 * alpha * dec) {
        z = trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++iterations;
    if (!accepted) {
      out.stalled = true;
      return out;
    }
    if (stop(z)) {
      out.stopped = true;
      return out;
    }
  }
}

Eigen::VectorXd free_coordinates(const Problem& p, const Eigen::VectorXd& v) {
  Eigen::VectorXd y(p.n_free());
  for (Eigen::Index j = 0; j < p.n_free(); ++j) y[j] = v[p.pivot[j]];
  const Eigen::VectorXd back = p.offset + p.basis * y;
  const double err = (back - v).cwiseAbs().maxCoeff();
  const double ref = std::max(1.0, v.cwiseAbs().maxCoeff());
  if (!(err <= 1e-9 * ref))
    throw std::invalid_argument("start point violates the equality constraints");
  return y;
}

}  // namespace

bool strictly_feasible(const Problem& problem, const Eigen::VectorXd& v) {
  if (v.size() != problem.dim()) return false;
  Eigen::VectorXd y(problem.n_free());
  for (Eigen::Index j = 0; j < problem.n_free(); ++j) y[j] = v[problem.pivot[j]];
  const Eigen::VectorXd back = problem.offset + problem.basis * y;
  if (!((back - v).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, v.cwiseAbs().maxCoeff())))
    return false;
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (!(v[k] > problem.lower[k] && v[k] < problem.upper[k])) return false;
  Evaluation ev;
  problem.evaluate(v, false, ev);
  for (Eigen::Index j = 0; j < ev.g.size(); ++j)
    if (!(ev.g[j] < 0.0)) return false;
  return std::isfinite(ev.f);
}

Result minimize(const Problem& problem, const Eigen::VectorXd& v_start, const Options& options) {
  if (!strictly_feasible(problem, v_start))
    throw std::invalid_argument("barrier start point is not strictly feasible");
  Model model(problem, false);
  Eigen::VectorXd z = free_coordinates(problem, v_start);
  Result res;

  // Gap bound of the barrier: m * mu plus half the squared Newton decrement.
  Eigen::Index m = problem.n_constraints();
  for (Eigen::Index k = 0; k < problem.dim(); ++k)
    m += (std::isfinite(problem.lower[k]) ? 1 : 0) + (std::isfinite(problem.upper[k]) ? 1 : 0);
  const double mu_final =
      std::min(options.mu_final, 0.5 * options.kkt_tol / static_cast<double>(std::max<Eigen::Index>(m, 1)));

  int iterations = 0;
  double mu = std::max(options.mu_start, mu_final);
  StageOutcome last;
  while (true) {
    const bool final_stage = mu <= mu_final * (1.0 + 1e-12);
    const double tol = final_stage ? 0.1 * options.kkt_tol : options.decrement_tol;
    last = newton_stage(model, z, mu, tol, options, iterations,
                        [](const Eigen::VectorXd&) { return false; });
    if (last.stalled && final_stage) {
      res.status = Status::Stalled;
      break;
    }
    if (!last.converged && !last.stalled) {
      res.status = Status::MaxIter;
      break;
    }
    if (final_stage) break;
    mu = std::max(mu / options.mu_factor, mu_final);
  }
  res.v = model.to_v(z);
  Evaluation ev;
  problem.evaluate(res.v, false, ev);
  res.f = ev.f;
  res.iterations = iterations;
  res.mu = mu;
  res.kkt = 0.5 * last.decrement * last.decrement + static_cast<double>(m) * mu;
  if (res.status == Status::Stalled && res.kkt <= options.kkt_tol) res.status = Status::Optimal;
  return res;
}

PhaseOneResult find_interior(const Problem& problem, const Eigen::VectorXd& v_start,
                             const Options& options, double margin, double infeasible_tol) {
  for (Eigen::Index k = 0; k < v_start.size(); ++k)
    if (!(v_start[k] > problem.lower[k] && v_start[k] < problem.upper[k]))
      throw std::invalid_argument("phase-one start violates the simple bounds");

  const Eigen::Index ny = problem.n_free();
  Model model(problem, true);
  Eigen::VectorXd z(ny + 1);
  z.head(ny) = free_coordinates(problem, v_start);

  Evaluation ev;
  problem.evaluate(v_start, false, ev);
  PhaseOneResult out;
  const double g0 = ev.g.size() ? ev.g.maxCoeff() : -kInf;
  if (g0 < -margin || ev.g.size() == 0) {
    out.feasible = true;
    out.v = v_start;
    out.max_violation = g0;
    return out;
  }
  z[ny] = g0 + 1.0;
  model.t_lower = g0 - 1e3;

  auto max_g = [&](const Eigen::VectorXd& zz) {
    problem.evaluate(model.to_v(zz), false, ev);
    return ev.g.maxCoeff();
  };
  auto stop = [&](const Eigen::VectorXd& zz) { return max_g(zz) < -margin; };

  int iterations = 0;
  double mu = options.mu_start;
  while (true) {
    const auto st = newton_stage(model, z, mu, options.decrement_tol, options, iterations, stop);
    if (st.stopped || st.stalled || !st.converged) break;
    if (mu <= options.mu_final * (1.0 + 1e-12)) break;
    mu = std::max(mu / options.mu_factor, options.mu_final);
  }
  out.iterations = iterations;
  out.v = model.to_v(z);
  out.max_violation = max_g(z);
  out.feasible = out.max_violation < 0.0 && out.max_violation <= infeasible_tol;
  return out;
}

}  // namespace thz::nlp
