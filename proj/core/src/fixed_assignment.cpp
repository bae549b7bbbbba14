#include "thzalloc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "thzalloc/barrier.hpp"
#include "thzalloc/error.hpp"

namespace thz {

namespace {

constexpr double kGiga = 1e9;

struct Placement {
  std::size_t user;
  std::size_t region;
  std::size_t slot;
};

// Scaled variables: p_i / P_max for every user, then b_i in GHz when widths
// are free. Without a fixed edge B_delta is the region slack and sub-bands
// pack against the far edge, exactly as decode_allocation lays them out. With
// one, sub-bands start at B_delta and decode hands the slack to the widths.
class FixedAssignmentNlp final : public nlp::Problem {
 public:
  FixedAssignmentNlp(const Scenario& sc, const SpectrumLayout& layout,
                     std::vector<Placement> placement, std::vector<double> fixed_width,
                     std::vector<double> fixed_b_delta, bool widths_free, double delta_hz)
      : sc_(sc), layout_(layout), place_(std::move(placement)),
        fixed_width_(std::move(fixed_width)), pinned_(!fixed_b_delta.empty()),
        b_delta_(pinned_ ? std::move(fixed_b_delta) : std::vector<double>(layout.size(), 0.0)),
        widths_free_(widths_free), I_(place_.size()), R_(layout.size()) {
    order_.assign(R_, {});
    for (const auto& p : place_) order_[p.region].push_back(p.user);
    for (auto& users : order_)
      std::sort(users.begin(), users.end(),
                [&](std::size_t a, std::size_t b) { return place_[a].slot < place_[b].slot; });
    rho_.resize(I_);
    dist_.resize(I_);
    for (std::size_t i = 0; i < I_; ++i) {
      const auto link = sc_.link(i, 0.0);
      rho_[i] = link.rho();
      dist_[i] = link.distance_m;
    }

    const Eigen::Index n = static_cast<Eigen::Index>(widths_free_ ? 2 * I_ : I_);
    basis.resize(n, n);
    basis.setIdentity();
    offset = Eigen::VectorXd::Zero(n);
    pivot.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) pivot[k] = k;
    lower = Eigen::VectorXd::Zero(n);
    upper = Eigen::VectorXd::Ones(n);
    if (widths_free_)
      for (std::size_t i = 0; i < I_; ++i) {
        lower[I_ + i] = delta_hz / kGiga;
        upper[I_ + i] = sc_.b_max / kGiga;
      }
  }

  Eigen::Index n_constraints() const override {
    return static_cast<Eigen::Index>(1 + I_ + (widths_free_ ? R_ : 0));
  }

  std::vector<double> widths(const Eigen::VectorXd& v) const {
    if (!widths_free_) return fixed_width_;
    std::vector<double> w(I_);
    for (std::size_t i = 0; i < I_; ++i) w[i] = v[I_ + i] * kGiga;
    return w;
  }

  std::vector<double> powers(const Eigen::VectorXd& v) const {
    std::vector<double> p(I_);
    for (std::size_t i = 0; i < I_; ++i) p[i] = v[i] * sc_.p_max;
    return p;
  }

  void evaluate(const Eigen::VectorXd& v, bool derivatives, nlp::Evaluation& out) const override {
    const auto m = n_constraints();
    const auto n = dim();
    out.g.resize(m);
    if (derivatives) {
      out.grad_f = Eigen::VectorXd::Zero(n);
      out.jac_g = Eigen::MatrixXd::Zero(m, n);
    }
    const auto w = widths(v);
    out.f = 0.0;
    out.g[0] = v.head(I_).sum() - sc_.p_tot / sc_.p_max;
    if (derivatives) out.jac_g.row(0).head(I_).setOnes();
    for (std::size_t i = 0; i < I_; ++i) {
      const auto rp = partials(v, w, i);
      if (!std::isfinite(rp.value)) {
        out.f = std::numeric_limits<double>::infinity();
        out.g.setConstant(std::numeric_limits<double>::infinity());
        return;
      }
      out.f -= rp.value / kGiga;
      out.g[1 + i] = (sc_.r_thr - rp.value) / kGiga;
      if (derivatives) {
        const Eigen::VectorXd gr = rate_gradient(rp, i) / kGiga;
        out.grad_f -= gr;
        out.jac_g.row(1 + i) = -gr.transpose();
      }
    }
    if (widths_free_)
      for (std::size_t r = 0; r < R_; ++r) {
        double used = b_delta_[r];
        for (std::size_t u : order_[r]) {
          used += w[u] + sc_.b_g;
          if (derivatives) out.jac_g(1 + I_ + r, I_ + u) = 1.0;
        }
        out.g[1 + I_ + r] = (used - layout_.regions[r].b_tot) / kGiga;
      }
  }

  void add_hessian(const Eigen::VectorXd& v, double w0, const Eigen::VectorXd& wc,
                   Eigen::MatrixXd& H) const override {
    const auto w = widths(v);
    for (std::size_t i = 0; i < I_; ++i) {
      const double c = -(w0 + wc[1 + i]) / kGiga;
      if (c == 0.0) continue;
      const auto rp = partials(v, w, i);
      const Eigen::VectorXd ep = unit(i, sc_.p_max);
      const Eigen::VectorXd ew = widths_free_ ? unit(I_ + i, kGiga) : Eigen::VectorXd::Zero(dim());
      const Eigen::VectorXd cf = center_gradient(i);
      H += c * (rp.d_pp * ep * ep.transpose() + rp.d_pw * (ep * ew.transpose() + ew * ep.transpose()) +
                rp.d_pf * (ep * cf.transpose() + cf * ep.transpose()) + rp.d_ww * ew * ew.transpose() +
                rp.d_wf * (ew * cf.transpose() + cf * ew.transpose()) + rp.d_ff * cf * cf.transpose());
    }
  }

 private:
  double center(const std::vector<double>& w, std::size_t i) const {
    const auto& region = layout_.regions[place_[i].region];
    double offset_hz = b_delta_[place_[i].region];
    if (!pinned_) {
      offset_hz = region.b_tot;
      for (std::size_t u : order_[place_[i].region]) offset_hz -= w[u] + sc_.b_g;
    }
    for (std::size_t u : order_[place_[i].region]) {
      if (u == i) break;
      offset_hz += w[u] + sc_.b_g;
    }
    return region.f_ref - region.eta() * (offset_hz + 0.5 * w[i]);
  }

  RatePartials partials(const Eigen::VectorXd& v, const std::vector<double>& w, std::size_t i) const {
    if (!(w[i] > 0.0)) {
      RatePartials bad;
      bad.value = std::numeric_limits<double>::quiet_NaN();
      return bad;
    }
    return rate_partials(rho_[i], dist_[i], layout_.regions[place_[i].region], v[i] * sc_.p_max,
                         w[i], center(w, i));
  }

  Eigen::VectorXd unit(std::size_t k, double value) const {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim());
    e[static_cast<Eigen::Index>(k)] = value;
    return e;
  }

  // d f_i / d(scaled b_j). Slack edge: 0 before i, eta/2 at i, eta after i.
  // Fixed edge: -eta before i, -eta/2 at i, 0 after i.
  Eigen::VectorXd center_gradient(std::size_t i) const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(dim());
    if (!widths_free_) return c;
    const double eta = layout_.regions[place_[i].region].eta() * kGiga;
    bool after = false;
    for (std::size_t u : order_[place_[i].region]) {
      if (u == i) {
        c[I_ + u] = pinned_ ? -0.5 * eta : 0.5 * eta;
        after = true;
      } else if (after) {
        c[I_ + u] = pinned_ ? 0.0 : eta;
      } else {
        c[I_ + u] = pinned_ ? -eta : 0.0;
      }
    }
    return c;
  }

  Eigen::VectorXd rate_gradient(const RatePartials& rp, std::size_t i) const {
    Eigen::VectorXd g = rp.d_f * center_gradient(i);
    g[i] += rp.d_p * sc_.p_max;
    if (widths_free_) g[I_ + i] += rp.d_w * kGiga;
    return g;
  }

  const Scenario& sc_;
  const SpectrumLayout& layout_;
  std::vector<Placement> place_;
  std::vector<double> fixed_width_;
  bool pinned_;
  std::vector<double> b_delta_;
  bool widths_free_;
  std::size_t I_, R_;
  std::vector<std::vector<std::size_t>> order_;
  std::vector<double> rho_, dist_;
};

}  // namespace

std::optional<Allocation> optimize_fixed_assignment(const Scenario& sc, const SpectrumLayout& layout,
                                                    const Allocation& start,
                                                    const FixedAssignmentOptions& options) {
  const std::size_t I = sc.n_users(), R = layout.size();
  if (start.n_users != I || start.n_regions != R)
    throw ValidationError("allocation does not match the scenario");
  const auto& fixed_b_delta = options.fixed_b_delta;
  if (!fixed_b_delta.empty() && fixed_b_delta.size() != R)
    throw ValidationError("fixed_b_delta needs one entry per region");
  auto edge = [&](std::size_t r) { return fixed_b_delta.empty() ? 0.0 : fixed_b_delta[r]; };

  std::vector<Placement> place(I);
  std::vector<std::pair<std::size_t, std::size_t>> slot(I);
  std::vector<double> width(I), power(I);
  for (std::size_t i = 0; i < I; ++i) {
    const auto rs = start.slot_of(i);
    if (!rs) throw AssignmentViolationError("every user needs exactly one sub-band");
    place[i] = {i, rs->first, rs->second};
    slot[i] = *rs;
    width[i] = start.bandwidth[start.slot_index(rs->first, rs->second)];
    power[i] = start.power[i];
  }

  // Start strictly inside the bounds, the power budget and every region budget.
  const double lo_w = 2.0 * options.delta_hz, hi_w = 0.999 * sc.b_max;
  if (options.optimize_widths) {
    for (auto& w : width) w = std::clamp(w, lo_w, hi_w);
    for (std::size_t r = 0; r < R; ++r) {
      double used = 0.0, n = 0.0;
      for (std::size_t i = 0; i < I; ++i)
        if (place[i].region == r) {
          used += width[i];
          n += 1.0;
        }
      const double room = 0.999 * (layout.regions[r].b_tot - edge(r)) - n * sc.b_g;
      if (n > 0.0 && room <= n * lo_w) return std::nullopt;
      if (used > room)
        for (std::size_t i = 0; i < I; ++i)
          if (place[i].region == r) width[i] = std::max(lo_w, width[i] * room / used);
    }
  }
  double psum = 0.0;
  for (auto& p : power) {
    p = std::clamp(p, 1e-3 * sc.p_max, 0.999 * sc.p_max);
    psum += p;
  }
  if (psum >= 0.999 * sc.p_tot)
    for (auto& p : power) p *= 0.999 * sc.p_tot / psum;

  FixedAssignmentNlp problem(sc, layout, place, width, fixed_b_delta, options.optimize_widths,
                             options.delta_hz);
  Eigen::VectorXd v(problem.dim());
  for (std::size_t i = 0; i < I; ++i) {
    v[i] = power[i] / sc.p_max;
    if (options.optimize_widths) v[I + i] = width[i] / kGiga;
  }
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (!(v[k] > problem.lower[k] && v[k] < problem.upper[k])) return std::nullopt;

  const auto p1 = nlp::find_interior(problem, v, options.barrier);
  if (!p1.feasible) return std::nullopt;
  const auto res = nlp::minimize(problem, p1.v, options.barrier);
  const Eigen::VectorXd& best = nlp::strictly_feasible(problem, res.v) ? res.v : p1.v;
  return decode_allocation(sc, layout, slot, problem.widths(best), problem.powers(best), fixed_b_delta);
}

namespace {

using Order = std::vector<std::vector<std::size_t>>;

Allocation from_order(const Allocation& base, const Order& order,
                      const std::vector<double>& width) {
  Allocation a(base.n_users, base.n_regions, base.slots);
  for (std::size_t r = 0; r < order.size(); ++r)
    for (std::size_t s = 0; s < order[r].size(); ++s) {
      const std::size_t u = order[r][s];
      a.assigned(u, r, s) = 1;
      a.bandwidth[a.slot_index(r, s)] = width[u];
    }
  a.power = base.power;
  return a;
}

}  // namespace

Allocation refine_assignment(const ProblemInstance& inst, const Allocation& allocation,
                             std::size_t* improvements) {
  const std::size_t I = inst.n_users(), R = inst.n_regions();
  FixedAssignmentOptions fo;
  fo.delta_hz = inst.config.delta_hz;
  if (inst.config.fixed_b_delta) fo.fixed_b_delta = *inst.config.fixed_b_delta;

  Allocation best = allocation;
  double best_rate = best.sum_rate();
  std::size_t count = 0;
  auto attempt = [&](const Order& order, const std::vector<double>& width) {
    auto cand = optimize_fixed_assignment(inst.scenario, inst.layout, from_order(best, order, width), fo);
    if (!cand || !(cand->sum_rate() > best_rate * (1.0 + 1e-9))) return false;
    if (!verify(inst, *cand).all_passed()) return false;
    best = std::move(*cand);
    best_rate = best.sum_rate();
    ++count;
    return true;
  };

  bool improved = true;
  while (improved) {
    improved = false;
    Order order(R);
    std::vector<double> width(I);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t s = 0; s < best.slots; ++s)
        if (auto u = best.user_on(r, s)) {
          order[r].push_back(*u);
          width[*u] = best.bandwidth[best.slot_index(r, s)];
        }
    std::vector<std::pair<std::size_t, std::size_t>> pos(I);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t s = 0; s < order[r].size(); ++s) pos[order[r][s]] = {r, s};

    for (std::size_t i = 0; i < I && !improved; ++i)
      for (std::size_t j = i + 1; j < I && !improved; ++j) {
        Order o = order;
        std::swap(o[pos[i].first][pos[i].second], o[pos[j].first][pos[j].second]);
        std::vector<double> w = width;
        std::swap(w[i], w[j]);
        improved = attempt(o, w);
      }
    for (std::size_t i = 0; i < I && !improved; ++i)
      for (std::size_t r = 0; r < R && !improved; ++r) {
        Order base = order;
        auto& from = base[pos[i].first];
        from.erase(from.begin() + static_cast<std::ptrdiff_t>(pos[i].second));
        for (std::size_t k = 0; k <= base[r].size() && !improved; ++k) {
          if (r == pos[i].first && (k == pos[i].second)) continue;
          Order o = base;
          o[r].insert(o[r].begin() + static_cast<std::ptrdiff_t>(k), i);
          improved = attempt(o, width);
        }
      }
  }
  if (improvements) *improvements = count;
  return best;
}

}  // namespace thz
