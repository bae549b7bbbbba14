#include "thzalloc/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "thzalloc/error.hpp"

namespace thz {

double SubstitutionConstants::z_ref() const noexcept { return std::exp(-xi / omega) / varsigma; }

void SubstitutionConstants::validate() const {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw ValidationError("omega must be positive");
  if (!(varsigma > 0.0) || !std::isfinite(varsigma)) throw ValidationError("varsigma must be positive");
  if (!std::isfinite(xi)) throw ValidationError("xi must be finite");
}

double b_of_z(const SubstitutionConstants& c, double z) {
  if (!(z > 0.0)) throw DomainError("substitution needs Z > 0");
  return c.xi + c.omega * std::log(c.varsigma * z);
}

double z_of_b(const SubstitutionConstants& c, double b) noexcept {
  return c.z_ref() * std::exp(b / c.omega);
}

double convexity_omega_bar(const RegionModel& region, double d_bound) noexcept {
  return std::abs(region.sigma2) *
         (d_bound * region.absorption(region.f_ref) * std::exp(d_bound * region.sigma3) - 1.0);
}

const SubstitutionConstants& ProblemInstance::constants_of(std::size_t var) const {
  if (!is_z(var) || var >= n_vars()) throw DomainError("not a Z variable");
  return z_constants_[var - n_x() - n_p()];
}

std::optional<double> ProblemInstance::fixed_b_delta(std::size_t r) const {
  if (!config.fixed_b_delta) return std::nullopt;
  return (*config.fixed_b_delta)[r];
}

std::string ProblemInstance::variable_name(std::size_t var) const {
  char buf[64];
  if (var < n_x()) {
    const std::size_t per = n_users_ * n_regions_;
    const std::size_t i = var / per, r = (var % per) / n_users_, s = var % n_users_;
    std::snprintf(buf, sizeof buf, "x[%zu,%zu,%zu]", i, r, s + 1);
  } else if (var < n_x() + n_p()) {
    std::snprintf(buf, sizeof buf, "P[%zu]", var - n_x());
  } else if (var < n_x() + n_p() + n_z1()) {
    const std::size_t k = var - n_x() - n_p();
    std::snprintf(buf, sizeof buf, "Z1[%zu,%zu]", k / (n_users_ + 1), k % (n_users_ + 1));
  } else {
    const std::size_t k = var - n_x() - n_p() - n_z1();
    std::snprintf(buf, sizeof buf, "Z2[%zu,%zu]", k / n_users_, k % n_users_ + 1);
  }
  return buf;
}

ProblemInstance build(const Scenario& scenario, const SpectrumLayout& layout,
                      const ProblemConfig& config) {
  scenario.validate();
  config.constants.validate();
  if (layout.regions.empty()) throw ValidationError("layout has no regions");
  if (!(config.lambda >= 0.0)) throw ValidationError("Lambda must be >= 0");
  if (!(config.delta_hz > 0.0)) throw ValidationError("delta must be > 0");
  if (!(config.d_margin > 1.0)) throw ValidationError("D must exceed d_max");
  if (!(config.rate_unit_bps > 0.0)) throw ValidationError("rate unit must be > 0");
  for (const auto& region : layout.regions) {
    if (!(region.b_tot > 0.0)) throw ValidationError("region with non-positive bandwidth");
    if (region.kind == RegionKind::PACSR ? !(region.sigma2 > 0.0) : !(region.sigma2 < 0.0))
      throw SignConstraintError("sigma2 sign does not match the region kind");
  }
  if (config.fixed_b_delta) {
    if (config.fixed_b_delta->size() != layout.regions.size())
      throw ValidationError("fixed B_delta list must have one entry per region");
    for (std::size_t r = 0; r < layout.regions.size(); ++r) {
      const double b = (*config.fixed_b_delta)[r];
      if (!(b >= 0.0 && b <= layout.regions[r].b_tot))
        throw ValidationError("fixed B_delta outside [0, B_tot] in region " + std::to_string(r));
    }
  }

  ProblemInstance inst;
  inst.scenario = scenario;
  inst.layout = layout;
  inst.config = config;
  inst.n_users_ = scenario.n_users();
  inst.n_regions_ = layout.regions.size();
  inst.z_constants_.assign(inst.n_z(), config.constants);
  inst.d_bound = config.d_margin * d_max(scenario);

  for (std::size_t r = 0; r < inst.n_regions_; ++r) {
    ConvexityCheck check;
    check.region = r;
    check.omega_bar = convexity_omega_bar(layout.regions[r], inst.d_bound);
    check.inv_omega = 1.0 / config.constants.omega;
    check.satisfied = check.inv_omega > check.omega_bar;
    inst.convexity.push_back(check);
    if (!check.satisfied) {
      char buf[200];
      std::snprintf(buf, sizeof buf,
                    "convexity condition 1/omega > omega_bar fails in region %zu "
                    "(omega_bar = %.3e, 1/omega = %.3e)",
                    r, check.omega_bar, check.inv_omega);
      if (config.convexity == ConvexityPolicy::Strict) throw ConvexityConditionError(buf, r);
      inst.warnings.emplace_back(buf);
    }
  }
  return inst;
}

std::vector<ZBound> z_bounds(const ProblemInstance& inst, std::span<const double> x_tilde) {
  if (x_tilde.size() != inst.n_x()) throw ValidationError("x has the wrong length");
  const std::size_t I = inst.n_users(), R = inst.n_regions();
  const double delta = inst.config.delta_hz;
  std::vector<ZBound> out(inst.n_z());
  const std::size_t z0 = inst.n_x() + inst.n_p();
  for (std::size_t r = 0; r < R; ++r) {
    const double b_tot = inst.layout.regions[r].b_tot;
    for (std::size_t k = 0; k <= I; ++k) {
      const std::size_t var = inst.z1_index(r, k);
      const auto& c = inst.constants_of(var);
      ZBound b{z_of_b(c, delta), z_of_b(c, k == 0 ? b_tot : inst.scenario.b_max)};
      if (k == 0) {
        if (auto fixed = inst.fixed_b_delta(r)) b.lo = b.hi = z_of_b(c, *fixed);
      }
      out[var - z0] = b;
    }
    for (std::size_t s = 0; s < I; ++s) {
      const std::size_t var = inst.z2_index(r, s);
      const auto& c = inst.constants_of(var);
      double col = 0.0;
      for (std::size_t i = 0; i < I; ++i) col += x_tilde[inst.x_index(i, r, s)];
      const double z = c.z_ref() * (1.0 + col * std::expm1(inst.scenario.b_g / c.omega));
      out[var - z0] = {z, z};
    }
  }
  return out;
}

double product_constraint(const ProblemInstance& inst, const Eigen::VectorXd& v, std::size_t r) {
  const std::size_t I = inst.n_users();
  double sum = 0.0;
  for (std::size_t k = 0; k <= I; ++k) {
    const std::size_t var = inst.z1_index(r, k);
    sum += b_of_z(inst.constants_of(var), v[var]);
  }
  for (std::size_t s = 0; s < I; ++s) {
    const std::size_t var = inst.z2_index(r, s);
    sum += b_of_z(inst.constants_of(var), v[var]);
  }
  return sum - inst.layout.regions.at(r).b_tot;
}

double penalty_fp(std::span<const double> x, std::span<const double> anchor) {
  double fp = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) fp += anchor[k] * anchor[k] + x[k] * (1.0 - 2.0 * anchor[k]);
  return fp;
}

namespace {

double b_unchecked(const SubstitutionConstants& c, double z) {
  return c.xi + c.omega * std::log(c.varsigma * z);
}

}  // namespace

RateEvaluation evaluate_rates(const ProblemInstance& inst, const Eigen::VectorXd& v) {
  const std::size_t I = inst.n_users(), R = inst.n_regions();
  RateEvaluation ev;
  ev.width.resize(R * I);
  ev.center.resize(R * I);
  ev.b_value.resize(inst.n_z());
  const std::size_t z0 = inst.n_x() + inst.n_p();
  for (std::size_t k = 0; k < inst.n_z(); ++k)
    ev.b_value[k] = b_unchecked(inst.constants_of(z0 + k), v[z0 + k]);

  for (std::size_t r = 0; r < R; ++r) {
    const auto& region = inst.layout.regions[r];
    double offset = ev.b_value[inst.z1_index(r, 0) - z0];
    for (std::size_t s = 0; s < I; ++s) {
      const double w = ev.b_value[inst.z1_index(r, s + 1) - z0];
      ev.width[r * I + s] = w;
      ev.center[r * I + s] = region.f_ref - region.eta() * (offset + 0.5 * w);
      offset += w + ev.b_value[inst.z2_index(r, s) - z0];
    }
  }

  const double rho = inst.scenario.rho();
  ev.rate.resize(inst.n_x());
  ev.user_rate.assign(I, 0.0);
  for (std::size_t i = 0; i < I; ++i) {
    const double d = inst.scenario.users[i].d_m;
    const double p = v[inst.p_index(i)];
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t s = 0; s < I; ++s) {
        const std::size_t xi = inst.x_index(i, r, s);
        ev.rate[xi] = rate_partials(rho, d, inst.layout.regions[r], p, ev.width[r * I + s],
                                    ev.center[r * I + s]);
        ev.user_rate[i] += v[xi] * ev.rate[xi].value;
      }
    }
  }
  return ev;
}

namespace {

// Accumulates d/du of sum_s (wterm_s * W_s + F_s * f_s) over a region, where
// F_s multiplies df_s/du and wterm_s multiplies dW_s/du, then maps to Z.
template <class Sink>
void region_chain(const ProblemInstance& inst, const Eigen::VectorXd& v, std::size_t r,
                  std::span<const double> wterm, std::span<const double> fterm, Sink&& sink) {
  const std::size_t I = inst.n_users();
  const double eta = inst.layout.regions[r].eta();
  double total = 0.0;
  for (std::size_t s = 0; s < I; ++s) total += fterm[s];
  auto jac = [&](std::size_t var) { return inst.constants_of(var).omega / v[var]; };
  {
    const std::size_t var = inst.z1_index(r, 0);
    sink(var, -eta * total * jac(var));
  }
  double tail = total;  // sum over s' > s after the update below
  for (std::size_t s = 0; s < I; ++s) {
    tail -= fterm[s];
    const std::size_t w_var = inst.z1_index(r, s + 1);
    sink(w_var, (wterm[s] - eta * (0.5 * fterm[s] + tail)) * jac(w_var));
    const std::size_t g_var = inst.z2_index(r, s);
    sink(g_var, -eta * tail * jac(g_var));
  }
}

}  // namespace

void add_user_rate_gradient(const ProblemInstance& inst, const Eigen::VectorXd& v,
                            const RateEvaluation& ev, std::size_t i, double scale,
                            Eigen::Ref<Eigen::VectorXd> out) {
  const std::size_t I = inst.n_users(), R = inst.n_regions();
  std::vector<double> wterm(I), fterm(I);
  double dp = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t s = 0; s < I; ++s) {
      const std::size_t xi = inst.x_index(i, r, s);
      const auto& rp = ev.rate[xi];
      out[xi] += scale * rp.value;
      dp += v[xi] * rp.d_p;
      wterm[s] = v[xi] * rp.d_w;
      fterm[s] = v[xi] * rp.d_f;
    }
    region_chain(inst, v, r, wterm, fterm,
                 [&](std::size_t var, double g) { out[var] += scale * g; });
  }
  out[inst.p_index(i)] += scale * dp;
}

void add_rate_hessian(const ProblemInstance& inst, const Eigen::VectorXd& v,
                      const RateEvaluation& ev, std::span<const double> weight,
                      Eigen::MatrixXd& H) {
  const std::size_t I = inst.n_users(), R = inst.n_regions();
  auto sym_add = [&H](std::size_t a, std::size_t b, double val) {
    H(a, b) += val;
    if (a != b) H(b, a) += val;
  };

  std::vector<double> wterm(I), fterm(I);
  std::vector<double> agg_ww(I), agg_wf(I), agg_ff(I), agg_w(I), agg_f(I);
  // Local u-space Hessian over the region's Z slots: [Z1_0, Z1_1..Z1_I, Z2_1..Z2_I].
  const std::size_t nloc = 2 * I + 1;
  Eigen::MatrixXd hu(nloc, nloc);
  std::vector<std::size_t> loc_var(nloc);
  std::vector<double> a(nloc);

  for (std::size_t r = 0; r < R; ++r) {
    const double eta = inst.layout.regions[r].eta();
    std::fill(agg_ww.begin(), agg_ww.end(), 0.0);
    std::fill(agg_wf.begin(), agg_wf.end(), 0.0);
    std::fill(agg_ff.begin(), agg_ff.end(), 0.0);
    std::fill(agg_w.begin(), agg_w.end(), 0.0);
    std::fill(agg_f.begin(), agg_f.end(), 0.0);

    loc_var[0] = inst.z1_index(r, 0);
    for (std::size_t s = 0; s < I; ++s) {
      loc_var[1 + s] = inst.z1_index(r, s + 1);
      loc_var[1 + I + s] = inst.z2_index(r, s);
    }
    std::vector<double> jac(nloc), jac2(nloc);
    for (std::size_t k = 0; k < nloc; ++k) {
      const double om = inst.constants_of(loc_var[k]).omega;
      const double z = v[loc_var[k]];
      jac[k] = om / z;
      jac2[k] = -om / (z * z);
    }

    for (std::size_t i = 0; i < I; ++i) {
      const double w = weight[i];
      if (w == 0.0) continue;
      const std::size_t pi = inst.p_index(i);
      double pp = 0.0;
      for (std::size_t s = 0; s < I; ++s) {
        const std::size_t xi = inst.x_index(i, r, s);
        const auto& rp = ev.rate[xi];
        const double x = v[xi];
        // x - P
        sym_add(xi, pi, w * rp.d_p);
        // x - Z: dR/du_k * J_k
        const double df = -eta * rp.d_f;
        sym_add(xi, loc_var[0], w * df * jac[0]);
        for (std::size_t k = 0; k < s; ++k) {
          sym_add(xi, loc_var[1 + k], w * df * jac[1 + k]);
          sym_add(xi, loc_var[1 + I + k], w * df * jac[1 + I + k]);
        }
        sym_add(xi, loc_var[1 + s], w * (rp.d_w + 0.5 * df) * jac[1 + s]);

        pp += x * rp.d_pp;
        wterm[s] = x * rp.d_pw;
        fterm[s] = x * rp.d_pf;
        agg_ww[s] += w * x * rp.d_ww;
        agg_wf[s] += w * x * rp.d_wf;
        agg_ff[s] += w * x * rp.d_ff;
        agg_w[s] += w * x * rp.d_w;
        agg_f[s] += w * x * rp.d_f;
      }
      H(pi, pi) += w * pp;
      region_chain(inst, v, r, wterm, fterm,
                   [&](std::size_t var, double g) { sym_add(pi, var, w * g); });
    }

    // Z - Z block.
    hu.setZero();
    for (std::size_t s = 0; s < I; ++s) {
      std::fill(a.begin(), a.end(), 0.0);
      a[0] = 1.0;
      for (std::size_t k = 0; k < s; ++k) a[1 + k] = a[1 + I + k] = 1.0;
      a[1 + s] = 0.5;
      const std::size_t wk = 1 + s;
      const std::size_t span = 1 + s;  // a is supported on [0, s] and [1+I, 1+I+s)
      auto support = [&](std::size_t n) { return n < span + 1 ? n : 1 + I + (n - span - 1); };
      const std::size_t nsup = 2 * s + 2;
      for (std::size_t p = 0; p < nsup; ++p) {
        const std::size_t kp = support(p);
        for (std::size_t q = 0; q < nsup; ++q) {
          const std::size_t kq = support(q);
          hu(kp, kq) += agg_ff[s] * a[kp] * a[kq];
        }
      }
      for (std::size_t p = 0; p < nsup; ++p) {
        const std::size_t kp = support(p);
        hu(kp, wk) -= eta * agg_wf[s] * a[kp];
        hu(wk, kp) -= eta * agg_wf[s] * a[kp];
      }
      hu(wk, wk) += agg_ww[s];
    }
    std::vector<double> gu(nloc, 0.0);
    region_chain(inst, v, r, agg_w, agg_f, [&](std::size_t var, double g) {
      for (std::size_t k = 0; k < nloc; ++k)
        if (loc_var[k] == var) gu[k] += g / jac[k];
    });
    for (std::size_t p = 0; p < nloc; ++p) {
      for (std::size_t q = 0; q < nloc; ++q)
        H(loc_var[p], loc_var[q]) += jac[p] * jac[q] * hu(p, q);
      H(loc_var[p], loc_var[p]) += gu[p] * jac2[p];
    }
  }
}

PsiValue objective_psi(const ProblemInstance& inst, const Eigen::VectorXd& v,
                       std::span<const double> x_anchor) {
  if (static_cast<std::size_t>(v.size()) != inst.n_vars()) throw ValidationError("point has the wrong length");
  if (x_anchor.size() != inst.n_x()) throw ValidationError("anchor has the wrong length");
  const auto ev = evaluate_rates(inst, v);
  PsiValue out;
  for (double q : ev.user_rate) out.weighted_rate += q;
  out.fp = penalty_fp(std::span<const double>(v.data(), inst.n_x()), x_anchor);
  out.psi = -out.weighted_rate / inst.config.rate_unit_bps + inst.config.lambda * out.fp;
  return out;
}

double rate_in_z(const ProblemInstance& inst, const Eigen::VectorXd& v, std::size_t i,
                 std::size_t r, std::size_t s) {
  const std::size_t I = inst.n_users();
  if (i >= I || r >= inst.n_regions() || s >= I) throw DomainError("index out of range");
  const auto& region = inst.layout.regions[r];
  std::vector<double> widths(I), guards(I);
  for (std::size_t k = 0; k < I; ++k) {
    widths[k] = b_of_z(inst.constants_of(inst.z1_index(r, k + 1)), v[inst.z1_index(r, k + 1)]);
    guards[k] = b_of_z(inst.constants_of(inst.z2_index(r, k)), v[inst.z2_index(r, k)]);
  }
  const double b_delta = b_of_z(inst.constants_of(inst.z1_index(r, 0)), v[inst.z1_index(r, 0)]);
  double offset = b_delta;
  for (std::size_t k = 0; k < s; ++k) offset += widths[k] + guards[k];
  offset += 0.5 * widths[s];
  const double f = region.f_ref - region.eta() * offset;
  if (!region.contains(f))
    throw LayoutOverflowError("substituted center frequency leaves region " + std::to_string(r));
  return rate_approx(inst.scenario.link(i, v[inst.p_index(i)]), region, f, std::max(widths[s], 0.0));
}

ProblemGradients gradients(const ProblemInstance& inst, const Eigen::VectorXd& v,
                           std::span<const double> x_anchor) {
  const std::size_t n = inst.n_vars(), I = inst.n_users(), R = inst.n_regions();
  const auto ev = evaluate_rates(inst, v);
  ProblemGradients g;
  const double unit = inst.config.rate_unit_bps;

  g.grad_psi = Eigen::VectorXd::Zero(n);
  double wr = 0.0;
  for (std::size_t i = 0; i < I; ++i) {
    add_user_rate_gradient(inst, v, ev, i, -1.0 / unit, g.grad_psi);
    wr += ev.user_rate[i];
  }
  const double fp = penalty_fp(std::span<const double>(v.data(), inst.n_x()), x_anchor);
  for (std::size_t k = 0; k < inst.n_x(); ++k)
    g.grad_psi[k] += inst.config.lambda * (1.0 - 2.0 * x_anchor[k]);
  g.psi = -wr / unit + inst.config.lambda * fp;

  g.grad_power = Eigen::VectorXd::Zero(n);
  g.power_residual = -inst.scenario.p_tot;
  for (std::size_t i = 0; i < I; ++i) {
    g.power_residual += v[inst.p_index(i)];
    g.grad_power[inst.p_index(i)] = 1.0;
  }

  for (std::size_t i = 0; i < I; ++i) {
    Eigen::VectorXd gr = Eigen::VectorXd::Zero(n);
    add_user_rate_gradient(inst, v, ev, i, -1.0, gr);
    g.rate_residual.push_back(inst.scenario.r_thr - ev.user_rate[i]);
    g.grad_rate.push_back(std::move(gr));
  }

  for (std::size_t r = 0; r < R; ++r) {
    Eigen::VectorXd gb = Eigen::VectorXd::Zero(n);
    auto put = [&](std::size_t var) { gb[var] = inst.constants_of(var).omega / v[var]; };
    for (std::size_t k = 0; k <= I; ++k) put(inst.z1_index(r, k));
    for (std::size_t s = 0; s < I; ++s) put(inst.z2_index(r, s));
    g.budget_residual.push_back(product_constraint(inst, v, r));
    g.grad_budget.push_back(std::move(gb));
  }

  const auto zb = z_bounds(inst, std::span<const double>(v.data(), inst.n_x()));
  const std::size_t z0 = inst.n_x() + inst.n_p();
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
  for (std::size_t k = 0; k < inst.n_x(); ++k)
    if (v[k] <= 0.0 || v[k] >= 1.0) g.on_boundary = true;
  for (std::size_t i = 0; i < I; ++i) {
    const double p = v[inst.p_index(i)];
    if (p <= 0.0 || p >= inst.scenario.p_max) g.on_boundary = true;
  }
  for (std::size_t k = 0; k < inst.n_z1() + inst.n_z2(); ++k) {
    const bool pinned = zb[k].lo == zb[k].hi;
    if (!pinned && (v[z0 + k] <= zb[k].lo || v[z0 + k] >= zb[k].hi || near(v[z0 + k], zb[k].lo) ||
                    near(v[z0 + k], zb[k].hi)))
      g.on_boundary = true;
  }
  return g;
}

void tie_guards(const ProblemInstance& inst, Eigen::VectorXd& v) {
  const std::size_t I = inst.n_users();
  for (std::size_t r = 0; r < inst.n_regions(); ++r)
    for (std::size_t s = 0; s < I; ++s) {
      const std::size_t var = inst.z2_index(r, s);
      const auto& c = inst.constants_of(var);
      double col = 0.0;
      for (std::size_t i = 0; i < I; ++i) col += v[inst.x_index(i, r, s)];
      v[var] = c.z_ref() * (1.0 + col * std::expm1(inst.scenario.b_g / c.omega));
    }
}

Eigen::VectorXd initial_point(const ProblemInstance& inst) {
  const std::size_t I = inst.n_users(), R = inst.n_regions();
  const auto& sc = inst.scenario;
  const double delta = inst.config.delta_hz;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(inst.n_vars());

  // Region shares of the assignment mass follow the bandwidth left after the
  // fixed edge and the guards a full region would need.
  std::vector<double> share(R);
  double total = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    const double fixed = inst.fixed_b_delta(r).value_or(0.0);
    share[r] = std::max(inst.layout.regions[r].b_tot - fixed, 0.0);
    total += share[r];
  }
  for (std::size_t r = 0; r < R; ++r) {
    share[r] = total > 0.0 ? share[r] / total : 1.0 / double(R);
    share[r] = std::max(share[r], 1e-3);
  }
  double norm = 0.0;
  for (double q : share) norm += q;
  for (auto& q : share) q /= norm;
  if (R == 1) share[0] = 1.0;

  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t s = 0; s < I; ++s) v[inst.x_index(i, r, s)] = share[r] / double(I);

  const double p0 = 0.9 * std::min(sc.p_max, sc.p_tot / double(I));
  for (std::size_t i = 0; i < I; ++i) v[inst.p_index(i)] = p0;

  tie_guards(inst, v);
  for (std::size_t r = 0; r < R; ++r) {
    const auto& region = inst.layout.regions[r];
    double guards = 0.0;
    for (std::size_t s = 0; s < I; ++s) {
      const std::size_t var = inst.z2_index(r, s);
      guards += b_unchecked(inst.constants_of(var), v[var]);
    }
    const auto fixed = inst.fixed_b_delta(r);
    const double usable = region.b_tot - fixed.value_or(0.0) - guards;
    double w = std::min(0.8 * sc.b_max, 0.5 * usable / double(I));
    w = std::max(w, 10.0 * delta);
    w = std::min(w, 0.5 * sc.b_max);
    w = std::max(w, std::min(10.0 * delta, 0.5 * sc.b_max));
    for (std::size_t s = 0; s < I; ++s) {
      const std::size_t var = inst.z1_index(r, s + 1);
      v[var] = z_of_b(inst.constants_of(var), w);
    }
    const std::size_t d_var = inst.z1_index(r, 0);
    double b_delta;
    if (fixed) {
      b_delta = *fixed;
    } else {
      b_delta = 0.5 * (region.b_tot - guards - double(I) * w);
      b_delta = std::clamp(b_delta, 2.0 * delta, 0.5 * region.b_tot);
    }
    v[d_var] = z_of_b(inst.constants_of(d_var), b_delta);
  }
  return v;
}

std::string dump_problem(const ProblemInstance& inst, const Eigen::VectorXd& v) {
  std::ostringstream out;
  out.precision(12);
  const auto zb = z_bounds(inst, std::span<const double>(v.data(), inst.n_x()));
  const std::size_t z0 = inst.n_x() + inst.n_p();
  out << "# variable lo hi value\n";
  for (std::size_t k = 0; k < inst.n_vars(); ++k) {
    double lo, hi;
    if (k < inst.n_x()) {
      lo = 0.0;
      hi = 1.0;
    } else if (k < z0) {
      lo = 0.0;
      hi = inst.scenario.p_max;
    } else {
      lo = zb[k - z0].lo;
      hi = zb[k - z0].hi;
    }
    out << inst.variable_name(k) << ' ' << lo << ' ' << hi << ' ' << v[k] << '\n';
  }
  std::vector<double> anchor(v.data(), v.data() + inst.n_x());
  const auto g = gradients(inst, v, anchor);
  out << "# constraint residual (<= 0 is satisfied)\n";
  out << "power_budget " << g.power_residual << '\n';
  for (std::size_t i = 0; i < g.rate_residual.size(); ++i)
    out << "rate_threshold[" << i << "] " << g.rate_residual[i] << '\n';
  for (std::size_t r = 0; r < g.budget_residual.size(); ++r)
    out << "bandwidth_budget[" << r << "] " << g.budget_residual[r] << '\n';
  for (std::size_t i = 0; i < inst.n_users(); ++i) {
    double row = -1.0;
    for (std::size_t r = 0; r < inst.n_regions(); ++r)
      for (std::size_t s = 0; s < inst.n_users(); ++s) row += v[inst.x_index(i, r, s)];
    out << "user_sum[" << i << "] " << row << '\n';
  }
  for (std::size_t r = 0; r < inst.n_regions(); ++r)
    for (std::size_t s = 0; s < inst.n_users(); ++s) {
      double col = -1.0;
      for (std::size_t i = 0; i < inst.n_users(); ++i) col += v[inst.x_index(i, r, s)];
      out << "subband_sum[" << r << ',' << s + 1 << "] " << col << '\n';
    }
  return out.str();
}

}  // namespace thz
