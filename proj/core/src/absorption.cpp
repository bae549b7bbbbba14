#include "thzalloc/absorption.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <string_view>

#include <Eigen/Dense>

#include "thzalloc/error.hpp"

namespace thz {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' ||
                        s.front() == '\xEF' || s.front() == '\xBB' || s.front() == '\xBF'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

// Topographic prominence of sample i treated as a peak of `k`.
double prominence(const std::vector<double>& k, std::size_t i) {
  const double h = k[i];
  double left_min = h;
  for (std::size_t j = i; j-- > 0;) {
    if (k[j] > h) break;
    left_min = std::min(left_min, k[j]);
  }
  double right_min = h;
  for (std::size_t j = i + 1; j < k.size(); ++j) {
    if (k[j] > h) break;
    right_min = std::min(right_min, k[j]);
  }
  return h - std::max(left_min, right_min);
}

std::vector<std::size_t> find_peaks(const std::vector<double>& k, double min_prominence) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < k.size(); ++i) {
    if (k[i] > k[i - 1] && k[i] >= k[i + 1] && prominence(k, i) >= min_prominence)
      out.push_back(i);
  }
  return out;
}

struct Extremum {
  std::size_t index;
  bool is_max;
};

}  // namespace

const char* to_string(RegionKind kind) noexcept {
  return kind == RegionKind::PACSR ? "PACSR" : "NACSR";
}

RegionKind region_kind_from_string(const std::string& s) {
  if (s == "PACSR") return RegionKind::PACSR;
  if (s == "NACSR") return RegionKind::NACSR;
  throw ParseError("unknown region kind '" + s + "'", 0);
}

void AbsorptionSamples::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.frequency_hz) || !std::isfinite(p.kappa_per_m))
      throw ValidationError("non-finite absorption sample at index " + std::to_string(i));
    if (p.kappa_per_m < 0.0)
      throw ValidationError("negative absorption coefficient at index " + std::to_string(i));
    if (i > 0 && !(p.frequency_hz > points[i - 1].frequency_hz))
      throw ValidationError("frequencies not strictly increasing at index " + std::to_string(i));
  }
}

bool RegionModel::contains(double f, double rel_tol) const noexcept {
  const double slack = rel_tol * std::max(b_tot, std::abs(f_ref));
  return f >= f_lo() - slack && f <= f_hi() + slack;
}

double RegionModel::absorption(double f) const noexcept {
  return std::exp(sigma1 + sigma2 * f) + sigma3;
}

double RegionModel::absorption_slope(double f) const noexcept {
  return sigma2 * std::exp(sigma1 + sigma2 * f);
}

double RegionModel::absorption_curvature(double f) const noexcept {
  return sigma2 * sigma2 * std::exp(sigma1 + sigma2 * f);
}

double SpectrumLayout::total_bandwidth() const noexcept {
  double sum = 0.0;
  for (const auto& r : regions) sum += r.b_tot;
  return sum;
}

SpectrumLayout SpectrumLayout::prefix(std::size_t n) const {
  SpectrumLayout out;
  out.synthetic = synthetic;
  out.regions.assign(regions.begin(), regions.begin() + std::min(n, regions.size()));
  out.tw_grouping = group_transmission_windows(out.regions);
  return out;
}

AbsorptionSamples load_samples(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  // Leading '#' lines carry provenance (e.g. synthetic-profile labels).
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    have_header = true;
    break;
  }
  if (!have_header) throw ParseError("empty absorption file: missing header", line_no ? line_no : 1);
  if (trim(line) != "frequency_hz,kappa_per_m")
    throw ParseError("expected header 'frequency_hz,kappa_per_m'", line_no);

  std::map<double, std::pair<double, int>> rows;  // frequency -> (kappa sum, count)
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto comma = view.find(',');
    if (comma == std::string_view::npos || view.find(',', comma + 1) != std::string_view::npos)
      throw ParseError("expected two comma-separated fields", line_no);
    double f = 0.0, k = 0.0;
    if (!parse_double(view.substr(0, comma), f) || !parse_double(view.substr(comma + 1), k))
      throw ParseError("malformed number", line_no);
    if (k < 0.0) throw ValidationError("negative absorption coefficient on line " + std::to_string(line_no));
    auto& slot = rows[f];
    slot.first += k;
    slot.second += 1;
  }
  if (rows.empty()) throw InsufficientDataError("absorption file has no data rows");

  AbsorptionSamples samples;
  samples.points.reserve(rows.size());
  for (const auto& [f, acc] : rows) samples.points.push_back({f, acc.first / acc.second});
  samples.validate();
  return samples;
}

AbsorptionSamples load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return load_samples(in);
}

std::vector<RegionBounds> segment_regions(const AbsorptionSamples& samples,
                                          double peak_prominence) {
  if (samples.size() < 3)
    throw InsufficientDataError("need at least 3 absorption samples, got " +
                                std::to_string(samples.size()));
  if (!(peak_prominence > 0.0)) throw ValidationError("peak prominence must be positive");
  samples.validate();

  std::vector<double> k(samples.size());
  std::vector<double> neg(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    k[i] = samples.points[i].kappa_per_m;
    neg[i] = -k[i];
  }

  std::vector<Extremum> ext;
  for (auto i : find_peaks(k, peak_prominence)) ext.push_back({i, true});
  for (auto i : find_peaks(neg, peak_prominence)) ext.push_back({i, false});
  std::sort(ext.begin(), ext.end(), [](auto a, auto b) { return a.index < b.index; });

  // Enforce alternation, keeping the more extreme of two same-type neighbours.
  std::vector<Extremum> alt;
  for (const auto& e : ext) {
    if (!alt.empty() && alt.back().is_max == e.is_max) {
      const bool better = e.is_max ? k[e.index] > k[alt.back().index] : k[e.index] < k[alt.back().index];
      if (better) alt.back() = e;
      continue;
    }
    alt.push_back(e);
  }

  const double f0 = samples.f_min();
  const double f1 = samples.f_max();
  std::vector<RegionBounds> out;
  if (alt.empty()) {
    const auto kind = k.back() > k.front() ? RegionKind::PACSR : RegionKind::NACSR;
    out.push_back({f0, f1, kind});
    return out;
  }
  double lo = f0;
  for (const auto& e : alt) {
    const double f = samples.points[e.index].frequency_hz;
    out.push_back({lo, f, e.is_max ? RegionKind::PACSR : RegionKind::NACSR});
    lo = f;
  }
  out.push_back({lo, f1, alt.back().is_max ? RegionKind::NACSR : RegionKind::PACSR});
  return out;
}

RegionModel fit_region(const AbsorptionSamples& samples, const RegionBounds& bounds) {
  std::vector<double> fs, ks;
  for (const auto& p : samples.points) {
    if (p.frequency_hz >= bounds.f_lo && p.frequency_hz <= bounds.f_hi) {
      fs.push_back(p.frequency_hz);
      ks.push_back(p.kappa_per_m);
    }
  }
  const std::size_t n = fs.size();
  if (n < 3)
    throw InsufficientDataError("region [" + std::to_string(bounds.f_lo) + ", " +
                                std::to_string(bounds.f_hi) + "] holds fewer than 3 samples");

  // Work in u = (f - f_lo)/width so the Jacobian is well scaled.
  const double f_origin = bounds.f_lo;
  const double width = bounds.f_hi - bounds.f_lo;
  Eigen::VectorXd u(n), kappa(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = (fs[i] - f_origin) / width;
    kappa[i] = ks[i];
  }
  const double k_min = kappa.minCoeff();
  const double k_max = kappa.maxCoeff();
  if (k_max - k_min <= 1e-12 * std::max(1.0, k_max))
    throw FitError("absorption is constant over the region; no exponential trend", 0.0);

  // Initial guess: offset just below the minimum, weighted log-linear regression.
  Eigen::Vector3d p;
  {
    const double c0 = k_min - 1e-3 * (k_max - k_min);
    double sw = 0, su = 0, sy = 0, suu = 0, suy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = std::log(kappa[i] - c0);
      const double w = (kappa[i] - c0) * (kappa[i] - c0);
      sw += w;
      su += w * u[i];
      sy += w * y;
      suu += w * u[i] * u[i];
      suy += w * u[i] * y;
    }
    const double det = sw * suu - su * su;
    const double b = det != 0.0 ? (sw * suy - su * sy) / det : 0.0;
    const double a = (sy - b * su) / sw;
    p = {a, b, c0};
  }

  auto residuals = [&](const Eigen::Vector3d& q, Eigen::VectorXd& r) {
    r = ((q[0] + q[1] * u.array()).exp() + q[2]).matrix() - kappa;
    return r.squaredNorm();
  };

  Eigen::VectorXd r(n);
  double cost = residuals(p, r);
  double lambda = 1e-3;
  bool converged = false;
  const double data_scale = kappa.squaredNorm();
  Eigen::MatrixXd J(n, 3);
  for (int iter = 0; iter < 500 && !converged; ++iter) {
    const Eigen::ArrayXd e = (p[0] + p[1] * u.array()).exp();
    J.col(0) = e.matrix();
    J.col(1) = (u.array() * e).matrix();
    J.col(2).setOnes();
    const Eigen::Matrix3d A = J.transpose() * J;
    const Eigen::Vector3d g = J.transpose() * r;
    if (g.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, std::sqrt(data_scale)) ||
        cost <= 1e-30 * data_scale) {
      converged = true;
      break;
    }
    bool stepped = false;
    while (lambda < 1e16) {
      Eigen::Matrix3d damped = A;
      damped.diagonal() += lambda * A.diagonal().cwiseMax(1e-300);
      const Eigen::Vector3d step = damped.ldlt().solve(-g);
      Eigen::VectorXd r_trial(n);
      const Eigen::Vector3d trial = p + step;
      const double trial_cost = residuals(trial, r_trial);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const bool tiny = step.cwiseAbs().maxCoeff() <= 1e-14 * (p.cwiseAbs().maxCoeff() + 1e-14);
        p = trial;
        r = r_trial;
        const double improvement = cost - trial_cost;
        cost = trial_cost;
        lambda = std::max(lambda * 0.1, 1e-15);
        stepped = true;
        if (tiny || improvement <= 1e-28 * data_scale) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) {
      // No descent possible at any damping: a stationary point within rounding.
      converged = true;
    }
  }
  const double rmse = std::sqrt(cost / static_cast<double>(n));
  if (!converged || !p.allFinite())
    throw FitError("exponential fit did not converge", rmse);

  RegionModel m;
  m.kind = bounds.kind;
  m.b_tot = width;
  m.f_ref = bounds.kind == RegionKind::PACSR ? bounds.f_hi : bounds.f_lo;
  m.sigma2 = p[1] / width;
  m.sigma1 = p[0] - p[1] * f_origin / width;
  m.sigma3 = p[2];
  m.fit_rmse = rmse;
  const bool sign_ok = bounds.kind == RegionKind::PACSR ? m.sigma2 > 0.0 : m.sigma2 < 0.0;
  if (!sign_ok)
    throw SignConstraintError(std::string("fitted sigma2 has the wrong sign for a ") +
                              to_string(bounds.kind));
  return m;
}

double khat(const RegionModel& model, double f) {
  if (!model.contains(f))
    throw DomainError("frequency " + std::to_string(f) + " Hz outside region [" +
                      std::to_string(model.f_lo()) + ", " + std::to_string(model.f_hi()) + "]");
  return model.absorption(f);
}

double edge_cutoff_bandwidth(const RegionModel& model, double threshold) {
  const double k_ref = model.absorption(model.f_ref);
  if (k_ref <= threshold) return 0.0;
  const double f_far = model.f_ref - model.eta() * model.b_tot;
  if (model.absorption(f_far) > threshold)
    throw RegionUnusableError("absorption exceeds the threshold across the whole region");
  const double f_cross = (std::log(threshold - model.sigma3) - model.sigma1) / model.sigma2;
  return std::clamp(std::abs(model.f_ref - f_cross), 0.0, model.b_tot);
}

std::vector<std::vector<std::size_t>> group_transmission_windows(
    std::span<const RegionModel> regions) {
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < regions.size();) {
    if (regions[i].kind == RegionKind::PACSR && i + 1 < regions.size() &&
        regions[i + 1].kind == RegionKind::NACSR) {
      groups.push_back({i, i + 1});
      i += 2;
    } else {
      groups.push_back({i});
      i += 1;
    }
  }
  return groups;
}

SpectrumLayout fit_layout(const AbsorptionSamples& samples, double peak_prominence) {
  SpectrumLayout layout;
  for (const auto& b : segment_regions(samples, peak_prominence))
    layout.regions.push_back(fit_region(samples, b));
  layout.tw_grouping = group_transmission_windows(layout.regions);
  return layout;
}

}  // namespace thz
