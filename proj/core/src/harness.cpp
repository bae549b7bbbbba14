#include "thzalloc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "thzalloc/error.hpp"

namespace thz {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("THZ_WORKERS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

const char* to_string(SweepAxis axis) noexcept {
  switch (axis) {
    case SweepAxis::PTotDbm: return "p_tot_dbm";
    case SweepAxis::NRegions: return "n_regions";
    case SweepAxis::RThr: return "r_thr";
    case SweepAxis::BMax: return "b_max";
  }
  return "?";
}

std::optional<SweepAxis> parse_axis(std::string_view name) {
  for (SweepAxis a : {SweepAxis::PTotDbm, SweepAxis::NRegions, SweepAxis::RThr, SweepAxis::BMax})
    if (name == to_string(a)) return a;
  return std::nullopt;
}

std::size_t users_for_regions(std::size_t n_regions) {
  static constexpr std::size_t table[] = {10, 17, 27, 30};
  if (n_regions < 1 || n_regions > 4)
    throw ValidationError("the region sweep covers 1 to 4 regions");
  return table[n_regions - 1];
}

void ExperimentSpec::validate() const {
  scenario.validate();
  if (trials < 1) throw ValidationError("trials must be >= 1");
  if (values.empty()) throw ValidationError("sweep needs at least one axis value");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) throw ValidationError("axis values must be finite");
    if (k > 0 && !(values[k] > values[k - 1])) throw ValidationError("axis values must be sorted ascending");
  }
  if (schemes.empty()) throw ValidationError("no schemes selected");
  if (layout.regions.empty()) throw ValidationError("layout has no regions");
  if (axis == SweepAxis::NRegions) {
    for (double v : values)
      if (v != std::floor(v) || v < 1.0 || v > static_cast<double>(layout.size()))
        throw ValidationError("region counts must be integers within the layout");
  } else if (n_regions < 1 || n_regions > layout.size()) {
    throw ValidationError("n_regions exceeds the layout");
  }
}

TrialSetup trial_setup(const ExperimentSpec& spec, double value, std::size_t trial) {
  TrialSetup t;
  t.params = spec.scenario;
  t.params.seed = derive_seed(spec.scenario.seed, trial);
  std::size_t regions = spec.n_regions;
  switch (spec.axis) {
    case SweepAxis::PTotDbm: t.params.p_tot_dbm = value; break;
    case SweepAxis::RThr: t.params.r_thr_bps = value; break;
    case SweepAxis::BMax: t.params.b_max_hz = value; break;
    case SweepAxis::NRegions:
      regions = static_cast<std::size_t>(value);
      t.params.n_users = users_for_regions(regions);
      break;
  }
  t.layout = spec.layout.prefix(regions);
  return t;
}

std::vector<SweepRow> run_sweep(const ExperimentSpec& spec,
                                const std::function<void(std::size_t, std::size_t)>& progress) {
  spec.validate();
  const std::size_t V = spec.values.size(), T = spec.trials, S = spec.schemes.size();
  const std::size_t total = V * T * S;
  std::vector<SweepRow> rows(total);
  std::atomic<std::size_t> next{0}, done{0};
  std::mutex progress_mutex;

  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < total;) {
      const std::size_t v = k / (T * S), t = (k / S) % T, s = k % S;
      SweepRow& row = rows[k];
      row.axis_index = v;
      row.axis_value = spec.values[v];
      row.trial = t;
      row.scheme = spec.schemes[s];
      row.spearman_d_khat = std::numeric_limits<double>::quiet_NaN();
      try {
        const auto setup = trial_setup(spec, spec.values[v], t);
        row.seed = setup.params.seed;
        const Scenario sc = generate(setup.params);
        const auto res = run_scheme(row.scheme, sc, setup.layout, spec.config, spec.grid_points);
        row.feasible = res.feasible;
        row.sum_rate = res.sum_rate;
        row.wall_ms = res.wall_ms;
        row.status = res.solve ? to_string(res.solve->status) : (res.feasible ? "Feasible" : "Infeasible");
        if (res.feasible) {
          row.b_delta = res.allocation->b_delta;
          row.spearman_d_khat = distance_absorption_correlation(sc, setup.layout, *res.allocation);
        }
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d, total);
      }
    }
  };

  const std::size_t n = std::min(worker_count(spec.workers), total);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  return rows;
}

std::vector<SweepSummary> summarize(const ExperimentSpec& spec, const std::vector<SweepRow>& rows) {
  std::vector<SweepSummary> out;
  for (std::size_t v = 0; v < spec.values.size(); ++v)
    for (Scheme scheme : spec.schemes) {
      SweepSummary s;
      s.axis_value = spec.values[v];
      s.scheme = scheme;
      std::vector<double> rates;
      double bd = 0.0;
      std::size_t bd_n = 0;
      for (const auto& r : rows) {
        if (r.axis_index != v || r.scheme != scheme) continue;
        ++s.trials;
        if (!r.feasible) continue;
        ++s.feasible;
        rates.push_back(r.sum_rate);
        for (double b : r.b_delta) {
          bd += b;
          ++bd_n;
        }
      }
      s.median_sum_rate = rates.empty() ? 0.0 : median(rates);
      s.mean_b_delta = bd_n ? bd / static_cast<double>(bd_n) : 0.0;
      out.push_back(s);
    }
  return out;
}

void write_sweep_csv(std::ostream& out, const ExperimentSpec& spec, const std::vector<SweepRow>& rows,
                     const OutputHeader& header) {
  write_header(out, header);
  std::size_t R = spec.n_regions;
  if (spec.axis == SweepAxis::NRegions)
    R = static_cast<std::size_t>(*std::max_element(spec.values.begin(), spec.values.end()));
  out << to_string(spec.axis) << ",trial,seed,scheme,feasible,sum_rate_bps";
  for (std::size_t r = 0; r < R; ++r) out << ",b_delta_hz_" << r;
  out << ",mean_b_delta_hz,spearman_d_khat,status,wall_ms\n";
  for (const auto& row : rows) {
    out << num(row.axis_value) << ',' << row.trial << ',' << row.seed << ',' << to_string(row.scheme)
        << ',' << (row.feasible ? 1 : 0) << ',' << num(row.sum_rate);
    double mean = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      out << ',';
      if (r < row.b_delta.size()) {
        out << num(row.b_delta[r]);
        mean += row.b_delta[r];
      }
    }
    out << ',';
    if (!row.b_delta.empty()) out << num(mean / static_cast<double>(row.b_delta.size()));
    out << ',';
    if (!std::isnan(row.spearman_d_khat)) out << num(row.spearman_d_khat);
    std::string status = row.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << ',' << status << ',' << num(row.wall_ms) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SweepSummary>& summary,
                       const OutputHeader& header) {
  write_header(out, header);
  out << "axis_value,scheme,trials,feasible,median_sum_rate_bps,mean_b_delta_hz\n";
  for (const auto& s : summary)
    out << num(s.axis_value) << ',' << to_string(s.scheme) << ',' << s.trials << ',' << s.feasible
        << ',' << num(s.median_sum_rate) << ',' << num(s.mean_b_delta) << '\n';
}

void write_feasibility_csv(std::ostream& out, const std::vector<SweepSummary>& summary,
                           const OutputHeader& header) {
  write_header(out, header);
  out << "axis_value,scheme,trials,feasible,percent\n";
  for (const auto& s : summary)
    out << num(s.axis_value) << ',' << to_string(s.scheme) << ',' << s.trials << ',' << s.feasible
        << ',' << num(100.0 * static_cast<double>(s.feasible) / static_cast<double>(s.trials)) << '\n';
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("spearman needs equal lengths");
  const std::size_t n = a.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto ra = ranks(a), rb = ranks(b);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

double distance_absorption_correlation(const Scenario& sc, const SpectrumLayout& layout,
                                       const Allocation& a) {
  std::vector<double> d, k;
  for (std::size_t i = 0; i < a.n_users; ++i) {
    const auto slot = a.slot_of(i);
    if (!slot) continue;
    d.push_back(sc.users[i].d_m);
    k.push_back(layout.regions[slot->first].absorption(a.center[a.slot_index(slot->first, slot->second)]));
  }
  return spearman(d, k);
}

double median(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::uint64_t spec_hash(const ExperimentSpec& spec) {
  std::string text = canonical_config(spec.scenario, spec.layout, spec.config);
  text += std::string("axis ") + to_string(spec.axis) + " n_regions " + std::to_string(spec.n_regions) +
          " trials " + std::to_string(spec.trials) + " grid " + std::to_string(spec.grid_points) + "\nvalues";
  for (double v : spec.values) text += ' ' + num(v);
  text += "\nschemes";
  for (Scheme s : spec.schemes) text += std::string(" ") + to_string(s);
  return fnv1a(text);
}

}  // namespace thz
