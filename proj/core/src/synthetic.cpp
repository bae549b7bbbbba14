#include "thzalloc/synthetic.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

#include "thzalloc/error.hpp"

namespace thz {

SyntheticProfile SyntheticProfile::two_window() {
  SyntheticProfile p;
  p.f_start_hz = 0.340e12;
  p.f_stop_hz = 0.470e12;
  p.points = 1301;
  p.floor_per_m = 0.02;
  p.lines = {{0.380e12, 2.0, 3.0e9}, {0.448e12, 2.0, 3.0e9}};
  return p;
}

SyntheticProfile SyntheticProfile::single_peak() {
  SyntheticProfile p;
  p.f_start_hz = 0.356e12;
  p.f_stop_hz = 0.404e12;
  p.points = 481;
  p.floor_per_m = 0.02;
  p.lines = {{0.380e12, 2.0, 3.0e9}};
  return p;
}

double SyntheticProfile::kappa(double f) const noexcept {
  double k = floor_per_m;
  for (const auto& l : lines) {
    const double g2 = l.half_width_hz * l.half_width_hz;
    const double df = f - l.center_hz;
    k += l.peak_per_m * g2 / (df * df + g2);
  }
  return k;
}

std::string SyntheticProfile::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "synthetic lorentzian profile: range=[" << f_start_hz << "," << f_stop_hz
     << "] Hz points=" << points << " floor=" << floor_per_m << " 1/m";
  for (const auto& l : lines)
    os << " line(" << l.center_hz << "," << l.peak_per_m << "," << l.half_width_hz << ")";
  return os.str();
}

AbsorptionSamples generate_absorption(const SyntheticProfile& profile) {
  if (profile.points < 3) throw ValidationError("synthetic profile needs at least 3 points");
  if (!(profile.f_stop_hz > profile.f_start_hz))
    throw ValidationError("synthetic profile range is empty");
  AbsorptionSamples s;
  s.points.reserve(profile.points);
  const double step = (profile.f_stop_hz - profile.f_start_hz) / double(profile.points - 1);
  for (std::size_t i = 0; i < profile.points; ++i) {
    const double f = i + 1 == profile.points ? profile.f_stop_hz : profile.f_start_hz + step * double(i);
    s.points.push_back({f, profile.kappa(f)});
  }
  return s;
}

void write_samples_csv(std::ostream& out, const AbsorptionSamples& samples,
                       const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "frequency_hz,kappa_per_m\n";
  char buf[96];
  for (const auto& p : samples.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.frequency_hz, p.kappa_per_m);
    out << buf;
  }
}

}  // namespace thz
