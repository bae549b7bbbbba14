#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "thzalloc/absorption.hpp"

namespace thz {

/// Lorentzian absorption line.
struct AbsorptionLine {
  double center_hz;
  double peak_per_m;      // line contribution at its center
  double half_width_hz;   // half width at half maximum
};

/// Parameters of a synthetic absorption profile: Lorentzian lines on a flat floor.
/// Stands in for line-by-line absorption data, which this library does not compute.
struct SyntheticProfile {
  double f_start_hz = 0.340e12;
  double f_stop_hz = 0.470e12;
  std::size_t points = 1301;
  double floor_per_m = 0.02;
  std::vector<AbsorptionLine> lines;

  /// Two lines inside the range: four slope regions (PACSR, NACSR, PACSR, NACSR).
  static SyntheticProfile two_window();
  /// One line centred in a 48 GHz range: a PACSR followed by a NACSR.
  static SyntheticProfile single_peak();

  double kappa(double f) const noexcept;
  std::string describe() const;
};

AbsorptionSamples generate_absorption(const SyntheticProfile& profile);

/// Writes the CSV format read by load_samples, preceded by `#` comment lines.
void write_samples_csv(std::ostream& out, const AbsorptionSamples& samples,
                       const std::vector<std::string>& comments = {});

}  // namespace thz
