#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace thz {

struct AbsorptionPoint {
  double frequency_hz;
  double kappa_per_m;
};

/// Sampled molecular absorption coefficient, sorted by frequency.
struct AbsorptionSamples {
  std::vector<AbsorptionPoint> points;

  std::size_t size() const noexcept { return points.size(); }
  double f_min() const { return points.front().frequency_hz; }
  double f_max() const { return points.back().frequency_hz; }

  /// Throws ValidationError unless frequencies strictly increase and kappa >= 0.
  void validate() const;
};

enum class RegionKind { PACSR, NACSR };

const char* to_string(RegionKind kind) noexcept;
RegionKind region_kind_from_string(const std::string& s);

/// One positive/negative absorption-slope region with its fitted model
/// K(f) = exp(sigma1 + sigma2 f) + sigma3.
///
/// `f_ref` is the high-absorption end: the upper bound of a PACSR and the
/// lower bound of a NACSR. Sub-bands are laid out moving away from it.
struct RegionModel {
  RegionKind kind = RegionKind::PACSR;
  double f_ref = 0.0;    // Hz
  double b_tot = 0.0;    // Hz
  double sigma1 = 0.0;   // dimensionless
  double sigma2 = 0.0;   // 1/Hz
  double sigma3 = 0.0;   // 1/m
  double fit_rmse = 0.0; // 1/m

  double eta() const noexcept { return kind == RegionKind::PACSR ? 1.0 : -1.0; }
  double f_lo() const noexcept { return kind == RegionKind::PACSR ? f_ref - b_tot : f_ref; }
  double f_hi() const noexcept { return kind == RegionKind::PACSR ? f_ref : f_ref + b_tot; }
  bool contains(double f, double rel_tol = 1e-12) const noexcept;

  /// Unchecked model evaluation.
  double absorption(double f) const noexcept;
  double absorption_slope(double f) const noexcept;
  double absorption_curvature(double f) const noexcept;
};

struct RegionBounds {
  double f_lo;
  double f_hi;
  RegionKind kind;
};

/// Fitted regions in ascending frequency order with their transmission-window grouping.
struct SpectrumLayout {
  std::vector<RegionModel> regions;
  std::vector<std::vector<std::size_t>> tw_grouping;
  bool synthetic = false;

  std::size_t size() const noexcept { return regions.size(); }
  double total_bandwidth() const noexcept;
  /// Copy restricted to the first `n` regions.
  SpectrumLayout prefix(std::size_t n) const;
};

/// Reads `frequency_hz,kappa_per_m` CSV. Rows are sorted; duplicate
/// frequencies are averaged.
AbsorptionSamples load_samples(std::istream& in);
AbsorptionSamples load_samples(const std::filesystem::path& path);

/// Splits the sampled range at absorption peaks and valleys whose
/// prominence reaches `peak_prominence` (1/m).
std::vector<RegionBounds> segment_regions(const AbsorptionSamples& samples,
                                          double peak_prominence = 0.05);

/// Least-squares fit of the exponential region model.
RegionModel fit_region(const AbsorptionSamples& samples, const RegionBounds& bounds);

/// Checked model evaluation; throws DomainError outside the region.
double khat(const RegionModel& model, double f);

/// Width of the band adjoining f_ref where the model exceeds `threshold` (1/m).
double edge_cutoff_bandwidth(const RegionModel& model, double threshold);

/// Pairs each PACSR with the NACSR that follows it; leftovers stand alone.
std::vector<std::vector<std::size_t>> group_transmission_windows(
    std::span<const RegionModel> regions);

/// Segment + fit every region.
SpectrumLayout fit_layout(const AbsorptionSamples& samples, double peak_prominence = 0.05);

}  // namespace thz
