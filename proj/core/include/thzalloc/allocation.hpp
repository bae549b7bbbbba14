#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "thzalloc/absorption.hpp"

namespace thz {

/// A decoded spectrum allocation. Every region carries `slots` sub-band
/// positions (0-based here, ordered away from f_ref); unassigned positions
/// have zero bandwidth and zero guard.
struct Allocation {
  std::size_t n_users = 0;
  std::size_t n_regions = 0;
  std::size_t slots = 0;

  std::vector<std::uint8_t> x;    // n_users x (n_regions * slots)
  std::vector<double> power;      // W, per user
  std::vector<double> bandwidth;  // Hz, per (region, slot)
  std::vector<double> guard;      // Hz, per (region, slot)
  std::vector<double> b_delta;    // Hz, per region
  std::vector<double> center;     // Hz, per (region, slot)
  std::vector<double> rate;       // bit/s, per user

  Allocation() = default;
  Allocation(std::size_t users, std::size_t regions, std::size_t slots_per_region);

  std::size_t slot_index(std::size_t r, std::size_t s) const noexcept { return r * slots + s; }
  std::size_t total_slots() const noexcept { return n_regions * slots; }
  std::uint8_t& assigned(std::size_t i, std::size_t r, std::size_t s) {
    return x[i * total_slots() + slot_index(r, s)];
  }
  std::uint8_t assigned(std::size_t i, std::size_t r, std::size_t s) const {
    return x[i * total_slots() + slot_index(r, s)];
  }
  /// (region, slot) of user i when exactly one is assigned.
  std::optional<std::pair<std::size_t, std::size_t>> slot_of(std::size_t i) const;
  /// User on (r, s), if any.
  std::optional<std::size_t> user_on(std::size_t r, std::size_t s) const;

  /// Recomputes `center` from b_delta, bandwidth and guard.
  void recompute_centers(const SpectrumLayout& layout);
  double sum_rate() const noexcept;
};

}  // namespace thz
