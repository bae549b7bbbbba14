#include "thzalloc/allocation.hpp"

namespace thz {

Allocation::Allocation(std::size_t users, std::size_t regions, std::size_t slots_per_region)
    : n_users(users),
      n_regions(regions),
      slots(slots_per_region),
      x(users * regions * slots_per_region, 0),
      power(users, 0.0),
      bandwidth(regions * slots_per_region, 0.0),
      guard(regions * slots_per_region, 0.0),
      b_delta(regions, 0.0),
      center(regions * slots_per_region, 0.0),
      rate(users, 0.0) {}

std::optional<std::pair<std::size_t, std::size_t>> Allocation::slot_of(std::size_t i) const {
  std::optional<std::pair<std::size_t, std::size_t>> hit;
  for (std::size_t r = 0; r < n_regions; ++r)
    for (std::size_t s = 0; s < slots; ++s)
      if (assigned(i, r, s)) {
        if (hit) return std::nullopt;
        hit = std::pair{r, s};
      }
  return hit;
}

std::optional<std::size_t> Allocation::user_on(std::size_t r, std::size_t s) const {
  for (std::size_t i = 0; i < n_users; ++i)
    if (assigned(i, r, s)) return i;
  return std::nullopt;
}

void Allocation::recompute_centers(const SpectrumLayout& layout) {
  for (std::size_t r = 0; r < n_regions; ++r) {
    const auto& region = layout.regions.at(r);
    double offset = b_delta[r];
    for (std::size_t s = 0; s < slots; ++s) {
      const std::size_t k = slot_index(r, s);
      center[k] = region.f_ref - region.eta() * (offset + 0.5 * bandwidth[k]);
      offset += bandwidth[k] + guard[k];
    }
  }
}

double Allocation::sum_rate() const noexcept {
  double total = 0.0;
  for (double r : rate) total += r;
  return total;
}

}  // namespace thz
