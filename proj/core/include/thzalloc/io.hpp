#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "thzalloc/baselines.hpp"

namespace thz {

const char* version() noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);

/// Provenance block written at the top of every output file.
struct OutputHeader {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<std::pair<std::string, std::string>> extra;
};

/// `# key: value` lines.
void write_header(std::ostream& out, const OutputHeader& header);

/// Canonical text of everything that determines a run; its FNV-1a is the config hash.
std::string canonical_config(const ScenarioParams& params, const SpectrumLayout& layout,
                             const BaselineConfig& config);

void write_layout(std::ostream& out, const SpectrumLayout& layout, const OutputHeader& header);
SpectrumLayout read_layout(std::istream& in);
SpectrumLayout read_layout(const std::filesystem::path& path);

/// One row per assigned sub-band:
/// region,slot,f_s_hz,b_s_hz,guard_hz,user,d_m,p_w,rate_bps
void write_allocation(std::ostream& out, const Scenario& scenario, const Allocation& allocation,
                      const OutputHeader& header);

void write_trace(std::ostream& out, const std::vector<IterationRecord>& trace,
                 const OutputHeader& header);

/// JSON verification and solve summary.
void write_report(std::ostream& out, const BaselineResult& result, const OutputHeader& header);

}  // namespace thz
