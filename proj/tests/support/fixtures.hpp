#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>

#include "thzalloc/baselines.hpp"
#include "thzalloc/scenario.hpp"

namespace fixture {

inline std::filesystem::path data_dir() { return THZ_TEST_DATA_DIR; }

/// Fitted single-peak layout shared by the regression suite.
inline thz::SpectrumLayout regression_layout() {
  return thz::fit_layout(thz::load_samples(data_dir() / "single_peak.csv"));
}

inline thz::ScenarioParams regression_params(int seed) {
  char name[32];
  std::snprintf(name, sizeof name, "seed_%02d.json", seed);
  return thz::read_scenario_params(data_dir() / "regression" / name);
}

inline thz::ProblemConfig warn_config() {
  thz::ProblemConfig c;
  c.convexity = thz::ConvexityPolicy::Warn;
  return c;
}

}  // namespace fixture
