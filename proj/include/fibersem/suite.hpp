#pragma once

// The golden-example suite over the shipped models.

#include <cstdint>
#include <string>
#include <vector>

#include "fibersem/forcing.hpp"

namespace fibersem {

struct SuiteRow {
  std::string key;
  std::string group;
  std::string expected;
  std::string observed;
  bool pass = false;
  double seconds = 0.0;
};

struct SuiteOptions {
  std::string models_dir;
  std::vector<std::string> only;  // row keys or group names; empty runs everything
  std::uint64_t seed = 7;
  std::size_t trials = 200;
  NeighborhoodPolicy policy;
};

/// Group names in run order: pointwise, parallel, extension, transport, theorems.
std::vector<std::string> suite_groups();
std::vector<std::string> suite_keys();

/// A row whose model fails to load reports the failure in its own row.
std::vector<SuiteRow> run_suite(const SuiteOptions& opt);

}  // namespace fibersem
