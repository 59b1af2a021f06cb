#pragma once

#include "pauc/common.hpp"

#include <string>
#include <vector>

namespace pauc::selftest {

struct ItemResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double wall_ms = 0.0;
};

/// The oracle/invariant suite behind `selftest` and the acceptance binary.
/// The seed moves the random draws, never the pass/fail outcome.
std::vector<ItemResult> run_all(std::uint64_t seed);

}  // namespace pauc::selftest
