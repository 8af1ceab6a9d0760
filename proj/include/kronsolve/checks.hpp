#pragma once

// Oracle-equivalence self check behind `kronsolve check`.

#include <cstdint>
#include <string>
#include <vector>

namespace kronsolve {

struct CheckResult {
  std::string name;
  bool passed = false;
  /// Worst observed deviation against the dense oracle.
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

std::vector<CheckResult> run_oracle_checks(std::uint64_t seed = 0, int instances = 25);

}  // namespace kronsolve
