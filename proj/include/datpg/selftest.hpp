#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace datpg {

struct SelftestOptions {
  std::size_t seeds = 1;       // repetitions of the statistical suites
  std::uint64_t seed = 0;
  bool inject_bug = false;     // corrupts the AND-family partial derivative
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Suites: corner (relaxed == discrete at binary inputs), gradient (backward
// vs central differences) and reparam (P(theta + eps > 0) vs sigmoid).
std::vector<SuiteResult> run_selftest(const SelftestOptions& options);

}  // namespace datpg
