#pragma once

// Reduced-scale analytic-vs-Monte-Carlo checks, quick enough for CI.

#include <functional>
#include <string>
#include <vector>

namespace twinbeam {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runs every check; `on_result` (optional) sees each result as it completes.
std::vector<SelftestCheck> run_selftest(
    const std::function<void(const SelftestCheck&)>& on_result = {});

}  // namespace twinbeam
