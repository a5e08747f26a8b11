#pragma once

#include "mvmesh/diffmath/gradcheck.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mvmesh {

inline constexpr double kGradSuiteTolerance = 1e-4;

struct GradSuiteItem {
  std::string name;
  GradCheckResult result;
  bool passed() const { return result.checked > 0 && result.passed(kGradSuiteTolerance); }
};

/// Central-difference checks in double precision of every differentiable op,
/// loss and network block. Inputs avoid the kinks of relu, abs, max, BerHu
/// and bilinear sampling.
std::vector<GradSuiteItem> run_gradient_suite(std::uint64_t seed = 1);

void write_gradient_suite(std::ostream& out, const std::vector<GradSuiteItem>& items);

}  // namespace mvmesh
