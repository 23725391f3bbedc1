#pragma once

// Finite-difference checks of every differentiable objective and renderer path.

#include "footfit/footmodel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace footfit {

inline constexpr double kGradTolerance = 1e-4;

struct GradCheckResult {
  std::string name;
  int configs = 0;
  double max_error = 0.0;  ///< max relative error over all configurations
  double seconds = 0.0;

  bool passed() const { return max_error < kGradTolerance; }
};

/// Runs each check at `configs` random configurations; configuration c of every
/// check draws from a stream seeded with seed ^ c. The model forward check uses
/// `model`, or the default model when null.
std::vector<GradCheckResult> run_gradient_suite(int configs = 20, std::uint64_t seed = 0,
                                                const FootModel* model = nullptr);

}  // namespace footfit
