#pragma once

// Central finite-difference checks of the analytic adapter and ViG
// gradients on small random instances.

#include <cstdint>
#include <string>
#include <vector>

namespace pnps {

struct GradcheckOptions {
  std::size_t instances = 20;  // per suite
  std::size_t max_dim = 16;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
};

struct GradcheckResult {
  std::string suite;  // pir, ppd, nir, nnd, npd, vig
  std::size_t instance = 0;
  std::size_t dim = 0;
  double relative_error = 0.0;
  bool passed = false;
};

/// ‖a - b‖ / max(‖a‖, ‖b‖, 1e-8).
double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

/// Runs every suite; one result per (suite, instance).
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& options);

}  // namespace pnps
