#pragma once

// Central finite-difference checks of the analytic SFT and GRPO gradients on
// random tiny policies.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dvlr/policy.hpp"

namespace dvlr {

struct GradcheckOptions {
  int instances = 20;
  std::uint64_t seed = 1;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Added to one coordinate of every analytic block; a non-zero value must
  // make the check fail.
  double sabotage = 0.0;
};

struct GradcheckSuite {
  std::string name;
  int instances = 0;
  std::array<double, ParamBlocks::kBlockCount> block_error{};  // max relative error per block

  double max_error() const;
};

struct GradcheckReport {
  std::vector<GradcheckSuite> suites;
  double tolerance = 0.0;

  double max_error() const;
  bool passed() const { return max_error() < tolerance; }
};

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

// Max relative error between an analytic gradient and central differences
// of `objective` around `params`, per block.
template <class Objective>
std::array<double, ParamBlocks::kBlockCount> compare_gradient(const PolicyParameters& params,
                                                              const Gradient& analytic, Objective objective,
                                                              double step) {
  std::array<double, ParamBlocks::kBlockCount> err{};
  PolicyParameters probe = params;
  for (int b = 0; b < ParamBlocks::kBlockCount; ++b) {
    auto& values = probe.w.block(b);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = objective(probe);
      values[i] = saved - step;
      const double down = objective(probe);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      err[b] = std::max(err[b], relative_error(analytic.block(b)[i], numeric));
    }
  }
  return err;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options);
std::string format_gradcheck(const GradcheckReport& report);

}  // namespace dvlr
