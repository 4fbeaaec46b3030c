#pragma once

#include "spmat/tape.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace spmat {

/// Builds a scalar on `tape` from leaves bound to the given parameter values.
using ScalarFn = std::function<Var(Tape &tape, std::span<const Var> params)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Above this many coordinates, a seeded random subset of this size is probed.
  std::size_t max_coordinates = 256;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Relative error |a - n| / max(1e-8, |a| + |n|) between the tape gradient
/// and central differences (f(t + h e_i) - f(t - h e_i)) / 2h.
double relative_error(double analytic, double numeric);

GradCheckResult grad_check(const ScalarFn &f, std::span<const Tensor> params,
                           const GradCheckOptions &opts = {});

} // namespace spmat
