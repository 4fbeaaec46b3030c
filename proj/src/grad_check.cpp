#include "spmat/grad_check.hpp"

#include "spmat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spmat {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

double evaluate(const ScalarFn &f, const std::vector<Tensor> &values) {
  Tape tape;
  std::vector<Var> leaves;
  for (const auto &v : values)
    leaves.push_back(tape.leaf(v, false));
  return f(tape, leaves).value().item();
}

} // namespace

GradCheckResult grad_check(const ScalarFn &f, std::span<const Tensor> params,
                           const GradCheckOptions &opts) {
  std::vector<Tensor> values(params.begin(), params.end());
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto &v : values)
      leaves.push_back(tape.leaf(v, true));
    const auto grads = tape.backward(f(tape, leaves));
    for (const auto &leaf : leaves)
      analytic.push_back(grads[leaf]);
  }

  // flat (tensor, offset) coordinates
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < values.size(); ++t)
    for (std::size_t i = 0; i < values[t].numel(); ++i)
      coords.emplace_back(t, i);
  if (coords.size() > opts.max_coordinates) {
    Rng rng(opts.seed, {0x9c4eu});
    rng.shuffle(std::span(coords));
    coords.resize(opts.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckResult result;
  for (const auto &[t, i] : coords) {
    const double orig = values[t][i];
    values[t][i] = orig + opts.step;
    const double plus = evaluate(f, values);
    values[t][i] = orig - opts.step;
    const double minus = evaluate(f, values);
    values[t][i] = orig;
    const double numeric = (plus - minus) / (2.0 * opts.step);
    result.max_relative_error =
        std::max(result.max_relative_error, relative_error(analytic[t][i], numeric));
    ++result.coordinates_checked;
  }
  return result;
}

} // namespace spmat
