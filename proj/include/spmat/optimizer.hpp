#pragma once

#include "spmat/model.hpp"
#include "spmat/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace spmat {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// L2 penalty folded into the gradient (g += weight_decay * theta).
  double weight_decay = 0.0;

  void validate() const;
};

/// First and second moments per parameter, keyed by parameter name.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, Tensor>> m;
  std::vector<std::pair<std::string, Tensor>> v;

  bool operator==(const AdamState &) const = default;
};

/// One update of a single tensor at step t >= 1. Throws NonFinite.
void adam_update(Tensor &param, const Tensor &grad, Tensor &m, Tensor &v, std::uint64_t t,
                 const AdamConfig &cfg, const std::string &name = "param");

/// Updates each named parameter that has a gradient; moments are created on
/// first use. Nothing is modified if any gradient is non-finite.
void adam_step(ModelParams &params, const std::vector<std::pair<std::string, Tensor>> &grads,
               AdamState &state, const AdamConfig &cfg);

} // namespace spmat
