#include "spmat/optimizer.hpp"

#include "spmat/error.hpp"

#include <cmath>
#include <fmt/format.h>

namespace spmat {

void AdamConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr))
    throw Error(ErrorCode::InvalidConfig, fmt::format("learning rate must be > 0, got {}", lr));
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw Error(ErrorCode::InvalidConfig, "adam betas must lie in [0, 1)");
  if (!(eps > 0))
    throw Error(ErrorCode::InvalidConfig, "adam eps must be > 0");
  if (!(weight_decay >= 0) || !std::isfinite(weight_decay))
    throw Error(ErrorCode::InvalidConfig, "weight decay must be >= 0");
}

void adam_update(Tensor &param, const Tensor &grad, Tensor &m, Tensor &v, std::uint64_t t,
                 const AdamConfig &cfg, const std::string &name) {
  if (param.shape() != grad.shape() || m.shape() != param.shape() || v.shape() != param.shape())
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("adam: '{}' param {} vs grad {}", name, shape_string(param.shape()),
                            shape_string(grad.shape())));
  if (!grad.all_finite())
    throw Error(ErrorCode::NonFinite, fmt::format("adam: non-finite gradient for '{}'", name));
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double g = grad[i] + cfg.weight_decay * param[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    param[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
  }
  if (!param.all_finite())
    throw Error(ErrorCode::NonFinite, fmt::format("adam: '{}' became non-finite", name));
}

namespace {

Tensor &moment(std::vector<std::pair<std::string, Tensor>> &table, const std::string &name,
               const Shape &shape) {
  for (auto &[n, t] : table)
    if (n == name)
      return t;
  table.emplace_back(name, Tensor(shape, 0.0));
  return table.back().second;
}

} // namespace

void adam_step(ModelParams &params, const std::vector<std::pair<std::string, Tensor>> &grads,
               AdamState &state, const AdamConfig &cfg) {
  for (const auto &[name, g] : grads)
    if (!g.all_finite())
      throw Error(ErrorCode::NonFinite, fmt::format("adam: non-finite gradient for '{}'", name));
  ++state.step;
  for (const auto &[name, g] : grads) {
    Tensor &p = params.at(name);
    adam_update(p, g, moment(state.m, name, p.shape()), moment(state.v, name, p.shape()),
                state.step, cfg, name);
  }
}

} // namespace spmat
