#pragma once

#include "spmat/graph.hpp"
#include "spmat/model.hpp"
#include "spmat/synthetic.hpp"

#include <algorithm>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace testing_support {

/// Graphs of a few small synthetic crystals with a reduced neighbor count.
inline std::vector<spmat::CrystalGraph> toy_graphs(std::size_t n, std::uint64_t seed = 1) {
  spmat::SyntheticConfig sc;
  sc.n_crystals = n;
  sc.max_atoms = 4;
  sc.n_classes = n >= 2 ? 2 : 1;
  sc.seed = seed;
  spmat::GraphConfig gc;
  gc.max_neighbors = 4;
  gc.radius = 6.0;
  std::vector<spmat::CrystalGraph> out;
  for (const auto &s : spmat::generate_synthetic_dataset(sc).structures)
    out.push_back(spmat::build_graph(s, gc));
  return out;
}

inline spmat::ModelConfig toy_model() {
  spmat::ModelConfig m;
  m.hidden_dim = 5;
  m.n_conv = 2;
  m.embed_dim = 4;
  m.head_hidden = 3;
  m.edge_feature_dim = 41;
  return m;
}

/// Binds the selected parameters to grad-check leaves and the rest as constants.
inline spmat::BoundParams bind_subset(spmat::Tape &t, const spmat::ModelParams &params, const std::vector<std::string> &names,
                        std::span<const spmat::Var> leaves) {
  std::vector<std::pair<std::string, spmat::Var>> vars;
  for (const auto &[n, v] : params.entries()) {
    const auto it = std::find(names.begin(), names.end(), n);
    vars.emplace_back(n, it == names.end() ? t.constant(v) : leaves[static_cast<std::size_t>(it - names.begin())]);
  }
  return spmat::BoundParams(t, std::move(vars));
}

inline std::pair<std::vector<std::string>, std::vector<spmat::Tensor>> select_params(const spmat::ModelParams &params,
                                                                const std::function<bool(const std::string &)> &keep) {
  std::pair<std::vector<std::string>, std::vector<spmat::Tensor>> out;
  for (const auto &[n, t] : params.entries())
    if (keep(n)) {
      out.first.push_back(n);
      out.second.push_back(t);
    }
  return out;
}

} // namespace testing_support
