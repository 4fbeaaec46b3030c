#pragma once

#include "spmat/graph.hpp"
#include "spmat/ops.hpp"
#include "spmat/tape.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spmat {

struct ModelConfig {
  std::size_t hidden_dim = 64;
  std::size_t n_conv = 3;
  std::size_t embed_dim = 128;
  std::size_t head_hidden = 128;
  /// Input widths, fixed by the graph featurization.
  std::size_t edge_feature_dim = 41;
  NodeFeatureMode node_mode = NodeFeatureMode::LearnedEmbedding;
  std::size_t node_feature_dim = 0; ///< external-table width

  void validate() const;
  bool operator==(const ModelConfig &) const = default;
};

enum class Task { Regression, BinaryClassification };

/// Named parameter tensors in a stable order.
class ModelParams {
public:
  void set(const std::string &name, Tensor value);
  const Tensor &at(const std::string &name) const;
  Tensor &at(const std::string &name);
  bool contains(const std::string &name) const;
  void erase_prefix(const std::string &prefix);

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>> &entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>> &entries() { return entries_; }

  bool operator==(const ModelParams &) const = default;

private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

inline constexpr std::string_view kEncoderPrefix = "encoder.";
inline constexpr std::string_view kProjectionPrefix = "projection.";
inline constexpr std::string_view kHeadPrefix = "head.";

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, embedding rows
/// ~ N(0, 1/sqrt(hidden_dim)). Each tensor draws from a stream keyed by its
/// name, so re-initializing one part reproduces init_params for that part.
ModelParams init_params(const ModelConfig &cfg, std::uint64_t seed);
void init_encoder(ModelParams &p, const ModelConfig &cfg, std::uint64_t seed);
void init_projection(ModelParams &p, const ModelConfig &cfg, std::uint64_t seed);
void init_head(ModelParams &p, const ModelConfig &cfg, std::uint64_t seed);

/// Parameters placed on a tape as leaves.
class BoundParams {
public:
  BoundParams(Tape &tape, const ModelParams &params,
              const std::function<bool(const std::string &)> &trainable);
  /// Every parameter trainable.
  BoundParams(Tape &tape, const ModelParams &params);
  /// Wraps variables already on `tape`, e.g. leaves supplied by a gradient check.
  BoundParams(Tape &tape, std::vector<std::pair<std::string, Var>> vars);

  Var operator[](const std::string &name) const;
  Tape &tape() const { return *tape_; }
  const std::vector<std::pair<std::string, Var>> &vars() const { return vars_; }

private:
  Tape *tape_;
  std::vector<std::pair<std::string, Var>> vars_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Several crystal graphs concatenated into one disconnected graph.
struct GraphBatch {
  std::size_t n_graphs = 0;
  std::size_t n_nodes = 0;
  NodeFeatureMode mode = NodeFeatureMode::LearnedEmbedding;
  std::vector<int> embedding_rows; ///< Z - 1 per node
  Tensor node_values;              ///< n_nodes x width (external mode)
  std::vector<std::uint8_t> node_masked;
  std::vector<int> edge_src;
  std::vector<int> edge_dst;
  Tensor edge_features; ///< n_edges x K
  std::vector<int> node_graph;
};

GraphBatch collate(std::span<const CrystalGraph *const> graphs);
GraphBatch collate(std::span<const CrystalGraph> graphs);

/// x W + b with b stored as a [1, n] row.
Var linear(const Var &x, const Var &weight, const Var &bias);

/// Gated residual convolution over edges (i, j):
/// z = v_i (+) v_j (+) u_ij, v_i' = v_i + sum_j sigmoid(z Wf + bf) * softplus(z Ws + bs).
Var cgcnn_conv(const Var &nodes, const Var &edge_features, std::span<const int> src,
               std::span<const int> dst, const Var &gate_w, const Var &gate_b,
               const Var &filter_w, const Var &filter_b);

/// Mean over each crystal's nodes, masked atoms included in the count.
Var pool(const Var &nodes, std::span<const int> node_graph, std::size_t n_graphs);

/// Graph batch -> [n_graphs, hidden_dim] crystal vectors.
Var encode(const BoundParams &p, const ModelConfig &cfg, const GraphBatch &batch);
/// relu(x W1 + b1) W2 + b2 -> [n, embed_dim].
Var project(const BoundParams &p, const Var &crystal);
/// relu(x W1 + b1) W2 + b2 -> [n, 1]: a value (regression) or a logit.
Var head_forward(const BoundParams &p, const Var &crystal);

double sigmoid(double logit);

} // namespace spmat
