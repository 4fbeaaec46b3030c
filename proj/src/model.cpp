#include "spmat/model.hpp"

#include "spmat/elements.hpp"
#include "spmat/error.hpp"
#include "spmat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace spmat {

void ModelConfig::validate() const {
  if (hidden_dim < 1 || embed_dim < 1 || head_hidden < 1 || edge_feature_dim < 1)
    throw Error(ErrorCode::InvalidConfig, "model widths must be >= 1");
  if (node_mode == NodeFeatureMode::ExternalTable && node_feature_dim < 1)
    throw Error(ErrorCode::InvalidConfig, "external node features need a width >= 1");
}

void ModelParams::set(const std::string &name, Tensor value) {
  for (auto &[n, t] : entries_)
    if (n == name) {
      t = std::move(value);
      return;
    }
  entries_.emplace_back(name, std::move(value));
}

const Tensor &ModelParams::at(const std::string &name) const {
  for (const auto &[n, t] : entries_)
    if (n == name)
      return t;
  throw Error(ErrorCode::ShapeMismatch, fmt::format("missing parameter '{}'", name));
}

Tensor &ModelParams::at(const std::string &name) {
  return const_cast<Tensor &>(static_cast<const ModelParams &>(*this).at(name));
}

bool ModelParams::contains(const std::string &name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto &e) { return e.first == name; });
}

void ModelParams::erase_prefix(const std::string &prefix) {
  std::erase_if(entries_, [&](const auto &e) { return e.first.starts_with(prefix); });
}

namespace {

std::uint64_t name_hash(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

Tensor uniform_weight(std::string_view name, std::size_t fan_in, std::size_t fan_out,
                      std::uint64_t seed) {
  Rng rng(seed, {name_hash(name)});
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor w(Shape{fan_in, fan_out});
  for (auto &v : w.values())
    v = rng.uniform(-bound, bound);
  return w;
}

void add_linear(ModelParams &p, const std::string &prefix, std::size_t in, std::size_t out,
                std::uint64_t seed) {
  p.set(prefix + ".weight", uniform_weight(prefix + ".weight", in, out, seed));
  p.set(prefix + ".bias", Tensor(Shape{1, out}, 0.0));
}

std::string conv_name(std::size_t layer, std::string_view part) {
  return fmt::format("encoder.conv{}.{}", layer, part);
}

} // namespace

void init_encoder(ModelParams &p, const ModelConfig &cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t h = cfg.hidden_dim;
  if (cfg.node_mode == NodeFeatureMode::LearnedEmbedding) {
    Rng rng(seed, {name_hash("encoder.embedding")});
    const double sd = 1.0 / std::sqrt(static_cast<double>(h));
    Tensor table(Shape{static_cast<std::size_t>(kMaxAtomicNumber), h});
    for (auto &v : table.values())
      v = sd * rng.normal();
    p.set("encoder.embedding", std::move(table));
  } else {
    add_linear(p, "encoder.input", cfg.node_feature_dim, h, seed);
  }
  const std::size_t z_width = 2 * h + cfg.edge_feature_dim;
  for (std::size_t t = 0; t < cfg.n_conv; ++t) {
    add_linear(p, conv_name(t, "gate"), z_width, h, seed);
    add_linear(p, conv_name(t, "filter"), z_width, h, seed);
  }
}

void init_projection(ModelParams &p, const ModelConfig &cfg, std::uint64_t seed) {
  add_linear(p, "projection.fc1", cfg.hidden_dim, cfg.embed_dim, seed);
  add_linear(p, "projection.fc2", cfg.embed_dim, cfg.embed_dim, seed);
}

void init_head(ModelParams &p, const ModelConfig &cfg, std::uint64_t seed) {
  add_linear(p, "head.fc1", cfg.hidden_dim, cfg.head_hidden, seed);
  add_linear(p, "head.fc2", cfg.head_hidden, 1, seed);
}

ModelParams init_params(const ModelConfig &cfg, std::uint64_t seed) {
  ModelParams p;
  init_encoder(p, cfg, seed);
  init_projection(p, cfg, seed);
  init_head(p, cfg, seed);
  return p;
}

BoundParams::BoundParams(Tape &tape, const ModelParams &params,
                         const std::function<bool(const std::string &)> &trainable)
    : tape_(&tape) {
  for (const auto &[name, value] : params.entries()) {
    index_.emplace(name, vars_.size());
    vars_.emplace_back(name, tape.leaf(value, trainable(name)));
  }
}

BoundParams::BoundParams(Tape &tape, const ModelParams &params)
    : BoundParams(tape, params, [](const std::string &) { return true; }) {}

BoundParams::BoundParams(Tape &tape, std::vector<std::pair<std::string, Var>> vars)
    : tape_(&tape), vars_(std::move(vars)) {
  for (std::size_t i = 0; i < vars_.size(); ++i)
    index_.emplace(vars_[i].first, i);
}

Var BoundParams::operator[](const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw Error(ErrorCode::ShapeMismatch, fmt::format("missing parameter '{}'", name));
  return vars_[it->second].second;
}

GraphBatch collate(std::span<const CrystalGraph *const> graphs) {
  GraphBatch b;
  b.n_graphs = graphs.size();
  if (graphs.empty())
    throw Error(ErrorCode::EmptySegment, "empty graph batch");
  b.mode = graphs.front()->node_features.mode;
  const std::size_t k = graphs.front()->basis.count;
  const std::size_t width = graphs.front()->node_features.width;
  std::size_t n_edges = 0;
  for (const auto *g : graphs) {
    if (g->basis.count != k || g->node_features.mode != b.mode || g->node_features.width != width)
      throw Error(ErrorCode::ShapeMismatch, "graphs in a batch must share featurization");
    b.n_nodes += g->n_nodes;
    n_edges += g->n_edges();
  }
  std::vector<double> edge_values;
  edge_values.reserve(n_edges * k);
  std::vector<double> node_values;
  int offset = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto &g = *graphs[gi];
    for (std::size_t i = 0; i < g.n_nodes; ++i) {
      b.node_graph.push_back(static_cast<int>(gi));
      b.node_masked.push_back(g.node_masked.empty() ? 0 : g.node_masked[i]);
      if (b.mode == NodeFeatureMode::LearnedEmbedding)
        b.embedding_rows.push_back(g.node_features.indices[i] - 1);
    }
    if (b.mode == NodeFeatureMode::ExternalTable)
      node_values.insert(node_values.end(), g.node_features.values.begin(),
                         g.node_features.values.end());
    for (const auto &e : g.edges) {
      b.edge_src.push_back(e.src + offset);
      b.edge_dst.push_back(e.dst + offset);
    }
    edge_values.insert(edge_values.end(), g.edge_features.begin(), g.edge_features.end());
    offset += static_cast<int>(g.n_nodes);
  }
  b.edge_features = Tensor(Shape{n_edges, k}, std::move(edge_values));
  if (b.mode == NodeFeatureMode::ExternalTable)
    b.node_values = Tensor(Shape{b.n_nodes, width}, std::move(node_values));
  return b;
}

GraphBatch collate(std::span<const CrystalGraph> graphs) {
  std::vector<const CrystalGraph *> ptrs;
  for (const auto &g : graphs)
    ptrs.push_back(&g);
  return collate(std::span<const CrystalGraph *const>(ptrs));
}

Var linear(const Var &x, const Var &weight, const Var &bias) {
  const auto xw = ops::matmul(x, weight);
  const std::vector<int> rows(xw.value().rows(), 0);
  return ops::add(xw, ops::gather_rows(bias, rows));
}

Var cgcnn_conv(const Var &nodes, const Var &edge_features, std::span<const int> src,
               std::span<const int> dst, const Var &gate_w, const Var &gate_b,
               const Var &filter_w, const Var &filter_b) {
  const std::size_t n = nodes.value().rows();
  if (src.size() != dst.size() || src.size() != edge_features.value().rows())
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("cgcnn_conv: {} src, {} dst, {} edge feature rows", src.size(),
                            dst.size(), edge_features.value().rows()));
  if (src.empty())
    return nodes;
  const auto z = ops::concat_cols(
      {ops::gather_rows(nodes, src), ops::gather_rows(nodes, dst), edge_features});
  const auto gate = ops::sigmoid(linear(z, gate_w, gate_b));
  const auto filter = ops::softplus(linear(z, filter_w, filter_b));
  const auto messages = ops::mul(gate, filter);
  return ops::add(nodes, ops::segment_sum(messages, src, n));
}

Var pool(const Var &nodes, std::span<const int> node_graph, std::size_t n_graphs) {
  return ops::segment_mean(nodes, node_graph, n_graphs);
}

Var encode(const BoundParams &p, const ModelConfig &cfg, const GraphBatch &batch) {
  Tape &tape = p.tape();
  Var v;
  if (batch.mode == NodeFeatureMode::LearnedEmbedding) {
    if (cfg.node_mode != NodeFeatureMode::LearnedEmbedding)
      throw Error(ErrorCode::ShapeMismatch, "batch uses learned embeddings, model does not");
    v = ops::embedding_lookup(p["encoder.embedding"], batch.embedding_rows);
  } else {
    if (cfg.node_mode != NodeFeatureMode::ExternalTable)
      throw Error(ErrorCode::ShapeMismatch, "batch uses external node features, model does not");
    v = linear(tape.constant(batch.node_values), p["encoder.input.weight"], p["encoder.input.bias"]);
  }
  if (std::any_of(batch.node_masked.begin(), batch.node_masked.end(), [](auto m) { return m != 0; })) {
    Tensor keep(Shape{batch.n_nodes, cfg.hidden_dim}, 1.0);
    for (std::size_t i = 0; i < batch.n_nodes; ++i)
      if (batch.node_masked[i])
        std::fill_n(&keep[i * cfg.hidden_dim], cfg.hidden_dim, 0.0);
    v = ops::mul(v, tape.constant(std::move(keep)));
  }
  const auto edges = tape.constant(batch.edge_features);
  for (std::size_t t = 0; t < cfg.n_conv; ++t)
    v = cgcnn_conv(v, edges, batch.edge_src, batch.edge_dst, p[conv_name(t, "gate.weight")],
                   p[conv_name(t, "gate.bias")], p[conv_name(t, "filter.weight")],
                   p[conv_name(t, "filter.bias")]);
  return pool(v, batch.node_graph, batch.n_graphs);
}

Var project(const BoundParams &p, const Var &crystal) {
  const auto h = ops::relu(linear(crystal, p["projection.fc1.weight"], p["projection.fc1.bias"]));
  return linear(h, p["projection.fc2.weight"], p["projection.fc2.bias"]);
}

Var head_forward(const BoundParams &p, const Var &crystal) {
  const auto h = ops::relu(linear(crystal, p["head.fc1.weight"], p["head.fc1.bias"]));
  return linear(h, p["head.fc2.weight"], p["head.fc2.bias"]);
}

double sigmoid(double logit) {
  if (logit >= 0)
    return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

} // namespace spmat
