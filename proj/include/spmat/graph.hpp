#pragma once

#include "spmat/structure.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spmat {

enum class NodeFeatureMode { LearnedEmbedding, ExternalTable };

struct GraphConfig {
  double radius = 8.0;
  int max_neighbors = 12;
  double mu_min = 0.0;
  double mu_max = 8.0;
  double mu_step = 0.2;
  double sigma = 0.2;
  NodeFeatureMode node_feature_mode = NodeFeatureMode::LearnedEmbedding;

  void validate() const;
  /// floor((mu_max - mu_min) / mu_step) + 1; both grid endpoints included.
  std::size_t num_gaussians() const;
};

/// Gaussian distance basis f_k(d) = exp(-(d - mu_k)^2 / sigma^2).
struct GaussianBasis {
  double mu_min = 0.0;
  double mu_step = 0.2;
  double sigma = 0.2;
  std::size_t count = 41;

  static GaussianBasis from(const GraphConfig &cfg);
  double center(std::size_t k) const { return mu_min + static_cast<double>(k) * mu_step; }
  void expand(double d, std::span<double> out) const;

  bool operator==(const GaussianBasis &) const = default;
};

struct Edge {
  int src = 0; ///< anchor atom i
  int dst = 0; ///< neighbor atom j
  std::array<int, 3> image{}; ///< lattice translation applied to j

  bool operator==(const Edge &) const = default;
};

struct NeighborList {
  std::vector<Edge> edges;
  std::vector<double> distances;
};

/// Fixed per-element feature vectors read from `z,f0,f1,...` CSV.
class NodeFeatureTable {
public:
  NodeFeatureTable() = default;
  NodeFeatureTable(std::size_t width, std::map<int, std::vector<double>> rows);

  static NodeFeatureTable parse(std::string_view csv);
  static NodeFeatureTable load(const std::filesystem::path &path);

  std::size_t width() const { return width_; }
  bool contains(int z) const { return rows_.count(z) != 0; }
  /// Throws MissingTableEntry naming z.
  std::span<const double> row(int z) const;

private:
  std::size_t width_ = 0;
  std::map<int, std::vector<double>> rows_;
};

struct NodeFeatures {
  NodeFeatureMode mode = NodeFeatureMode::LearnedEmbedding;
  /// learned-embedding: atomic numbers used as table indices.
  std::vector<int> indices;
  /// external-table: n_nodes x width, row-major.
  std::vector<double> values;
  std::size_t width = 0;

  bool operator==(const NodeFeatures &) const = default;
};

struct CrystalGraph {
  std::string crystal_id;
  std::size_t n_nodes = 0;
  std::vector<int> node_z;
  NodeFeatures node_features;
  std::vector<Edge> edges;
  /// Current neighbor distances; augmentation may perturb these.
  std::vector<double> distances;
  GaussianBasis basis;
  /// n_edges x basis.count, row-major.
  std::vector<double> edge_features;
  /// Augmentation flags; all zero on a freshly built graph.
  std::vector<std::uint8_t> node_masked;
  std::vector<std::uint8_t> edge_masked;

  std::size_t n_edges() const { return edges.size(); }
  std::span<const double> edge_feature_row(std::size_t e) const {
    return {edge_features.data() + e * basis.count, basis.count};
  }

  bool operator==(const CrystalGraph &) const = default;
};

/// Cartesian coordinates r = f . L for each site.
std::vector<Vec3> frac_to_cart(const CrystalStructure &s);

/// Periodic neighbors within cfg.radius per anchor, sorted by distance and
/// truncated to cfg.max_neighbors. Distances are compared after rounding to
/// kDistanceTieResolution so that images equidistant up to rounding noise
/// fall back to the (j, image) lexicographic tie-break.
NeighborList neighbor_list(const CrystalStructure &s, const GraphConfig &cfg);

inline constexpr double kDistanceTieResolution = 1e-10;

/// Ordering key used by neighbor_list; exposed so reference implementations
/// can apply the identical rule.
std::int64_t distance_sort_key(double d);

/// n x K row-major matrix of Gaussian features; negative distances allowed.
std::vector<double> gaussian_expand(std::span<const double> distances, const GraphConfig &cfg);

NodeFeatures init_node_features(std::span<const int> node_z, NodeFeatureMode mode,
                                const NodeFeatureTable *table = nullptr);

CrystalGraph build_graph(const CrystalStructure &s, const GraphConfig &cfg,
                         const NodeFeatureTable *table = nullptr);

} // namespace spmat
