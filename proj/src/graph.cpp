#include "spmat/graph.hpp"

#include "spmat/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <sstream>
#include <tuple>

namespace spmat {

void GraphConfig::validate() const {
  if (!(radius > 0.0))
    throw Error(ErrorCode::InvalidConfig, "graph.radius must be > 0");
  if (max_neighbors < 1)
    throw Error(ErrorCode::InvalidConfig, "graph.max_neighbors must be >= 1");
  if (!(mu_step > 0.0))
    throw Error(ErrorCode::InvalidConfig, "graph.mu_step must be > 0");
  if (!(sigma > 0.0))
    throw Error(ErrorCode::InvalidConfig, "graph.sigma must be > 0");
  if (!(mu_max > mu_min))
    throw Error(ErrorCode::InvalidConfig, "graph.mu_max must be > graph.mu_min");
}

std::size_t GraphConfig::num_gaussians() const {
  // 8.0 / 0.2 lands a hair under 40 in binary floating point
  return static_cast<std::size_t>(std::floor((mu_max - mu_min) / mu_step + 1e-9)) + 1;
}

GaussianBasis GaussianBasis::from(const GraphConfig &cfg) {
  return {cfg.mu_min, cfg.mu_step, cfg.sigma, cfg.num_gaussians()};
}

void GaussianBasis::expand(double d, std::span<double> out) const {
  const double inv_s2 = 1.0 / (sigma * sigma);
  for (std::size_t k = 0; k < count; ++k) {
    const double x = d - center(k);
    out[k] = std::exp(-x * x * inv_s2);
  }
}

NodeFeatureTable::NodeFeatureTable(std::size_t width, std::map<int, std::vector<double>> rows)
    : width_(width), rows_(std::move(rows)) {
  for (const auto &[z, row] : rows_)
    if (row.size() != width_)
      throw Error(ErrorCode::InvalidConfig,
                  fmt::format("node feature table row for Z={} has width {}, expected {}", z,
                              row.size(), width_));
}

NodeFeatureTable NodeFeatureTable::parse(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  int line_no = 0;
  std::map<int, std::vector<double>> rows;
  std::size_t width = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (header) {
      header = false;
      if (!line.starts_with("z,"))
        throw Error(ErrorCode::MissingColumn, "node feature table header must start with 'z,'");
      width = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
      continue;
    }
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= line.size()) {
      auto comma = line.find(',', start);
      if (comma == std::string::npos)
        comma = line.size();
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(line.data() + start, line.data() + comma, v);
      if (ec != std::errc() || ptr != line.data() + comma)
        throw Error(ErrorCode::MalformedNumber, fmt::format("node feature table line {}", line_no));
      values.push_back(v);
      start = comma + 1;
    }
    if (values.size() != width + 1)
      throw Error(ErrorCode::InvalidConfig,
                  fmt::format("node feature table line {}: expected {} values", line_no, width + 1));
    const int z = static_cast<int>(values.front());
    rows[z] = std::vector<double>(values.begin() + 1, values.end());
  }
  return NodeFeatureTable(width, std::move(rows));
}

NodeFeatureTable NodeFeatureTable::load(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, fmt::format("cannot open node feature table {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::span<const double> NodeFeatureTable::row(int z) const {
  auto it = rows_.find(z);
  if (it == rows_.end())
    throw Error(ErrorCode::MissingTableEntry, fmt::format("no node features for Z={}", z));
  return it->second;
}

std::vector<Vec3> frac_to_cart(const CrystalStructure &s) {
  std::vector<Vec3> out;
  out.reserve(s.sites.size());
  const auto &L = s.lattice;
  for (const auto &site : s.sites) {
    const auto &f = site.frac;
    Vec3 r{};
    for (std::size_t c = 0; c < 3; ++c)
      r[c] = f[0] * L[0][c] + f[1] * L[1][c] + f[2] * L[2][c];
    out.push_back(r);
  }
  return out;
}

std::int64_t distance_sort_key(double d) {
  return static_cast<std::int64_t>(std::llround(d / kDistanceTieResolution));
}

namespace {

Vec3 cross(const Vec3 &a, const Vec3 &b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3 &v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

struct Candidate {
  std::int64_t key;
  int dst;
  std::array<int, 3> image;
  double distance;

  bool operator<(const Candidate &o) const {
    return std::tie(key, dst, image) < std::tie(o.key, o.dst, o.image);
  }
};

} // namespace

NeighborList neighbor_list(const CrystalStructure &s, const GraphConfig &cfg) {
  cfg.validate();
  const auto &L = s.lattice;
  const double vol = volume(L);
  // Images farther than R along a lattice direction are excluded by the
  // perpendicular plane spacing h_a = V / |b x c|.
  std::array<int, 3> reach{};
  for (std::size_t a = 0; a < 3; ++a) {
    const double h = vol / norm(cross(L[(a + 1) % 3], L[(a + 2) % 3]));
    reach[a] = static_cast<int>(std::ceil(cfg.radius / h));
  }

  const auto cart = frac_to_cart(s);
  const std::size_t n = s.sites.size();
  NeighborList out;
  std::vector<Candidate> candidates;
  std::vector<int> isolated;
  for (std::size_t i = 0; i < n; ++i) {
    candidates.clear();
    for (std::size_t j = 0; j < n; ++j) {
      for (int na = -reach[0]; na <= reach[0]; ++na)
        for (int nb = -reach[1]; nb <= reach[1]; ++nb)
          for (int nc = -reach[2]; nc <= reach[2]; ++nc) {
            Vec3 delta{};
            for (std::size_t c = 0; c < 3; ++c)
              delta[c] = cart[j][c] + na * L[0][c] + nb * L[1][c] + nc * L[2][c] - cart[i][c];
            const double d = norm(delta);
            if (d > 0.0 && d <= cfg.radius)
              candidates.push_back({distance_sort_key(d), static_cast<int>(j), {na, nb, nc}, d});
          }
    }
    if (candidates.empty()) {
      isolated.push_back(static_cast<int>(i));
      continue;
    }
    std::sort(candidates.begin(), candidates.end());
    const std::size_t keep = std::min(candidates.size(), static_cast<std::size_t>(cfg.max_neighbors));
    for (std::size_t k = 0; k < keep; ++k) {
      out.edges.push_back({static_cast<int>(i), candidates[k].dst, candidates[k].image});
      out.distances.push_back(candidates[k].distance);
    }
  }
  if (!isolated.empty()) {
    std::string list;
    for (int idx : isolated)
      list += (list.empty() ? "" : ", ") + std::to_string(idx);
    throw Error(ErrorCode::IsolatedAtom,
                fmt::format("structure '{}': no neighbors within {} A for atom(s) {}", s.id,
                            cfg.radius, list));
  }
  return out;
}

std::vector<double> gaussian_expand(std::span<const double> distances, const GraphConfig &cfg) {
  const auto basis = GaussianBasis::from(cfg);
  std::vector<double> out(distances.size() * basis.count);
  for (std::size_t e = 0; e < distances.size(); ++e)
    basis.expand(distances[e], std::span<double>(out.data() + e * basis.count, basis.count));
  return out;
}

NodeFeatures init_node_features(std::span<const int> node_z, NodeFeatureMode mode,
                                const NodeFeatureTable *table) {
  NodeFeatures nf;
  nf.mode = mode;
  if (mode == NodeFeatureMode::LearnedEmbedding) {
    nf.indices.assign(node_z.begin(), node_z.end());
    return nf;
  }
  if (!table)
    throw Error(ErrorCode::InvalidConfig, "external-table node features require a table file");
  nf.width = table->width();
  nf.values.reserve(node_z.size() * nf.width);
  for (int z : node_z) {
    const auto row = table->row(z);
    nf.values.insert(nf.values.end(), row.begin(), row.end());
  }
  return nf;
}

CrystalGraph build_graph(const CrystalStructure &s, const GraphConfig &cfg,
                         const NodeFeatureTable *table) {
  auto nl = neighbor_list(s, cfg);
  CrystalGraph g;
  g.crystal_id = s.id;
  g.n_nodes = s.sites.size();
  for (const auto &site : s.sites)
    g.node_z.push_back(site.z);
  g.node_features = init_node_features(g.node_z, cfg.node_feature_mode, table);
  g.basis = GaussianBasis::from(cfg);
  g.edge_features = gaussian_expand(nl.distances, cfg);
  g.edges = std::move(nl.edges);
  g.distances = std::move(nl.distances);
  g.node_masked.assign(g.n_nodes, 0);
  g.edge_masked.assign(g.edges.size(), 0);
  return g;
}

} // namespace spmat
