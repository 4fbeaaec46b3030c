#include "spmat/augment.hpp"

#include "spmat/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spmat {

void AugmentConfig::validate() const {
  if (!(atom_mask_fraction >= 0.0 && atom_mask_fraction <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "augment.atom_mask_fraction must be in [0,1]");
  if (!(edge_mask_fraction >= 0.0 && edge_mask_fraction <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "augment.edge_mask_fraction must be in [0,1]");
  if (!(gndn_delta >= 0.0) || !std::isfinite(gndn_delta))
    throw Error(ErrorCode::InvalidConfig, "augment.gndn_delta must be >= 0");
}

AugmentConfig AugmentConfig::disabled() {
  AugmentConfig c;
  c.atom_mask = c.edge_mask = c.gndn = false;
  return c;
}

Rng augment_stream(const StreamKey &key, AugmentKind kind) {
  return Rng(key.seed, {key.epoch, key.sample, key.view, static_cast<std::uint64_t>(kind)});
}

std::size_t mask_count(double fraction, std::size_t n) {
  if (!(fraction > 0.0) || n == 0)
    return 0;
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::min(n, std::max<std::size_t>(1, k));
}

namespace {

// Partial Fisher-Yates: the first k entries are a uniform k-subset.
std::vector<std::size_t> choose(std::size_t n, std::size_t k, Rng &rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

} // namespace

CrystalGraph atom_mask(CrystalGraph g, double fraction, Rng &rng) {
  g.node_masked.resize(g.n_nodes, 0);
  for (auto i : choose(g.n_nodes, mask_count(fraction, g.n_nodes), rng))
    g.node_masked[i] = 1;
  return g;
}

CrystalGraph edge_mask(CrystalGraph g, double fraction, Rng &rng) {
  g.edge_masked.resize(g.n_edges(), 0);
  const std::size_t k = g.basis.count;
  for (auto e : choose(g.n_edges(), mask_count(fraction, g.n_edges()), rng)) {
    g.edge_masked[e] = 1;
    std::fill_n(g.edge_features.begin() + static_cast<std::ptrdiff_t>(e * k), k, 0.0);
  }
  return g;
}

CrystalGraph gndn(CrystalGraph g, double delta, Rng &rng) {
  if (delta == 0.0)
    return g;
  g.edge_masked.resize(g.n_edges(), 0);
  const std::size_t k = g.basis.count;
  for (std::size_t e = 0; e < g.n_edges(); ++e) {
    g.distances[e] += rng.uniform(-delta, delta);
    if (!g.edge_masked[e])
      g.basis.expand(g.distances[e], std::span<double>(g.edge_features.data() + e * k, k));
  }
  return g;
}

CrystalGraph make_view(const CrystalGraph &g, const AugmentConfig &cfg, const StreamKey &key) {
  CrystalGraph v = g;
  if (cfg.atom_mask) {
    auto rng = augment_stream(key, AugmentKind::AtomMask);
    v = atom_mask(std::move(v), cfg.atom_mask_fraction, rng);
  }
  if (cfg.edge_mask) {
    auto rng = augment_stream(key, AugmentKind::EdgeMask);
    v = edge_mask(std::move(v), cfg.edge_mask_fraction, rng);
  }
  if (cfg.gndn) {
    auto rng = augment_stream(key, AugmentKind::Gndn);
    v = gndn(std::move(v), cfg.gndn_delta, rng);
  }
  return v;
}

std::pair<CrystalGraph, CrystalGraph> make_views(const CrystalGraph &g, const AugmentConfig &cfg,
                                                 std::uint64_t seed, std::uint64_t epoch,
                                                 std::uint64_t sample) {
  return {make_view(g, cfg, {seed, epoch, sample, 0}), make_view(g, cfg, {seed, epoch, sample, 1})};
}

} // namespace spmat
