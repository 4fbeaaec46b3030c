#include "oracles.hpp"
#include "random_structures.hpp"
#include "spmat/graph.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>

using namespace spmat;
using testing_support::cubic;
using testing_support::random_structure;

namespace {

GraphConfig with_radius(double r, int m = 12) {
  GraphConfig cfg;
  cfg.radius = r;
  cfg.max_neighbors = m;
  return cfg;
}

void expect_matches_oracle(const CrystalStructure &s, const GraphConfig &cfg) {
  const auto nl = neighbor_list(s, cfg);
  const auto ref = oracle::brute_force_neighbors(s, cfg.radius, cfg.max_neighbors);
  ASSERT_EQ(nl.edges.size(), ref.size());
  for (std::size_t e = 0; e < ref.size(); ++e) {
    EXPECT_EQ(nl.edges[e].src, ref[e].src) << e;
    EXPECT_EQ(nl.edges[e].dst, ref[e].dst) << e;
    EXPECT_EQ(nl.edges[e].image, ref[e].image) << e;
    EXPECT_NEAR(nl.distances[e], ref[e].d, 1e-12) << e;
  }
}

} // namespace

TEST(FracToCart, Examples) {
  const auto s = cubic(3.0, {{{0, 0, 0}, 1}, {{0.5, 0.5, 0.5}, 1}});
  const auto r = frac_to_cart(s);
  EXPECT_EQ(r[0], (Vec3{0, 0, 0}));
  EXPECT_EQ(r[1], (Vec3{1.5, 1.5, 1.5}));

  CrystalStructure hex;
  hex.lattice = lattice_from_parameters({2, 2, 3, 90, 90, 120});
  hex.sites = {{{0.25, 0.5, 0}, 6}};
  // 0.25 (2,0,0) + 0.5 (-1, sqrt3, 0) = (0, sqrt3/2, 0)
  const auto h = frac_to_cart(hex)[0];
  EXPECT_NEAR(h[0], 0.0, 1e-12);
  EXPECT_NEAR(h[1], std::sqrt(3.0) / 2, 1e-12);
  EXPECT_NEAR(h[2], 0.0, 1e-12);
}

TEST(NeighborList, SimpleCubicSixNeighbors) {
  const auto s = cubic(3.0, {{{0, 0, 0}, 26}});
  const auto nl = neighbor_list(s, with_radius(4.0));
  ASSERT_EQ(nl.edges.size(), 6u);
  for (double d : nl.distances)
    EXPECT_DOUBLE_EQ(d, 3.0);
  expect_matches_oracle(s, with_radius(4.0));
}

TEST(NeighborList, TieBreakSelectsTwelve) {
  const auto s = cubic(3.0, {{{0, 0, 0}, 26}});
  const auto nl = neighbor_list(s, with_radius(4.5));
  ASSERT_EQ(nl.edges.size(), 12u);
  for (int e = 0; e < 6; ++e)
    EXPECT_DOUBLE_EQ(nl.distances[e], 3.0);
  for (int e = 6; e < 12; ++e)
    EXPECT_NEAR(nl.distances[e], 3.0 * std::numbers::sqrt2, 1e-12);
  // lexicographic images among the twelve face-diagonal candidates
  EXPECT_EQ(nl.edges[6].image, (std::array<int, 3>{-1, -1, 0}));
  EXPECT_EQ(nl.edges[7].image, (std::array<int, 3>{-1, 0, -1}));
  EXPECT_EQ(nl.edges[11].image, (std::array<int, 3>{0, -1, 1}));
  expect_matches_oracle(s, with_radius(4.5));
}

TEST(NeighborList, BodyCenteredTwoAtom) {
  const auto s = cubic(4.0, {{{0, 0, 0}, 11}, {{0.5, 0.5, 0.5}, 17}});
  const auto nl = neighbor_list(s, with_radius(4.0));
  // 8 opposite-species images at 2 sqrt 3, then 4 of the 6 same-species images at 4.0
  ASSERT_EQ(nl.edges.size(), 24u);
  for (std::size_t e = 0; e < 24; ++e) {
    const int anchor = static_cast<int>(e / 12);
    EXPECT_EQ(nl.edges[e].src, anchor);
    if (e % 12 < 8) {
      EXPECT_EQ(nl.edges[e].dst, 1 - anchor);
      EXPECT_NEAR(nl.distances[e], 2 * std::sqrt(3.0), 1e-12);
    } else {
      EXPECT_EQ(nl.edges[e].dst, anchor);
      EXPECT_DOUBLE_EQ(nl.distances[e], 4.0);
    }
  }
  expect_matches_oracle(s, with_radius(4.0));
}

TEST(NeighborList, IsolatedAtom) {
  EXPECT_SPMAT_ERROR(neighbor_list(cubic(3.0, {{{0, 0, 0}, 26}}), with_radius(2.0)),
                     ErrorCode::IsolatedAtom);
}

TEST(NeighborList, RandomStructuresMatchBruteForce) {
  Rng rng(2024);
  for (int t = 0; t < 20; ++t) {
    const auto s = random_structure(rng, 8);
    const double r = std::min(6.0, 2.0 * testing_support::min_height(s.lattice));
    expect_matches_oracle(s, with_radius(r, 12));
  }
}

TEST(NeighborList, TranslationInvariantDistances) {
  Rng rng(99);
  for (int t = 0; t < 10; ++t) {
    auto s = random_structure(rng, 5);
    GraphConfig cfg = with_radius(5.0, 1000);
    auto before = neighbor_list(s, cfg).distances;
    const Vec3 shift{rng.uniform(), rng.uniform(), rng.uniform()};
    for (auto &site : s.sites)
      for (int c = 0; c < 3; ++c)
        site.frac[c] = wrap_fraction(site.frac[c] + shift[c]);
    auto after = neighbor_list(s, cfg).distances;
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t i = 0; i < before.size(); ++i)
      EXPECT_NEAR(before[i], after[i], 1e-9);
  }
}

TEST(Gaussian, Examples) {
  GraphConfig cfg;
  EXPECT_EQ(cfg.num_gaussians(), 41u);
  const double ds[] = {2.0, 2.2, -0.1};
  const auto f = gaussian_expand(ds, cfg);
  EXPECT_DOUBLE_EQ(f[0 * 41 + 10], 1.0);
  EXPECT_NEAR(f[1 * 41 + 10], std::exp(-1.0), 1e-12);
  EXPECT_NEAR(f[2 * 41 + 0], std::exp(-0.25), 1e-12);
  for (std::size_t k = 1; k < 41; ++k)
    EXPECT_LT(f[2 * 41 + k], f[2 * 41]);
}

TEST(Gaussian, RowMaximumAtNearestCenter) {
  GraphConfig cfg;
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const double d = rng.uniform(0, 8);
    const auto f = gaussian_expand(std::span<const double>(&d, 1), cfg);
    const auto best = std::max_element(f.begin(), f.end()) - f.begin();
    EXPECT_EQ(best, std::lround(d / 0.2));
    for (double v : f) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(NodeFeatures, Modes) {
  const int z[] = {26, 8};
  const auto learned = init_node_features(z, NodeFeatureMode::LearnedEmbedding);
  EXPECT_EQ(learned.indices, (std::vector<int>{26, 8}));
  EXPECT_TRUE(learned.values.empty());

  const auto table = NodeFeatureTable::parse("z,f0,f1\n26,0.5,1.5\n8,2,3\n");
  const auto ext = init_node_features(z, NodeFeatureMode::ExternalTable, &table);
  EXPECT_EQ(ext.values, (std::vector<double>{0.5, 1.5, 2, 3}));
  EXPECT_EQ(ext.width, 2u);

  const auto partial = NodeFeatureTable::parse("z,f0\n26,1\n");
  try {
    init_node_features(z, NodeFeatureMode::ExternalTable, &partial);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingTableEntry);
    EXPECT_NE(std::string(e.what()).find('8'), std::string::npos);
  }
}

TEST(BuildGraph, SimpleCubicAndDeterminism) {
  const auto s = cubic(3.0, {{{0, 0, 0}, 26}});
  const auto g = build_graph(s, with_radius(4.0));
  EXPECT_EQ(g.n_nodes, 1u);
  EXPECT_EQ(g.n_edges(), 6u);
  EXPECT_EQ(g.edge_features.size(), 6u * 41u);
  EXPECT_EQ(g, build_graph(s, with_radius(4.0)));
  const auto expect = gaussian_expand(g.distances, with_radius(4.0));
  EXPECT_EQ(g.edge_features, expect);
}

TEST(GraphConfig, Validation) {
  GraphConfig cfg;
  cfg.radius = 0;
  EXPECT_SPMAT_ERROR(cfg.validate(), ErrorCode::InvalidConfig);
  cfg = {};
  cfg.max_neighbors = 0;
  EXPECT_SPMAT_ERROR(cfg.validate(), ErrorCode::InvalidConfig);
  cfg = {};
  cfg.mu_max = cfg.mu_min;
  EXPECT_SPMAT_ERROR(cfg.validate(), ErrorCode::InvalidConfig);
}
