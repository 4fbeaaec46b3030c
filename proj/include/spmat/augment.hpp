#pragma once

#include "spmat/graph.hpp"
#include "spmat/rng.hpp"

#include <cstdint>
#include <utility>

namespace spmat {

struct AugmentConfig {
  double atom_mask_fraction = 0.10;
  double edge_mask_fraction = 0.10;
  double gndn_delta = 0.5; ///< Angstrom
  bool atom_mask = true;
  bool edge_mask = true;
  bool gndn = true;

  void validate() const;
  static AugmentConfig disabled();
};

enum class AugmentKind : std::uint64_t { AtomMask = 1, EdgeMask = 2, Gndn = 3 };

/// Identifies one augmentation draw. The stream for a key is a pure function
/// of the tuple, so views can be generated in any order or on any thread.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t sample = 0;
  std::uint64_t view = 0;
};

Rng augment_stream(const StreamKey &key, AugmentKind kind);

/// max(1, round(fraction * n)) when fraction > 0 and n >= 1, else 0; capped at n.
std::size_t mask_count(double fraction, std::size_t n);

CrystalGraph atom_mask(CrystalGraph g, double fraction, Rng &rng);
CrystalGraph edge_mask(CrystalGraph g, double fraction, Rng &rng);
/// d' = d + U(-delta, delta) per edge, features re-expanded from d'. Edges
/// that are already masked keep zero features.
CrystalGraph gndn(CrystalGraph g, double delta, Rng &rng);

/// atom mask -> edge mask -> GNDN, each with its own stream derived from key.
CrystalGraph make_view(const CrystalGraph &g, const AugmentConfig &cfg, const StreamKey &key);
std::pair<CrystalGraph, CrystalGraph> make_views(const CrystalGraph &g, const AugmentConfig &cfg,
                                                 std::uint64_t seed, std::uint64_t epoch,
                                                 std::uint64_t sample);

} // namespace spmat
