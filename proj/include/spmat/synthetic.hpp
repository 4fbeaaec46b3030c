#pragma once

#include "spmat/manifest.hpp"
#include "spmat/structure.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace spmat {

struct SyntheticConfig {
  std::size_t n_crystals = 512;
  int n_classes = 2;
  std::size_t max_atoms = 6;
  double target_noise = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Sixteen elements; even palette slots hold light elements and odd slots
/// heavy ones, so with two classes the surrogate label tracks mean Z.
inline constexpr std::array<int, 16> kSyntheticPalette = {3,  55, 11, 56, 12, 57, 13, 74,
                                                          14, 78, 8,  79, 9,  82, 16, 83};

inline constexpr double kMinSeparation = 1.0;

struct SyntheticDataset {
  std::vector<CrystalStructure> structures;
  /// cif_path entries are "cif/<id>.cif", relative to wherever the set is written.
  DatasetManifest manifest;
};

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig &cfg);

/// Noise-free target: a smooth function of mean atomic number and cell volume.
double synthetic_target(const CrystalStructure &s);

/// Class of a structure: palette index of its modal element, modulo n_classes.
/// Ties between equally frequent elements go to the lower palette index.
int synthetic_label(const CrystalStructure &s, int n_classes);

} // namespace spmat
