#include "spmat/synthetic.hpp"

#include "spmat/error.hpp"
#include "spmat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace spmat {

void SyntheticConfig::validate() const {
  if (n_classes < 2)
    throw Error(ErrorCode::InvalidConfig, "synth.n_classes must be >= 2");
  if (n_classes > static_cast<int>(kSyntheticPalette.size()))
    throw Error(ErrorCode::InvalidConfig, "synth.n_classes must be <= 16 (palette size)");
  if (n_crystals < static_cast<std::size_t>(n_classes))
    throw Error(ErrorCode::InvalidConfig, "synth.n_crystals must be >= synth.n_classes");
  if (max_atoms < 2)
    throw Error(ErrorCode::InvalidConfig, "synth.max_atoms must be >= 2");
  if (!(target_noise >= 0.0) || !std::isfinite(target_noise))
    throw Error(ErrorCode::InvalidConfig, "synth.target_noise must be >= 0");
}

double synthetic_target(const CrystalStructure &s) {
  double mean_z = 0.0;
  for (const auto &site : s.sites)
    mean_z += site.z;
  mean_z /= static_cast<double>(s.sites.size());
  return 0.04 * mean_z + 0.5 * std::log(volume(s.lattice));
}

int synthetic_label(const CrystalStructure &s, int n_classes) {
  std::array<int, kSyntheticPalette.size()> counts{};
  for (const auto &site : s.sites) {
    const auto it = std::find(kSyntheticPalette.begin(), kSyntheticPalette.end(), site.z);
    if (it != kSyntheticPalette.end())
      ++counts[static_cast<std::size_t>(it - kSyntheticPalette.begin())];
  }
  const auto modal = std::max_element(counts.begin(), counts.end()) - counts.begin();
  return static_cast<int>(modal % n_classes);
}

namespace {

double min_image_distance(const Mat3 &lattice, const Vec3 &a, const Vec3 &b) {
  // orthorhombic cells only: the minimum image is found per axis
  double d2 = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    double df = a[k] - b[k];
    df -= std::round(df);
    const double dx = df * lattice[k][k];
    d2 += dx * dx;
  }
  return std::sqrt(d2);
}

constexpr int kPlacementAttempts = 1000;

} // namespace

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig &cfg) {
  cfg.validate();
  SyntheticDataset out;
  Rng rng(cfg.seed, {0x5c11u});
  const std::size_t n_palette = kSyntheticPalette.size();
  for (std::size_t n = 0; n < cfg.n_crystals; ++n) {
    CrystalStructure s;
    s.id = fmt::format("synth-{:05d}", n);
    for (std::size_t k = 0; k < 3; ++k)
      s.lattice[k][k] = rng.uniform(3.0, 8.0);

    const std::size_t n_atoms = 2 + static_cast<std::size_t>(rng.below(cfg.max_atoms - 1));
    // The first n_classes crystals are single-element members of class n so
    // that every label in 0..K-1 occurs.
    const auto k = static_cast<std::size_t>(cfg.n_classes);
    const bool seed_class = n < k;
    const std::size_t dominant =
        seed_class ? n + k * static_cast<std::size_t>(rng.below((n_palette - n + k - 1) / k))
                   : static_cast<std::size_t>(rng.below(n_palette));
    for (std::size_t a = 0; a < n_atoms; ++a) {
      Site site;
      // most atoms share one dominant element so the modal element is well defined
      const bool use_dominant = seed_class || a == 0 || rng.uniform() < 0.6;
      site.z = kSyntheticPalette[use_dominant ? dominant : static_cast<std::size_t>(rng.below(n_palette))];
      bool placed = false;
      for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
        for (auto &f : site.frac)
          f = rng.uniform();
        placed = std::all_of(s.sites.begin(), s.sites.end(), [&](const Site &other) {
          return min_image_distance(s.lattice, site.frac, other.frac) >= kMinSeparation;
        });
      }
      if (!placed)
        throw Error(ErrorCode::PlacementFailure,
                    fmt::format("{}: could not place atom {} after {} attempts", s.id, a,
                                kPlacementAttempts));
      s.sites.push_back(site);
    }

    ManifestRecord r;
    r.id = s.id;
    r.cif_path = std::filesystem::path("cif") / (s.id + ".cif");
    r.surrogate_label = synthetic_label(s, cfg.n_classes);
    const double noise = cfg.target_noise > 0.0 ? cfg.target_noise * rng.normal() : 0.0;
    r.target = synthetic_target(s) + noise;
    out.manifest.records.push_back(std::move(r));
    out.structures.push_back(std::move(s));
  }
  return out;
}

} // namespace spmat
