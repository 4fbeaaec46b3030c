#pragma once

#include "spmat/graph.hpp"
#include "spmat/manifest.hpp"
#include "spmat/structure.hpp"
#include "spmat/synthetic.hpp"

#include <map>
#include <span>
#include <vector>

namespace spmat {

/// Manifest records with their parsed structures, index-aligned.
struct Dataset {
  DatasetManifest manifest;
  std::vector<CrystalStructure> structures;

  std::size_t size() const { return structures.size(); }
};

/// Reads every CIF named by the manifest; structure ids are the record ids.
Dataset load_dataset(const DatasetManifest &manifest, std::size_t workers = 1);
Dataset load_dataset(const std::filesystem::path &manifest_path, std::size_t workers = 1);
Dataset to_dataset(const SyntheticDataset &synthetic);

/// Graphs for the selected records, in the order of `indices`.
std::vector<CrystalGraph> build_graphs(const Dataset &data, std::span<const std::size_t> indices,
                                       const GraphConfig &cfg, const NodeFeatureTable *table,
                                       std::size_t workers = 1);

struct ElementStats {
  std::map<int, std::size_t> counts; ///< per atomic number, one per site
  std::size_t total = 0;
  double entropy = 0.0; ///< -sum p ln p, natural log
};

ElementStats element_stats(std::span<const CrystalStructure> structures);
/// `symbol,z,count,fraction` rows sorted by count descending, then Z ascending.
std::string format_element_stats(const ElementStats &stats);

} // namespace spmat
