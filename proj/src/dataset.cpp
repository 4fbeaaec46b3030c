#include "spmat/dataset.hpp"

#include "spmat/elements.hpp"
#include "spmat/error.hpp"
#include "spmat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace spmat {

Dataset load_dataset(const DatasetManifest &manifest, std::size_t workers) {
  validate(manifest);
  Dataset d;
  d.manifest = manifest;
  d.structures.resize(manifest.records.size());
  parallel_for(manifest.records.size(), workers, [&](std::size_t i) {
    auto s = read_cif(manifest.records[i].cif_path);
    s.id = manifest.records[i].id;
    d.structures[i] = std::move(s);
  });
  return d;
}

Dataset load_dataset(const std::filesystem::path &manifest_path, std::size_t workers) {
  return load_dataset(load_manifest(manifest_path), workers);
}

Dataset to_dataset(const SyntheticDataset &synthetic) {
  return {synthetic.manifest, synthetic.structures};
}

std::vector<CrystalGraph> build_graphs(const Dataset &data, std::span<const std::size_t> indices,
                                       const GraphConfig &cfg, const NodeFeatureTable *table,
                                       std::size_t workers) {
  std::vector<CrystalGraph> out(indices.size());
  parallel_for(indices.size(), workers, [&](std::size_t k) {
    out[k] = build_graph(data.structures.at(indices[k]), cfg, table);
  });
  return out;
}

ElementStats element_stats(std::span<const CrystalStructure> structures) {
  ElementStats st;
  for (const auto &s : structures)
    for (const auto &site : s.sites) {
      ++st.counts[site.z];
      ++st.total;
    }
  for (const auto &[z, c] : st.counts) {
    const double p = static_cast<double>(c) / static_cast<double>(st.total);
    st.entropy -= p * std::log(p);
  }
  return st;
}

std::string format_element_stats(const ElementStats &stats) {
  std::vector<std::pair<int, std::size_t>> rows(stats.counts.begin(), stats.counts.end());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  std::string out = "symbol,z,count,fraction\n";
  for (const auto &[z, c] : rows)
    out += fmt::format("{},{},{},{:.17g}\n", element_symbol(z), z, c,
                       static_cast<double>(c) / static_cast<double>(stats.total));
  return out;
}

} // namespace spmat
