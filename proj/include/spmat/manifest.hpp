#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spmat {

enum class Split { Train, Val, Test };

std::string_view to_string(Split s);

struct ManifestRecord {
  std::string id;
  std::filesystem::path cif_path;
  std::optional<int> surrogate_label;
  std::optional<double> target;
  std::optional<Split> split;

  bool operator==(const ManifestRecord &) const = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  /// K, the number of surrogate classes (0 when no record carries a label).
  int num_classes() const;
  bool has_split_column() const;
  /// Index of the record with this id, or nullopt.
  std::optional<std::size_t> find(std::string_view id) const;

  bool operator==(const DatasetManifest &) const = default;
};

inline constexpr std::string_view kManifestHeader = "id,cif_path,surrogate_label,target,split";

/// Checks id uniqueness and label contiguity.
void validate(const DatasetManifest &m);

/// Parses manifest CSV text; relative cif paths are resolved against base_dir.
DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path &base_dir);
DatasetManifest load_manifest(const std::filesystem::path &path);

/// Serializes with cif paths written relative to base_dir when possible.
std::string format_manifest(const DatasetManifest &m, const std::filesystem::path &base_dir);
void save_manifest(const std::filesystem::path &path, const DatasetManifest &m);

} // namespace spmat
