#include "spmat/manifest.hpp"

#include "spmat/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>

namespace spmat {

std::string_view to_string(Split s) {
  switch (s) {
  case Split::Train: return "train";
  case Split::Val: return "val";
  case Split::Test: return "test";
  }
  return "";
}

int DatasetManifest::num_classes() const {
  int k = 0;
  for (const auto &r : records)
    if (r.surrogate_label)
      k = std::max(k, *r.surrogate_label + 1);
  return k;
}

bool DatasetManifest::has_split_column() const {
  return std::any_of(records.begin(), records.end(), [](const auto &r) { return r.split.has_value(); });
}

std::optional<std::size_t> DatasetManifest::find(std::string_view id) const {
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].id == id)
      return i;
  return std::nullopt;
}

void validate(const DatasetManifest &m) {
  std::set<std::string_view> ids;
  std::set<int> labels;
  for (const auto &r : m.records) {
    if (!ids.insert(r.id).second)
      throw Error(ErrorCode::DuplicateId, r.id);
    if (r.surrogate_label)
      labels.insert(*r.surrogate_label);
  }
  int expected = 0;
  for (int label : labels) {
    if (label != expected)
      throw Error(ErrorCode::NonContiguousLabels,
                  fmt::format("surrogate labels must cover 0..{} without gaps; missing {}",
                              labels.size() - 1, expected));
    ++expected;
  }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

} // namespace

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path &base_dir) {
  static const std::vector<std::string_view> kColumns = {"id", "cif_path", "surrogate_label",
                                                         "target", "split"};
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  DatasetManifest m;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (!header_seen) {
      if (view.starts_with("\xEF\xBB\xBF"))
        view.remove_prefix(3);
      const auto header = split_fields(view);
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        if (c >= header.size() || trim(header[c]) != kColumns[c])
          throw Error(ErrorCode::MissingColumn,
                      fmt::format("manifest header must be '{}'; column '{}' missing",
                                  kManifestHeader, kColumns[c]));
      }
      if (header.size() != kColumns.size())
        throw Error(ErrorCode::MissingColumn,
                    fmt::format("manifest header must be exactly '{}'", kManifestHeader));
      header_seen = true;
      continue;
    }
    if (view.empty())
      continue;
    const auto fields = split_fields(view);
    if (fields.size() != kColumns.size())
      throw Error(ErrorCode::MissingColumn,
                  fmt::format("line {}: expected {} fields, found {}", line_no, kColumns.size(),
                              fields.size()));
    ManifestRecord r;
    r.id = std::string(trim(fields[0]));
    if (r.id.empty())
      throw Error(ErrorCode::MissingColumn, fmt::format("line {}: empty id", line_no));
    const auto path = trim(fields[1]);
    if (path.empty())
      throw Error(ErrorCode::MissingColumn, fmt::format("line {}: empty cif_path", line_no));
    r.cif_path = std::filesystem::path(std::string(path));
    if (r.cif_path.is_relative())
      r.cif_path = base_dir / r.cif_path;

    if (const auto label = trim(fields[2]); !label.empty()) {
      int value = -1;
      auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), value);
      if (ec != std::errc() || ptr != label.data() + label.size() || value < 0)
        throw Error(ErrorCode::MalformedNumber,
                    fmt::format("line {}: surrogate_label '{}'", line_no, label));
      r.surrogate_label = value;
    }
    if (const auto target = trim(fields[3]); !target.empty()) {
      double value = 0.0;
      const char *first = target.data();
      if (*first == '+')
        ++first;
      auto [ptr, ec] = std::from_chars(first, target.data() + target.size(), value);
      if (ec != std::errc() || ptr != target.data() + target.size() || !std::isfinite(value))
        throw Error(ErrorCode::MalformedNumber, fmt::format("line {}: target '{}'", line_no, target));
      r.target = value;
    }
    if (const auto split = trim(fields[4]); !split.empty()) {
      if (split == "train")
        r.split = Split::Train;
      else if (split == "val")
        r.split = Split::Val;
      else if (split == "test")
        r.split = Split::Test;
      else
        throw Error(ErrorCode::InvalidConfig, fmt::format("line {}: split '{}'", line_no, split));
    }
    m.records.push_back(std::move(r));
  }
  if (!header_seen)
    throw Error(ErrorCode::MissingColumn, "manifest is empty; header missing");
  validate(m);
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, fmt::format("cannot open manifest {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

std::string format_manifest(const DatasetManifest &m, const std::filesystem::path &base_dir) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto &r : m.records) {
    auto path = r.cif_path;
    if (!base_dir.empty() && path.is_absolute() == base_dir.is_absolute()) {
      const auto rel = path.lexically_relative(base_dir);
      if (!rel.empty() && !rel.string().starts_with(".."))
        path = rel;
    }
    out += fmt::format("{},{},{},{},{}\n", r.id, path.generic_string(),
                       r.surrogate_label ? std::to_string(*r.surrogate_label) : "",
                       r.target ? fmt::format("{:.17g}", *r.target) : "",
                       r.split ? to_string(*r.split) : "");
  }
  return out;
}

void save_manifest(const std::filesystem::path &path, const DatasetManifest &m) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Io, fmt::format("cannot write manifest {}", path.string()));
  out << format_manifest(m, path.parent_path());
}

} // namespace spmat
