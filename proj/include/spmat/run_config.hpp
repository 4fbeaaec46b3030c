#pragma once

#include "spmat/synthetic.hpp"
#include "spmat/train.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spmat {

/// Everything a command can be configured with, addressed by dotted keys
/// (loss.kind, augment.gndn_delta, train.batch_size, synth.n_crystals, ...).
struct RunConfig {
  TrainConfig train;
  SyntheticConfig synth;
  std::optional<std::filesystem::path> manifest;

  /// Throws UnknownKey for a key outside the table, InvalidConfig for a bad value.
  void set(std::string_view key, std::string_view value);
  /// Validates every section.
  void validate() const;
};

/// Key/value pairs of a config file; `#` starts a comment.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text);
/// Splits a `key=value` override.
std::pair<std::string, std::string> parse_override(std::string_view kv);

/// File contents first, then overrides in order (later wins), then validation.
RunConfig build_run_config(const std::optional<std::filesystem::path> &file,
                           const std::vector<std::string> &overrides);

std::vector<std::string> config_keys();

} // namespace spmat
