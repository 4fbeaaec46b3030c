#pragma once

#include "spmat/losses.hpp"
#include "spmat/model.hpp"
#include "spmat/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace spmat {

inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'M', 'A', 'T', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string phase = "pretrain"; ///< pretrain | finetune
  std::uint64_t epoch = 0;
  std::string loss_kind;       ///< pretraining objective, if any
  std::string surrogate_label = "surrogate_label";
  std::string task;            ///< finetune: regression | classification
  double target_mean = 0.0;
  double target_std = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;      ///< optimizer steps taken; with seed, the RNG cursor

  bool operator==(const CheckpointMeta &) const = default;
};

struct Checkpoint {
  ModelConfig model;
  ModelParams params;
  std::optional<AdamState> optimizer;
  CheckpointMeta meta;
};

/// Tensors are stored as little-endian float32; doubles are rounded on save.
void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::filesystem::path &path);

std::string serialize_checkpoint(const Checkpoint &ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Rounds every tensor entry through float32, as a save/load would.
void round_to_float(ModelParams &params);

} // namespace spmat
