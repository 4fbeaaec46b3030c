#pragma once

#include "spmat/augment.hpp"
#include "spmat/checkpoint.hpp"
#include "spmat/dataset.hpp"
#include "spmat/graph.hpp"
#include "spmat/losses.hpp"
#include "spmat/model.hpp"
#include "spmat/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spmat {

enum class Phase { Pretrain, Finetune };

std::string to_string(Task t);
Task parse_task(std::string_view s);

struct TrainConfig {
  LossConfig loss;
  AugmentConfig augment;
  GraphConfig graph;
  ModelConfig model;
  /// Unset values take the phase default: pretrain batch 256 for the
  /// contrastive losses and 128 otherwise, 15 epochs, lr 1e-5; finetune batch
  /// 128, 200 epochs, lr 1e-3.
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  double weight_decay = 1e-6;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double pretrain_eval_fraction = 0.05;
  double val_fraction = 0.10;
  double test_fraction = 0.20;
  std::size_t eval_every_steps = 50;
  Task task = Task::Regression;
  /// Graph/view building threads; results are identical for any count.
  std::size_t workers = 1;
  /// Required when graph.node_feature_mode is the external table.
  std::filesystem::path node_feature_table;

  void validate() const;
  std::size_t batch_size_for(Phase p) const;
  std::size_t epochs_for(Phase p) const;
  double lr_for(Phase p) const;
  AdamConfig adam_for(Phase p) const;
  /// Model config with input widths taken from the graph featurization.
  ModelConfig resolved_model(const NodeFeatureTable *table) const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val; ///< held-out evaluation set during pretraining
  std::vector<std::size_t> test;
};

/// Honors the manifest split column when present (records without a split are
/// left out); otherwise a seeded shuffle cut 95/5 (pretrain) or 70/10/20.
SplitIndices split_dataset(const DatasetManifest &manifest, Phase phase, std::uint64_t seed,
                           const TrainConfig &cfg = {});

struct LogRow {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::string phase;
  double loss = 0.0;
  std::string metric_name;
  std::optional<double> metric_value;

  bool operator==(const LogRow &) const = default;
};

inline constexpr std::string_view kLogHeader = "step,epoch,phase,loss,metric_name,metric_value";
std::string format_log(const std::vector<LogRow> &rows);

struct PretrainResult {
  Checkpoint checkpoint; ///< final state, optimizer included
  std::vector<LogRow> log;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_eval_loss;
};

/// When out_dir is given, writes pretrain_log.csv, pretrain_epoch<e>.ckpt per
/// epoch and pretrain_final.ckpt.
PretrainResult pretrain(const Dataset &data, const TrainConfig &cfg,
                        const std::optional<std::filesystem::path> &out_dir = std::nullopt);

struct Metrics {
  std::optional<double> mae;
  std::optional<double> accuracy;
  double loss = 0.0; ///< MSE on standardized targets or mean logistic loss
  std::size_t count = 0;
};

double mean_absolute_error(std::span<const double> predictions, std::span<const double> targets);
double binary_accuracy(std::span<const double> logits, std::span<const double> labels);

struct FinetuneResult {
  Checkpoint best; ///< best-validation parameters
  Metrics val;
  Metrics test;
  std::size_t best_epoch = 0;
  std::vector<LogRow> log;
};

/// Starts from the encoder of `init` (projection discarded) or from random
/// weights when none. When out_dir is given, writes finetune_log.csv,
/// finetune_best.ckpt and metrics.csv.
FinetuneResult finetune(const Dataset &data, const std::optional<Checkpoint> &init,
                        const TrainConfig &cfg,
                        const std::optional<std::filesystem::path> &out_dir = std::nullopt);

/// Head outputs in original units (regression) or logits (classification).
std::vector<double> predict(const Checkpoint &ckpt, std::span<const CrystalGraph> graphs,
                            std::size_t batch_size = 128);
/// Metrics of a fine-tuned checkpoint on the given records.
Metrics evaluate(const Checkpoint &ckpt, const Dataset &data, std::span<const std::size_t> indices,
                 const TrainConfig &cfg);
/// Projection-head embeddings of un-augmented graphs, one row per graph.
Tensor embed(const Checkpoint &ckpt, std::span<const CrystalGraph> graphs,
             std::size_t batch_size = 128);

std::string format_metrics(const FinetuneResult &r, Task task);

} // namespace spmat
