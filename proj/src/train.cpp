#include "spmat/train.hpp"

#include "spmat/error.hpp"
#include "spmat/parallel.hpp"
#include "spmat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numeric>

namespace spmat {

namespace {

// Stream tags keep shuffles independent of augmentation and init draws.
constexpr std::uint64_t kSplitStream = 0x5350'4c49'5400ULL;
constexpr std::uint64_t kShuffleStream = 0x5348'5546'4600ULL;

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, {kShuffleStream, epoch});
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

std::vector<std::pair<std::string, Tensor>> named_grads(const BoundParams &bp, const Gradients &g) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto &[name, var] : bp.vars())
    if (var.requires_grad())
      out.emplace_back(name, g[var]);
  return out;
}

std::unique_ptr<NodeFeatureTable> load_table(const TrainConfig &cfg) {
  if (cfg.graph.node_feature_mode != NodeFeatureMode::ExternalTable)
    return nullptr;
  return std::make_unique<NodeFeatureTable>(NodeFeatureTable::load(cfg.node_feature_table));
}

double mean_of(const std::vector<double> &v) {
  double s = 0;
  for (double x : v)
    s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

template <class T> std::vector<T> pick(const std::vector<T> &v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx)
    out.push_back(v[i]);
  return out;
}

/// Two views per sample, interleaved as (s0 v0, s0 v1, s1 v0, ...).
std::vector<CrystalGraph> view_batch(const std::vector<CrystalGraph> &graphs,
                                     std::span<const std::size_t> positions,
                                     std::span<const std::size_t> sample_ids, const TrainConfig &cfg,
                                     std::uint64_t epoch) {
  std::vector<CrystalGraph> views(2 * positions.size());
  parallel_for(positions.size(), cfg.workers, [&](std::size_t k) {
    auto [a, b] = make_views(graphs[positions[k]], cfg.augment, cfg.seed, epoch,
                             sample_ids[positions[k]]);
    views[2 * k] = std::move(a);
    views[2 * k + 1] = std::move(b);
  });
  return views;
}

struct PretrainBatch {
  double loss;
  std::vector<std::pair<std::string, Tensor>> grads;
};

PretrainBatch pretrain_batch(const ModelParams &params, const ModelConfig &model,
                             const LossConfig &loss_cfg, std::span<const CrystalGraph> views,
                             std::span<const int> labels, bool with_grads) {
  Tape tape;
  BoundParams bp(tape, params, [&](const std::string &) { return with_grads; });
  const auto batch = collate(views);
  const auto z = project(bp, encode(bp, model, batch));
  const auto loss = pretrain_loss(z, labels, loss_cfg);
  PretrainBatch out{loss.value().item(), {}};
  if (with_grads)
    out.grads = named_grads(bp, tape.backward(loss));
  return out;
}

/// Chunks of `order` of size bs; a trailing chunk smaller than min_size is dropped.
std::vector<std::span<const std::size_t>> chunks(const std::vector<std::size_t> &order,
                                                 std::size_t bs, std::size_t min_size) {
  std::vector<std::span<const std::size_t>> out;
  for (std::size_t at = 0; at < order.size(); at += bs) {
    const std::size_t n = std::min(bs, order.size() - at);
    if (n >= min_size)
      out.emplace_back(order.data() + at, n);
  }
  return out;
}

std::vector<double> head_outputs(const ModelParams &params, const ModelConfig &model,
                                 std::span<const CrystalGraph> graphs, std::size_t bs) {
  std::vector<double> out;
  out.reserve(graphs.size());
  for (std::size_t at = 0; at < graphs.size(); at += bs) {
    const auto part = graphs.subspan(at, std::min(bs, graphs.size() - at));
    Tape tape;
    BoundParams bp(tape, params, [](const std::string &) { return false; });
    const auto y = head_forward(bp, encode(bp, model, collate(part)));
    for (double v : y.value().values())
      out.push_back(v);
  }
  return out;
}

double logistic_loss(double logit, double y) {
  // softplus(l) - y l, stable form
  const double sp = logit > 0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
  return sp - y * logit;
}

Metrics score(std::span<const double> raw, std::span<const double> targets, Task task, double mean,
              double sd) {
  Metrics m;
  m.count = raw.size();
  if (raw.empty())
    return m;
  double loss = 0;
  if (task == Task::Regression) {
    std::vector<double> pred(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      pred[i] = raw[i] * sd + mean;
      const double r = raw[i] - (targets[i] - mean) / sd;
      loss += r * r;
    }
    m.mae = mean_absolute_error(pred, targets);
  } else {
    for (std::size_t i = 0; i < raw.size(); ++i)
      loss += logistic_loss(raw[i], targets[i]);
    m.accuracy = binary_accuracy(raw, targets);
  }
  m.loss = loss / static_cast<double>(raw.size());
  return m;
}

void check_targets(const Dataset &data, std::span<const std::size_t> idx, Task task) {
  for (auto i : idx) {
    const auto &r = data.manifest.records[i];
    if (!r.target)
      throw Error(ErrorCode::MissingTarget, fmt::format("record '{}' has no target", r.id));
    if (task == Task::BinaryClassification && *r.target != 0.0 && *r.target != 1.0)
      throw Error(ErrorCode::MissingTarget,
                  fmt::format("record '{}': classification target must be 0 or 1, got {}", r.id,
                              *r.target));
  }
}

} // namespace

std::string to_string(Task t) { return t == Task::Regression ? "regression" : "classification"; }

Task parse_task(std::string_view s) {
  if (s == "regression")
    return Task::Regression;
  if (s == "classification" || s == "binary-classification")
    return Task::BinaryClassification;
  throw Error(ErrorCode::InvalidConfig,
              fmt::format("task '{}' (expected regression, classification)", s));
}

void TrainConfig::validate() const {
  loss.validate();
  augment.validate();
  graph.validate();
  model.validate();
  if (batch_size && *batch_size < 2)
    throw Error(ErrorCode::InvalidConfig,
                fmt::format("train.batch_size must be >= 2, got {}", *batch_size));
  if (epochs && *epochs < 1)
    throw Error(ErrorCode::InvalidConfig, "train.epochs must be >= 1");
  for (auto f : {pretrain_eval_fraction, val_fraction, test_fraction})
    if (!(f > 0 && f < 1))
      throw Error(ErrorCode::InvalidConfig, fmt::format("split fraction {} not in (0, 1)", f));
  if (!(val_fraction + test_fraction < 1))
    throw Error(ErrorCode::InvalidConfig, "val + test fractions must be < 1");
  if (eval_every_steps < 1)
    throw Error(ErrorCode::InvalidConfig, "train.eval_every_steps must be >= 1");
  if (workers < 1)
    throw Error(ErrorCode::InvalidConfig, "train.workers must be >= 1");
  if (graph.node_feature_mode == NodeFeatureMode::ExternalTable && node_feature_table.empty())
    throw Error(ErrorCode::InvalidConfig, "external node features need graph.node_feature_table");
  adam_for(Phase::Pretrain).validate();
  adam_for(Phase::Finetune).validate();
}

std::size_t TrainConfig::batch_size_for(Phase p) const {
  if (batch_size)
    return *batch_size;
  if (p == Phase::Finetune)
    return 128;
  return loss.kind == LossKind::SupCon || loss.kind == LossKind::NtXent ? 256 : 128;
}

std::size_t TrainConfig::epochs_for(Phase p) const {
  return epochs ? *epochs : (p == Phase::Pretrain ? 15 : 200);
}

double TrainConfig::lr_for(Phase p) const { return lr ? *lr : (p == Phase::Pretrain ? 1e-5 : 1e-3); }

AdamConfig TrainConfig::adam_for(Phase p) const {
  return {lr_for(p), adam_beta1, adam_beta2, adam_eps, weight_decay};
}

ModelConfig TrainConfig::resolved_model(const NodeFeatureTable *table) const {
  ModelConfig m = model;
  m.edge_feature_dim = graph.num_gaussians();
  m.node_mode = graph.node_feature_mode;
  m.node_feature_dim = table ? table->width() : 0;
  return m;
}

SplitIndices split_dataset(const DatasetManifest &manifest, Phase phase, std::uint64_t seed,
                           const TrainConfig &cfg) {
  if (manifest.records.empty())
    throw Error(ErrorCode::EmptySplit, "manifest has no records");
  SplitIndices out;
  if (manifest.has_split_column()) {
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
      const auto &s = manifest.records[i].split;
      if (!s)
        continue;
      if (*s == Split::Train)
        out.train.push_back(i);
      else if (*s == Split::Val)
        out.val.push_back(i);
      else if (phase == Phase::Finetune)
        out.test.push_back(i);
    }
  } else {
    std::vector<std::size_t> order(manifest.records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed, {kSplitStream});
    rng.shuffle(std::span<std::size_t>(order));
    const double n = static_cast<double>(order.size());
    if (phase == Phase::Pretrain) {
      const auto n_eval = static_cast<std::size_t>(std::llround(n * cfg.pretrain_eval_fraction));
      out.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_eval));
      out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_eval), order.end());
    } else {
      const auto n_val = static_cast<std::size_t>(std::llround(n * cfg.val_fraction));
      const auto n_test = std::min(order.size() - n_val,
                                   static_cast<std::size_t>(std::llround(n * cfg.test_fraction)));
      auto it = order.begin();
      out.val.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
      it += static_cast<std::ptrdiff_t>(n_val);
      out.test.assign(it, it + static_cast<std::ptrdiff_t>(n_test));
      it += static_cast<std::ptrdiff_t>(n_test);
      out.train.assign(it, order.end());
    }
  }
  const auto require = [](const std::vector<std::size_t> &v, std::string_view name) {
    if (v.empty())
      throw Error(ErrorCode::EmptySplit, fmt::format("{} split is empty", name));
  };
  require(out.train, "train");
  require(out.val, phase == Phase::Pretrain ? "held-out" : "val");
  if (phase == Phase::Finetune)
    require(out.test, "test");
  return out;
}

std::string format_log(const std::vector<LogRow> &rows) {
  std::string out(kLogHeader);
  out += '\n';
  for (const auto &r : rows)
    out += fmt::format("{},{},{},{:.17g},{},{}\n", r.step, r.epoch, r.phase, r.loss, r.metric_name,
                       r.metric_value ? fmt::format("{:.17g}", *r.metric_value) : std::string());
  return out;
}

double mean_absolute_error(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw Error(ErrorCode::ShapeMismatch, "mae: prediction and target counts differ");
  if (predictions.empty())
    return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    s += std::abs(predictions[i] - targets[i]);
  return s / static_cast<double>(predictions.size());
}

double binary_accuracy(std::span<const double> logits, std::span<const double> labels) {
  if (logits.size() != labels.size())
    throw Error(ErrorCode::ShapeMismatch, "accuracy: logit and label counts differ");
  if (logits.empty())
    return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    hit += ((logits[i] >= 0) == (labels[i] >= 0.5)) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(logits.size());
}

PretrainResult pretrain(const Dataset &data, const TrainConfig &cfg,
                        const std::optional<std::filesystem::path> &out_dir) {
  cfg.validate();
  const auto table = load_table(cfg);
  const ModelConfig model = cfg.resolved_model(table.get());
  const auto split = split_dataset(data.manifest, Phase::Pretrain, cfg.seed, cfg);
  if (cfg.loss.needs_labels())
    for (const auto *part : {&split.train, &split.val})
      for (auto i : *part)
        if (!data.manifest.records[i].surrogate_label)
          throw Error(ErrorCode::MissingSurrogateLabel,
                      fmt::format("record '{}' has no surrogate label", data.manifest.records[i].id));
  if (out_dir)
    std::filesystem::create_directories(*out_dir);

  const auto train_graphs = build_graphs(data, split.train, cfg.graph, table.get(), cfg.workers);
  const auto eval_graphs = build_graphs(data, split.val, cfg.graph, table.get(), cfg.workers);
  const auto label_of = [&](std::size_t i) { return data.manifest.records[i].surrogate_label.value_or(0); };

  Checkpoint ckpt;
  ckpt.model = model;
  init_encoder(ckpt.params, model, cfg.seed);
  init_projection(ckpt.params, model, cfg.seed);
  AdamState state;
  const AdamConfig adam = cfg.adam_for(Phase::Pretrain);
  const std::size_t bs = cfg.batch_size_for(Phase::Pretrain);
  const std::size_t epochs = cfg.epochs_for(Phase::Pretrain);
  ckpt.meta.phase = "pretrain";
  ckpt.meta.loss_kind = to_string(cfg.loss.kind);
  ckpt.meta.seed = cfg.seed;

  PretrainResult res;
  std::uint64_t step = 0;
  const auto run_batch = [&](const std::vector<CrystalGraph> &graphs,
                             const std::vector<std::size_t> &ids, std::span<const std::size_t> pos,
                             std::uint64_t epoch, bool train) {
    const auto views = view_batch(graphs, pos, ids, cfg, epoch);
    std::vector<int> labels;
    for (auto p : pos)
      labels.push_back(label_of(ids[p]));
    return pretrain_batch(ckpt.params, model, cfg.loss, views,
                          cfg.loss.needs_labels() ? std::span<const int>(labels) : std::span<const int>(),
                          train);
  };

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled(train_graphs.size(), cfg.seed, epoch);
    std::vector<double> losses;
    for (auto pos : chunks(order, bs, 2)) {
      auto b = run_batch(train_graphs, split.train, pos, epoch, true);
      adam_step(ckpt.params, b.grads, state, adam);
      ++step;
      losses.push_back(b.loss);
      if (step % cfg.eval_every_steps == 0)
        res.log.push_back({step, epoch, "pretrain", b.loss, "train_loss", b.loss});
    }
    const double train_mean = mean_of(losses);
    res.epoch_train_loss.push_back(train_mean);
    res.log.push_back({step, epoch, "pretrain", train_mean, "epoch_train_loss", train_mean});

    std::vector<std::size_t> eval_order(eval_graphs.size());
    std::iota(eval_order.begin(), eval_order.end(), std::size_t{0});
    std::vector<double> eval_losses;
    for (auto pos : chunks(eval_order, bs, 2))
      eval_losses.push_back(run_batch(eval_graphs, split.val, pos, epoch, false).loss);
    if (!eval_losses.empty()) {
      const double ev = mean_of(eval_losses);
      res.epoch_eval_loss.push_back(ev);
      res.log.push_back({step, epoch, "pretrain-eval", ev, "eval_loss", ev});
    }

    ckpt.meta.epoch = epoch;
    ckpt.meta.step = step;
    ckpt.optimizer = state;
    if (out_dir)
      save_checkpoint(*out_dir / fmt::format("pretrain_epoch{}.ckpt", epoch), ckpt);
  }
  res.checkpoint = std::move(ckpt);
  if (out_dir) {
    save_checkpoint(*out_dir / "pretrain_final.ckpt", res.checkpoint);
    write_text(*out_dir / "pretrain_log.csv", format_log(res.log));
  }
  return res;
}

FinetuneResult finetune(const Dataset &data, const std::optional<Checkpoint> &init,
                        const TrainConfig &cfg, const std::optional<std::filesystem::path> &out_dir) {
  cfg.validate();
  const auto table = load_table(cfg);
  const ModelConfig model = cfg.resolved_model(table.get());
  const auto split = split_dataset(data.manifest, Phase::Finetune, cfg.seed, cfg);
  for (const auto *part : {&split.train, &split.val, &split.test})
    check_targets(data, *part, cfg.task);

  Checkpoint ckpt;
  ckpt.model = model;
  if (init) {
    if (!(init->model == model))
      throw Error(ErrorCode::ShapeMismatch,
                  fmt::format("checkpoint model (hidden {}, conv {}, gaussians {}) does not match "
                              "config (hidden {}, conv {}, gaussians {})",
                              init->model.hidden_dim, init->model.n_conv,
                              init->model.edge_feature_dim, model.hidden_dim, model.n_conv,
                              model.edge_feature_dim));
    ModelParams fresh;
    init_encoder(fresh, model, cfg.seed);
    for (const auto &[name, t] : fresh.entries()) {
      const Tensor &src = init->params.at(name);
      if (src.shape() != t.shape())
        throw Error(ErrorCode::ShapeMismatch,
                    fmt::format("checkpoint tensor '{}' has shape {}, expected {}", name,
                                shape_string(src.shape()), shape_string(t.shape())));
      ckpt.params.set(name, src);
    }
  } else {
    init_encoder(ckpt.params, model, cfg.seed);
  }
  init_head(ckpt.params, model, cfg.seed);
  if (out_dir)
    std::filesystem::create_directories(*out_dir);

  const auto target_of = [&](std::span<const std::size_t> idx) {
    std::vector<double> t;
    for (auto i : idx)
      t.push_back(*data.manifest.records[i].target);
    return t;
  };
  const auto train_y = target_of(split.train);
  const auto val_y = target_of(split.val);
  const auto test_y = target_of(split.test);
  double mean = 0, sd = 1;
  if (cfg.task == Task::Regression) {
    mean = mean_of(train_y);
    double var = 0;
    for (double y : train_y)
      var += (y - mean) * (y - mean);
    var /= static_cast<double>(train_y.size());
    sd = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  ckpt.meta.phase = "finetune";
  ckpt.meta.task = to_string(cfg.task);
  ckpt.meta.target_mean = mean;
  ckpt.meta.target_std = sd;
  ckpt.meta.seed = cfg.seed;
  ckpt.meta.loss_kind = init ? init->meta.loss_kind : std::string();

  const auto train_graphs = build_graphs(data, split.train, cfg.graph, table.get(), cfg.workers);
  const auto val_graphs = build_graphs(data, split.val, cfg.graph, table.get(), cfg.workers);
  const auto test_graphs = build_graphs(data, split.test, cfg.graph, table.get(), cfg.workers);

  AdamState state;
  const AdamConfig adam = cfg.adam_for(Phase::Finetune);
  const std::size_t bs = cfg.batch_size_for(Phase::Finetune);
  const std::size_t epochs = cfg.epochs_for(Phase::Finetune);

  FinetuneResult res;
  std::optional<double> best_score;
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled(train_graphs.size(), cfg.seed, epoch);
    std::vector<double> losses;
    for (auto pos : chunks(order, bs, 1)) {
      std::vector<const CrystalGraph *> graphs;
      Tensor y(Shape{pos.size(), 1});
      for (std::size_t k = 0; k < pos.size(); ++k) {
        graphs.push_back(&train_graphs[pos[k]]);
        y[k] = cfg.task == Task::Regression ? (train_y[pos[k]] - mean) / sd : train_y[pos[k]];
      }
      Tape tape;
      BoundParams bp(tape, ckpt.params);
      const auto out = head_forward(bp, encode(bp, model, collate(graphs)));
      const auto target = tape.constant(std::move(y));
      const auto loss = cfg.task == Task::Regression
                            ? ops::mean(ops::pow(ops::sub(out, target), 2.0))
                            : ops::mean(ops::sub(ops::softplus(out), ops::mul(out, target)));
      adam_step(ckpt.params, named_grads(bp, tape.backward(loss)), state, adam);
      ++step;
      losses.push_back(loss.value().item());
      if (step % cfg.eval_every_steps == 0)
        res.log.push_back({step, epoch, "finetune", losses.back(), "train_loss", losses.back()});
    }
    const double train_mean = mean_of(losses);
    res.log.push_back({step, epoch, "finetune", train_mean, "epoch_train_loss", train_mean});

    const auto val = score(head_outputs(ckpt.params, model, val_graphs, bs), val_y, cfg.task, mean, sd);
    const double val_score = cfg.task == Task::Regression ? *val.mae : val.loss;
    res.log.push_back({step, epoch, "finetune-val", val.loss,
                       cfg.task == Task::Regression ? "val_mae" : "val_accuracy",
                       cfg.task == Task::Regression ? *val.mae : *val.accuracy});
    if (!best_score || val_score < *best_score) {
      best_score = val_score;
      res.best = ckpt;
      res.best.meta.epoch = epoch;
      res.best.meta.step = step;
      res.best_epoch = epoch;
      res.val = val;
    }
  }
  res.best.optimizer.reset();
  res.test = score(head_outputs(res.best.params, model, test_graphs, bs), test_y, cfg.task, mean, sd);
  res.log.push_back({step, res.best_epoch, "finetune-test", res.test.loss,
                     cfg.task == Task::Regression ? "test_mae" : "test_accuracy",
                     cfg.task == Task::Regression ? *res.test.mae : *res.test.accuracy});
  if (out_dir) {
    save_checkpoint(*out_dir / "finetune_best.ckpt", res.best);
    write_text(*out_dir / "finetune_log.csv", format_log(res.log));
    write_text(*out_dir / "metrics.csv", format_metrics(res, cfg.task));
  }
  return res;
}

std::vector<double> predict(const Checkpoint &ckpt, std::span<const CrystalGraph> graphs,
                            std::size_t batch_size) {
  auto raw = head_outputs(ckpt.params, ckpt.model, graphs, batch_size);
  if (ckpt.meta.task == to_string(Task::Regression))
    for (auto &v : raw)
      v = v * ckpt.meta.target_std + ckpt.meta.target_mean;
  return raw;
}

Metrics evaluate(const Checkpoint &ckpt, const Dataset &data, std::span<const std::size_t> indices,
                 const TrainConfig &cfg) {
  if (ckpt.meta.task.empty())
    throw Error(ErrorCode::InvalidConfig, "checkpoint has no task head; fine-tune it first");
  const Task task = parse_task(ckpt.meta.task);
  check_targets(data, indices, task);
  const auto table = load_table(cfg);
  const auto graphs = build_graphs(data, indices, cfg.graph, table.get(), cfg.workers);
  std::vector<double> y;
  for (auto i : indices)
    y.push_back(*data.manifest.records[i].target);
  return score(head_outputs(ckpt.params, ckpt.model, graphs, cfg.batch_size_for(Phase::Finetune)), y,
               task, ckpt.meta.target_mean, ckpt.meta.target_std);
}

Tensor embed(const Checkpoint &ckpt, std::span<const CrystalGraph> graphs, std::size_t batch_size) {
  const bool has_projection = ckpt.params.contains("projection.fc1.weight");
  const std::size_t width = has_projection ? ckpt.model.embed_dim : ckpt.model.hidden_dim;
  std::vector<double> values;
  values.reserve(graphs.size() * width);
  for (std::size_t at = 0; at < graphs.size(); at += batch_size) {
    const auto part = graphs.subspan(at, std::min(batch_size, graphs.size() - at));
    Tape tape;
    BoundParams bp(tape, ckpt.params, [](const std::string &) { return false; });
    auto z = encode(bp, ckpt.model, collate(part));
    if (has_projection)
      z = project(bp, z);
    values.insert(values.end(), z.value().values().begin(), z.value().values().end());
  }
  return Tensor(Shape{graphs.size(), width}, std::move(values));
}

std::string format_metrics(const FinetuneResult &r, Task task) {
  std::string out = "split,metric,value\n";
  const auto rows = [&](std::string_view split, const Metrics &m) {
    if (task == Task::Regression)
      out += fmt::format("{},mae,{:.17g}\n", split, *m.mae);
    else
      out += fmt::format("{},accuracy,{:.17g}\n", split, *m.accuracy);
    out += fmt::format("{},loss,{:.17g}\n{},count,{}\n", split, m.loss, split, m.count);
  };
  rows("val", r.val);
  rows("test", r.test);
  out += fmt::format("best,epoch,{}\n", r.best_epoch);
  return out;
}

} // namespace spmat
