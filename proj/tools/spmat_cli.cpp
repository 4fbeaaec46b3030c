// Command-line driver: synth, stats, pretrain, finetune, evaluate, embed,
// augment-preview. Exit codes: 0 ok, 2 config, 3 data/IO, 4 numerical.

#include "spmat/augment.hpp"
#include "spmat/checkpoint.hpp"
#include "spmat/dataset.hpp"
#include "spmat/error.hpp"
#include "spmat/run_config.hpp"
#include "spmat/synthetic.hpp"
#include "spmat/train.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace spmat;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Globals {
  std::optional<fs::path> config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  fs::path out = ".";
  std::optional<fs::path> manifest;
};

struct CommandArgs {
  std::optional<fs::path> checkpoint;
  bool no_pretrain = false;
  std::optional<std::string> task;
  std::string id;
};

void write_file(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

RunConfig resolve(const Globals &g, const CommandArgs &args) {
  auto sets = g.sets;
  if (g.seed)
    sets.push_back(fmt::format("train.seed={}", *g.seed));
  if (g.manifest)
    sets.push_back(fmt::format("data.manifest={}", g.manifest->string()));
  if (args.task)
    sets.push_back(fmt::format("train.task={}", *args.task));
  auto cfg = build_run_config(g.config, sets);
  cfg.synth.seed = cfg.train.seed;
  return cfg;
}

const fs::path &require_manifest(const RunConfig &cfg) {
  if (!cfg.manifest)
    throw Error(ErrorCode::InvalidConfig, "this command needs --manifest (or data.manifest)");
  return *cfg.manifest;
}

const fs::path &require_checkpoint(const CommandArgs &args) {
  if (!args.checkpoint)
    throw Error(ErrorCode::InvalidConfig, "this command needs --checkpoint");
  return *args.checkpoint;
}

int cmd_synth(const RunConfig &cfg, const fs::path &out) {
  const auto data = generate_synthetic_dataset(cfg.synth);
  fs::create_directories(out / "cif");
  for (std::size_t i = 0; i < data.structures.size(); ++i)
    write_cif_file(out / data.manifest.records[i].cif_path, data.structures[i]);
  DatasetManifest m = data.manifest;
  for (auto &r : m.records)
    r.cif_path = out / r.cif_path;
  save_manifest(out / "manifest.csv", m);
  fmt::print("wrote {} structures and {}\n", data.structures.size(), (out / "manifest.csv").string());
  return 0;
}

int cmd_stats(const RunConfig &cfg, const fs::path &out) {
  const auto data = load_dataset(require_manifest(cfg), cfg.train.workers);
  const auto st = element_stats(data.structures);
  const auto table = format_element_stats(st);
  fs::create_directories(out);
  write_file(out / "element_counts.csv", table);
  write_file(out / "stats_summary.csv",
             fmt::format("metric,value\nstructures,{}\nsites,{}\nelements,{}\nentropy_nats,{:.17g}\n",
                         data.size(), st.total, st.counts.size(), st.entropy));
  fmt::print("{}entropy_nats,{:.17g}\n", table, st.entropy);
  return 0;
}

int cmd_pretrain(const RunConfig &cfg, const fs::path &out) {
  const auto data = load_dataset(require_manifest(cfg), cfg.train.workers);
  const auto res = pretrain(data, cfg.train, out);
  fmt::print("pretrain done: {} epochs, final train loss {:.6g}, checkpoint {}\n",
             res.epoch_train_loss.size(),
             res.epoch_train_loss.empty() ? 0.0 : res.epoch_train_loss.back(),
             (out / "pretrain_final.ckpt").string());
  return 0;
}

int cmd_finetune(const RunConfig &cfg, const CommandArgs &args, const fs::path &out) {
  if (args.no_pretrain && args.checkpoint)
    throw Error(ErrorCode::InvalidConfig, "--no-pretrain and --checkpoint are exclusive");
  if (!args.no_pretrain && !args.checkpoint)
    throw Error(ErrorCode::InvalidConfig, "finetune needs --checkpoint or --no-pretrain");
  const auto data = load_dataset(require_manifest(cfg), cfg.train.workers);
  std::optional<Checkpoint> init;
  if (args.checkpoint)
    init = load_checkpoint(*args.checkpoint);
  const auto res = finetune(data, init, cfg.train, out);
  if (cfg.train.task == Task::Regression)
    fmt::print("test mae {:.6g} (best epoch {})\n", *res.test.mae, res.best_epoch);
  else
    fmt::print("test accuracy {:.6g} (best epoch {})\n", *res.test.accuracy, res.best_epoch);
  return 0;
}

int cmd_evaluate(const RunConfig &cfg, const CommandArgs &args, const fs::path &out) {
  const auto ckpt = load_checkpoint(require_checkpoint(args));
  const auto data = load_dataset(require_manifest(cfg), cfg.train.workers);
  const auto split = split_dataset(data.manifest, Phase::Finetune, cfg.train.seed, cfg.train);
  const auto m = evaluate(ckpt, data, split.test, cfg.train);
  std::string text = "split,metric,value\n";
  if (m.mae)
    text += fmt::format("test,mae,{:.17g}\n", *m.mae);
  if (m.accuracy)
    text += fmt::format("test,accuracy,{:.17g}\n", *m.accuracy);
  text += fmt::format("test,loss,{:.17g}\ntest,count,{}\n", m.loss, m.count);
  fs::create_directories(out);
  write_file(out / "eval_metrics.csv", text);
  fmt::print("{}", text);
  return 0;
}

int cmd_embed(const RunConfig &cfg, const CommandArgs &args, const fs::path &out) {
  const auto ckpt = load_checkpoint(require_checkpoint(args));
  const auto data = load_dataset(require_manifest(cfg), cfg.train.workers);
  const auto split = split_dataset(data.manifest, Phase::Finetune, cfg.train.seed, cfg.train);
  std::unique_ptr<NodeFeatureTable> table;
  if (cfg.train.graph.node_feature_mode == NodeFeatureMode::ExternalTable)
    table = std::make_unique<NodeFeatureTable>(NodeFeatureTable::load(cfg.train.node_feature_table));
  // Graphs are built without augmentation regardless of the augment.* keys.
  const auto graphs = build_graphs(data, split.test, cfg.train.graph, table.get(), cfg.train.workers);
  const auto z = embed(ckpt, graphs);
  std::string text = "id,label";
  for (std::size_t d = 0; d < z.cols(); ++d)
    text += fmt::format(",e{}", d);
  text += '\n';
  for (std::size_t r = 0; r < split.test.size(); ++r) {
    const auto &rec = data.manifest.records[split.test[r]];
    text += rec.id + ',' + (rec.surrogate_label ? std::to_string(*rec.surrogate_label) : "");
    for (std::size_t d = 0; d < z.cols(); ++d)
      text += fmt::format(",{:.9g}", z.at(r, d));
    text += '\n';
  }
  fs::create_directories(out);
  write_file(out / "embeddings.csv", text);
  fmt::print("wrote {} embeddings of width {}\n", split.test.size(), z.cols());
  return 0;
}

int cmd_augment_preview(const RunConfig &cfg, const CommandArgs &args, const fs::path &out) {
  const auto manifest = load_manifest(require_manifest(cfg));
  const auto index = manifest.find(args.id);
  if (!index)
    throw Error(ErrorCode::UnknownId, fmt::format("no record with id '{}'", args.id));
  auto s = read_cif(manifest.records[*index].cif_path);
  s.id = args.id;
  std::unique_ptr<NodeFeatureTable> table;
  if (cfg.train.graph.node_feature_mode == NodeFeatureMode::ExternalTable)
    table = std::make_unique<NodeFeatureTable>(NodeFeatureTable::load(cfg.train.node_feature_table));
  const auto g = build_graph(s, cfg.train.graph, table.get());
  const auto views = make_views(g, cfg.train.augment, cfg.train.seed, 0, *index);
  std::string text = "view,edge,i,j,d,d_noised,masked,feature_l2\n";
  int v = 0;
  for (const auto *view : {&views.first, &views.second}) {
    for (std::size_t e = 0; e < g.n_edges(); ++e) {
      double l2 = 0;
      for (double f : view->edge_feature_row(e))
        l2 += f * f;
      text += fmt::format("{},{},{},{},{:.17g},{:.17g},{},{:.17g}\n", v, e, g.edges[e].src,
                          g.edges[e].dst, g.distances[e], view->distances[e],
                          static_cast<int>(view->edge_masked[e]), std::sqrt(l2));
    }
    ++v;
  }
  fs::create_directories(out);
  write_file(out / "augment_preview.csv", text);
  fmt::print("wrote {} rows for '{}'\n", 2 * g.n_edges(), args.id);
  return 0;
}

int exit_code(const Error &e) {
  switch (category(e.code())) {
  case ErrorCategory::Config: return kExitConfig;
  case ErrorCategory::Numerical: return kExitNumerical;
  case ErrorCategory::Data: break;
  }
  return kExitData;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Surrogate-label pretraining for crystal property prediction"};
  app.require_subcommand(1);
  Globals g;
  CommandArgs args;
  app.add_option("--config", g.config, "flat key=value config file");
  app.add_option("--set", g.sets, "override, key=value (repeatable)");
  app.add_option("--seed", g.seed, "random seed (train.seed)");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--manifest", g.manifest, "dataset manifest CSV (data.manifest)");

  auto *synth = app.add_subcommand("synth", "write a synthetic CIF set and manifest");
  auto *stats = app.add_subcommand("stats", "element frequencies and Shannon entropy");
  auto *pre = app.add_subcommand("pretrain", "self-supervised pretraining");
  auto *fine = app.add_subcommand("finetune", "fine-tune a task head");
  fine->add_option("--checkpoint", args.checkpoint, "pretrained checkpoint");
  fine->add_flag("--no-pretrain", args.no_pretrain, "start from random weights");
  fine->add_option("--task", args.task, "regression | classification");
  auto *eval = app.add_subcommand("evaluate", "test metrics of a fine-tuned checkpoint");
  eval->add_option("--checkpoint", args.checkpoint, "fine-tuned checkpoint");
  auto *emb = app.add_subcommand("embed", "export test-split embeddings");
  emb->add_option("--checkpoint", args.checkpoint, "checkpoint");
  auto *prev = app.add_subcommand("augment-preview", "per-edge CSV of one view pair");
  prev->add_option("--id", args.id, "record id")->required();
  for (auto *sub : {synth, stats, pre, fine, eval, emb, prev}) {
    sub->fallthrough();
    (void)sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const auto cfg = resolve(g, args);
    if (*synth)
      return cmd_synth(cfg, g.out);
    if (*stats)
      return cmd_stats(cfg, g.out);
    if (*pre)
      return cmd_pretrain(cfg, g.out);
    if (*fine)
      return cmd_finetune(cfg, args, g.out);
    if (*eval)
      return cmd_evaluate(cfg, args, g.out);
    if (*emb)
      return cmd_embed(cfg, args, g.out);
    if (*prev)
      return cmd_augment_preview(cfg, args, g.out);
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
