#include "spmat/run_config.hpp"

#include "spmat/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace spmat {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view expected) {
  throw Error(ErrorCode::InvalidConfig,
              fmt::format("{}: '{}' is not {}", key, value, expected));
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    bad(key, v, "a number");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    bad(key, v, "a non-negative integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on")
    return true;
  if (v == "false" || v == "0" || v == "off")
    return false;
  bad(key, v, "a boolean");
}

using Setter = std::function<void(RunConfig &, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>> &setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    const auto real = [&](const char *k, auto member) {
      t[k] = [member](RunConfig &c, auto key, auto v) { member(c) = to_double(key, v); };
    };
    const auto count = [&](const char *k, auto member) {
      t[k] = [member](RunConfig &c, auto key, auto v) {
        member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_u64(key, v));
      };
    };
    const auto flag = [&](const char *k, auto member) {
      t[k] = [member](RunConfig &c, auto key, auto v) { member(c) = to_bool(key, v); };
    };

    t["loss.kind"] = [](RunConfig &c, auto, auto v) { c.train.loss.kind = parse_loss_kind(v); };
    real("loss.temperature", [](RunConfig &c) -> double & { return c.train.loss.temperature; });
    real("loss.lambda", [](RunConfig &c) -> double & { return c.train.loss.lambda; });
    real("loss.alpha", [](RunConfig &c) -> double & { return c.train.loss.lambda; });
    t["loss.bt_mode"] = [](RunConfig &c, auto, auto v) { c.train.loss.bt_mode = parse_bt_mode(v); };
    t["loss.sbt_scale"] = [](RunConfig &c, auto, auto v) {
      c.train.loss.sbt_scale = parse_sbt_scale(v);
    };

    real("augment.atom_mask_fraction", [](RunConfig &c) -> double & { return c.train.augment.atom_mask_fraction; });
    real("augment.edge_mask_fraction", [](RunConfig &c) -> double & { return c.train.augment.edge_mask_fraction; });
    real("augment.gndn_delta", [](RunConfig &c) -> double & { return c.train.augment.gndn_delta; });
    flag("augment.atom_mask", [](RunConfig &c) -> bool & { return c.train.augment.atom_mask; });
    flag("augment.edge_mask", [](RunConfig &c) -> bool & { return c.train.augment.edge_mask; });
    flag("augment.gndn", [](RunConfig &c) -> bool & { return c.train.augment.gndn; });

    real("graph.radius", [](RunConfig &c) -> double & { return c.train.graph.radius; });
    count("graph.max_neighbors", [](RunConfig &c) -> int & { return c.train.graph.max_neighbors; });
    real("graph.mu_min", [](RunConfig &c) -> double & { return c.train.graph.mu_min; });
    real("graph.mu_max", [](RunConfig &c) -> double & { return c.train.graph.mu_max; });
    real("graph.mu_step", [](RunConfig &c) -> double & { return c.train.graph.mu_step; });
    real("graph.sigma", [](RunConfig &c) -> double & { return c.train.graph.sigma; });
    t["graph.node_feature_mode"] = [](RunConfig &c, auto key, auto v) {
      if (v == "learned-embedding")
        c.train.graph.node_feature_mode = NodeFeatureMode::LearnedEmbedding;
      else if (v == "external-table")
        c.train.graph.node_feature_mode = NodeFeatureMode::ExternalTable;
      else
        bad(key, v, "learned-embedding or external-table");
    };
    t["graph.node_feature_table"] = [](RunConfig &c, auto, auto v) {
      c.train.node_feature_table = std::filesystem::path(std::string(v));
    };

    count("model.hidden_dim", [](RunConfig &c) -> std::size_t & { return c.train.model.hidden_dim; });
    count("model.n_conv", [](RunConfig &c) -> std::size_t & { return c.train.model.n_conv; });
    count("model.embed_dim", [](RunConfig &c) -> std::size_t & { return c.train.model.embed_dim; });
    count("model.head_hidden", [](RunConfig &c) -> std::size_t & { return c.train.model.head_hidden; });

    t["train.batch_size"] = [](RunConfig &c, auto key, auto v) { c.train.batch_size = to_u64(key, v); };
    t["train.epochs"] = [](RunConfig &c, auto key, auto v) { c.train.epochs = to_u64(key, v); };
    t["train.lr"] = [](RunConfig &c, auto key, auto v) { c.train.lr = to_double(key, v); };
    real("train.weight_decay", [](RunConfig &c) -> double & { return c.train.weight_decay; });
    real("train.adam_beta1", [](RunConfig &c) -> double & { return c.train.adam_beta1; });
    real("train.adam_beta2", [](RunConfig &c) -> double & { return c.train.adam_beta2; });
    real("train.adam_eps", [](RunConfig &c) -> double & { return c.train.adam_eps; });
    count("train.seed", [](RunConfig &c) -> std::uint64_t & { return c.train.seed; });
    real("train.pretrain_eval_fraction", [](RunConfig &c) -> double & { return c.train.pretrain_eval_fraction; });
    real("train.val_fraction", [](RunConfig &c) -> double & { return c.train.val_fraction; });
    real("train.test_fraction", [](RunConfig &c) -> double & { return c.train.test_fraction; });
    count("train.eval_every_steps", [](RunConfig &c) -> std::size_t & { return c.train.eval_every_steps; });
    count("train.workers", [](RunConfig &c) -> std::size_t & { return c.train.workers; });
    t["train.task"] = [](RunConfig &c, auto, auto v) { c.train.task = parse_task(v); };

    count("synth.n_crystals", [](RunConfig &c) -> std::size_t & { return c.synth.n_crystals; });
    count("synth.n_classes", [](RunConfig &c) -> int & { return c.synth.n_classes; });
    count("synth.max_atoms", [](RunConfig &c) -> std::size_t & { return c.synth.max_atoms; });
    real("synth.target_noise", [](RunConfig &c) -> double & { return c.synth.target_noise; });

    t["data.manifest"] = [](RunConfig &c, auto, auto v) {
      c.manifest = std::filesystem::path(std::string(v));
    };
    return t;
  }();
  return table;
}

} // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto it = setters().find(key);
  if (it == setters().end())
    throw Error(ErrorCode::UnknownKey, fmt::format("unknown configuration key '{}'", key));
  it->second(*this, key, value);
}

void RunConfig::validate() const {
  train.validate();
  synth.validate();
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos)
      s = s.substr(0, hash);
    s = trim(s);
    if (s.empty())
      continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::InvalidConfig,
                  fmt::format("config line {}: expected key=value, got '{}'", line_no, s));
    out.emplace_back(std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))));
  }
  return out;
}

std::pair<std::string, std::string> parse_override(std::string_view kv) {
  const auto eq = kv.find('=');
  if (eq == std::string_view::npos)
    throw Error(ErrorCode::InvalidConfig, fmt::format("override '{}' is not key=value", kv));
  return {std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1)))};
}

RunConfig build_run_config(const std::optional<std::filesystem::path> &file,
                           const std::vector<std::string> &overrides) {
  RunConfig cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in)
      throw Error(ErrorCode::InvalidConfig, fmt::format("cannot read config '{}'", file->string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    for (const auto &[k, v] : parse_config_text(ss.str()))
      cfg.set(k, v);
  }
  for (const auto &o : overrides) {
    const auto [k, v] = parse_override(o);
    cfg.set(k, v);
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto &[k, v] : setters())
    keys.push_back(k);
  return keys;
}

} // namespace spmat
