#include "spmat/checkpoint.hpp"

#include "spmat/error.hpp"

#include <bit>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace spmat {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <class T> void put(std::string &out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T> T get(std::string_view in, std::size_t at) {
  T v;
  std::memcpy(&v, in.data() + at, sizeof(T));
  return v;
}

json model_json(const ModelConfig &m) {
  return {{"hidden_dim", m.hidden_dim},
          {"n_conv", m.n_conv},
          {"embed_dim", m.embed_dim},
          {"head_hidden", m.head_hidden},
          {"edge_feature_dim", m.edge_feature_dim},
          {"node_mode", m.node_mode == NodeFeatureMode::LearnedEmbedding ? "learned-embedding"
                                                                          : "external-table"},
          {"node_feature_dim", m.node_feature_dim}};
}

ModelConfig model_from_json(const json &j) {
  ModelConfig m;
  m.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  m.n_conv = j.at("n_conv").get<std::size_t>();
  m.embed_dim = j.at("embed_dim").get<std::size_t>();
  m.head_hidden = j.at("head_hidden").get<std::size_t>();
  m.edge_feature_dim = j.at("edge_feature_dim").get<std::size_t>();
  m.node_mode = j.at("node_mode").get<std::string>() == "external-table"
                    ? NodeFeatureMode::ExternalTable
                    : NodeFeatureMode::LearnedEmbedding;
  m.node_feature_dim = j.at("node_feature_dim").get<std::size_t>();
  return m;
}

struct Writer {
  json entries = json::array();
  std::string payload;

  void add(const std::string &name, const Tensor &t) {
    entries.push_back({{"name", name},
                       {"shape", t.shape()},
                       {"offset", payload.size()},
                       {"count", t.numel()}});
    for (double v : t.values())
      put(payload, static_cast<float>(v));
  }
};

Tensor read_tensor(const json &e, std::string_view payload) {
  const auto shape = e.at("shape").get<Shape>();
  const auto offset = e.at("offset").get<std::size_t>();
  const auto count = e.at("count").get<std::size_t>();
  if (count != shape_numel(shape))
    throw Error(ErrorCode::TruncatedPayload,
                fmt::format("tensor '{}' count {} does not match shape {}",
                            e.at("name").get<std::string>(), count, shape_string(shape)));
  if (offset + count * sizeof(float) > payload.size())
    throw Error(ErrorCode::TruncatedPayload,
                fmt::format("tensor '{}' needs bytes [{}, {}) of a {}-byte payload",
                            e.at("name").get<std::string>(), offset, offset + count * 4,
                            payload.size()));
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i)
    values[i] = get<float>(payload, offset + i * sizeof(float));
  return Tensor(shape, std::move(values));
}

} // namespace

void round_to_float(ModelParams &params) {
  for (auto &[name, t] : params.entries())
    for (auto &v : t.values())
      v = static_cast<float>(v);
}

std::string serialize_checkpoint(const Checkpoint &ckpt) {
  Writer w;
  for (const auto &[name, t] : ckpt.params.entries())
    w.add(name, t);
  json header = {{"model", model_json(ckpt.model)}, {"tensors", w.entries}};
  if (ckpt.optimizer) {
    Writer ow;
    ow.payload = std::move(w.payload);
    for (const auto &[name, t] : ckpt.optimizer->m)
      ow.add("m." + name, t);
    for (const auto &[name, t] : ckpt.optimizer->v)
      ow.add("v." + name, t);
    w.payload = std::move(ow.payload);
    header["optimizer"] = {{"step", ckpt.optimizer->step}, {"tensors", ow.entries}};
  }
  const auto &m = ckpt.meta;
  header["metadata"] = {{"phase", m.phase},
                        {"epoch", m.epoch},
                        {"loss_kind", m.loss_kind},
                        {"surrogate_label", m.surrogate_label},
                        {"task", m.task},
                        {"target_mean", m.target_mean},
                        {"target_std", m.target_std},
                        {"seed", m.seed},
                        {"step", m.step}};
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  out += w.payload;
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  constexpr std::size_t fixed = sizeof(kCheckpointMagic) + 4 + 8;
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw Error(ErrorCode::BadMagic, "not a checkpoint (magic bytes differ)");
  if (bytes.size() < fixed)
    throw Error(ErrorCode::TruncatedPayload, "checkpoint header is truncated");
  const auto version = get<std::uint32_t>(bytes, 8);
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::VersionMismatch,
                fmt::format("checkpoint version {}, expected {}", version, kCheckpointVersion));
  const auto header_len = get<std::uint64_t>(bytes, 12);
  if (header_len > bytes.size() - fixed)
    throw Error(ErrorCode::TruncatedPayload, "checkpoint header is truncated");
  const auto payload = bytes.substr(fixed + header_len);

  json header;
  try {
    header = json::parse(bytes.substr(fixed, header_len));
  } catch (const json::exception &e) {
    throw Error(ErrorCode::TruncatedPayload, fmt::format("checkpoint header: {}", e.what()));
  }
  Checkpoint ckpt;
  try {
    ckpt.model = model_from_json(header.at("model"));
    for (const auto &e : header.at("tensors")) {
      const auto name = e.at("name").get<std::string>();
      if (ckpt.params.contains(name))
        throw Error(ErrorCode::DuplicateId, fmt::format("tensor '{}' stored twice", name));
      ckpt.params.set(name, read_tensor(e, payload));
    }
    if (header.contains("optimizer")) {
      AdamState st;
      st.step = header["optimizer"].at("step").get<std::uint64_t>();
      for (const auto &e : header["optimizer"].at("tensors")) {
        const auto name = e.at("name").get<std::string>();
        auto &table = name.starts_with("m.") ? st.m : st.v;
        table.emplace_back(name.substr(2), read_tensor(e, payload));
      }
      ckpt.optimizer = std::move(st);
    }
    const auto &m = header.at("metadata");
    ckpt.meta.phase = m.at("phase").get<std::string>();
    ckpt.meta.epoch = m.at("epoch").get<std::uint64_t>();
    ckpt.meta.loss_kind = m.at("loss_kind").get<std::string>();
    ckpt.meta.surrogate_label = m.at("surrogate_label").get<std::string>();
    ckpt.meta.task = m.at("task").get<std::string>();
    ckpt.meta.target_mean = m.at("target_mean").get<double>();
    ckpt.meta.target_std = m.at("target_std").get<double>();
    ckpt.meta.seed = m.at("seed").get<std::uint64_t>();
    ckpt.meta.step = m.at("step").get<std::uint64_t>();
  } catch (const json::exception &e) {
    throw Error(ErrorCode::TruncatedPayload, fmt::format("checkpoint header: {}", e.what()));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw Error(ErrorCode::Io, fmt::format("write to '{}' failed", path.string()));
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

} // namespace spmat
