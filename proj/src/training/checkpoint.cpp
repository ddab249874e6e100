#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lmforge/errors.hpp"
#include "lmforge/training.hpp"

namespace lmforge::training {

using nlohmann::json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
  return v;
}

json shape_json(const Shape& s) { return json(s); }

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  json header;
  header["format"] = "lmforge-checkpoint";
  header["model"] = std::string(to_string(ckpt.model));
  header["config"] = config_to_json(ckpt.config);
  header["vocab_size"] = ckpt.vocab_size;
  header["vocab_digest"] = ckpt.vocab_digest;
  header["meta"] = ckpt.meta;
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    if (shape_numel(t.shape) != t.data.size())
      throw ContractError("checkpoint: tensor " + t.name + " has " + std::to_string(t.data.size()) +
                          " values for shape " + shape_to_string(t.shape));
    manifest.push_back({{"name", t.name}, {"shape", shape_json(t.shape)}, {"offset", offset}});
    offset += t.data.size();
  }
  header["tensors"] = manifest;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset * 4);
  for (const auto& t : ckpt.tensors)
    for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes, std::string_view origin) {
  const std::string where(origin);
  constexpr std::size_t kFixed = 4 + 4 + 8;
  if (bytes.size() < kFixed || !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin()))
    throw DataError(where + ": not a checkpoint (bad magic)");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kCheckpointVersion)
    throw DataError(where + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t header_len = get_le(bytes, 8, 8);
  if (header_len > bytes.size() - kFixed) throw DataError(where + ": truncated header");
  json header;
  try {
    header = json::parse(bytes.begin() + kFixed, bytes.begin() + static_cast<std::ptrdiff_t>(kFixed + header_len));
  } catch (const json::exception& e) {
    throw DataError(where + ": corrupt header: " + e.what());
  }
  Checkpoint ckpt;
  std::size_t payload = kFixed + header_len;
  try {
    if (header.at("format") != "lmforge-checkpoint") throw DataError(where + ": unknown format");
    ckpt.model = parse_model_kind(header.at("model").get<std::string>());
    ckpt.config = config_from_json(header.at("config"), TrainConfig{}, {}, where);
    ckpt.vocab_size = header.at("vocab_size").get<std::size_t>();
    ckpt.vocab_digest = header.at("vocab_digest").get<std::string>();
    ckpt.meta = header.at("meta");
    std::uint64_t expected_offset = 0;
    for (const auto& entry : header.at("tensors")) {
      StoredTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<Shape>();
      if (entry.at("offset").get<std::uint64_t>() != expected_offset)
        throw DataError(where + ": tensor " + t.name + " has a non-contiguous offset");
      const std::size_t n = shape_numel(t.shape);
      if (n > (bytes.size() - payload) / 4) throw DataError(where + ": truncated payload at tensor " + t.name);
      t.data.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        t.data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, payload + 4 * i, 4)));
      payload += 4 * n;
      expected_offset += n;
      ckpt.tensors.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw DataError(where + ": corrupt header: " + e.what());
  } catch (const UsageError& e) {
    throw DataError(where + ": bad config in header: " + e.what());
  }
  if (payload != bytes.size())
    throw DataError(where + ": " + std::to_string(bytes.size() - payload) + " trailing bytes after payload");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes, path.string());
}

// ---- models <-> checkpoints ------------------------------------------------

namespace {

models::ParamList bundle_params(const ModelBundle& b) {
  models::ParamList out;
  switch (b.kind) {
    case ModelKind::rnnlm:
      return b.generator->parameters();
    case ModelKind::vae:
      return b.vae->parameters();
    case ModelKind::seqgan:
      for (auto& p : b.generator->parameters()) out.push_back({"g." + p.name, p.tensor});
      for (auto& p : b.discriminator->parameters()) out.push_back({"d." + p.name, p.tensor});
      return out;
  }
  return out;
}

}  // namespace

ModelBundle init_models(const TrainConfig& cfg, std::size_t vocab_size) {
  cfg.validate();
  if (vocab_size <= corpus::kNumSpecials) throw ContractError("model: vocabulary too small");
  if (cfg.vocab_size != 0 && cfg.vocab_size != vocab_size)
    throw ContractError("model: config vocab_size " + std::to_string(cfg.vocab_size) + " but corpus has " +
                        std::to_string(vocab_size));
  Rng rng(cfg.seeds.params);
  ModelBundle b;
  b.kind = cfg.model;
  if (cfg.model == ModelKind::vae) {
    b.vae = models::VaeModel::init(vocab_size, cfg.embed, cfg.hidden, cfg.latent, rng);
    b.vae->word_dropout = cfg.word_dropout;
  } else {
    b.generator = models::GeneratorPolicy::init(vocab_size, cfg.embed, cfg.hidden, rng);
    b.generator->max_len = cfg.max_len;
  }
  if (cfg.model == ModelKind::seqgan) {
    // +1 leaves room for <eos> after a full-length sentence.
    b.discriminator = models::Discriminator::init(vocab_size, cfg.seqgan.d_embed, cfg.seqgan.d_widths,
                                                  cfg.seqgan.d_filters, cfg.max_len + 1, rng);
  }
  return b;
}

ModelBundle bundle_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.config.model != ckpt.model)
    throw DataError("checkpoint: model kind " + std::string(to_string(ckpt.model)) + " disagrees with its config");
  ModelBundle b = init_models(ckpt.config, ckpt.vocab_size);
  const auto params = bundle_params(b);
  if (params.size() != ckpt.tensors.size())
    throw DataError("checkpoint: " + std::to_string(ckpt.tensors.size()) + " tensors, config expects " +
                    std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& stored = ckpt.tensors[i];
    const auto& p = params[i];
    if (stored.name != p.name) throw DataError("checkpoint: expected tensor " + p.name + ", found " + stored.name);
    if (stored.shape != p.tensor.shape())
      throw DataError("checkpoint: tensor " + p.name + " has shape " + shape_to_string(stored.shape) +
                      ", config expects " + shape_to_string(p.tensor.shape()));
    Tensor t = p.tensor;
    auto dst = t.mutable_values();
    for (std::size_t j = 0; j < dst.size(); ++j) {
      if (!std::isfinite(stored.data[j]))
        throw NumericalError("checkpoint: tensor " + p.name + " holds a non-finite value at " + std::to_string(j));
      dst[j] = static_cast<double>(stored.data[j]);
    }
  }
  return b;
}

Checkpoint checkpoint_from_bundle(const ModelBundle& bundle, const TrainConfig& cfg, std::size_t vocab_size,
                                  const std::string& vocab_digest, json meta) {
  Checkpoint c;
  c.model = bundle.kind;
  c.config = cfg;
  c.vocab_size = vocab_size;
  c.vocab_digest = vocab_digest;
  c.meta = std::move(meta);
  for (const auto& p : bundle_params(bundle)) {
    StoredTensor t{p.name, p.tensor.shape(), {}};
    t.data.reserve(p.tensor.numel());
    for (double v : p.tensor.values()) t.data.push_back(static_cast<float>(v));
    c.tensors.push_back(std::move(t));
  }
  return c;
}

}  // namespace lmforge::training
