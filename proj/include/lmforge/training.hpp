#pragma once

// Training configuration, checkpoints, perplexity and the training loops for
// the RNNLM, the sentence VAE and seqGAN.
//
// Config files are JSON objects. Keys may be written dotted at top level
// ("schedule.kind": "linear") or as nested objects; both flatten to the same
// dotted names. Unknown keys are rejected.
//
// Checkpoint layout (little-endian):
//   "LMFG" | u32 version | u64 header_bytes | header JSON | f32 payload
// The header lists every tensor with its shape and element offset into the
// payload.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lmforge/corpus.hpp"
#include "lmforge/models.hpp"
#include "lmforge/schedules.hpp"
#include "lmforge/tensor.hpp"

namespace lmforge::training {

enum class ModelKind { rnnlm, vae, seqgan };
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

enum class VaeEvalMode { mean, sample, iw };
std::string_view to_string(VaeEvalMode mode);

enum class Baseline { none, mean };

struct SeqGanConfig {
  std::size_t g_pretrain_epochs = 10;
  std::size_t d_pretrain_epochs = 10;
  std::size_t adv_epochs = 10;
  std::size_t g_steps = 1;
  std::size_t d_steps = 5;
  std::size_t n_rollouts = 16;
  std::size_t pg_batch = 32;
  std::size_t d_samples = 0;  // negatives per discriminator epoch; 0 = size of the train split
  Baseline baseline = Baseline::none;
  std::size_t d_embed = 64;
  std::size_t d_filters = 32;
  std::vector<std::size_t> d_widths = {1, 2, 3};
  double d_learning_rate = 1e-3;

  bool operator==(const SeqGanConfig&) const = default;
};

struct Seeds {
  std::uint64_t params = 1;
  std::uint64_t data_order = 2;
  std::uint64_t noise = 3;

  bool operator==(const Seeds&) const = default;
};

struct TrainConfig {
  ModelKind model = ModelKind::vae;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double clip_norm = 5.0;
  ScheduleKind schedule = ScheduleKind::cyclical;
  std::uint64_t schedule_cycles = 4;  // M
  double schedule_ratio = 0.5;        // R
  double schedule_linear_ratio = 1.0; // R_lin
  Seeds seeds;
  std::size_t embed = 300;
  std::size_t hidden = 256;
  std::size_t latent = 16;
  std::size_t vocab_size = 0;  // 0 = take from the corpus
  std::size_t max_len = 40;
  double word_dropout = 0.5;
  models::DropoutKind dropout_kind = models::DropoutKind::word;
  VaeEvalMode vae_eval = VaeEvalMode::mean;
  std::size_t iw_samples = 16;
  std::size_t log_every = 1;
  SeqGanConfig seqgan;

  bool operator==(const TrainConfig&) const = default;
  // Throws UsageError naming the offending field.
  void validate() const;
};

// Throws UsageError for unknown presets.
TrainConfig preset_config(std::string_view preset);

// Applies the keys of `doc` over `base`. `source` (the original text) is used
// only to attach line numbers to errors.
TrainConfig config_from_json(const nlohmann::json& doc, TrainConfig base = {}, std::string_view source = {},
                             std::string_view origin = "config");
// Flat dotted-key form of every field.
nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

// ---- corpus data -----------------------------------------------------------

struct CorpusData {
  corpus::Vocabulary vocab;
  std::string vocab_digest;  // SHA-256 of vocab.txt
  std::vector<std::vector<TokenId>> train, dev, test;
};

CorpusData load_corpus(const std::filesystem::path& dir);
std::string vocabulary_digest(const corpus::Vocabulary& vocab);

// ---- checkpoints -----------------------------------------------------------

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;

  bool operator==(const StoredTensor&) const = default;
};

struct Checkpoint {
  ModelKind model = ModelKind::vae;
  TrainConfig config;
  std::size_t vocab_size = 0;
  std::string vocab_digest;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<StoredTensor> tensors;
};

inline constexpr std::array<char, 4> kCheckpointMagic = {'L', 'M', 'F', 'G'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes, std::string_view origin = "checkpoint");
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// DataError on a bad magic, version or truncated payload.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// A loaded model of any kind. Parameters are f32 values widened to f64.
struct ModelBundle {
  ModelKind kind = ModelKind::vae;
  std::optional<models::GeneratorPolicy> generator;
  std::optional<models::VaeModel> vae;
  std::optional<models::Discriminator> discriminator;
};

ModelBundle init_models(const TrainConfig& cfg, std::size_t vocab_size);
ModelBundle bundle_from_checkpoint(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bundle(const ModelBundle& bundle, const TrainConfig& cfg, std::size_t vocab_size,
                                  const std::string& vocab_digest, nlohmann::json meta = nlohmann::json::object());

// ---- perplexity ------------------------------------------------------------

struct PerplexityResult {
  double perplexity = 0.0;
  double total_nll = 0.0;
  std::size_t tokens = 0;
};

// exp(-mean(log_probs)).
double perplexity_from_log_probs(std::span<const double> log_probs);

PerplexityResult rnnlm_perplexity(const models::GeneratorPolicy& g,
                                  std::span<const std::vector<TokenId>> sentences, std::size_t batch_size = 64);
PerplexityResult vae_perplexity(const models::VaeModel& m, std::span<const std::vector<TokenId>> sentences,
                                VaeEvalMode mode = VaeEvalMode::mean, std::uint64_t seed = 0,
                                std::size_t iw_samples = 16, std::size_t batch_size = 64);
// Dispatches on the bundle's kind; seqGAN evaluates its generator.
PerplexityResult evaluate_perplexity(const ModelBundle& bundle, std::span<const std::vector<TokenId>> sentences,
                                     const TrainConfig& cfg);

// ---- training ----------------------------------------------------------------

struct TrainResult {
  Checkpoint best;
  Checkpoint final;
  nlohmann::json report;
};

// Sentences are grouped into batches of similar length. Each epoch shuffles
// with the data-order seed, stable-sorts by length, cuts batches and shuffles
// the batch order.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::vector<TokenId>> sentences,
                                                   std::size_t batch_size, Rng& rng);

TrainResult train_rnnlm(const CorpusData& data, const TrainConfig& cfg);
TrainResult train_vae(const CorpusData& data, const TrainConfig& cfg);
TrainResult train_seqgan(const CorpusData& data, const TrainConfig& cfg);
TrainResult train_model(const CorpusData& data, const TrainConfig& cfg);

}  // namespace lmforge::training
