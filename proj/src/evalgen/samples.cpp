#include <cmath>
#include <fstream>
#include <set>

#include "lmforge/errors.hpp"
#include "lmforge/evalgen.hpp"
#include "lmforge/parallel.hpp"

namespace lmforge::evalgen {

nlohmann::json to_json(const SampleReport& r) {
  return {{"n_requested", r.n_requested},
          {"n_unique", r.n_unique},
          {"n_unique_not_in_train", r.n_unique_not_in_train},
          {"mean_tokens", r.mean_tokens},
          {"stddev_tokens", r.stddev_tokens},
          {"unique_words", r.unique_words},
          {"lengths", r.lengths}};
}

SampleReport sample_stats(std::span<const std::vector<std::string>> samples,
                          std::span<const std::vector<std::string>> train) {
  if (samples.empty()) throw DegenerateInputError("sample_stats: no samples");
  const std::set<std::vector<std::string>> train_set(train.begin(), train.end());
  const std::set<std::vector<std::string>> unique(samples.begin(), samples.end());
  std::set<std::string> words;
  SampleReport r;
  r.n_requested = samples.size();
  r.n_unique = unique.size();
  for (const auto& s : unique) r.n_unique_not_in_train += !train_set.contains(s);
  double sum = 0.0;
  for (const auto& s : samples) {
    r.lengths.push_back(s.size());
    sum += static_cast<double>(s.size());
    words.insert(s.begin(), s.end());
  }
  const double n = static_cast<double>(samples.size());
  r.mean_tokens = sum / n;
  double ss = 0.0;
  for (std::size_t len : r.lengths) ss += (static_cast<double>(len) - r.mean_tokens) * (static_cast<double>(len) - r.mean_tokens);
  r.stddev_tokens = std::sqrt(ss / n);
  r.unique_words = words.size();
  return r;
}

namespace {

std::vector<std::vector<std::string>> read_lines_as_tokens(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(corpus::tokenize(line));
  return out;
}

}  // namespace

SampleReport sample_stats_files(const std::filesystem::path& samples, const std::filesystem::path& train) {
  const auto s = read_lines_as_tokens(samples);
  if (s.empty()) throw DegenerateInputError("sample_stats: " + samples.string() + " is empty");
  return sample_stats(s, read_lines_as_tokens(train));
}

GenMode parse_gen_mode(std::string_view name) {
  if (name == "greedy") return GenMode::greedy;
  if (name == "ancestral") return GenMode::ancestral;
  throw UsageError("unknown generation mode '" + std::string(name) + "' (allowed: greedy, ancestral)");
}

namespace {

std::vector<TokenId> strip_eos(std::vector<TokenId> ids) {
  if (!ids.empty() && ids.back() == corpus::kEosId) ids.pop_back();
  return ids;
}

std::vector<double> normal_vector(std::size_t n, Rng& rng) {
  std::vector<double> z(n);
  for (double& v : z) v = rng.normal();
  return z;
}

}  // namespace

std::vector<std::vector<TokenId>> generate_samples(const training::ModelBundle& model, std::size_t n, GenMode mode,
                                                   std::uint64_t seed, std::size_t max_len) {
  if (n == 0) throw ContractError("generate: n must be at least 1");
  std::vector<std::vector<TokenId>> out(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    std::vector<TokenId> ids;
    if (model.kind == training::ModelKind::vae) {
      const auto z = normal_vector(model.vae->latent_size(), rng);
      ids = mode == GenMode::greedy ? models::generate_greedy(*model.vae, z, max_len)
                                    : models::generate_ancestral(*model.vae, z, max_len, rng);
    } else {
      ids = mode == GenMode::greedy ? models::generate_greedy(*model.generator, max_len)
                                    : models::generate_ancestral(*model.generator, max_len, rng);
    }
    out[i] = strip_eos(std::move(ids));
  });
  return out;
}

std::string detokenize(std::span<const TokenId> ids, const corpus::Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(ids[i]);
  }
  return out;
}

std::vector<std::vector<TokenId>> interpolate_between(const models::VaeModel& m, std::span<const double> z1,
                                                      std::span<const double> z2, std::size_t k,
                                                      std::size_t max_len) {
  if (k < 2) throw ContractError("interpolate: k must be at least 2");
  if (z1.size() != m.latent_size() || z2.size() != m.latent_size())
    throw DimensionError("interpolate: endpoints must have " + std::to_string(m.latent_size()) + " values");
  std::vector<std::vector<TokenId>> out;
  for (std::size_t j = 0; j < k; ++j) {
    const double a = static_cast<double>(j) / static_cast<double>(k - 1);
    std::vector<double> z(z1.size());
    for (std::size_t d = 0; d < z.size(); ++d) z[d] = (1.0 - a) * z1[d] + a * z2[d];
    out.push_back(strip_eos(models::generate_greedy(m, z, max_len)));
  }
  return out;
}

Interpolation interpolate(const training::ModelBundle& model, std::uint64_t seed, std::size_t k,
                          std::size_t max_len) {
  if (model.kind != training::ModelKind::vae)
    throw ContractError("interpolate: needs a VAE checkpoint, got " + std::string(training::to_string(model.kind)));
  Rng rng(seed);
  Interpolation out;
  out.z1 = normal_vector(model.vae->latent_size(), rng);
  out.z2 = normal_vector(model.vae->latent_size(), rng);
  out.sentences = interpolate_between(*model.vae, out.z1, out.z2, k, max_len);
  return out;
}

Matrix encode_split_latents(const models::VaeModel& m, std::span<const std::vector<TokenId>> sentences,
                            std::size_t batch_size) {
  if (sentences.empty()) throw DegenerateInputError("encode: no sentences");
  for (const auto& s : sentences)
    for (TokenId id : s)
      if (id < 0 || static_cast<std::size_t>(id) >= m.vocab_size())
        throw ContractError("encode: token id " + std::to_string(id) + " outside the model vocabulary");
  NoGradGuard no_grad;
  Matrix out{sentences.size(), m.latent_size(), {}};
  out.data.reserve(out.rows * out.cols);
  for (std::size_t at = 0; at < sentences.size(); at += batch_size) {
    const auto chunk = sentences.subspan(at, std::min(batch_size, sentences.size() - at));
    const auto q = models::vae_encode_batch(m, chunk);
    out.data.insert(out.data.end(), q.mu.values().begin(), q.mu.values().end());
  }
  return out;
}

void export_for_annotation(std::span<const std::string> sentences, std::size_t n, const std::filesystem::path& path) {
  if (sentences.empty()) throw DegenerateInputError("export-for-annotation: no sentences");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::size_t count = std::min(n, sentences.size());
  for (std::size_t i = 0; i < count; ++i) out << (i + 1) << '\t' << sentences[i] << '\n';
}

}  // namespace lmforge::evalgen
