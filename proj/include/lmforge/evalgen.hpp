#pragma once

// Generation and analysis: sample files and their statistics, latent
// interpolation, posterior-mean encoding and 2-D projections (PCA, exact
// t-SNE).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lmforge/training.hpp"

namespace lmforge::evalgen {

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// ---- samples -----------------------------------------------------------------

struct SampleReport {
  std::size_t n_requested = 0;
  std::size_t n_unique = 0;
  std::size_t n_unique_not_in_train = 0;
  double mean_tokens = 0.0;
  double stddev_tokens = 0.0;  // population
  std::size_t unique_words = 0;
  std::vector<std::size_t> lengths;

  bool operator==(const SampleReport&) const = default;
};

nlohmann::json to_json(const SampleReport& r);

// Uniqueness is exact equality of token sequences.
SampleReport sample_stats(std::span<const std::vector<std::string>> samples,
                          std::span<const std::vector<std::string>> train);
// One sample per line, tokens separated by single spaces. An empty sample
// file is a DegenerateInputError.
SampleReport sample_stats_files(const std::filesystem::path& samples, const std::filesystem::path& train);

enum class GenMode { greedy, ancestral };
GenMode parse_gen_mode(std::string_view name);

// Sample i uses Rng(derive_seed(seed, i)); VAE samples decode z ~ N(0, I)
// drawn from that stream. Output order is sample order regardless of the
// worker count. <eos> is stripped.
std::vector<std::vector<TokenId>> generate_samples(const training::ModelBundle& model, std::size_t n,
                                                   GenMode mode, std::uint64_t seed, std::size_t max_len);

// Space-joined tokens.
std::string detokenize(std::span<const TokenId> ids, const corpus::Vocabulary& vocab);

struct Interpolation {
  std::vector<double> z1, z2;
  std::vector<std::vector<TokenId>> sentences;  // greedy, <eos> stripped
};

// z1, z2 ~ N(0, I) from Rng(seed); sentence j decodes (1-a) z1 + a z2 with
// a = j / (k - 1). ContractError for k < 2 or a non-VAE model.
Interpolation interpolate(const training::ModelBundle& model, std::uint64_t seed, std::size_t k,
                          std::size_t max_len);
std::vector<std::vector<TokenId>> interpolate_between(const models::VaeModel& m, std::span<const double> z1,
                                                      std::span<const double> z2, std::size_t k,
                                                      std::size_t max_len);

// Posterior means, one row per sentence in input order.
Matrix encode_split_latents(const models::VaeModel& m, std::span<const std::vector<TokenId>> sentences,
                            std::size_t batch_size = 64);

// ---- projections ---------------------------------------------------------------

enum class ProjectionMethod { pca, tsne };
ProjectionMethod parse_projection_method(std::string_view name);

struct ProjectionConfig {
  ProjectionMethod method = ProjectionMethod::pca;
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double momentum = 0.8;
  std::uint64_t seed = 0;
};

struct Projection {
  Matrix coords;  // N x 2
  // t-SNE only: KL(P||Q) at iteration 0, every 50 iterations and at the end.
  std::vector<std::pair<std::size_t, double>> kl_trace;
};

// Mean-centres, then power iteration with deflation (tolerance 1e-9).
Matrix pca_2d(const Matrix& x);
// Conditional affinities p_{j|i}; each row's entropy matches log(perplexity)
// within 1e-5.
Matrix tsne_conditional_affinities(const Matrix& x, double perplexity);
Projection tsne_2d(const Matrix& x, const ProjectionConfig& cfg);
// DegenerateInputError for N < 3, Z < 2 or all-identical rows.
Projection project_2d(const Matrix& x, const ProjectionConfig& cfg);

void write_projection_csv(const std::filesystem::path& path, const Matrix& coords);
std::string projection_svg(const Matrix& coords);

// Numbered lines "i<TAB>sentence" for the first n samples.
void export_for_annotation(std::span<const std::string> sentences, std::size_t n,
                           const std::filesystem::path& path);

}  // namespace lmforge::evalgen
