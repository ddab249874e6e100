#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lmforge/errors.hpp"
#include "lmforge/evalgen.hpp"
#include "test_support.hpp"
#include "toy_corpus.hpp"

using namespace lmforge;
using namespace lmforge::evalgen;
using lmforge::training::ModelBundle;
using lmforge::training::ModelKind;

namespace {

std::vector<std::vector<std::string>> toks(std::initializer_list<const char*> lines) {
  std::vector<std::vector<std::string>> out;
  for (const char* l : lines) out.push_back(corpus::tokenize(l));
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "lmforge_evalgen_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const auto p = temp_path(name);
  std::ofstream(p, std::ios::binary) << contents;
  return p;
}

void fill(Tensor t, double v) {
  for (double& x : t.mutable_values()) x = v;
}

ModelBundle toy_vae(std::size_t vocab = 30, std::uint64_t seed = 1) {
  auto cfg = testsupport::toy_config(ModelKind::vae);
  cfg.seeds.params = seed;
  ModelBundle b = training::init_models(cfg, vocab);
  // Sharpen the output layer so greedy decoding depends visibly on z.
  for (double& v : b.vae->latent_to_state.mutable_values()) v *= 40.0;
  for (double& v : b.vae->out_w.mutable_values()) v *= 40.0;
  return b;
}

double dist(const Matrix& m, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t k = 0; k < m.cols; ++k) s += (m.at(a, k) - m.at(b, k)) * (m.at(a, k) - m.at(b, k));
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("evalgen") {
  TEST_CASE("sample_stats hand example") {
    const auto samples = toks({"a b", "a b", "c"});
    const auto train = toks({"c"});
    const SampleReport r = sample_stats(samples, train);
    CHECK(r.n_requested == 3);
    CHECK(r.n_unique == 2);
    CHECK(r.n_unique_not_in_train == 1);
    CHECK(r.mean_tokens == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK(r.stddev_tokens == doctest::Approx(std::sqrt(2.0 / 9.0)).epsilon(1e-15));
    CHECK(r.unique_words == 3);
    CHECK(r.lengths == std::vector<std::size_t>{2, 2, 1});
  }

  TEST_CASE("sample_stats identities") {
    const auto a = toks({"x y z", "y z", "x y z", "q"});
    const SampleReport same = sample_stats(a, a);
    CHECK(same.n_unique_not_in_train == 0);
    CHECK(same.n_unique <= same.n_requested);
    const SampleReport one = sample_stats(toks({"a b c"}), a);
    CHECK(one.stddev_tokens == 0.0);
    CHECK(one.mean_tokens == 3.0);
    CHECK_THROWS_AS(sample_stats({}, a), DegenerateInputError);
  }

  TEST_CASE("sample_stats from files") {
    const auto s = temp_file("samples.txt", "a b\na b\nc\n");
    const auto t = temp_file("train.txt", "c\n");
    const SampleReport r = sample_stats_files(s, t);
    CHECK(r.n_unique == 2);
    CHECK(r.n_unique_not_in_train == 1);
    CHECK(r.unique_words == 3);
    CHECK_THROWS_AS(sample_stats_files(temp_file("empty.txt", ""), t), DegenerateInputError);
    CHECK_THROWS_AS(sample_stats_files(temp_path("missing.txt"), t), DataError);
  }

  TEST_CASE("generation is reproducible and independent of the worker count") {
    const ModelBundle vae = toy_vae();
    const auto a = generate_samples(vae, 1, GenMode::ancestral, 42, 12);
    CHECK(a == generate_samples(vae, 1, GenMode::ancestral, 42, 12));
    const auto many = generate_samples(vae, 40, GenMode::ancestral, 7, 12);
    setenv("LMFORGE_THREADS", "1", 1);
    const auto serial = generate_samples(vae, 40, GenMode::ancestral, 7, 12);
    unsetenv("LMFORGE_THREADS");
    CHECK(many == serial);
    for (const auto& s : many) {
      CHECK(s.size() <= 12);
      if (!s.empty()) CHECK(s.back() != corpus::kEosId);
    }
    auto cfg = testsupport::toy_config(ModelKind::rnnlm);
    const ModelBundle lm = training::init_models(cfg, 30);
    CHECK(generate_samples(lm, 5, GenMode::greedy, 1, 12) == generate_samples(lm, 5, GenMode::greedy, 2, 12));
    CHECK_THROWS_AS(generate_samples(lm, 0, GenMode::greedy, 1, 12), ContractError);
  }

  TEST_CASE("a one-hot-degenerate model yields one unique sample") {
    auto cfg = testsupport::toy_config(ModelKind::rnnlm);
    ModelBundle lm = training::init_models(cfg, 30);
    fill(lm.generator->out_w, 0.0);
    fill(lm.generator->out_b, -50.0);
    lm.generator->out_b.mutable_values()[7] = 50.0;
    const auto samples = generate_samples(lm, 25, GenMode::ancestral, 3, 6);
    std::vector<std::vector<std::string>> text;
    const auto vocab = testsupport::toy_vocab(30);
    for (const auto& s : samples) text.push_back(corpus::tokenize(detokenize(s, vocab)));
    const SampleReport r = sample_stats(text, {});
    CHECK(r.n_unique == 1);
    CHECK(r.n_unique_not_in_train == 1);
    CHECK(text[0] == std::vector<std::string>(6, "w7"));
  }

  TEST_CASE("interpolation endpoint identity over 20 seeds") {
    const ModelBundle vae = toy_vae();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Interpolation it = interpolate(vae, seed, 10, 12);
      REQUIRE(it.sentences.size() == 10);
      auto strip = [](std::vector<TokenId> v) {
        if (!v.empty() && v.back() == corpus::kEosId) v.pop_back();
        return v;
      };
      CHECK(it.sentences.front() == strip(models::generate_greedy(*vae.vae, it.z1, 12)));
      CHECK(it.sentences.back() == strip(models::generate_greedy(*vae.vae, it.z2, 12)));
    }
    const Interpolation two = interpolate(vae, 5, 2, 12);
    const Interpolation ten = interpolate(vae, 5, 10, 12);
    CHECK(two.sentences.size() == 2);
    CHECK(two.sentences.front() == ten.sentences.front());
    CHECK(two.sentences.back() == ten.sentences.back());
    const auto same = interpolate_between(*vae.vae, ten.z1, ten.z1, 7, 12);
    for (const auto& s : same) CHECK(s == same.front());
    CHECK_THROWS_AS(interpolate(vae, 1, 1, 12), ContractError);
    const ModelBundle lm = training::init_models(testsupport::toy_config(ModelKind::rnnlm), 30);
    CHECK_THROWS_AS(interpolate(lm, 1, 5, 12), ContractError);
  }

  TEST_CASE("encode_split_latents") {
    ModelBundle vae = toy_vae();
    Rng rng(4);
    const auto sents = testsupport::progression_sentences(13, 30, rng);
    const Matrix a = encode_split_latents(*vae.vae, sents, 4);
    CHECK(a.rows == 13);
    CHECK(a.cols == vae.vae->latent_size());
    const Matrix b = encode_split_latents(*vae.vae, sents, 64);
    CHECK(a.data == b.data);
    const auto q = models::vae_encode(*vae.vae, sents[5]);
    for (std::size_t k = 0; k < a.cols; ++k) CHECK(a.at(5, k) == doctest::Approx(q.mu.values()[k]).epsilon(1e-12));
    for (auto p : vae.vae->parameters()) fill(p.tensor, 0.0);
    for (double v : encode_split_latents(*vae.vae, sents).data) CHECK(v == 0.0);
    const std::vector<std::vector<TokenId>> bad{{5, 99}};
    CHECK_THROWS_AS(encode_split_latents(*vae.vae, bad), ContractError);
  }

  TEST_CASE("pca reconstructs planar data and returns orthogonal columns") {
    Rng rng(8);
    const std::size_t n = 40, z = 7;
    std::vector<double> u(z), v(z);
    for (double& x : u) x = rng.normal();
    for (double& x : v) x = rng.normal();
    // Orthonormalize the plane basis.
    auto dotv = [](const std::vector<double>& a, const std::vector<double>& b) {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return s;
    };
    const double nu = std::sqrt(dotv(u, u));
    for (double& x : u) x /= nu;
    const double p = dotv(u, v);
    for (std::size_t i = 0; i < z; ++i) v[i] -= p * u[i];
    const double nv = std::sqrt(dotv(v, v));
    for (double& x : v) x /= nv;
    Matrix x{n, z, std::vector<double>(n * z)};
    for (std::size_t r = 0; r < n; ++r) {
      const double a = 3.0 * rng.normal(), b = rng.normal();
      for (std::size_t k = 0; k < z; ++k) x.at(r, k) = 1.5 + a * u[k] + b * v[k];
    }
    const Matrix y = pca_2d(x);
    REQUIRE(y.rows == n);
    REQUIRE(y.cols == 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) CHECK(std::abs(dist(x, i, j) - dist(y, i, j)) < 1e-6);

    Matrix noisy{60, 5, std::vector<double>(300)};
    for (std::size_t r = 0; r < 60; ++r)
      for (std::size_t k = 0; k < 5; ++k) noisy.at(r, k) = (k + 1.0) * rng.normal();
    const Matrix w = pca_2d(noisy);
    double d01 = 0.0, n0 = 0.0, n1 = 0.0;
    for (std::size_t r = 0; r < 60; ++r) {
      d01 += w.at(r, 0) * w.at(r, 1);
      n0 += w.at(r, 0) * w.at(r, 0);
      n1 += w.at(r, 1) * w.at(r, 1);
    }
    CHECK(std::abs(d01) / std::sqrt(n0 * n1) < 1e-9);
    CHECK(n0 >= n1);
  }

  TEST_CASE("projection input validation") {
    const Matrix two{2, 3, std::vector<double>(6, 1.0)};
    CHECK_THROWS_AS(pca_2d(two), DegenerateInputError);
    const Matrix flat{5, 1, {1, 2, 3, 4, 5}};
    CHECK_THROWS_AS(pca_2d(flat), DegenerateInputError);
    const Matrix same{5, 3, std::vector<double>(15, 2.0)};
    CHECK_THROWS_AS(pca_2d(same), DegenerateInputError);
    ProjectionConfig cfg;
    cfg.method = ProjectionMethod::tsne;
    CHECK_THROWS_AS(project_2d(same, cfg), DegenerateInputError);
    Matrix small{5, 3, std::vector<double>(15)};
    for (std::size_t i = 0; i < 15; ++i) small.data[i] = static_cast<double>(i * i % 7);
    CHECK_THROWS_AS(project_2d(small, cfg), ContractError);  // perplexity 30 >= N - 1
    CHECK_THROWS_AS(parse_projection_method("umap"), UsageError);
  }

  TEST_CASE("t-SNE separates three Gaussian clusters") {
    Rng rng(21);
    const std::size_t per = 8, z = 16, n = 3 * per;
    Matrix x{n, z, std::vector<double>(n * z)};
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> centre(z);
      for (double& v : centre) v = 10.0 * rng.normal();
      for (std::size_t i = 0; i < per; ++i)
        for (std::size_t k = 0; k < z; ++k) x.at(c * per + i, k) = centre[k] + rng.normal();
    }
    const double perplexity = 5.0;
    const Matrix p = tsne_conditional_affinities(x, perplexity);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0, entropy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        sum += p.at(i, j);
        if (p.at(i, j) > 0.0) entropy -= p.at(i, j) * std::log(p.at(i, j));
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
      CHECK(std::abs(entropy - std::log(perplexity)) < 1e-5);
      CHECK(p.at(i, i) == 0.0);
    }
    ProjectionConfig cfg;
    cfg.method = ProjectionMethod::tsne;
    cfg.perplexity = perplexity;
    cfg.seed = 3;
    const Projection out = project_2d(x, cfg);
    REQUIRE(out.coords.rows == n);
    for (double v : out.coords.data) CHECK(std::isfinite(v));
    REQUIRE(out.kl_trace.size() >= 2);
    for (const auto& [it, kl] : out.kl_trace) CHECK(std::isfinite(kl));
    CHECK(out.kl_trace.back().second < out.kl_trace.front().second);
    double intra = 0.0, inter = 0.0;
    std::size_t ni = 0, ne = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (i / per == j / per) {
          intra += dist(out.coords, i, j);
          ++ni;
        } else {
          inter += dist(out.coords, i, j);
          ++ne;
        }
      }
    CHECK(intra / static_cast<double>(ni) < inter / static_cast<double>(ne));
    const Projection again = project_2d(x, cfg);
    CHECK(again.coords.data == out.coords.data);
  }

  TEST_CASE("projection and annotation files") {
    const Matrix c{3, 2, {0.0, 1.0, 2.5, -1.0, 3.0, 3.0}};
    const auto csv = temp_path("proj.csv");
    write_projection_csv(csv, c);
    std::ifstream in(csv);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "index,x,y");
    CHECK(row == "0,0,1");
    const std::string svg = projection_svg(c);
    CHECK(svg.rfind("<svg", 0) == 0);
    std::size_t circles = 0;
    for (std::size_t at = svg.find("<circle"); at != std::string::npos; at = svg.find("<circle", at + 1)) ++circles;
    CHECK(circles == 3);

    std::vector<std::string> sents;
    for (int i = 0; i < 150; ++i) sents.push_back("s " + std::to_string(i));
    const auto ann = temp_path("annotate.txt");
    export_for_annotation(sents, 100, ann);
    std::ifstream a(ann);
    std::string line;
    std::size_t count = 0;
    while (std::getline(a, line)) {
      ++count;
      CHECK(line == std::to_string(count) + "\ts " + std::to_string(count - 1));
    }
    CHECK(count == 100);
  }
}
