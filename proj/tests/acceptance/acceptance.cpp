// Runs acceptance criteria 1-9 and prints one PASS/FAIL line per criterion.
// Exit status is 0 only when all nine pass.
//
//   lmforge_acceptance [work_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "lmforge/corpus.hpp"
#include "lmforge/digest.hpp"
#include "lmforge/evalgen.hpp"
#include "lmforge/models.hpp"
#include "lmforge/schedules.hpp"
#include "lmforge/training.hpp"
#include "test_support.hpp"
#include "toy_corpus.hpp"

using namespace lmforge;
using nlohmann::json;
using testsupport::gradcheck;
using testsupport::random_tensor;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = LMFORGE_FIXTURE_DIR;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void scale_all(const models::ParamList& params, Rng& rng, double range) {
  for (auto p : params)
    for (double& v : p.tensor.mutable_values()) v = rng.uniform(-range, range);
}

std::vector<TokenId> random_ids(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<TokenId> ids(n);
  for (auto& id : ids) id = 4 + static_cast<TokenId>(rng.below(vocab - 4));
  return ids;
}

double dist(const evalgen::Matrix& m, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t k = 0; k < m.cols; ++k) s += (m.at(a, k) - m.at(b, k)) * (m.at(a, k) - m.at(b, k));
  return std::sqrt(s);
}

// ---- 1 -----------------------------------------------------------------------

void gradient_integrity(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst_ops = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = random_tensor({3, 4}, rng), y = random_tensor({3, 4}, rng);
    Tensor pos = Tensor::from({3, 4}, std::vector<double>(12), true);
    for (double& e : pos.mutable_values()) e = rng.uniform(0.5, 2.0);
    Tensor w = random_tensor({2, 4}, rng), b = random_tensor({2}, rng), m = random_tensor({4, 2}, rng);
    Tensor table = random_tensor({6, 4}, rng);
    const std::vector<TokenId> ids{1, 3, 1};
    const std::vector<std::uint8_t> pick{1, 0, 1};
    const std::vector<TokenId> targets{0, 1, 1};
    const std::vector<std::uint8_t> mask{1, 1, 0};
    const std::vector<double> weights{0.3, -0.7, 1.1}, labels{1, 0, 1};
    Tensor conv = random_tensor({3, 2 * 4}, rng), bias = random_tensor({4}, rng);
    auto f = [&] {
      Tensor e = add(mul(tanh(x), sigmoid(y)), exp(scale(x, 0.3)));
      e = sub(e, neg(log(add(pos, square(y)))));
      e = add_row_bias(affine(e, 0.7, 0.1), bias);
      Tensor g = gather_rows(table, ids);
      Tensor s = select_rows(pick, e, g);
      Tensor lin = linear(s, w, b);                       // [3,2]
      Tensor mm = add(lin, matmul(s, m));                 // [3,2]
      Tensor nt = matmul_nt(s, w);                        // [3,2]
      Tensor parts[] = {mm, nt};
      Tensor cat = concat_cols(parts);                    // [3,4]
      Tensor rows[] = {cat, e};
      Tensor stacked = concat_rows(rows);                 // [6,4]
      Tensor pooled = max_pool_groups(relu(matmul_nt(windows(stacked, 2, 3, 2), conv)), 2);  // [2,3]
      Tensor loss = add(sum(square(pooled)), mean(e));
      loss = add(loss, softmax_cross_entropy(cat, targets, mask));
      loss = add(loss, weighted_nll(nt, std::vector<TokenId>{1, 0, 1}, weights));
      loss = add(loss, bce_with_logits(linear(s, Tensor::from({1, 4}, {0.2, -0.1, 0.3, 0.5}), Tensor()), labels));
      return loss;
    };
    worst_ops = std::max(worst_ops, gradcheck(f, {x, y, pos, w, b, m, table, conv, bias}));
    {
      auto p = models::LstmParams::init(3, 4, rng);
      Tensor in = random_tensor({2, 3}, rng), h = random_tensor({2, 4}, rng, 0.5), c = random_tensor({2, 4}, rng, 0.5);
      auto g = [&] {
        auto s = models::lstm_step(in, {h, c}, p);
        return sum(square(add(s.h, s.c)));
      };
      models::ParamList pl;
      p.append_to("lstm", pl);
      auto params = models::tensors_of(pl);
      params.push_back(in);
      params.push_back(h);
      params.push_back(c);
      worst_ops = std::max(worst_ops, gradcheck(g, params));
    }
  }

  double worst_vae = 0, worst_d = 0, worst_pg = 0;
  const std::size_t widths[] = {1, 2, 3};
  for (int trial = 0; trial < 20; ++trial) {
    models::VaeModel m = models::VaeModel::init(11, 4, 5, 3, rng);
    scale_all(m.parameters(), rng, 0.5);
    auto ids = random_ids(1 + rng.below(5), 11, rng);
    Tensor eps = random_tensor({1, 3}, rng, 1.0, false);
    std::vector<std::uint8_t> wd(ids.size() + 1);
    for (std::size_t i = 1; i < wd.size(); ++i) wd[i] = rng.bernoulli(0.3);
    const double beta = rng.uniform();
    worst_vae = std::max(worst_vae, gradcheck([&] { return models::vae_loss(m, ids, beta, eps, wd).total; },
                                              models::tensors_of(m.parameters())));

    models::Discriminator d = models::Discriminator::init(11, 4, widths, 3, 6, rng);
    scale_all(d.parameters(), rng, 0.5);
    std::vector<std::vector<TokenId>> seqs{random_ids(4, 11, rng), random_ids(6, 11, rng), random_ids(2, 11, rng)};
    std::vector<double> labels{1, 0, 1};
    worst_d = std::max(worst_d, gradcheck([&] { return bce_with_logits(models::discriminator_logits(d, seqs), labels); },
                                          models::tensors_of(d.parameters())));

    models::GeneratorPolicy g = models::GeneratorPolicy::init(11, 4, 5, rng);
    scale_all(g.parameters(), rng, 0.5);
    std::vector<std::vector<TokenId>> ys{random_ids(3, 11, rng), random_ids(5, 11, rng)};
    std::vector<std::vector<double>> qs;
    for (const auto& y : ys) {
      std::vector<double> q(y.size());
      for (double& e : q) e = rng.uniform();
      qs.push_back(q);
    }
    worst_pg = std::max(worst_pg, gradcheck([&] { return models::policy_gradient_loss_batch(g, ys, qs, 0.3); },
                                            models::tensors_of(g.parameters())));
  }
  const double elapsed = seconds_since(t0);
  v.detail << "worst rel err: ops " << worst_ops << ", vae " << worst_vae << ", bce " << worst_d << ", pg "
           << worst_pg << "; " << elapsed << " s";
  v.require(worst_ops < 1e-4, "op gradients");
  v.require(worst_vae < 1e-4, "vae total");
  v.require(worst_d < 1e-4, "discriminator bce");
  v.require(worst_pg < 1e-4, "policy gradient");
  v.require(elapsed < 120.0, "runtime under 2 min");
}

// ---- 2 -----------------------------------------------------------------------

void schedule_table(Verdict& v) {
  auto make = [](ScheduleKind k) {
    Schedule s;
    s.kind = k;
    s.total_steps = 1000;
    s.cycles = 4;
    s.anneal_ratio = 0.5;
    s.linear_ratio = 1.0;
    return s;
  };
  const Schedule zero = make(ScheduleKind::zero), constant = make(ScheduleKind::constant),
                 linear = make(ScheduleKind::linear), cyc = make(ScheduleKind::cyclical);
  bool flat = true;
  for (std::uint64_t t = 0; t < 1000; ++t) flat = flat && beta_at(zero, t) == 0.0 && beta_at(constant, t) == 1.0;
  v.require(flat, "zero and constant");
  v.require(beta_at(linear, 0) == 0.0 && beta_at(linear, 999) == 1.0, "linear endpoints");
  v.require(beta_at(cyc, 0) == 0.0, "cyclical t=0");
  v.require(beta_at(cyc, 125) == 1.0, "cyclical t=125");
  v.require(beta_at(cyc, 250) == 0.0, "cyclical t=250");
  v.require(beta_at(cyc, 62) == 0.496, "cyclical t=62");
  v.detail << "cyclical(62) = " << beta_at(cyc, 62) << ", linear(999) = " << beta_at(linear, 999);
}

// ---- 3 -----------------------------------------------------------------------

void kl_correctness(Verdict& v) {
  Rng rng(303);
  double worst = 0.0;
  const int n = 1000000;
  for (int pair = 0; pair < 10; ++pair) {
    const std::size_t dim = 3;
    std::vector<double> mu(dim), lv(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      mu[j] = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(1.0, 2.0);
      lv[j] = rng.uniform(-1.0, 1.0);
    }
    const double analytic = models::kl_gaussian(Tensor::from({1, dim}, mu), Tensor::from({1, dim}, lv)).item();
    // E_q[log q(z) - log p(z)] with antithetic pairs (e, -e); 2*pi terms cancel.
    double acc = 0.0;
    for (int s = 0; s < n / 2; ++s) {
      double t1 = 0.0, t2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double sd = std::exp(0.5 * lv[j]), e = rng.normal();
        const double za = mu[j] + sd * e, zb = mu[j] - sd * e;
        t1 += -0.5 * lv[j] - 0.5 * e * e + 0.5 * za * za;
        t2 += -0.5 * lv[j] - 0.5 * e * e + 0.5 * zb * zb;
      }
      acc += t1 + t2;
    }
    worst = std::max(worst, std::abs(acc / n - analytic) / analytic);
  }
  const double unit = models::kl_gaussian(Tensor::from({1, 1}, {1.0}), Tensor::zeros({1, 1})).item();
  v.detail << "worst MC rel err " << worst << " over 10 pairs, KL(mu=1, sigma=1) = " << unit;
  v.require(worst < 0.01, "Monte-Carlo agreement");
  v.require(unit == 0.5, "closed form 0.5");
}

// ---- 4 -----------------------------------------------------------------------

void corpus_pipeline(Verdict& v, const fs::path& work) {
  corpus::BuildConfig cfg;
  cfg.vocab_size = 2000;
  cfg.train_n = 2000;
  cfg.dev_n = 200;
  cfg.test_n = 200;
  cfg.seed = 7;
  const fs::path a = work / "corpus_a", b = work / "corpus_b";
  fs::remove_all(a);
  fs::remove_all(b);
  corpus::build_corpus(kFixtures / "news_dump.txt", a, cfg);
  corpus::build_corpus(kFixtures / "news_dump.txt", b, cfg);

  const auto vocab = corpus::Vocabulary::read(a / "vocab.txt");
  std::size_t violations = 0, digits = 0, sentences = 0;
  for (const char* f : {"train.txt", "valid.txt", "test.txt"}) {
    for (const auto& s : corpus::read_split_file(a / f)) {
      ++sentences;
      violations += !corpus::filter_sentence(s, vocab).accepted;
      for (const auto& t : s) digits += t.find_first_of("0123456789") != std::string::npos;
    }
  }
  bool identical = true;
  for (const char* f : {"train.txt", "valid.txt", "test.txt", "vocab.txt", "stats.json"})
    identical = identical && slurp(a / f) == slurp(b / f);
  const json golden = json::parse(slurp(kFixtures / "news_desk_stats_golden.json"));
  const json stats = json::parse(slurp(a / "stats.json"));
  v.detail << sentences << " sentences, " << violations << " filter violations, " << digits
           << " tokens with digits, oracle violations " << golden["violations"];
  v.require(violations == 0 && golden["violations"] == 0, "(a) filter violations");
  v.require(identical, "(b) byte-identical reruns");
  v.require(stats["splits"] == golden["splits"], "(c) stats.json equals the statistics oracle");
  v.require(digits == 0, "(d) raw digits");
}

// ---- suite runs (5, 6, 9) ----------------------------------------------------

struct SuiteRun {
  fs::path dir;
  json report;
  double seconds = 0.0;
};

SuiteRun run_suite_once(const fs::path& dir) {
  fs::remove_all(dir);
  cli::SuiteOptions o;
  o.preset = "desk";
  o.seed = 7;
  o.input = kFixtures / "news_dump.txt";
  o.out = dir;
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream log;
  SuiteRun r{dir, cli::run_suite(o, log), 0.0};
  r.seconds = seconds_since(t0);
  return r;
}

json run_report(const SuiteRun& s, const std::string& run) {
  return json::parse(slurp(s.dir / "runs" / run / "report.json"));
}

void vae_training(Verdict& v, const SuiteRun& a, const SuiteRun& b) {
  for (const char* sched : {"zero", "constant", "linear", "cyclical"}) {
    const std::string run = std::string("vae-") + sched;
    const json r = run_report(a, run);
    const json& epochs = r["epochs"];
    const double ratio = epochs.back()["recon"].get<double>() / epochs.front()["recon"].get<double>();
    v.detail << run << " ratio " << ratio << "; ";
    v.require(epochs.size() == 10, run + " runs 10 epochs");
    v.require(ratio <= 0.7, run + " recon ratio");
    v.require(r["sentences"]["train"] == 2000, run + " trains on 2000 sentences");
    const json manifest = json::parse(slurp(a.dir / "runs" / run / "manifest.json"));
    const double secs = manifest["wall_clock_seconds"].get<double>();
    v.require(secs < 600.0, run + " under 10 min");
    if (std::string(sched) == "zero") {
      bool exact = !r["steps"].empty();
      for (const auto& s : r["steps"]) exact = exact && s["total"].get<double>() - s["recon"].get<double>() == 0.0;
      v.require(exact, "zero schedule total - recon == 0 at every step");
    }
    for (const char* f : {"report.json", "best.ckpt", "final.ckpt"})
      v.require(sha256_file(a.dir / "runs" / run / f) == sha256_file(b.dir / "runs" / run / f),
                run + " byte-deterministic " + f);
  }
}

void perplexity_sanity(Verdict& v, const SuiteRun& a) {
  const double ppl = run_report(a, "rnnlm")["test_perplexity"].get<double>();
  const std::size_t vocab = a.report["corpus"]["vocab_size"].get<std::size_t>();
  const double lp[] = {std::log(0.5), std::log(0.25)};
  const double hand = training::perplexity_from_log_probs(lp);
  v.detail << "rnnlm test perplexity " << ppl << " vs V = " << vocab << ", hand example " << hand
           << ", VAE order " << a.report["checks"]["vae_perplexity_order"].dump()
           << " (zero lowest: " << a.report["checks"]["zero_lowest_among_vaes"] << ", not gated)";
  v.require(ppl < static_cast<double>(vocab), "rnnlm below uniform");
  v.require(std::abs(hand - 2.0 * std::sqrt(2.0)) < 1e-9, "2 sqrt 2");
}

// ---- 7 -----------------------------------------------------------------------

void seqgan_mechanics(Verdict& v) {
  // (a) separable corpus
  const training::CorpusData data = testsupport::make_toy_corpus(200, 40, 13, true);
  training::TrainConfig cfg = testsupport::toy_config(training::ModelKind::seqgan);
  cfg.seqgan.g_pretrain_epochs = 0;
  cfg.seqgan.d_pretrain_epochs = 5;
  cfg.seqgan.adv_epochs = 0;
  cfg.seqgan.d_samples = 0;
  cfg.seqgan.d_learning_rate = 1e-2;
  cfg.seqgan.d_filters = 8;
  const double acc = training::train_seqgan(data, cfg).report["d_pretrain"].back()["accuracy"].get<double>();
  v.require(acc >= 0.9, "(a) discriminator accuracy");

  // (b) V=3 one-step toy
  Rng rng(24);
  models::GeneratorPolicy g = models::GeneratorPolicy::init(3, 4, 5, rng);
  g.eos_id.reset();
  g.sos_id = 0;
  g.max_len = 1;
  const double reward[] = {0.1, 0.9, 0.3};
  auto expected = [&] {
    std::vector<TokenId> in{0};
    auto p = softmax_rows(models::decode_logits(g.decoder(), models::zero_state(1, 5), in, 1));
    return p[0] * reward[0] + p[1] * reward[1] + p[2] * reward[2];
  };
  const double before = expected();
  std::vector<TokenId> y{1};
  std::vector<double> q{reward[1]};
  backward(models::policy_gradient_loss(g, y, q));
  OptimizerState sgd;
  sgd.kind = OptimizerKind::sgd;
  sgd.learning_rate = 0.05;
  auto params = models::tensors_of(g.parameters());
  optimizer_step(sgd, params);
  const double after = expected();
  v.require(after > before, "(b) expected reward increases");

  // (c) rollouts against exact enumeration, V=4, L=3
  Rng r2(20);
  models::GeneratorPolicy h = models::GeneratorPolicy::init(4, 3, 4, r2);
  scale_all(h.parameters(), r2, 1.0);
  h.eos_id.reset();
  h.sos_id = 0;
  h.max_len = 3;
  const std::size_t widths[] = {1, 2};
  models::Discriminator d = models::Discriminator::init(4, 3, widths, 3, 3, r2);
  scale_all(d.parameters(), r2, 1.0);
  const std::vector<TokenId> seq{1, 3, 2};
  auto probs_after = [&](const std::vector<TokenId>& prefix) {
    std::vector<TokenId> in{0};
    in.insert(in.end(), prefix.begin(), prefix.end());
    auto p = softmax_rows(models::decode_logits(h.decoder(), models::zero_state(1, 4), in, 1));
    return std::vector<double>(p.end() - 4, p.end());
  };
  // Q_t = E[D(y_1..y_t Y_{t+1}..Y_3)] enumerated over all completions.
  std::function<double(std::vector<TokenId>)> value = [&](std::vector<TokenId> prefix) {
    if (prefix.size() == 3) return models::discriminator_score(d, prefix);
    const auto p = probs_after(prefix);
    double total = 0.0;
    for (TokenId next = 0; next < 4; ++next) {
      auto longer = prefix;
      longer.push_back(next);
      total += p[static_cast<std::size_t>(next)] * value(longer);
    }
    return total;
  };
  const auto est = models::mc_rollout_rewards(h, d, seq, 10000, 5);
  double worst = 0.0;
  for (std::size_t t = 1; t <= 3; ++t)
    worst = std::max(worst, std::abs(est[t - 1] - value(std::vector<TokenId>(seq.begin(), seq.begin() + t))));
  v.require(worst <= 0.02, "(c) rollout error");
  v.detail << "(a) accuracy " << acc << "; (b) E[reward] " << before << " -> " << after
           << "; (c) max rollout error " << worst << " at 10^4 rollouts";
}

// ---- 8 -----------------------------------------------------------------------

void generation_analysis(Verdict& v) {
  // interpolation endpoints
  auto cfg = testsupport::toy_config(training::ModelKind::vae);
  training::ModelBundle vae = training::init_models(cfg, 30);
  for (double& x : vae.vae->latent_to_state.mutable_values()) x *= 40.0;
  for (double& x : vae.vae->out_w.mutable_values()) x *= 40.0;
  bool endpoints = true;
  auto strip = [](std::vector<TokenId> s) {
    if (!s.empty() && s.back() == corpus::kEosId) s.pop_back();
    return s;
  };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto it = evalgen::interpolate(vae, seed, 10, 12);
    endpoints = endpoints && it.sentences.front() == strip(models::generate_greedy(*vae.vae, it.z1, 12)) &&
                it.sentences.back() == strip(models::generate_greedy(*vae.vae, it.z2, 12));
  }
  v.require(endpoints, "interpolation endpoints");

  // sample_stats hand fixture
  std::vector<std::vector<std::string>> samples{{"a", "b"}, {"a", "b"}, {"c"}}, train{{"c"}};
  const auto rep = evalgen::sample_stats(samples, train);
  v.require(rep.n_requested == 3 && rep.n_unique == 2 && rep.n_unique_not_in_train == 1 && rep.unique_words == 3 &&
                rep.mean_tokens == 5.0 / 3.0 && std::abs(rep.stddev_tokens - std::sqrt(2.0 / 9.0)) < 1e-15,
            "sample_stats fixture");

  // t-SNE on three clusters
  Rng rng(21);
  const std::size_t per = 8, z = 16, n = 3 * per;
  evalgen::Matrix x{n, z, std::vector<double>(n * z)};
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> centre(z);
    for (double& e : centre) e = 10.0 * rng.normal();
    for (std::size_t i = 0; i < per; ++i)
      for (std::size_t k = 0; k < z; ++k) x.at(c * per + i, k) = centre[k] + rng.normal();
  }
  evalgen::ProjectionConfig pc;
  pc.method = evalgen::ProjectionMethod::tsne;
  pc.perplexity = 5.0;
  pc.seed = 3;
  const auto out = evalgen::project_2d(x, pc);
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
  intra /= static_cast<double>(ni);
  inter /= static_cast<double>(ne);
  const double kl0 = out.kl_trace.front().second, kl1 = out.kl_trace.back().second;
  v.require(kl1 < kl0, "t-SNE KL decreases");
  v.require(intra < inter, "t-SNE clusters");

  // PCA on planar data
  Rng r2(8);
  const std::size_t pn = 40, pz = 7;
  std::vector<double> u(pz), w(pz);
  for (double& e : u) e = r2.normal();
  for (double& e : w) e = r2.normal();
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const double nu = std::sqrt(dot(u, u));
  for (double& e : u) e /= nu;
  const double proj = dot(u, w);
  for (std::size_t i = 0; i < pz; ++i) w[i] -= proj * u[i];
  const double nw = std::sqrt(dot(w, w));
  for (double& e : w) e /= nw;
  evalgen::Matrix plane{pn, pz, std::vector<double>(pn * pz)};
  for (std::size_t r = 0; r < pn; ++r) {
    const double a = 3.0 * r2.normal(), b = r2.normal();
    for (std::size_t k = 0; k < pz; ++k) plane.at(r, k) = 1.5 + a * u[k] + b * w[k];
  }
  const auto y = evalgen::pca_2d(plane);
  double worst = 0.0;
  for (std::size_t i = 0; i < pn; ++i)
    for (std::size_t j = i + 1; j < pn; ++j) worst = std::max(worst, std::abs(dist(plane, i, j) - dist(y, i, j)));
  v.require(worst < 1e-6, "PCA reconstruction");
  v.detail << "20 interpolation seeds, t-SNE KL " << kl0 << " -> " << kl1 << ", intra " << intra << " < inter "
           << inter << ", PCA max distance error " << worst;
}

// ---- 9 -----------------------------------------------------------------------

void determinism(Verdict& v, const SuiteRun& a, const SuiteRun& b) {
  const std::string da = sha256_file(a.dir / "report.json"), db = sha256_file(b.dir / "report.json");
  v.require(da == db, "combined report digests");
  v.require(slurp(a.dir / "report.md") == slurp(b.dir / "report.md"), "report.md");
  std::size_t checked = 0;
  bool exact = true;
  const auto data = training::load_corpus(a.dir / "corpus");
  for (const auto& row : a.report["perplexity_table"]) {
    const std::string run = row["model"];
    const auto ckpt = training::load_checkpoint(a.dir / "runs" / run / "best.ckpt");
    const auto bundle = training::bundle_from_checkpoint(ckpt);
    const double again = training::evaluate_perplexity(bundle, data.test, ckpt.config).perplexity;
    exact = exact && again == row["test_perplexity"].get<double>();
    ++checked;
  }
  v.require(exact, "checkpoint round trip reproduces test perplexity");
  v.detail << "report.json sha256 " << da.substr(0, 16) << "... on both runs; " << checked
           << " checkpoints re-evaluated bit-exactly";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path(LMFORGE_ACCEPTANCE_WORKDIR);
  fs::create_directories(work);
  int failures = 0;
  auto report = [&](int id, const char* title, const std::function<void(Verdict&)>& body) {
    Verdict v;
    try {
      body(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " [exception: " << e.what() << "]";
    }
    failures += !v.pass;
    std::cout << "criterion " << id << " " << (v.pass ? "PASS" : "FAIL") << " " << title << ": " << v.detail.str()
              << std::endl;
  };

  report(1, "gradient integrity", gradient_integrity);
  report(2, "schedule table", schedule_table);
  report(3, "KL correctness", kl_correctness);
  report(4, "corpus pipeline", [&](Verdict& v) { corpus_pipeline(v, work); });

  std::optional<SuiteRun> a, b;
  std::string suite_error;
  try {
    a = run_suite_once(work / "suite_a");
    b = run_suite_once(work / "suite_b");
  } catch (const std::exception& e) {
    suite_error = e.what();
  }
  auto with_suites = [&](auto fn) {
    return [&, fn](Verdict& v) {
      if (!a || !b) throw std::runtime_error("desk suite failed: " + suite_error);
      fn(v);
    };
  };
  report(5, "VAE training (desk)", with_suites([&](Verdict& v) {
           vae_training(v, *a, *b);
           v.detail << "suite wall clock " << a->seconds << " s";
         }));
  report(6, "perplexity sanity", with_suites([&](Verdict& v) { perplexity_sanity(v, *a); }));
  report(7, "seqGAN mechanics", seqgan_mechanics);
  report(8, "generation and analysis", generation_analysis);
  report(9, "end-to-end determinism", with_suites([&](Verdict& v) { determinism(v, *a, *b); }));
  std::cout << (failures == 0 ? "acceptance: all 9 criteria pass" : "acceptance: " + std::to_string(failures) + " failing")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
