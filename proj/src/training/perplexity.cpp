#include <algorithm>
#include <cmath>
#include <numbers>

#include "lmforge/errors.hpp"
#include "lmforge/training.hpp"

namespace lmforge::training {

namespace {

// Per-sentence sums of target log-probabilities for one teacher-forced batch.
std::vector<double> sentence_log_likelihoods(const models::DecoderParams& d, const models::LstmState& state,
                                             const models::LmBatch& b) {
  Tensor logits = models::decode_logits(d, state, b.inputs, b.batch);
  const auto lp = target_log_probs(logits, b.targets);
  std::vector<double> out(b.batch, 0.0);
  for (std::size_t i = 0; i < lp.size(); ++i)
    if (b.mask[i]) out[i % b.batch] += lp[i];
  return out;
}

void check_sentences(std::span<const std::vector<TokenId>> sentences, std::size_t vocab) {
  if (sentences.empty()) throw DegenerateInputError("perplexity: no sentences");
  for (const auto& s : sentences)
    for (TokenId id : s)
      if (id < 0 || static_cast<std::size_t>(id) >= vocab)
        throw ContractError("perplexity: token id " + std::to_string(id) + " outside the model vocabulary of " +
                            std::to_string(vocab));
}

PerplexityResult finish(double total_nll, std::size_t tokens) {
  return {std::exp(total_nll / static_cast<double>(tokens)), total_nll, tokens};
}

}  // namespace

double perplexity_from_log_probs(std::span<const double> log_probs) {
  if (log_probs.empty()) throw DegenerateInputError("perplexity: no tokens");
  double total = 0.0;
  for (double lp : log_probs) total += lp;
  return std::exp(-total / static_cast<double>(log_probs.size()));
}

PerplexityResult rnnlm_perplexity(const models::GeneratorPolicy& g, std::span<const std::vector<TokenId>> sentences,
                                  std::size_t batch_size) {
  check_sentences(sentences, g.vocab_size());
  NoGradGuard no_grad;
  const TokenId eos = g.eos_id.value_or(corpus::kEosId);
  double nll = 0.0;
  std::size_t tokens = 0;
  for (std::size_t at = 0; at < sentences.size(); at += batch_size) {
    const auto chunk = sentences.subspan(at, std::min(batch_size, sentences.size() - at));
    const auto b = models::make_lm_batch(chunk, g.sos_id, eos, g.pad_id);
    for (double ll : sentence_log_likelihoods(g.decoder(), models::zero_state(b.batch, g.lstm.hidden_size), b))
      nll -= ll;
    tokens += b.token_count;
  }
  return finish(nll, tokens);
}

PerplexityResult vae_perplexity(const models::VaeModel& m, std::span<const std::vector<TokenId>> sentences,
                                VaeEvalMode mode, std::uint64_t seed, std::size_t iw_samples,
                                std::size_t batch_size) {
  check_sentences(sentences, m.vocab_size());
  if (iw_samples == 0) throw ContractError("perplexity: iw_samples must be positive");
  NoGradGuard no_grad;
  Rng rng(seed);
  const std::size_t zdim = m.latent_size();
  double nll = 0.0;
  std::size_t tokens = 0;
  for (std::size_t at = 0; at < sentences.size(); at += batch_size) {
    const auto chunk = sentences.subspan(at, std::min(batch_size, sentences.size() - at));
    const auto b = models::make_lm_batch(chunk, m.sos_id, m.eos_id, m.pad_id);
    tokens += b.token_count;
    const models::Posterior q = models::vae_encode_batch(m, chunk);
    auto draw_eps = [&] {
      std::vector<double> eps(b.batch * zdim);
      for (double& e : eps) e = rng.normal();
      return Tensor::from({b.batch, zdim}, std::move(eps));
    };
    if (mode != VaeEvalMode::iw) {
      Tensor z = mode == VaeEvalMode::mean ? q.mu : models::reparameterize(q.mu, q.logvar, draw_eps());
      for (double ll : sentence_log_likelihoods(m.decoder(), models::vae_initial_state(m, z), b)) nll -= ll;
      continue;
    }
    // log p(x) >= log mean_k p(x|z_k) p(z_k) / q(z_k|x)
    std::vector<std::vector<double>> terms(b.batch);
    const auto lv = q.logvar.values();
    for (std::size_t k = 0; k < iw_samples; ++k) {
      Tensor eps = draw_eps();
      Tensor z = models::reparameterize(q.mu, q.logvar, eps);
      const auto ll = sentence_log_likelihoods(m.decoder(), models::vae_initial_state(m, z), b);
      const auto zv = z.values();
      const auto ev = eps.values();
      for (std::size_t r = 0; r < b.batch; ++r) {
        double log_prior = 0.0, log_q = 0.0;
        for (std::size_t j = 0; j < zdim; ++j) {
          const std::size_t i = r * zdim + j;
          log_prior += -0.5 * (zv[i] * zv[i] + std::log(2.0 * std::numbers::pi));
          log_q += -0.5 * (ev[i] * ev[i] + lv[i] + std::log(2.0 * std::numbers::pi));
        }
        terms[r].push_back(ll[r] + log_prior - log_q);
      }
    }
    for (const auto& t : terms) {
      const double hi = *std::max_element(t.begin(), t.end());
      double s = 0.0;
      for (double v : t) s += std::exp(v - hi);
      nll -= hi + std::log(s / static_cast<double>(t.size()));
    }
  }
  return finish(nll, tokens);
}

PerplexityResult evaluate_perplexity(const ModelBundle& bundle, std::span<const std::vector<TokenId>> sentences,
                                     const TrainConfig& cfg) {
  if (bundle.kind == ModelKind::vae)
    return vae_perplexity(*bundle.vae, sentences, cfg.vae_eval, derive_seed(cfg.seeds.noise, 0x65766131),
                          cfg.iw_samples);
  return rnnlm_perplexity(*bundle.generator, sentences);
}

}  // namespace lmforge::training
