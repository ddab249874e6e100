#include "lmforge/errors.hpp"
#include "lmforge/models.hpp"

namespace lmforge::models {

VaeModel VaeModel::init(std::size_t vocab, std::size_t embed, std::size_t hidden, std::size_t latent,
                        Rng& rng) {
  VaeModel m;
  m.embedding = uniform_param({vocab, embed}, rng);
  m.encoder = LstmParams::init(embed, hidden, rng);
  m.mu_w = uniform_param({latent, hidden}, rng);
  m.mu_b = uniform_param({latent}, rng);
  m.logvar_w = uniform_param({latent, hidden}, rng);
  m.logvar_b = uniform_param({latent}, rng);
  m.latent_to_state = uniform_param({hidden, latent}, rng);
  m.decoder_lstm = LstmParams::init(embed, hidden, rng);
  m.out_w = uniform_param({vocab, hidden}, rng);
  m.out_b = uniform_param({vocab}, rng);
  return m;
}

ParamList VaeModel::parameters() const {
  ParamList out{{"embedding", embedding}};
  encoder.append_to("encoder", out);
  out.push_back({"mu_w", mu_w});
  out.push_back({"mu_b", mu_b});
  out.push_back({"logvar_w", logvar_w});
  out.push_back({"logvar_b", logvar_b});
  out.push_back({"latent_to_state", latent_to_state});
  decoder_lstm.append_to("decoder", out);
  out.push_back({"out_w", out_w});
  out.push_back({"out_b", out_b});
  return out;
}

Posterior vae_encode_batch(const VaeModel& m, std::span<const std::vector<TokenId>> sentences) {
  if (sentences.empty()) throw DegenerateInputError("vae_encode: no sentences");
  const std::size_t batch = sentences.size();
  std::size_t steps = 0;
  for (const auto& s : sentences) {
    if (s.empty()) throw DegenerateInputError("vae_encode: empty sentence");
    steps = std::max(steps, s.size());
  }
  LstmState state = zero_state(batch, m.encoder.hidden_size);
  std::vector<TokenId> ids(batch);
  std::vector<std::uint8_t> active(batch);
  for (std::size_t t = 0; t < steps; ++t) {
    bool all_active = true;
    for (std::size_t r = 0; r < batch; ++r) {
      active[r] = t < sentences[r].size();
      ids[r] = active[r] ? sentences[r][t] : m.pad_id;
      all_active = all_active && active[r];
    }
    LstmState next = lstm_step(gather_rows(m.embedding, ids), state, m.encoder);
    if (all_active) {
      state = next;
    } else {
      state = {select_rows(active, next.h, state.h), select_rows(active, next.c, state.c)};
    }
  }
  return {linear(state.h, m.mu_w, m.mu_b), linear(state.h, m.logvar_w, m.logvar_b)};
}

Posterior vae_encode(const VaeModel& m, std::span<const TokenId> ids) {
  const std::vector<std::vector<TokenId>> one{std::vector<TokenId>(ids.begin(), ids.end())};
  return vae_encode_batch(m, one);
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& eps) {
  if (eps.shape() != mu.shape())
    throw DimensionError("reparameterize: eps " + shape_to_string(eps.shape()) + " vs mu " +
                         shape_to_string(mu.shape()));
  return add(mu, mul(exp(scale(logvar, 0.5)), eps));
}

Tensor kl_gaussian(const Tensor& mu, const Tensor& logvar) {
  if (mu.shape() != logvar.shape())
    throw DimensionError("kl_gaussian: shape mismatch " + shape_to_string(mu.shape()) + " vs " +
                         shape_to_string(logvar.shape()));
  const double rows = static_cast<double>(mu.rank() == 2 ? mu.rows() : 1);
  Tensor terms = affine(sub(add(square(mu), exp(logvar)), logvar), 1.0, -1.0);
  return scale(sum(terms), 0.5 / rows);
}

LstmState vae_initial_state(const VaeModel& m, const Tensor& z) {
  if (z.rank() != 2 || z.cols() != m.latent_size())
    throw DimensionError("vae: latent " + shape_to_string(z.shape()) + " but Z = " +
                         std::to_string(m.latent_size()));
  return {tanh(matmul_nt(z, m.latent_to_state)), Tensor::zeros({z.rows(), m.hidden_size()})};
}

Tensor vae_decode_nll(const VaeModel& m, const Tensor& z, std::span<const TokenId> target,
                      std::span<const std::uint8_t> wd_mask) {
  if (target.empty()) throw DegenerateInputError("vae_decode_nll: empty target");
  if (!wd_mask.empty() && wd_mask.size() != target.size() + 1)
    throw ContractError("vae_decode_nll: word-dropout mask has " + std::to_string(wd_mask.size()) +
                        " entries, expected " + std::to_string(target.size() + 1));
  if (z.rank() != 2 || z.rows() != 1) throw DimensionError("vae_decode_nll: z must be [1, Z]");
  const std::vector<std::vector<TokenId>> one{std::vector<TokenId>(target.begin(), target.end())};
  const LmBatch b = make_lm_batch(one, m.sos_id, m.eos_id, m.pad_id);
  InputNoise noise;
  noise.unk_id = m.unk_id;
  noise.word_drop.assign(wd_mask.begin(), wd_mask.end());
  Tensor logits = decode_logits(m.decoder(), vae_initial_state(m, z), b.inputs, 1, &noise);
  return softmax_cross_entropy(logits, b.targets, b.mask);
}

VaeLoss vae_loss(const VaeModel& m, std::span<const TokenId> ids, double beta, const Tensor& eps,
                 std::span<const std::uint8_t> wd_mask) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("vae_loss: beta must lie in [0, 1]");
  Posterior q = vae_encode(m, ids);
  Tensor z = reparameterize(q.mu, q.logvar, eps);
  Tensor recon = vae_decode_nll(m, z, ids, wd_mask);
  Tensor kl = kl_gaussian(q.mu, q.logvar);
  return {add(recon, scale(kl, beta)), recon, kl};
}

VaeLoss vae_batch_loss(const VaeModel& m, std::span<const std::vector<TokenId>> sentences, double beta,
                       const Tensor& eps, const InputNoise* noise) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("vae_loss: beta must lie in [0, 1]");
  Posterior q = vae_encode_batch(m, sentences);
  Tensor z = reparameterize(q.mu, q.logvar, eps);
  const LmBatch b = make_lm_batch(sentences, m.sos_id, m.eos_id, m.pad_id);
  Tensor logits = decode_logits(m.decoder(), vae_initial_state(m, z), b.inputs, b.batch, noise);
  Tensor recon = softmax_cross_entropy(logits, b.targets, b.mask);
  Tensor kl = kl_gaussian(q.mu, q.logvar);
  return {add(recon, scale(kl, beta)), recon, kl};
}

namespace {

Tensor latent_row(const VaeModel& m, std::span<const double> z) {
  if (z.size() != m.latent_size())
    throw DimensionError("vae: latent has " + std::to_string(z.size()) + " values, expected " +
                         std::to_string(m.latent_size()));
  return Tensor::from({1, z.size()}, std::vector<double>(z.begin(), z.end()));
}

}  // namespace

std::vector<TokenId> generate_greedy(const VaeModel& m, std::span<const double> z, std::size_t max_len) {
  NoGradGuard no_grad;
  return sample_continuations(m.decoder(), vae_initial_state(m, latent_row(m, z)), {m.sos_id}, max_len,
                              m.eos_id, SampleMode::greedy, 1.0, nullptr)[0];
}

std::vector<TokenId> generate_ancestral(const VaeModel& m, std::span<const double> z, std::size_t max_len,
                                        Rng& rng, double temperature) {
  NoGradGuard no_grad;
  return sample_continuations(m.decoder(), vae_initial_state(m, latent_row(m, z)), {m.sos_id}, max_len,
                              m.eos_id, SampleMode::ancestral, temperature, &rng)[0];
}

}  // namespace lmforge::models
