#pragma once

// Parameter bundles and forward passes for the three model families:
// LSTM language model / seqGAN generator, sentence VAE, and the CNN-highway
// discriminator. All randomness is supplied by the caller.
//
// Batched sequences are stored time-major: element (t, b) lives at t*batch+b.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmforge/rng.hpp"
#include "lmforge/tensor.hpp"

namespace lmforge::models {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

std::vector<Tensor> tensors_of(const ParamList& params);

// Uniform(-0.08, 0.08) initialiser used for every weight.
Tensor uniform_param(Shape shape, Rng& rng);

// ---- LSTM ------------------------------------------------------------------

struct LstmParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor wx_i, wx_f, wx_g, wx_o;  // [H, E]
  Tensor wh_i, wh_f, wh_g, wh_o;  // [H, H]
  Tensor b_i, b_f, b_g, b_o;      // [H]

  // Forget bias 1.0, everything else uniform(-0.08, 0.08).
  static LstmParams init(std::size_t input_size, std::size_t hidden_size, Rng& rng);
  static LstmParams zeros(std::size_t input_size, std::size_t hidden_size);
  void append_to(const std::string& prefix, ParamList& out) const;
};

struct LstmState {
  Tensor h;  // [B, H]
  Tensor c;  // [B, H]
};

LstmState zero_state(std::size_t batch, std::size_t hidden);

// i,f,o = sigmoid, g = tanh; c' = f*c + i*g; h' = o*tanh(c').
LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& p);

// ---- shared decoder machinery ----------------------------------------------

enum class DropoutKind { word, embedding };

struct DecoderParams {
  const Tensor* embedding;  // [V, E]
  const LstmParams* lstm;
  const Tensor* out_w;  // [V, H]
  const Tensor* out_b;  // [V]
};

struct LmBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<TokenId> inputs;      // <sos> w1 .. wn, then pad
  std::vector<TokenId> targets;     // w1 .. wn <eos>, then pad
  std::vector<std::uint8_t> mask;   // 1 on real targets
  std::size_t token_count = 0;
};

LmBatch make_lm_batch(std::span<const std::vector<TokenId>> sentences, TokenId sos, TokenId eos,
                      TokenId pad);

struct InputNoise {
  std::vector<std::uint8_t> word_drop;  // [steps*batch]; 1 replaces the input with unk_id
  TokenId unk_id = 3;
  std::vector<double> embed_scale;  // [steps*batch*E] multipliers, empty when unused
};

// Word dropout never touches the <sos> input (t = 0) or padding.
InputNoise make_input_noise(const LmBatch& batch, DropoutKind kind, double p, std::size_t embed_dim,
                            TokenId unk_id, Rng& rng);

// Teacher-forced logits, [steps*batch, V], row t*batch+b.
Tensor decode_logits(const DecoderParams& d, LstmState state, std::span<const TokenId> inputs,
                     std::size_t batch, const InputNoise* noise = nullptr);

enum class SampleMode { greedy, ancestral };

// Continues `batch` rows from `state`, feeding `first_inputs`. Each row stops
// after emitting `eos` or after `max_new` tokens. Greedy ties go to the
// lowest id. Ancestral draws one uniform per unfinished row per step.
std::vector<std::vector<TokenId>> sample_continuations(const DecoderParams& d, LstmState state,
                                                       std::vector<TokenId> first_inputs,
                                                       std::size_t max_new, std::optional<TokenId> eos,
                                                       SampleMode mode, double temperature, Rng* rng);

// ---- generator policy / RNNLM ----------------------------------------------

struct GeneratorPolicy {
  Tensor embedding;  // [V, E]
  LstmParams lstm;
  Tensor out_w;  // [V, H]
  Tensor out_b;  // [V]
  TokenId sos_id = 1;
  std::optional<TokenId> eos_id = 2;
  TokenId pad_id = 0;
  TokenId unk_id = 3;
  std::size_t max_len = 40;

  static GeneratorPolicy init(std::size_t vocab, std::size_t embed, std::size_t hidden, Rng& rng);
  std::size_t vocab_size() const { return embedding.rows(); }
  DecoderParams decoder() const { return {&embedding, &lstm, &out_w, &out_b}; }
  ParamList parameters() const;
};

// `ids` carries <sos> first and <eos> last, optionally followed by padding.
// Mean NLL of ids[1..] given the prefix; pad targets are masked.
Tensor rnnlm_nll(const GeneratorPolicy& g, std::span<const TokenId> ids);

// Mean per-token NLL over a batch.
Tensor rnnlm_batch_nll(const GeneratorPolicy& g, const LmBatch& batch, const InputNoise* noise = nullptr);

std::vector<TokenId> generate_greedy(const GeneratorPolicy& g, std::size_t max_len);
std::vector<TokenId> generate_ancestral(const GeneratorPolicy& g, std::size_t max_len, Rng& rng,
                                        double temperature = 1.0);
std::vector<std::vector<TokenId>> sample_sequences(const GeneratorPolicy& g, std::size_t n, Rng& rng,
                                                   double temperature = 1.0);

// ---- VAE -------------------------------------------------------------------

struct VaeModel {
  Tensor embedding;  // [V, E], shared by encoder and decoder
  LstmParams encoder;
  Tensor mu_w, mu_b;          // [Z, H], [Z]
  Tensor logvar_w, logvar_b;  // [Z, H], [Z]
  Tensor latent_to_state;     // [H, Z]
  LstmParams decoder_lstm;
  Tensor out_w, out_b;  // [V, H], [V]
  double word_dropout = 0.5;
  TokenId sos_id = 1;
  TokenId eos_id = 2;
  TokenId pad_id = 0;
  TokenId unk_id = 3;

  static VaeModel init(std::size_t vocab, std::size_t embed, std::size_t hidden, std::size_t latent,
                       Rng& rng);
  std::size_t vocab_size() const { return embedding.rows(); }
  std::size_t latent_size() const { return mu_w.rows(); }
  std::size_t hidden_size() const { return encoder.hidden_size; }
  DecoderParams decoder() const { return {&embedding, &decoder_lstm, &out_w, &out_b}; }
  ParamList parameters() const;
};

struct Posterior {
  Tensor mu;      // [B, Z]
  Tensor logvar;  // [B, Z]
};

// z, eps and the posterior tensors are [B, Z]; single-sentence calls use B = 1.

// Encodes each sentence (ids without <sos>/<eos>) to its posterior.
Posterior vae_encode_batch(const VaeModel& m, std::span<const std::vector<TokenId>> sentences);
Posterior vae_encode(const VaeModel& m, std::span<const TokenId> ids);

// z = mu + exp(0.5 * logvar) * eps
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& eps);

// Mean over rows of KL(N(mu, diag exp(logvar)) || N(0, I)).
Tensor kl_gaussian(const Tensor& mu, const Tensor& logvar);

// h0 = tanh(latent_to_state * z), c0 = 0.
LstmState vae_initial_state(const VaeModel& m, const Tensor& z);

// Mean NLL of `target` (ids without <sos>/<eos>; <eos> is predicted last).
// wd_mask has one entry per decoder input (target.size() + 1); true
// replaces that input's embedding with the <unk> embedding.
Tensor vae_decode_nll(const VaeModel& m, const Tensor& z, std::span<const TokenId> target,
                      std::span<const std::uint8_t> wd_mask);

struct VaeLoss {
  Tensor total;
  Tensor recon;
  Tensor kl;
};

VaeLoss vae_loss(const VaeModel& m, std::span<const TokenId> ids, double beta, const Tensor& eps,
                 std::span<const std::uint8_t> wd_mask);

// Batched objective: recon is the mean per-token NLL, kl the mean per-sentence KL.
VaeLoss vae_batch_loss(const VaeModel& m, std::span<const std::vector<TokenId>> sentences, double beta,
                       const Tensor& eps, const InputNoise* noise);

std::vector<TokenId> generate_greedy(const VaeModel& m, std::span<const double> z, std::size_t max_len);
std::vector<TokenId> generate_ancestral(const VaeModel& m, std::span<const double> z, std::size_t max_len,
                                        Rng& rng, double temperature = 1.0);

// ---- discriminator -----------------------------------------------------------

struct Discriminator {
  Tensor embedding;  // [V, E_d]
  std::vector<std::size_t> widths;
  std::vector<Tensor> conv_w;  // [F, w*E_d] per width
  std::vector<Tensor> conv_b;  // [F]
  Tensor gate_w, gate_b;       // highway transform gate t, [D, D], [D]
  Tensor hidden_w, hidden_b;   // highway candidate g, [D, D], [D]
  Tensor out_w, out_b;         // [1, D], [1]
  std::size_t seq_len = 40;    // inputs are padded or truncated to this length
  TokenId pad_id = 0;

  static Discriminator init(std::size_t vocab, std::size_t embed, std::span<const std::size_t> widths,
                            std::size_t filters, std::size_t seq_len, Rng& rng);
  std::size_t feature_size() const;
  ParamList parameters() const;
};

// Logits [B, 1]: embed -> relu conv per width -> max over time -> concat ->
// highway y = t*g + (1-t)*x -> affine.
Tensor discriminator_logits(const Discriminator& d, std::span<const std::vector<TokenId>> seqs);
double discriminator_score(const Discriminator& d, std::span<const TokenId> ids);
std::vector<double> discriminator_scores(const Discriminator& d, std::span<const std::vector<TokenId>> seqs);

// ---- seqGAN ---------------------------------------------------------------

// Per-position rewards for a generated sequence. For t < T the prefix
// y_1..y_t is completed n_rollouts times by ancestral sampling from g and the
// mean discriminator score is used; position T gets D(y) directly.
std::vector<double> mc_rollout_rewards(const GeneratorPolicy& g, const Discriminator& d,
                                       std::span<const TokenId> seq, std::size_t n_rollouts,
                                       std::uint64_t seed);
// Sequence i uses derive_seed(seed, i), so results do not depend on how the
// batch is split across worker threads.
std::vector<std::vector<double>> mc_rollout_rewards_batch(const GeneratorPolicy& g, const Discriminator& d,
                                                          std::span<const std::vector<TokenId>> seqs,
                                                          std::size_t n_rollouts, std::uint64_t seed);

// -sum_t (Q_t - baseline) * log G(y_t | y_<t), averaged over sequences.
Tensor policy_gradient_loss(const GeneratorPolicy& g, std::span<const TokenId> seq,
                            std::span<const double> rewards, double baseline = 0.0);
Tensor policy_gradient_loss_batch(const GeneratorPolicy& g, std::span<const std::vector<TokenId>> seqs,
                                  std::span<const std::vector<double>> rewards, double baseline = 0.0);

}  // namespace lmforge::models
