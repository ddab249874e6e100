#include <algorithm>
#include <cmath>

#include "lmforge/errors.hpp"
#include "lmforge/models.hpp"
#include "lmforge/parallel.hpp"

namespace lmforge::models {

Discriminator Discriminator::init(std::size_t vocab, std::size_t embed, std::span<const std::size_t> widths,
                                  std::size_t filters, std::size_t seq_len, Rng& rng) {
  if (widths.empty() || filters == 0) throw ContractError("discriminator: needs filters");
  Discriminator d;
  d.widths.assign(widths.begin(), widths.end());
  d.seq_len = seq_len;
  if (seq_len < *std::max_element(widths.begin(), widths.end()))
    throw ContractError("discriminator: sequence length shorter than the widest filter");
  d.embedding = uniform_param({vocab, embed}, rng);
  for (std::size_t w : d.widths) {
    d.conv_w.push_back(uniform_param({filters, w * embed}, rng));
    d.conv_b.push_back(uniform_param({filters}, rng));
  }
  const std::size_t f = d.feature_size();
  d.gate_w = uniform_param({f, f}, rng);
  d.gate_b = uniform_param({f}, rng);
  d.hidden_w = uniform_param({f, f}, rng);
  d.hidden_b = uniform_param({f}, rng);
  d.out_w = uniform_param({1, f}, rng);
  d.out_b = uniform_param({1}, rng);
  return d;
}

std::size_t Discriminator::feature_size() const {
  std::size_t f = 0;
  for (const auto& w : conv_w) f += w.rows();
  return f;
}

ParamList Discriminator::parameters() const {
  ParamList out{{"embedding", embedding}};
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string w = std::to_string(widths[i]);
    out.push_back({"conv" + w + "_w", conv_w[i]});
    out.push_back({"conv" + w + "_b", conv_b[i]});
  }
  out.push_back({"gate_w", gate_w});
  out.push_back({"gate_b", gate_b});
  out.push_back({"hidden_w", hidden_w});
  out.push_back({"hidden_b", hidden_b});
  out.push_back({"out_w", out_w});
  out.push_back({"out_b", out_b});
  return out;
}

Tensor discriminator_logits(const Discriminator& d, std::span<const std::vector<TokenId>> seqs) {
  if (seqs.empty()) throw DegenerateInputError("discriminator: no sequences");
  const std::size_t batch = seqs.size(), len = d.seq_len;
  std::vector<TokenId> ids(batch * len, d.pad_id);
  for (std::size_t r = 0; r < batch; ++r) {
    const std::size_t n = std::min(len, seqs[r].size());
    std::copy_n(seqs[r].begin(), n, ids.begin() + static_cast<std::ptrdiff_t>(r * len));
  }
  Tensor emb = gather_rows(d.embedding, ids);
  std::vector<Tensor> pooled;
  for (std::size_t i = 0; i < d.widths.size(); ++i) {
    Tensor win = windows(emb, batch, len, d.widths[i]);
    pooled.push_back(max_pool_groups(relu(linear(win, d.conv_w[i], d.conv_b[i])), batch));
  }
  Tensor x = concat_cols(pooled);
  Tensor t = sigmoid(linear(x, d.gate_w, d.gate_b));
  Tensor g = relu(linear(x, d.hidden_w, d.hidden_b));
  Tensor y = add(mul(t, g), mul(affine(t, -1.0, 1.0), x));
  return linear(y, d.out_w, d.out_b);
}

std::vector<double> discriminator_scores(const Discriminator& d, std::span<const std::vector<TokenId>> seqs) {
  NoGradGuard no_grad;
  Tensor logits = discriminator_logits(d, seqs);
  std::vector<double> out(seqs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-logits.values()[i]));
  return out;
}

double discriminator_score(const Discriminator& d, std::span<const TokenId> ids) {
  const std::vector<std::vector<TokenId>> one{std::vector<TokenId>(ids.begin(), ids.end())};
  return discriminator_scores(d, one)[0];
}

namespace {

// Hidden states after feeding <sos>, y_1 .. y_t for every t in [1, T-1].
std::vector<LstmState> prefix_states(const GeneratorPolicy& g, std::span<const TokenId> seq) {
  std::vector<LstmState> out;
  LstmState state = zero_state(1, g.lstm.hidden_size);
  std::vector<TokenId> id{g.sos_id};
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    state = lstm_step(gather_rows(g.embedding, id), state, g.lstm);
    id[0] = seq[t];
    out.push_back(state);
  }
  return out;
}

}  // namespace

std::vector<double> mc_rollout_rewards(const GeneratorPolicy& g, const Discriminator& d,
                                       std::span<const TokenId> seq, std::size_t n_rollouts,
                                       std::uint64_t seed) {
  if (n_rollouts == 0) throw ContractError("mc_rollout_rewards: n_rollouts must be at least 1");
  if (seq.empty()) throw DegenerateInputError("mc_rollout_rewards: empty sequence");
  NoGradGuard no_grad;
  const std::size_t len = seq.size();
  std::vector<double> rewards(len);
  const auto states = prefix_states(g, seq);
  const std::vector<TokenId> replicate(n_rollouts, 0);
  for (std::size_t t = 1; t < len; ++t) {
    // states[t-1] has consumed <sos> .. y_{t-1}; y_t is the next input.
    const LstmState& s = states[t - 1];
    LstmState start{gather_rows(s.h, replicate), gather_rows(s.c, replicate)};
    Rng rng(derive_seed(seed, t));
    const std::size_t budget = g.max_len > t ? g.max_len - t : 0;
    auto tails = sample_continuations(g.decoder(), start, std::vector<TokenId>(n_rollouts, seq[t - 1]),
                                      budget, g.eos_id, SampleMode::ancestral, 1.0, &rng);
    std::vector<std::vector<TokenId>> full(n_rollouts);
    for (std::size_t k = 0; k < n_rollouts; ++k) {
      full[k].assign(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(t));
      full[k].insert(full[k].end(), tails[k].begin(), tails[k].end());
    }
    const auto scores = discriminator_scores(d, full);
    double total = 0.0;
    for (double s2 : scores) total += s2;
    rewards[t - 1] = total / static_cast<double>(n_rollouts);
  }
  rewards[len - 1] = discriminator_score(d, seq);
  return rewards;
}

std::vector<std::vector<double>> mc_rollout_rewards_batch(const GeneratorPolicy& g, const Discriminator& d,
                                                          std::span<const std::vector<TokenId>> seqs,
                                                          std::size_t n_rollouts, std::uint64_t seed) {
  std::vector<std::vector<double>> out(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) {
    out[i] = mc_rollout_rewards(g, d, seqs[i], n_rollouts, derive_seed(seed, i));
  });
  return out;
}

Tensor policy_gradient_loss_batch(const GeneratorPolicy& g, std::span<const std::vector<TokenId>> seqs,
                                  std::span<const std::vector<double>> rewards, double baseline) {
  if (seqs.empty()) throw DegenerateInputError("policy_gradient_loss: no sequences");
  if (rewards.size() != seqs.size())
    throw ContractError("policy_gradient_loss: " + std::to_string(rewards.size()) + " reward lists for " +
                        std::to_string(seqs.size()) + " sequences");
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (seqs[i].empty()) throw DegenerateInputError("policy_gradient_loss: empty sequence");
    if (rewards[i].size() != seqs[i].size())
      throw ContractError("policy_gradient_loss: sequence " + std::to_string(i) + " has " +
                          std::to_string(seqs[i].size()) + " tokens but " +
                          std::to_string(rewards[i].size()) + " rewards");
  }
  const std::size_t batch = seqs.size();
  std::size_t steps = 0;
  for (const auto& s : seqs) steps = std::max(steps, s.size());
  std::vector<TokenId> inputs(steps * batch, g.pad_id), targets(steps * batch, g.pad_id);
  std::vector<double> weights(steps * batch, 0.0);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t t = 0; t < seqs[r].size(); ++t) {
      const std::size_t at = t * batch + r;
      inputs[at] = t == 0 ? g.sos_id : seqs[r][t - 1];
      targets[at] = seqs[r][t];
      weights[at] = (rewards[r][t] - baseline) * inv_batch;
    }
  }
  Tensor logits = decode_logits(g.decoder(), zero_state(batch, g.lstm.hidden_size), inputs, batch);
  return weighted_nll(logits, targets, weights);
}

Tensor policy_gradient_loss(const GeneratorPolicy& g, std::span<const TokenId> seq,
                            std::span<const double> rewards, double baseline) {
  const std::vector<std::vector<TokenId>> s{std::vector<TokenId>(seq.begin(), seq.end())};
  const std::vector<std::vector<double>> r{std::vector<double>(rewards.begin(), rewards.end())};
  return policy_gradient_loss_batch(g, s, r, baseline);
}

}  // namespace lmforge::models
