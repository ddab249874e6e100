#include <algorithm>
#include <cmath>

#include "lmforge/errors.hpp"
#include "lmforge/models.hpp"

namespace lmforge::models {

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

Tensor uniform_param(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-0.08, 0.08);
  return Tensor::from(std::move(shape), std::move(v), true);
}

LstmParams LstmParams::init(std::size_t e, std::size_t h, Rng& rng) {
  LstmParams p;
  p.input_size = e;
  p.hidden_size = h;
  p.wx_i = uniform_param({h, e}, rng);
  p.wx_f = uniform_param({h, e}, rng);
  p.wx_g = uniform_param({h, e}, rng);
  p.wx_o = uniform_param({h, e}, rng);
  p.wh_i = uniform_param({h, h}, rng);
  p.wh_f = uniform_param({h, h}, rng);
  p.wh_g = uniform_param({h, h}, rng);
  p.wh_o = uniform_param({h, h}, rng);
  p.b_i = uniform_param({h}, rng);
  p.b_f = Tensor::full({h}, 1.0, true);
  p.b_g = uniform_param({h}, rng);
  p.b_o = uniform_param({h}, rng);
  return p;
}

LstmParams LstmParams::zeros(std::size_t e, std::size_t h) {
  LstmParams p;
  p.input_size = e;
  p.hidden_size = h;
  for (Tensor* t : {&p.wx_i, &p.wx_f, &p.wx_g, &p.wx_o}) *t = Tensor::zeros({h, e}, true);
  for (Tensor* t : {&p.wh_i, &p.wh_f, &p.wh_g, &p.wh_o}) *t = Tensor::zeros({h, h}, true);
  for (Tensor* t : {&p.b_i, &p.b_f, &p.b_g, &p.b_o}) *t = Tensor::zeros({h}, true);
  return p;
}

void LstmParams::append_to(const std::string& prefix, ParamList& out) const {
  const std::pair<const char*, const Tensor*> named[] = {
      {"wx_i", &wx_i}, {"wx_f", &wx_f}, {"wx_g", &wx_g}, {"wx_o", &wx_o},
      {"wh_i", &wh_i}, {"wh_f", &wh_f}, {"wh_g", &wh_g}, {"wh_o", &wh_o},
      {"b_i", &b_i},   {"b_f", &b_f},   {"b_g", &b_g},   {"b_o", &b_o}};
  for (auto [name, t] : named) out.push_back({prefix + "." + name, *t});
}

LstmState zero_state(std::size_t batch, std::size_t hidden) {
  return {Tensor::zeros({batch, hidden}), Tensor::zeros({batch, hidden})};
}

LstmState lstm_step(const Tensor& x, const LstmState& s, const LstmParams& p) {
  if (x.rank() != 2 || x.cols() != p.input_size)
    throw DimensionError("lstm_step: input " + shape_to_string(x.shape()) + " but input size is " +
                         std::to_string(p.input_size));
  if (s.h.shape() != Shape{x.rows(), p.hidden_size} || s.c.shape() != s.h.shape())
    throw DimensionError("lstm_step: state " + shape_to_string(s.h.shape()) + "/" +
                         shape_to_string(s.c.shape()) + " does not match batch " +
                         std::to_string(x.rows()) + " and hidden size " + std::to_string(p.hidden_size));
  auto pre = [&](const Tensor& wx, const Tensor& wh, const Tensor& b) {
    return add(linear(x, wx, b), matmul_nt(s.h, wh));
  };
  Tensor i = sigmoid(pre(p.wx_i, p.wh_i, p.b_i));
  Tensor f = sigmoid(pre(p.wx_f, p.wh_f, p.b_f));
  Tensor g = tanh(pre(p.wx_g, p.wh_g, p.b_g));
  Tensor o = sigmoid(pre(p.wx_o, p.wh_o, p.b_o));
  Tensor c = add(mul(f, s.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

LmBatch make_lm_batch(std::span<const std::vector<TokenId>> sentences, TokenId sos, TokenId eos,
                      TokenId pad) {
  if (sentences.empty()) throw DegenerateInputError("make_lm_batch: no sentences");
  LmBatch b;
  b.batch = sentences.size();
  std::size_t longest = 0;
  for (const auto& s : sentences) longest = std::max(longest, s.size());
  b.steps = longest + 1;
  b.inputs.assign(b.steps * b.batch, pad);
  b.targets.assign(b.steps * b.batch, pad);
  b.mask.assign(b.steps * b.batch, 0);
  for (std::size_t r = 0; r < b.batch; ++r) {
    const auto& s = sentences[r];
    for (std::size_t t = 0; t <= s.size(); ++t) {
      const std::size_t at = t * b.batch + r;
      b.inputs[at] = t == 0 ? sos : s[t - 1];
      b.targets[at] = t == s.size() ? eos : s[t];
      b.mask[at] = 1;
    }
    b.token_count += s.size() + 1;
  }
  return b;
}

InputNoise make_input_noise(const LmBatch& batch, DropoutKind kind, double p, std::size_t embed_dim,
                            TokenId unk_id, Rng& rng) {
  InputNoise noise;
  noise.unk_id = unk_id;
  if (p <= 0.0) return noise;
  if (kind == DropoutKind::word) {
    noise.word_drop.assign(batch.inputs.size(), 0);
    for (std::size_t i = batch.batch; i < batch.inputs.size(); ++i)
      if (batch.mask[i]) noise.word_drop[i] = rng.bernoulli(p);
  } else {
    const double keep = p >= 1.0 ? 0.0 : 1.0 / (1.0 - p);
    noise.embed_scale.assign(batch.inputs.size() * embed_dim, 1.0);
    for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
      if (!batch.mask[i]) continue;
      for (std::size_t j = 0; j < embed_dim; ++j)
        noise.embed_scale[i * embed_dim + j] = rng.bernoulli(p) ? 0.0 : keep;
    }
  }
  return noise;
}

Tensor decode_logits(const DecoderParams& d, LstmState state, std::span<const TokenId> inputs,
                     std::size_t batch, const InputNoise* noise) {
  if (batch == 0 || inputs.size() % batch != 0)
    throw DimensionError("decode_logits: " + std::to_string(inputs.size()) +
                         " inputs do not form whole steps of batch " + std::to_string(batch));
  const std::size_t steps = inputs.size() / batch;
  const std::size_t e = d.embedding->cols();
  if (noise && !noise->word_drop.empty() && noise->word_drop.size() != inputs.size())
    throw ContractError("decode_logits: word-dropout mask size mismatch");
  if (noise && !noise->embed_scale.empty() && noise->embed_scale.size() != inputs.size() * e)
    throw ContractError("decode_logits: embedding-dropout scale size mismatch");

  std::vector<Tensor> hidden;
  hidden.reserve(steps);
  std::vector<TokenId> ids(batch);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t r = 0; r < batch; ++r) {
      const std::size_t at = t * batch + r;
      ids[r] = noise && !noise->word_drop.empty() && noise->word_drop[at] ? noise->unk_id : inputs[at];
    }
    Tensor x = gather_rows(*d.embedding, ids);
    if (noise && !noise->embed_scale.empty()) {
      const auto first = noise->embed_scale.begin() + static_cast<std::ptrdiff_t>(t * batch * e);
      x = mul(x, Tensor::from({batch, e}, std::vector<double>(first, first + batch * e)));
    }
    state = lstm_step(x, state, *d.lstm);
    hidden.push_back(state.h);
  }
  return linear(concat_rows(hidden), *d.out_w, *d.out_b);
}

namespace {

TokenId argmax_row(std::span<const double> row) {
  return static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
}

TokenId draw_categorical(std::span<const double> probs, double u) {
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] <= 0.0) continue;
    cum += probs[j];
    last_positive = j;
    if (u < cum) return static_cast<TokenId>(j);
  }
  return static_cast<TokenId>(last_positive);
}

}  // namespace

std::vector<std::vector<TokenId>> sample_continuations(const DecoderParams& d, LstmState state,
                                                       std::vector<TokenId> first_inputs,
                                                       std::size_t max_new, std::optional<TokenId> eos,
                                                       SampleMode mode, double temperature, Rng* rng) {
  if (mode == SampleMode::ancestral && !rng) throw ContractError("ancestral sampling needs a generator");
  if (mode == SampleMode::ancestral && !(temperature > 0.0))
    throw DomainError("sampling temperature must be positive");
  NoGradGuard no_grad;
  const std::size_t batch = first_inputs.size();
  const std::size_t v = d.out_w->rows();
  std::vector<std::vector<TokenId>> out(batch);
  std::vector<bool> done(batch, false);
  std::vector<TokenId> inputs = std::move(first_inputs);
  for (std::size_t step = 0; step < max_new; ++step) {
    state = lstm_step(gather_rows(*d.embedding, inputs), state, *d.lstm);
    Tensor logits = linear(state.h, *d.out_w, *d.out_b);
    std::vector<double> probs;
    if (mode == SampleMode::ancestral) probs = softmax_rows(logits, temperature);
    bool all_done = true;
    for (std::size_t r = 0; r < batch; ++r) {
      if (done[r]) {
        inputs[r] = 0;
        continue;
      }
      TokenId tok;
      if (mode == SampleMode::greedy)
        tok = argmax_row(logits.values().subspan(r * v, v));
      else
        tok = draw_categorical(std::span(probs).subspan(r * v, v), rng->uniform());
      out[r].push_back(tok);
      inputs[r] = tok;
      if (eos && tok == *eos) done[r] = true;
      all_done = all_done && done[r];
    }
    if (all_done) break;
  }
  return out;
}

GeneratorPolicy GeneratorPolicy::init(std::size_t vocab, std::size_t embed, std::size_t hidden, Rng& rng) {
  GeneratorPolicy g;
  g.embedding = uniform_param({vocab, embed}, rng);
  g.lstm = LstmParams::init(embed, hidden, rng);
  g.out_w = uniform_param({vocab, hidden}, rng);
  g.out_b = uniform_param({vocab}, rng);
  return g;
}

ParamList GeneratorPolicy::parameters() const {
  ParamList out{{"embedding", embedding}};
  lstm.append_to("lstm", out);
  out.push_back({"out_w", out_w});
  out.push_back({"out_b", out_b});
  return out;
}

Tensor rnnlm_nll(const GeneratorPolicy& g, std::span<const TokenId> ids) {
  if (ids.size() < 2) throw DegenerateInputError("rnnlm_nll: sentence has no tokens to predict");
  const std::vector<TokenId> inputs(ids.begin(), ids.end() - 1);
  const std::vector<TokenId> targets(ids.begin() + 1, ids.end());
  std::vector<std::uint8_t> mask(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) mask[i] = targets[i] != g.pad_id;
  Tensor logits = decode_logits(g.decoder(), zero_state(1, g.lstm.hidden_size), inputs, 1);
  return softmax_cross_entropy(logits, targets, mask);
}

Tensor rnnlm_batch_nll(const GeneratorPolicy& g, const LmBatch& batch, const InputNoise* noise) {
  Tensor logits = decode_logits(g.decoder(), zero_state(batch.batch, g.lstm.hidden_size), batch.inputs,
                                batch.batch, noise);
  return softmax_cross_entropy(logits, batch.targets, batch.mask);
}

std::vector<TokenId> generate_greedy(const GeneratorPolicy& g, std::size_t max_len) {
  return sample_continuations(g.decoder(), zero_state(1, g.lstm.hidden_size), {g.sos_id}, max_len, g.eos_id,
                              SampleMode::greedy, 1.0, nullptr)[0];
}

std::vector<TokenId> generate_ancestral(const GeneratorPolicy& g, std::size_t max_len, Rng& rng,
                                        double temperature) {
  return sample_continuations(g.decoder(), zero_state(1, g.lstm.hidden_size), {g.sos_id}, max_len, g.eos_id,
                              SampleMode::ancestral, temperature, &rng)[0];
}

std::vector<std::vector<TokenId>> sample_sequences(const GeneratorPolicy& g, std::size_t n, Rng& rng,
                                                   double temperature) {
  if (n == 0) return {};
  return sample_continuations(g.decoder(), zero_state(n, g.lstm.hidden_size),
                              std::vector<TokenId>(n, g.sos_id), g.max_len, g.eos_id, SampleMode::ancestral,
                              temperature, &rng);
}

}  // namespace lmforge::models
