#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "lmforge/errors.hpp"
#include "lmforge/training.hpp"

namespace lmforge::training {

using nlohmann::json;

namespace {

constexpr int kReportVersion = 1;
constexpr std::uint64_t kDevEvalStream = 0x64657631;

std::vector<std::vector<TokenId>> gather(std::span<const std::vector<TokenId>> sentences,
                                         std::span<const std::size_t> idx) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(sentences[i]);
  return out;
}

std::size_t batches_per_epoch(std::size_t n, std::size_t b) { return (n + b - 1) / b; }

void check_data(const CorpusData& data) {
  if (data.train.empty()) throw DegenerateInputError("train: the train split is empty");
  if (data.dev.empty()) throw DegenerateInputError("train: the dev split is empty");
  if (data.test.empty()) throw DegenerateInputError("train: the test split is empty");
  for (const auto* split : {&data.train, &data.dev, &data.test})
    for (const auto& s : *split)
      if (s.empty()) throw DegenerateInputError("train: empty sentence in corpus");
}

[[noreturn]] void numerical_abort(const NumericalError& e, std::string_view phase, std::size_t epoch,
                                  std::uint64_t step, std::span<const std::size_t> idx) {
  std::string lines;
  for (std::size_t i = 0; i < idx.size(); ++i) lines += (i ? "," : "") + std::to_string(idx[i] + 1);
  throw NumericalError(std::string(phase) + ": non-finite loss at step " + std::to_string(step) + " (epoch " +
                       std::to_string(epoch) + "), batch train lines [" + lines + "]: " + e.what());
}

json base_report(const TrainConfig& cfg, const CorpusData& data) {
  json r;
  r["schema"] = "lmforge.run_report";
  r["schema_version"] = kReportVersion;
  r["model"] = std::string(to_string(cfg.model));
  r["config"] = config_to_json(cfg);
  r["vocab_size"] = data.vocab.size();
  r["vocab_digest"] = data.vocab_digest;
  r["sentences"] = {{"train", data.train.size()}, {"dev", data.dev.size()}, {"test", data.test.size()}};
  return r;
}

struct BestTracker {
  std::optional<Checkpoint> best;
  double best_ppl = 0.0;
  std::size_t best_epoch = 0;

  void offer(const ModelBundle& b, const TrainConfig& cfg, const CorpusData& data, std::size_t epoch,
             double ppl, std::string_view phase) {
    if (best && !(ppl < best_ppl)) return;
    best_ppl = ppl;
    best_epoch = epoch;
    best = checkpoint_from_bundle(b, cfg, data.vocab.size(), data.vocab_digest,
                                  {{"role", "best"}, {"phase", phase}, {"epoch", epoch}, {"dev_perplexity", ppl}});
  }
};

// Reloads the best checkpoint (f32 values) and scores the test split so the
// report matches what `evaluate` prints for that file.
void finish_report(json& report, TrainResult& result, const CorpusData& data, const ModelBundle& last,
                   const TrainConfig& cfg, BestTracker& tracker, std::size_t last_epoch, std::string_view phase) {
  result.final = checkpoint_from_bundle(last, cfg, data.vocab.size(), data.vocab_digest,
                                        {{"role", "final"}, {"phase", phase}, {"epoch", last_epoch}});
  result.best = std::move(*tracker.best);
  const ModelBundle best = bundle_from_checkpoint(result.best);
  const ModelBundle fin = bundle_from_checkpoint(result.final);
  report["best"] = {{"epoch", tracker.best_epoch}, {"dev_perplexity", tracker.best_ppl}};
  report["test_perplexity"] = evaluate_perplexity(best, data.test, cfg).perplexity;
  report["final_test_perplexity"] = evaluate_perplexity(fin, data.test, cfg).perplexity;
  result.report = std::move(report);
}

struct Optim {
  std::vector<Tensor> params;
  OptimizerState state;
  double clip;

  Optim(std::vector<Tensor> p, OptimizerKind kind, double lr, double clip_norm) : params(std::move(p)), clip(clip_norm) {
    state.kind = kind;
    state.learning_rate = lr;
  }
  double step() {
    const double norm = clip_grad_norm(params, clip);
    optimizer_step(state, params);
    return norm;
  }
};

// Teacher-forced MLE epochs for a generator; appends epoch and step records.
void mle_epochs(models::GeneratorPolicy& g, ModelBundle& bundle, const CorpusData& data, const TrainConfig& cfg,
                std::size_t epochs, Optim& opt, Rng& data_rng, Rng& noise_rng, json& epoch_log, json& step_log,
                BestTracker* tracker, std::string_view phase) {
  std::uint64_t step = 0;
  const TokenId eos = g.eos_id.value_or(corpus::kEosId);
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t nb = 0;
    for (const auto& idx : make_batches(data.train, cfg.batch_size, data_rng)) {
      const auto sents = gather(data.train, idx);
      const auto lb = models::make_lm_batch(sents, g.sos_id, eos, g.pad_id);
      const auto noise =
          models::make_input_noise(lb, cfg.dropout_kind, cfg.word_dropout, cfg.embed, g.unk_id, noise_rng);
      double loss = 0.0, norm = 0.0;
      try {
        Tensor nll = models::rnnlm_batch_nll(g, lb, &noise);
        loss = nll.item();
        backward(nll);
        norm = opt.step();
      } catch (const NumericalError& e) {
        numerical_abort(e, phase, epoch, step, idx);
      }
      if (step % cfg.log_every == 0)
        step_log.push_back({{"step", step}, {"epoch", epoch}, {"recon", loss}, {"kl", 0.0}, {"beta", 0.0},
                            {"total", loss}, {"grad_norm", norm}});
      loss_sum += loss;
      ++nb;
      ++step;
    }
    const double mean = loss_sum / static_cast<double>(nb);
    const double ppl = rnnlm_perplexity(g, data.dev).perplexity;
    epoch_log.push_back({{"epoch", epoch}, {"recon", mean}, {"kl", 0.0}, {"beta", 0.0}, {"total", mean},
                         {"dev_perplexity", ppl}});
    if (tracker) tracker->offer(bundle, cfg, data, epoch, ppl, phase);
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::vector<TokenId>> sentences,
                                                   std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ContractError("make_batches: batch size must be positive");
  std::vector<std::size_t> idx(sentences.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(idx));
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return sentences[a].size() < sentences[b].size(); });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < idx.size(); at += batch_size)
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(at),
                         idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), at + batch_size)));
  rng.shuffle(std::span<std::vector<std::size_t>>(batches));
  return batches;
}

TrainResult train_rnnlm(const CorpusData& data, const TrainConfig& config) {
  TrainConfig cfg = config;
  cfg.model = ModelKind::rnnlm;
  cfg.validate();
  check_data(data);
  ModelBundle bundle = init_models(cfg, data.vocab.size());
  auto& g = *bundle.generator;
  Optim opt(models::tensors_of(g.parameters()), cfg.optimizer, cfg.learning_rate, cfg.clip_norm);
  Rng data_rng(cfg.seeds.data_order), noise_rng(cfg.seeds.noise);
  json report = base_report(cfg, data);
  report["total_steps"] = cfg.epochs * batches_per_epoch(data.train.size(), cfg.batch_size);
  json epochs = json::array(), steps = json::array();
  BestTracker tracker;
  mle_epochs(g, bundle, data, cfg, cfg.epochs, opt, data_rng, noise_rng, epochs, steps, &tracker, "mle");
  report["epochs"] = std::move(epochs);
  report["steps"] = std::move(steps);
  TrainResult result;
  finish_report(report, result, data, bundle, cfg, tracker, cfg.epochs, "mle");
  return result;
}

TrainResult train_vae(const CorpusData& data, const TrainConfig& config) {
  TrainConfig cfg = config;
  cfg.model = ModelKind::vae;
  cfg.validate();
  check_data(data);
  ModelBundle bundle = init_models(cfg, data.vocab.size());
  auto& m = *bundle.vae;
  Optim opt(models::tensors_of(m.parameters()), cfg.optimizer, cfg.learning_rate, cfg.clip_norm);
  Rng data_rng(cfg.seeds.data_order), noise_rng(cfg.seeds.noise);

  Schedule sched;
  sched.kind = cfg.schedule;
  sched.total_steps = cfg.epochs * batches_per_epoch(data.train.size(), cfg.batch_size);
  sched.cycles = cfg.schedule_cycles;
  sched.anneal_ratio = cfg.schedule_ratio;
  sched.linear_ratio = cfg.schedule_linear_ratio;
  sched.validate();

  json report = base_report(cfg, data);
  report["total_steps"] = sched.total_steps;
  json beta_log = json::array();
  for (const auto& [t, b] : beta_trace(sched)) beta_log.push_back(b);
  report["beta_trace"] = std::move(beta_log);

  json epochs = json::array(), steps = json::array();
  BestTracker tracker;
  const std::size_t zdim = cfg.latent;
  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double recon_sum = 0.0, kl_sum = 0.0, total_sum = 0.0, beta = 0.0;
    std::size_t nb = 0;
    for (const auto& idx : make_batches(data.train, cfg.batch_size, data_rng)) {
      const auto sents = gather(data.train, idx);
      const auto lb = models::make_lm_batch(sents, m.sos_id, m.eos_id, m.pad_id);
      const auto noise =
          models::make_input_noise(lb, cfg.dropout_kind, cfg.word_dropout, cfg.embed, m.unk_id, noise_rng);
      std::vector<double> eps(sents.size() * zdim);
      for (double& e : eps) e = noise_rng.normal();
      beta = beta_at(sched, step);
      double recon = 0.0, kl = 0.0, total = 0.0, norm = 0.0;
      try {
        const auto loss = models::vae_batch_loss(m, sents, beta, Tensor::from({sents.size(), zdim}, eps), &noise);
        recon = loss.recon.item();
        kl = loss.kl.item();
        total = loss.total.item();
        backward(loss.total);
        norm = opt.step();
      } catch (const NumericalError& e) {
        numerical_abort(e, "vae", epoch, step, idx);
      }
      if (step % cfg.log_every == 0)
        steps.push_back({{"step", step}, {"epoch", epoch}, {"recon", recon}, {"kl", kl}, {"beta", beta},
                         {"total", total}, {"grad_norm", norm}});
      recon_sum += recon;
      kl_sum += kl;
      total_sum += total;
      ++nb;
      ++step;
    }
    const double n = static_cast<double>(nb);
    const double ppl =
        vae_perplexity(m, data.dev, cfg.vae_eval, derive_seed(cfg.seeds.noise, kDevEvalStream), cfg.iw_samples)
            .perplexity;
    epochs.push_back({{"epoch", epoch}, {"recon", recon_sum / n}, {"kl", kl_sum / n}, {"beta", beta},
                      {"total", total_sum / n}, {"dev_perplexity", ppl}});
    tracker.offer(bundle, cfg, data, epoch, ppl, "vae");
  }
  report["final_kl"] = epochs.back()["kl"];
  report["epochs"] = std::move(epochs);
  report["steps"] = std::move(steps);
  TrainResult result;
  finish_report(report, result, data, bundle, cfg, tracker, cfg.epochs, "vae");
  return result;
}

namespace {

struct DiscriminatorEpoch {
  double loss = 0.0;
  double accuracy = 0.0;
};

std::vector<TokenId> with_eos(const std::vector<TokenId>& s, TokenId eos, std::size_t max_len) {
  std::vector<TokenId> out(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(std::min(s.size(), max_len)));
  out.push_back(eos);
  return out;
}

// One pass over n real positives and n fresh generator negatives.
DiscriminatorEpoch discriminator_epoch(const models::GeneratorPolicy& g, models::Discriminator& d,
                                       const CorpusData& data, const TrainConfig& cfg, Optim& opt, Rng& data_rng,
                                       Rng& noise_rng, std::size_t epoch, std::string_view phase) {
  const TokenId eos = g.eos_id.value_or(corpus::kEosId);
  const std::size_t n = cfg.seqgan.d_samples == 0 ? data.train.size() : cfg.seqgan.d_samples;
  std::vector<std::size_t> pick(data.train.size());
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  data_rng.shuffle(std::span<std::size_t>(pick));
  std::vector<std::vector<TokenId>> seqs;
  std::vector<double> labels;
  for (std::size_t i = 0; i < n; ++i) {
    seqs.push_back(with_eos(data.train[pick[i % pick.size()]], eos, cfg.max_len));
    labels.push_back(1.0);
  }
  for (auto& s : models::sample_sequences(g, n, noise_rng)) {
    seqs.push_back(std::move(s));
    labels.push_back(0.0);
  }
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  data_rng.shuffle(std::span<std::size_t>(order));

  DiscriminatorEpoch out;
  std::size_t nb = 0;
  for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
    const std::span<const std::size_t> idx(order.data() + at, std::min(cfg.batch_size, order.size() - at));
    std::vector<std::vector<TokenId>> bs;
    std::vector<double> bl;
    for (std::size_t i : idx) {
      bs.push_back(seqs[i]);
      bl.push_back(labels[i]);
    }
    try {
      Tensor loss = bce_with_logits(models::discriminator_logits(d, bs), bl);
      out.loss += loss.item();
      backward(loss);
      opt.step();
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(phase) + ": discriminator epoch " + std::to_string(epoch) +
                           ", batch at example " + std::to_string(at) + ": " + e.what());
    }
    ++nb;
  }
  out.loss /= static_cast<double>(nb);
  const auto scores = models::discriminator_scores(d, seqs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] > 0.5) == (labels[i] > 0.5);
  out.accuracy = static_cast<double>(correct) / static_cast<double>(scores.size());
  return out;
}

}  // namespace

TrainResult train_seqgan(const CorpusData& data, const TrainConfig& config) {
  TrainConfig cfg = config;
  cfg.model = ModelKind::seqgan;
  cfg.validate();
  check_data(data);
  const auto& sg = cfg.seqgan;
  ModelBundle bundle = init_models(cfg, data.vocab.size());
  auto& g = *bundle.generator;
  auto& d = *bundle.discriminator;
  Optim g_opt(models::tensors_of(g.parameters()), cfg.optimizer, cfg.learning_rate, cfg.clip_norm);
  Optim d_opt(models::tensors_of(d.parameters()), cfg.optimizer, sg.d_learning_rate, cfg.clip_norm);
  Rng data_rng(cfg.seeds.data_order), noise_rng(cfg.seeds.noise);
  json report = base_report(cfg, data);
  BestTracker tracker;

  // (1) MLE pretraining: same streams as train_rnnlm, so G matches the RNNLM.
  json g_epochs = json::array(), g_steps = json::array();
  mle_epochs(g, bundle, data, cfg, sg.g_pretrain_epochs, g_opt, data_rng, noise_rng, g_epochs, g_steps, nullptr,
             "g_pretrain");
  report["g_pretrain"] = {{"epochs", std::move(g_epochs)}, {"steps", std::move(g_steps)}};

  // (2) discriminator pretraining.
  json d_epochs = json::array();
  for (std::size_t e = 1; e <= sg.d_pretrain_epochs; ++e) {
    const auto r = discriminator_epoch(g, d, data, cfg, d_opt, data_rng, noise_rng, e, "d_pretrain");
    d_epochs.push_back({{"epoch", e}, {"loss", r.loss}, {"accuracy", r.accuracy}});
  }
  report["d_pretrain"] = std::move(d_epochs);

  const double pretrained_ppl = rnnlm_perplexity(g, data.dev).perplexity;
  report["pretrained_dev_perplexity"] = pretrained_ppl;
  if (sg.adv_epochs == 0) tracker.offer(bundle, cfg, data, 0, pretrained_ppl, "g_pretrain");

  // (3) adversarial epochs.
  json adv = json::array();
  std::uint64_t pg_step = 0;
  for (std::size_t e = 1; e <= sg.adv_epochs; ++e) {
    json rec = {{"epoch", e}};
    double reward_sum = 0.0, score_sum = 0.0, loss_sum = 0.0;
    std::size_t reward_n = 0;
    for (std::size_t s = 0; s < sg.g_steps; ++s, ++pg_step) {
      const auto seqs = models::sample_sequences(g, sg.pg_batch, noise_rng);
      const auto rewards = models::mc_rollout_rewards_batch(g, d, seqs, sg.n_rollouts, noise_rng.next());
      double all = 0.0;
      std::size_t count = 0;
      for (const auto& r : rewards) {
        for (double q : r) all += q;
        count += r.size();
        score_sum += r.back();
      }
      reward_sum += all;
      reward_n += count;
      const double baseline = sg.baseline == Baseline::mean ? all / static_cast<double>(count) : 0.0;
      try {
        Tensor loss = models::policy_gradient_loss_batch(g, seqs, rewards, baseline);
        loss_sum += loss.item();
        backward(loss);
        g_opt.step();
      } catch (const NumericalError& err) {
        throw NumericalError("adversarial: policy-gradient step " + std::to_string(pg_step) + " (epoch " +
                             std::to_string(e) + "): " + err.what());
      }
    }
    if (sg.g_steps > 0) {
      rec["mean_reward"] = reward_sum / static_cast<double>(reward_n);
      rec["mean_sequence_score"] = score_sum / static_cast<double>(sg.g_steps * sg.pg_batch);
      rec["pg_loss"] = loss_sum / static_cast<double>(sg.g_steps);
    }
    json d_log = json::array();
    for (std::size_t s = 1; s <= sg.d_steps; ++s) {
      const auto r = discriminator_epoch(g, d, data, cfg, d_opt, data_rng, noise_rng, s, "adversarial");
      d_log.push_back({{"loss", r.loss}, {"accuracy", r.accuracy}});
    }
    if (!d_log.empty()) rec["d_accuracy"] = d_log.back()["accuracy"];
    rec["d_epochs"] = std::move(d_log);
    const double ppl = rnnlm_perplexity(g, data.dev).perplexity;
    rec["dev_perplexity"] = ppl;
    adv.push_back(std::move(rec));
    tracker.offer(bundle, cfg, data, e, ppl, "adversarial");
  }
  report["adversarial"] = std::move(adv);
  TrainResult result;
  finish_report(report, result, data, bundle, cfg, tracker, sg.adv_epochs,
                sg.adv_epochs == 0 ? "g_pretrain" : "adversarial");
  return result;
}

TrainResult train_model(const CorpusData& data, const TrainConfig& cfg) {
  switch (cfg.model) {
    case ModelKind::rnnlm:
      return train_rnnlm(data, cfg);
    case ModelKind::vae:
      return train_vae(data, cfg);
    case ModelKind::seqgan:
      return train_seqgan(data, cfg);
  }
  throw ContractError("train: unknown model kind");
}

}  // namespace lmforge::training
