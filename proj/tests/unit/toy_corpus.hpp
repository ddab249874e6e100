#pragma once

// Synthetic in-memory corpora for training tests.

#include <algorithm>
#include <string>
#include <vector>

#include "lmforge/rng.hpp"
#include "lmforge/training.hpp"

namespace testsupport {

inline lmforge::corpus::Vocabulary toy_vocab(std::size_t vocab_size) {
  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  for (std::size_t i = lmforge::corpus::kNumSpecials; i < vocab_size; ++i)
    ranked.emplace_back("w" + std::to_string(i), 1000 - i);
  return lmforge::corpus::Vocabulary::from_ranked(ranked);
}

// Arithmetic progressions over the word ids: start s, stride 1 or 2, length 3..8.
inline std::vector<std::vector<lmforge::TokenId>> progression_sentences(std::size_t n, std::size_t vocab_size,
                                                                        lmforge::Rng& rng) {
  const std::size_t words = vocab_size - lmforge::corpus::kNumSpecials;
  std::vector<std::vector<lmforge::TokenId>> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t start = rng.below(words), stride = 1 + rng.below(2), len = 3 + rng.below(6);
    std::vector<lmforge::TokenId> s;
    for (std::size_t k = 0; k < len; ++k)
      s.push_back(static_cast<lmforge::TokenId>(lmforge::corpus::kNumSpecials + (start + k * stride) % words));
    out.push_back(std::move(s));
  }
  return out;
}

// Strictly ascending word ids, length 4..10.
inline std::vector<std::vector<lmforge::TokenId>> ascending_sentences(std::size_t n, std::size_t vocab_size,
                                                                      lmforge::Rng& rng) {
  std::vector<std::vector<lmforge::TokenId>> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<lmforge::TokenId> ids;
    for (std::size_t v = lmforge::corpus::kNumSpecials; v < vocab_size; ++v) ids.push_back(static_cast<lmforge::TokenId>(v));
    rng.shuffle(std::span<lmforge::TokenId>(ids));
    ids.resize(4 + rng.below(7));
    std::sort(ids.begin(), ids.end());
    out.push_back(std::move(ids));
  }
  return out;
}

inline lmforge::training::CorpusData make_toy_corpus(std::size_t train_n, std::size_t vocab_size,
                                                     std::uint64_t seed, bool ascending = false) {
  lmforge::Rng rng(seed);
  auto gen = [&](std::size_t n) {
    return ascending ? ascending_sentences(n, vocab_size, rng) : progression_sentences(n, vocab_size, rng);
  };
  lmforge::training::CorpusData d;
  d.vocab = toy_vocab(vocab_size);
  d.vocab_digest = lmforge::training::vocabulary_digest(d.vocab);
  d.train = gen(train_n);
  d.dev = gen(std::max<std::size_t>(train_n / 10, 1));
  d.test = gen(std::max<std::size_t>(train_n / 10, 1));
  return d;
}

inline lmforge::training::TrainConfig toy_config(lmforge::training::ModelKind kind) {
  lmforge::training::TrainConfig c;
  c.model = kind;
  c.embed = 16;
  c.hidden = 32;
  c.latent = 4;
  c.batch_size = 20;
  c.epochs = 10;
  c.learning_rate = 5e-3;
  c.max_len = 12;
  c.seqgan.g_pretrain_epochs = 3;
  c.seqgan.d_pretrain_epochs = 2;
  c.seqgan.adv_epochs = 2;
  c.seqgan.d_steps = 1;
  c.seqgan.n_rollouts = 2;
  c.seqgan.pg_batch = 8;
  c.seqgan.d_samples = 64;
  c.seqgan.d_embed = 8;
  c.seqgan.d_filters = 4;
  return c;
}

}  // namespace testsupport
