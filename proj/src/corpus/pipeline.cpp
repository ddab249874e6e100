#include <cmath>
#include <fstream>
#include <set>

#include "lmforge/corpus.hpp"
#include "lmforge/errors.hpp"
#include "lmforge/rng.hpp"

namespace lmforge::corpus {

Splits sample_splits(std::vector<SentenceRecord> pool, const SplitSpec& spec) {
  const std::size_t wanted = spec.train_n + spec.dev_n + spec.test_n;
  if (pool.size() < wanted)
    throw DataError("sample_splits: pool holds " + std::to_string(pool.size()) +
                    " sentences but train+dev+test requests " + std::to_string(wanted) + " (" +
                    std::to_string(spec.train_n) + "+" + std::to_string(spec.dev_n) + "+" +
                    std::to_string(spec.test_n) + ")");
  Rng rng(spec.seed);
  rng.shuffle(std::span(pool));
  Splits out;
  auto take = [&](std::size_t from, std::size_t n) {
    return std::vector<SentenceRecord>(std::make_move_iterator(pool.begin() + from),
                                       std::make_move_iterator(pool.begin() + from + n));
  };
  out.train = take(0, spec.train_n);
  out.dev = take(spec.train_n, spec.dev_n);
  out.test = take(spec.train_n + spec.dev_n, spec.test_n);
  return out;
}

CorpusStats compute_stats(std::span<const std::vector<std::string>> sentences) {
  if (sentences.empty()) throw DegenerateInputError("compute_stats: empty split");
  CorpusStats st;
  st.example_count = sentences.size();
  std::uint64_t total = 0, total_sq = 0;
  std::set<std::string_view> unique;
  for (const auto& s : sentences) {
    const std::uint64_t n = s.size();
    total += n;
    total_sq += n * n;
    ++st.length_histogram[n];
    for (const auto& t : s) unique.insert(t);
  }
  const std::uint64_t count = st.example_count;
  st.mean_tokens = static_cast<double>(total) / static_cast<double>(count);
  // Population variance as an exact integer ratio: (n*sum(x^2) - sum(x)^2) / n^2.
  const std::uint64_t num = count * total_sq - total * total;
  st.stddev_tokens = std::sqrt(static_cast<double>(num) / static_cast<double>(count * count));
  st.unique_tokens = unique.size();
  return st;
}

CorpusStats compute_stats(std::span<const SentenceRecord> split) {
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(split.size());
  for (const auto& r : split) tokens.push_back(r.tokens);
  return compute_stats(tokens);
}

nlohmann::json stats_to_json(const CorpusStats& stats) {
  nlohmann::json hist = nlohmann::json::array();
  for (auto [len, count] : stats.length_histogram) hist.push_back({len, count});
  return {{"example_count", stats.example_count},
          {"mean_tokens", stats.mean_tokens},
          {"stddev_tokens", stats.stddev_tokens},
          {"unique_tokens", stats.unique_tokens},
          {"length_histogram", hist}};
}

std::vector<std::vector<std::string>> read_split_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read split file " + path.string());
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(tokenize(line));
  }
  return out;
}

void write_split_file(const std::filesystem::path& path,
                      std::span<const std::vector<std::string>> sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) out << (i ? " " : "") << s[i];
    out << '\n';
  }
}

std::vector<std::vector<TokenId>> load_split_ids(const std::filesystem::path& path,
                                                 const Vocabulary& vocab) {
  std::vector<std::vector<TokenId>> out;
  for (const auto& s : read_split_file(path)) {
    if (s.empty()) continue;
    out.push_back(apply_unk(s, vocab));
  }
  return out;
}

BuildReport build_corpus(const std::filesystem::path& input, const std::filesystem::path& out_dir,
                         const BuildConfig& config) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw DataError("cannot read corpus dump " + input.string());

  BuildReport report;
  std::vector<SentenceRecord> candidates;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const std::uint64_t line_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++report.documents;
    for (auto [b, e] : sentence_spans(line)) {
      auto tokens = tokenize(normalize_text(std::string_view(line).substr(b, e - b)));
      if (tokens.empty()) continue;
      candidates.push_back({std::move(tokens), line_offset + b});
    }
  }
  report.sentences = candidates.size();
  if (candidates.empty()) throw DataError("corpus dump " + input.string() + " contains no sentences");

  std::vector<std::vector<std::string>> token_lists;
  token_lists.reserve(candidates.size());
  for (const auto& c : candidates) token_lists.push_back(c.tokens);
  const Vocabulary vocab = build_vocab(token_lists, config.vocab_size);
  report.vocab_size = vocab.size();

  std::vector<SentenceRecord> pool;
  for (auto& c : candidates) {
    const FilterResult r = filter_sentence(c.tokens, vocab);
    if (r.accepted)
      pool.push_back(std::move(c));
    else
      ++report.rejected[std::string(to_string(r.reason))];
  }
  report.accepted = pool.size();

  Splits splits = sample_splits(std::move(pool), {config.train_n, config.dev_n, config.test_n, config.seed});

  std::filesystem::create_directories(out_dir);
  auto emit = [&](const std::vector<SentenceRecord>& split, const char* name, CorpusStats& stats) {
    std::vector<std::vector<std::string>> lines;
    lines.reserve(split.size());
    for (const auto& r : split) {
      std::vector<std::string> mapped;
      mapped.reserve(r.tokens.size());
      for (TokenId id : apply_unk(r.tokens, vocab)) mapped.push_back(vocab.token(id));
      lines.push_back(std::move(mapped));
    }
    write_split_file(out_dir / name, lines);
    if (!lines.empty()) stats = compute_stats(lines);
    return lines.empty() ? nlohmann::json(nullptr) : stats_to_json(stats);
  };
  nlohmann::json split_stats;
  split_stats["train"] = emit(splits.train, "train.txt", report.train);
  split_stats["valid"] = emit(splits.dev, "valid.txt", report.dev);
  split_stats["test"] = emit(splits.test, "test.txt", report.test);
  vocab.write(out_dir / "vocab.txt");

  nlohmann::json stats = {{"format_version", 1},
                          {"documents", report.documents},
                          {"sentences", report.sentences},
                          {"accepted", report.accepted},
                          {"rejected", report.rejected},
                          {"vocab_size", report.vocab_size},
                          {"seed", config.seed},
                          {"splits", split_stats}};
  std::ofstream sj(out_dir / "stats.json", std::ios::binary);
  sj << stats.dump(2) << '\n';
  return report;
}

}  // namespace lmforge::corpus
