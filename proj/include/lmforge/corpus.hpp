#pragma once

// Corpus construction: normalization, sentence splitting, sentence filters,
// vocabulary, seeded split sampling and split statistics.
//
// Normalization (normalize_text) applies, in order:
//   a) lowercasing (ASCII, Latin-1 and Cyrillic letters)
//   b) URL replacement with <url>. Recognised forms, matched on the
//      lowercased text:
//        http://... https://... www....        up to the next whitespace
//        bare domains  name(.name)*.tld[/path] for tld in kUrlTlds
//      Trailing . , ; : ! ? ) " ' » are left outside the URL.
//   c) punctuation separation: every punctuation character (ASCII
//      punctuation, U+00A1-U+00BF, U+2010-U+2027, U+2030-U+205E, U+20A0-
//      U+20BF, U+2116) becomes its own token; whitespace is collapsed to a
//      single space. The five special tokens are kept intact.
//   d) digit runs: 1-4 ASCII digits -> "d" repeated run-length times,
//      5 or more -> "n".

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lmforge/tensor.hpp"

namespace lmforge::corpus {

inline constexpr std::array<std::string_view, 5> kSpecials = {"<pad>", "<sos>", "<eos>", "<unk>",
                                                              "<url>"};
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kSosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr TokenId kUrlId = 4;
inline constexpr std::size_t kNumSpecials = kSpecials.size();

inline constexpr std::array<std::string_view, 18> kUrlTlds = {
    "ru", "com", "org", "net", "info", "biz", "su", "ua", "by",
    "kz", "uk", "de", "fr", "io", "tv", "me", "gov", "edu"};

bool is_special_token(std::string_view token);

std::string lowercase(std::string_view text);
std::string normalize_text(std::string_view raw);
std::vector<std::string> tokenize(std::string_view normalized);

// Byte ranges [begin, end) of the sentences in `doc`, whitespace-trimmed.
std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(std::string_view doc);
std::vector<std::string> split_sentences(std::string_view doc);

class Vocabulary {
 public:
  Vocabulary();
  // Specials are inserted first with frequency taken from `special_freq`
  // (missing entries count as zero), then `ranked` in the given order.
  static Vocabulary from_ranked(std::span<const std::pair<std::string, std::uint64_t>> ranked,
                                const std::map<std::string, std::uint64_t>& special_freq = {});

  std::size_t size() const { return tokens_.size(); }
  std::optional<TokenId> find(std::string_view token) const;
  TokenId id_or_unk(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::uint64_t frequency(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  void write(const std::filesystem::path& path) const;
  static Vocabulary read(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && freq_ == other.freq_;
  }

 private:
  void push(std::string token, std::uint64_t freq);
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> freq_;
  std::unordered_map<std::string, TokenId> index_;
};

// Ranks non-special tokens by descending frequency, ties by byte order, and
// keeps the top `cap`.
Vocabulary build_vocab(std::span<const std::vector<std::string>> sentences, std::size_t cap);

std::vector<TokenId> apply_unk(std::span<const std::string> tokens, const Vocabulary& vocab);

enum class RejectReason { none, length, english, quotes, brackets, unknown_ratio };
std::string_view to_string(RejectReason reason);

inline constexpr std::size_t kMaxSentenceTokens = 40;  // accepted iff count < 40
inline constexpr double kMaxUnknownRatio = 0.10;       // accepted iff ratio < 10%

struct FilterResult {
  bool accepted = false;
  RejectReason reason = RejectReason::none;
};

// Predicates are checked in order: length, english, quotes, brackets,
// unknown ratio; the first failure is reported.
FilterResult filter_sentence(std::span<const std::string> tokens, const Vocabulary& vocab);

bool is_digit_placeholder(std::string_view token);

struct SentenceRecord {
  std::vector<std::string> tokens;
  std::uint64_t source_offset = 0;
};

struct SplitSpec {
  std::size_t train_n = 0;
  std::size_t dev_n = 0;
  std::size_t test_n = 0;
  std::uint64_t seed = 0;
};

struct Splits {
  std::vector<SentenceRecord> train;
  std::vector<SentenceRecord> dev;
  std::vector<SentenceRecord> test;
};

// Shuffles the pool with Rng(spec.seed) and assigns contiguous blocks to
// train, dev, test. Throws DataError on shortfall.
Splits sample_splits(std::vector<SentenceRecord> pool, const SplitSpec& spec);

struct CorpusStats {
  std::size_t example_count = 0;
  double mean_tokens = 0.0;
  double stddev_tokens = 0.0;  // population
  std::size_t unique_tokens = 0;
  std::map<std::size_t, std::size_t> length_histogram;  // bin width 1

  bool operator==(const CorpusStats&) const = default;
};

CorpusStats compute_stats(std::span<const std::vector<std::string>> sentences);
CorpusStats compute_stats(std::span<const SentenceRecord> split);
nlohmann::json stats_to_json(const CorpusStats& stats);

// ---- files -----------------------------------------------------------------

std::vector<std::vector<std::string>> read_split_file(const std::filesystem::path& path);
void write_split_file(const std::filesystem::path& path,
                      std::span<const std::vector<std::string>> sentences);

// Sentences of a split as ids: <sos> is not included, <eos> is not appended.
std::vector<std::vector<TokenId>> load_split_ids(const std::filesystem::path& path,
                                                 const Vocabulary& vocab);

struct BuildConfig {
  std::size_t vocab_size = 15000;
  std::size_t train_n = 200000;
  std::size_t dev_n = 16000;
  std::size_t test_n = 16000;
  std::uint64_t seed = 0;
};

struct BuildReport {
  std::size_t documents = 0;
  std::size_t sentences = 0;
  std::size_t accepted = 0;
  std::map<std::string, std::size_t> rejected;
  std::size_t vocab_size = 0;
  CorpusStats train, dev, test;
};

// Reads one document per line from `input`, writes train.txt, valid.txt,
// test.txt, vocab.txt and stats.json into `out_dir`.
BuildReport build_corpus(const std::filesystem::path& input, const std::filesystem::path& out_dir,
                         const BuildConfig& config);

}  // namespace lmforge::corpus
