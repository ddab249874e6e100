#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "lmforge/corpus.hpp"
#include "lmforge/errors.hpp"

namespace lmforge::corpus {

Vocabulary::Vocabulary() {
  for (std::string_view s : kSpecials) push(std::string(s), 0);
}

void Vocabulary::push(std::string token, std::uint64_t freq) {
  if (index_.contains(token)) throw DataError("vocabulary: duplicate token '" + token + "'");
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(std::move(token));
  freq_.push_back(freq);
}

Vocabulary Vocabulary::from_ranked(std::span<const std::pair<std::string, std::uint64_t>> ranked,
                                   const std::map<std::string, std::uint64_t>& special_freq) {
  Vocabulary v;
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    auto it = special_freq.find(v.tokens_[i]);
    v.freq_[i] = it == special_freq.end() ? 0 : it->second;
  }
  for (const auto& [token, freq] : ranked) {
    if (is_special_token(token)) continue;
    v.push(token, freq);
  }
  return v;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_or_unk(std::string_view token) const {
  return find(token).value_or(kUnkId);
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw IndexError("vocabulary: id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::uint64_t Vocabulary::frequency(TokenId id) const {
  token(id);
  return freq_[id];
}

void Vocabulary::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << freq_[i] << '\n';
}

Vocabulary Vocabulary::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocabulary " + path.string());
  std::vector<std::pair<std::string, std::uint64_t>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected token<TAB>frequency");
    std::uint64_t f = 0;
    try {
      f = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad frequency");
    }
    rows.emplace_back(line.substr(0, tab), f);
  }
  if (rows.size() < kNumSpecials) throw DataError(path.string() + ": missing special tokens");
  std::map<std::string, std::uint64_t> special;
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    if (rows[i].first != kSpecials[i])
      throw DataError(path.string() + ": line " + std::to_string(i + 1) + " must be " +
                      std::string(kSpecials[i]));
    special[rows[i].first] = rows[i].second;
  }
  return from_ranked(std::span(rows).subspan(kNumSpecials), special);
}

Vocabulary build_vocab(std::span<const std::vector<std::string>> sentences, std::size_t cap) {
  if (cap == 0) throw ContractError("build_vocab: cap must be at least 1");
  if (sentences.empty()) throw DegenerateInputError("build_vocab: no sentences");
  std::unordered_map<std::string, std::uint64_t> counts;
  std::map<std::string, std::uint64_t> special;
  for (const auto& s : sentences)
    for (const auto& t : s) {
      if (is_special_token(t))
        ++special[t];
      else
        ++counts[t];
    }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > cap) ranked.resize(cap);
  return Vocabulary::from_ranked(ranked, special);
}

std::vector<TokenId> apply_unk(std::span<const std::string> tokens, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id_or_unk(t));
  return ids;
}

}  // namespace lmforge::corpus
