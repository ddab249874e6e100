#include "lmforge/corpus.hpp"
#include "utf8.hpp"

namespace lmforge::corpus {
namespace {

bool has_latin_letter(std::string_view token) {
  std::size_t i = 0;
  while (i < token.size()) {
    std::size_t len = 0;
    if (utf8::is_latin_letter(utf8::decode(token, i, len))) return true;
    i += len;
  }
  return false;
}

}  // namespace

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::none:
      return "none";
    case RejectReason::length:
      return "length";
    case RejectReason::english:
      return "english";
    case RejectReason::quotes:
      return "quotes";
    case RejectReason::brackets:
      return "brackets";
    case RejectReason::unknown_ratio:
      return "unknown_ratio";
  }
  return "unknown";
}

FilterResult filter_sentence(std::span<const std::string> tokens, const Vocabulary& vocab) {
  if (tokens.empty() || tokens.size() >= kMaxSentenceTokens) return {false, RejectReason::length};

  for (const auto& t : tokens)
    if (!is_special_token(t) && !is_digit_placeholder(t) && has_latin_letter(t))
      return {false, RejectReason::english};

  std::size_t single = 0, dbl = 0;
  for (const auto& t : tokens)
    for (char c : t) {
      single += c == '\'';
      dbl += c == '"';
    }
  if (single % 2 != 0 || dbl % 2 != 0) return {false, RejectReason::quotes};

  long depth = 0;
  for (const auto& t : tokens) {
    for (char c : t) {
      if (c == '(') ++depth;
      if (c == ')' && --depth < 0) return {false, RejectReason::brackets};
    }
  }
  if (depth != 0) return {false, RejectReason::brackets};

  std::size_t unknown = 0;
  for (const auto& t : tokens) unknown += vocab.id_or_unk(t) == kUnkId;
  // unknown / n < 10%  <=>  10 * unknown < n
  if (10 * unknown >= tokens.size()) return {false, RejectReason::unknown_ratio};

  return {true, RejectReason::none};
}

}  // namespace lmforge::corpus
