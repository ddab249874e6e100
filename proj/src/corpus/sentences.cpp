// Rule-based sentence splitter.
//
// A boundary is a run of terminators (. ! ? …), optionally followed by
// closing quotes/brackets, followed by whitespace or end of text. A single
// "." is not a boundary when
//   - the preceding word is a name-introducing abbreviation (г., ул., проф.),
//   - the preceding word is a unit abbreviation (млн., руб., т.д.) and the
//     next word does not start with an uppercase letter, or
//   - the preceding word is numeric (digits or a d/n placeholder) and the
//     next word starts with a lowercase letter.
// Works on raw or normalized text: in normalized text the "." is its own
// token, so the preceding word is found by skipping back over spaces.

#include <array>
#include <string>
#include <string_view>

#include "lmforge/corpus.hpp"
#include "utf8.hpp"

namespace lmforge::corpus {
namespace {

// Abbreviations that introduce a name or number: never end a sentence.
constexpr std::array<std::string_view, 25> kPrefixAbbreviations = {
    "г",   "гг",   "т",    "е",   "д",   "ул",  "им",  "см",  "пр",
    "проф", "акад", "ген", "обл", "р",   "стр", "рис", "напр", "т.е",
    "св",  "ст",   "вв",   "кв",  "пос", "mr",  "dr"};

// Abbreviations that may close a sentence: a boundary only when the next
// word starts with an uppercase letter.
constexpr std::array<std::string_view, 14> kTrailingAbbreviations = {
    "млн", "млрд", "тыс", "руб", "коп", "долл", "км", "чел", "т.д", "т.п", "др", "н.э", "corp", "inc"};

bool is_terminator(std::string_view text, std::size_t pos, std::size_t& len) {
  const char c = text[pos];
  if (c == '.' || c == '!' || c == '?') {
    len = 1;
    return true;
  }
  if (text.substr(pos, 3) == "\xE2\x80\xA6") {  // …
    len = 3;
    return true;
  }
  return false;
}

bool is_closer(std::string_view text, std::size_t pos, std::size_t& len) {
  const char c = text[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']') {
    len = 1;
    return true;
  }
  for (std::string_view s : {"\xC2\xBB" /* » */, "\xE2\x80\x9D" /* ” */, "\xE2\x80\x99" /* ’ */}) {
    if (text.substr(pos, s.size()) == s) {
      len = s.size();
      return true;
    }
  }
  return false;
}

bool space_at(std::string_view text, std::size_t pos) {
  std::size_t len = 0;
  return utf8::is_space(utf8::decode(text, pos, len));
}

bool is_numeric_word(std::string_view w) {
  if (w.empty()) return false;
  bool digits = true;
  for (char c : w) digits = digits && c >= '0' && c <= '9';
  return digits || is_digit_placeholder(w);
}

// Word that ends right before `pos`, skipping spaces first. Leading opening
// punctuation is dropped.
std::string previous_word(std::string_view text, std::size_t pos) {
  std::size_t end = pos;
  while (end > 0 && text[end - 1] == ' ') --end;
  std::size_t begin = end;
  while (begin > 0) {
    std::size_t s = begin - 1;
    while (s > 0 && (static_cast<unsigned char>(text[s]) & 0xC0) == 0x80) --s;
    std::size_t len = 0;
    const char32_t cp = utf8::decode(text, s, len);
    if (utf8::is_space(cp) || cp == U'(' || cp == U'"' || cp == 0xAB) break;
    begin = s;
  }
  return lowercase(text.substr(begin, end - begin));
}

char32_t next_word_start(std::string_view text, std::size_t pos) {
  while (pos < text.size() && space_at(text, pos)) {
    std::size_t len = 0;
    utf8::decode(text, pos, len);
    pos += len;
  }
  if (pos >= text.size()) return 0;
  std::size_t len = 0;
  return utf8::decode(text, pos, len);
}

bool next_starts_lowercase(std::string_view text, std::size_t pos) {
  return utf8::is_lower_letter(next_word_start(text, pos));
}

bool next_starts_uppercase(std::string_view text, std::size_t pos) {
  const char32_t cp = next_word_start(text, pos);
  return cp != 0 && utf8::to_lower(cp) != cp;
}

bool is_boundary(std::string_view text, std::size_t term_begin, std::size_t term_end,
                 std::size_t after) {
  if (term_end - term_begin != 1 || text[term_begin] != '.') return true;
  const std::string prev = previous_word(text, term_begin);
  for (std::string_view a : kPrefixAbbreviations)
    if (prev == a) return false;
  for (std::string_view a : kTrailingAbbreviations)
    if (prev == a) return next_starts_uppercase(text, after);
  if (is_numeric_word(prev) && next_starts_lowercase(text, after)) return false;
  return true;
}

std::pair<std::size_t, std::size_t> trim(std::string_view text, std::size_t b, std::size_t e) {
  while (b < e && space_at(text, b)) {
    std::size_t len = 0;
    utf8::decode(text, b, len);
    b += len;
  }
  while (e > b) {
    // step back one code point
    std::size_t s = e - 1;
    while (s > b && (static_cast<unsigned char>(text[s]) & 0xC0) == 0x80) --s;
    if (!space_at(text, s)) break;
    e = s;
  }
  return {b, e};
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(std::string_view doc) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  auto emit = [&](std::size_t b, std::size_t e) {
    auto [tb, te] = trim(doc, b, e);
    if (te > tb) spans.emplace_back(tb, te);
  };
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < doc.size()) {
    std::size_t len = 0;
    if (!is_terminator(doc, i, len)) {
      ++i;
      continue;
    }
    const std::size_t term_begin = i;
    std::size_t j = i + len;
    while (j < doc.size() && is_terminator(doc, j, len)) j += len;
    const std::size_t term_end = j;
    while (j < doc.size() && is_closer(doc, j, len)) j += len;
    if ((j == doc.size() || space_at(doc, j)) && is_boundary(doc, term_begin, term_end, j)) {
      emit(start, j);
      start = j;
    }
    i = j > i ? j : i + 1;
  }
  emit(start, doc.size());
  return spans;
}

std::vector<std::string> split_sentences(std::string_view doc) {
  std::vector<std::string> out;
  for (auto [b, e] : sentence_spans(doc)) out.emplace_back(doc.substr(b, e - b));
  return out;
}

}  // namespace lmforge::corpus
