#include <regex>
#include <string>

#include "lmforge/corpus.hpp"
#include "utf8.hpp"

namespace lmforge::corpus {
namespace {

const std::regex& url_regex() {
  static const std::regex re = [] {
    std::string tlds;
    for (std::string_view t : kUrlTlds) {
      if (!tlds.empty()) tlds += '|';
      tlds += t;
    }
    // Bytes 0xC2 lead the U+0080-U+00BF block (including « and »), which
    // never appears inside a URL.
    const std::string stop = std::string("[^\\s<>\"") + '\xC2' + "]";
    const std::string pattern = "(^|[^a-z0-9@._/-])((?:https?://|www\\.)" + stop +
                                "+|[a-z0-9][a-z0-9-]*(?:\\.[a-z0-9-]+)*\\.(?:" + tlds +
                                ")(?![a-z0-9-])(?:/" + stop + "*)?)";
    return std::regex(pattern, std::regex::ECMAScript | std::regex::optimize);
  }();
  return re;
}

bool is_trailing_url_punct(char c) {
  switch (c) {
    case '.':
    case ',':
    case ';':
    case ':':
    case '!':
    case '?':
    case ')':
    case '"':
    case '\'':
      return true;
    default:
      return false;
  }
}

std::string replace_urls(const std::string& text) {
  std::string out;
  auto last = text.cbegin();
  for (std::sregex_iterator it(text.begin(), text.end(), url_regex()), end; it != end; ++it) {
    const std::smatch& m = *it;
    out.append(last, m[2].first);
    std::string url = m[2].str();
    std::string tail;
    while (!url.empty() && is_trailing_url_punct(url.back())) {
      tail.insert(tail.begin(), url.back());
      url.pop_back();
    }
    out += " <url> ";
    out += tail;
    last = m[2].second;
  }
  out.append(last, text.cend());
  return out;
}

// Length of a special token starting at text[pos], or 0.
std::size_t special_at(std::string_view text, std::size_t pos) {
  if (text[pos] != '<') return 0;
  for (std::string_view s : kSpecials)
    if (text.substr(pos, s.size()) == s) return s.size();
  return 0;
}

std::string separate_punctuation(std::string_view text) {
  std::string out;
  out.reserve(text.size() + text.size() / 4);
  bool pending_space = false;
  auto emit_space = [&] { pending_space = !out.empty(); };
  auto put = [&](std::string_view piece) {
    if (pending_space) out += ' ';
    pending_space = false;
    out.append(piece);
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::size_t sl = special_at(text, i)) {
      emit_space();
      put(text.substr(i, sl));
      emit_space();
      i += sl;
      continue;
    }
    std::size_t len = 0;
    const char32_t cp = utf8::decode(text, i, len);
    if (utf8::is_space(cp)) {
      emit_space();
    } else if (utf8::is_punct(cp)) {
      emit_space();
      put(text.substr(i, len));
      emit_space();
    } else {
      put(text.substr(i, len));
    }
    i += len;
  }
  return out;
}

std::string replace_digits(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] >= '0' && text[i] <= '9') {
      std::size_t j = i;
      while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
      const std::size_t run = j - i;
      if (run >= 5)
        out += 'n';
      else
        out.append(run, 'd');
      i = j;
    } else {
      out += text[i++];
    }
  }
  return out;
}

}  // namespace

bool is_special_token(std::string_view token) {
  for (std::string_view s : kSpecials)
    if (s == token) return true;
  return false;
}

std::string lowercase(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = 0;
    const char32_t cp = utf8::decode(text, i, len);
    if (len == 1 && cp >= 0x80)
      out += text[i];  // malformed byte, pass through
    else
      utf8::append(out, utf8::to_lower(cp));
    i += len;
  }
  return out;
}

std::string normalize_text(std::string_view raw) {
  const std::string lowered = lowercase(raw);
  const std::string no_urls = replace_urls(lowered);
  const std::string separated = separate_punctuation(no_urls);
  return replace_digits(separated);
}

std::vector<std::string> tokenize(std::string_view normalized) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < normalized.size()) {
    while (i < normalized.size() && normalized[i] == ' ') ++i;
    std::size_t j = i;
    while (j < normalized.size() && normalized[j] != ' ') ++j;
    if (j > i) tokens.emplace_back(normalized.substr(i, j - i));
    i = j;
  }
  return tokens;
}

bool is_digit_placeholder(std::string_view token) {
  if (token == "n") return true;
  if (token.empty() || token.size() > 4) return false;
  for (char c : token)
    if (c != 'd') return false;
  return true;
}

}  // namespace lmforge::corpus
