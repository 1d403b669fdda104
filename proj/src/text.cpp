#include "dupq/text.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace dupq {

namespace detail {
extern const std::string_view kStopwordsText;
}

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = [] {
    std::unordered_set<std::string> out;
    std::istringstream in{std::string(detail::kStopwordsText)};
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.front() == '#') continue;
      std::istringstream words_in(line);
      std::string w;
      while (words_in >> w) out.insert(w);
    }
    return out;
  }();
  return words;
}

namespace {

void append_entity(std::string_view name, std::string& out) {
  if (name == "amp") out += '&';
  else if (name == "lt") out += '<';
  else if (name == "gt") out += '>';
  else if (name == "quot") out += '"';
  else if (name == "apos") out += '\'';
  else if (name == "nbsp") out += ' ';
  else if (!name.empty() && name.front() == '#') {
    unsigned code = 0;
    auto digits = name.substr(1);
    int base = 10;
    if (!digits.empty() && (digits.front() == 'x' || digits.front() == 'X')) {
      digits.remove_prefix(1);
      base = 16;
    }
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), code, base);
    // Only ASCII code points are decoded; anything else becomes a separator.
    out += (ec == std::errc{} && ptr == digits.data() + digits.size() && code < 0x80 && code > 0)
               ? char(code)
               : ' ';
  } else {
    out += ' ';
  }
}

bool is_url(std::string_view chunk) {
  auto lower = std::string(chunk);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return lower.find("://") != std::string::npos || lower.rfind("www.", 0) == 0 ||
         lower.rfind("mailto:", 0) == 0;
}

bool is_token_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '+' || c == '#' || c == '.' || c == '-' || c >= 0x80;
}

bool is_edge_trimmed(char c) { return c == '.' || c == '-'; }

}  // namespace

std::string strip_markup(std::string_view html) {
  std::string out;
  out.reserve(html.size());
  for (std::size_t i = 0; i < html.size();) {
    char c = html[i];
    if (c == '<') {
      auto close = html.find('>', i + 1);
      if (close == std::string_view::npos) {
        out += ' ';
        ++i;
        continue;
      }
      out += ' ';
      i = close + 1;
    } else if (c == '&') {
      auto semi = html.find(';', i + 1);
      if (semi != std::string_view::npos && semi - i <= 10) {
        append_entity(html.substr(i + 1, semi - i - 1), out);
        i = semi + 1;
      } else {
        out += ' ';
        ++i;
      }
    } else {
      out += c;
      ++i;
    }
  }
  return out;
}

TokenSequence preprocess_text(std::string_view raw) {
  const auto& stop = stopwords();
  const std::string text = strip_markup(raw);
  TokenSequence tokens;

  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::string_view chunk(text.data() + start, i - start);
    if (chunk.empty() || is_url(chunk)) continue;

    std::size_t j = 0;
    while (j < chunk.size()) {
      while (j < chunk.size() && !is_token_char(static_cast<unsigned char>(chunk[j]))) ++j;
      std::size_t s = j;
      while (j < chunk.size() && is_token_char(static_cast<unsigned char>(chunk[j]))) ++j;
      std::string_view piece = chunk.substr(s, j - s);
      while (!piece.empty() && is_edge_trimmed(piece.front())) piece.remove_prefix(1);
      while (!piece.empty() && is_edge_trimmed(piece.back())) piece.remove_suffix(1);
      if (piece.empty()) continue;
      std::string token(piece);
      std::transform(token.begin(), token.end(), token.begin(), [](unsigned char c) {
        return c < 0x80 ? char(std::tolower(c)) : char(c);
      });
      if (stop.count(token) || is_url(token)) continue;
      tokens.push_back(std::move(token));
    }
  }
  return tokens;
}

std::string join_tokens(const TokenSequence& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace dupq
