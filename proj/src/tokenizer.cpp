#include "tocrag/tokenizer.hpp"

#include <stdexcept>

namespace tocrag {

namespace utf8 {

Decoded decode(std::string_view text, std::size_t pos) noexcept {
  const auto byte = [&](std::size_t i) {
    return static_cast<unsigned char>(text[i]);
  };
  const unsigned char lead = byte(pos);
  if (lead < 0x80) return {lead, 1, true};

  std::size_t length = 0;
  char32_t cp = 0;
  char32_t min_value = 0;
  if ((lead & 0xE0) == 0xC0) {
    length = 2, cp = lead & 0x1F, min_value = 0x80;
  } else if ((lead & 0xF0) == 0xE0) {
    length = 3, cp = lead & 0x0F, min_value = 0x800;
  } else if ((lead & 0xF8) == 0xF0) {
    length = 4, cp = lead & 0x07, min_value = 0x10000;
  } else {
    return {lead, 1, false};
  }
  if (pos + length > text.size()) return {lead, 1, false};
  for (std::size_t i = 1; i < length; ++i) {
    const unsigned char c = byte(pos + i);
    if ((c & 0xC0) != 0x80) return {lead, 1, false};
    cp = (cp << 6) | (c & 0x3F);
  }
  if (cp < min_value || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    return {lead, 1, false};
  }
  return {cp, length, true};
}

}  // namespace utf8

namespace {

enum class CharClass { space, punct, word, standalone };

bool in(char32_t c, char32_t lo, char32_t hi) { return c >= lo && c <= hi; }

CharClass classify(char32_t c) {
  if (c < 0x80) {
    if (c == ' ' || (c >= 0x09 && c <= 0x0D)) return CharClass::space;
    if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
        (c >= 'A' && c <= 'Z') || c == '_') {
      return CharClass::word;
    }
    return CharClass::punct;  // remaining printable ASCII and controls
  }
  if (c == 0x85 || c == 0xA0 || c == 0x1680 || in(c, 0x2000, 0x200A) ||
      c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
      c == 0x3000 || c == 0xFEFF) {
    return CharClass::space;
  }
  if (in(c, 0x80, 0x9F) || in(c, 0xA1, 0xA9) || in(c, 0xAB, 0xAC) ||
      in(c, 0xAE, 0xB1) || c == 0xB4 || in(c, 0xB6, 0xB8) || c == 0xBB ||
      c == 0xBF || c == 0xD7 || c == 0xF7 || in(c, 0x2010, 0x2027) ||
      in(c, 0x2030, 0x205E) || in(c, 0x2190, 0x2BFF) ||
      in(c, 0x3001, 0x3003) || in(c, 0x3008, 0x3011) ||
      in(c, 0x3014, 0x301F) || in(c, 0xFF01, 0xFF0F) ||
      in(c, 0xFF1A, 0xFF20) || in(c, 0xFF3B, 0xFF40) ||
      in(c, 0xFF5B, 0xFF65)) {
    return CharClass::punct;
  }
  if (in(c, 0x3040, 0x309F) || in(c, 0x3400, 0x4DBF) ||
      in(c, 0x4E00, 0x9FFF) || in(c, 0xF900, 0xFAFF) ||
      in(c, 0x20000, 0x2FFFF)) {
    return CharClass::standalone;
  }
  return CharClass::word;
}

template <typename Sink>
void scan(std::string_view text, Sink&& sink) {
  std::size_t pos = 0;
  std::size_t word_start = std::string_view::npos;
  while (pos < text.size()) {
    const auto d = utf8::decode(text, pos);
    const CharClass cls = d.valid ? classify(d.cp) : CharClass::word;
    if (cls == CharClass::word) {
      if (word_start == std::string_view::npos) word_start = pos;
    } else {
      if (word_start != std::string_view::npos) {
        sink(Token{word_start, pos});
        word_start = std::string_view::npos;
      }
      if (cls != CharClass::space) sink(Token{pos, pos + d.length});
    }
    pos += d.length;
  }
  if (word_start != std::string_view::npos) sink(Token{word_start, pos});
}

bool is_ascii_space(char c) {
  return c == ' ' || (c >= '\t' && c <= '\r');
}

}  // namespace

std::vector<std::string_view> Tokenizer::pieces(std::string_view text) const {
  std::vector<std::string_view> out;
  for (const auto& t : tokenize(text)) out.push_back(text.substr(t.begin, t.size()));
  return out;
}

std::vector<Token> WordPunctTokenizer::tokenize(std::string_view text) const {
  std::vector<Token> tokens;
  scan(text, [&](Token t) { tokens.push_back(t); });
  return tokens;
}

std::size_t WordPunctTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  scan(text, [&](Token) { ++n; });
  return n;
}

std::vector<Token> WhitespaceTokenizer::tokenize(std::string_view text) const {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_ascii_space(text[i])) ++i;
    if (i > start) tokens.push_back({start, i});
  }
  return tokens;
}

std::shared_ptr<const Tokenizer> make_tokenizer(std::string_view id) {
  static const auto word_punct = std::make_shared<const WordPunctTokenizer>();
  static const auto whitespace = std::make_shared<const WhitespaceTokenizer>();
  if (id == "default" || id.empty()) return word_punct;
  if (id == "whitespace") return whitespace;
  throw std::invalid_argument("unknown tokenizer id: " + std::string(id));
}

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer) {
  return tokenizer.count(text);
}

std::string_view truncate_to_tokens(std::string_view text, std::size_t max_tokens,
                                    const Tokenizer& tokenizer) {
  const auto tokens = tokenizer.tokenize(text);
  if (tokens.size() <= max_tokens) return text;
  std::size_t keep = max_tokens;
  while (true) {
    const std::size_t cut = keep == 0 ? 0 : tokens[keep - 1].end;
    const auto prefix = text.substr(0, cut);
    if (keep == 0 || tokenizer.count(prefix) <= max_tokens) return prefix;
    --keep;
  }
}

}  // namespace tocrag
