#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace tocrag {

/// Byte span [begin, end) of one token inside the tokenized text.
struct Token {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const Token&, const Token&) = default;
};

/// Pluggable tokenizer contract used for every token budget in the engine.
///
/// Implementations must be deterministic and must never emit overlapping or
/// out-of-order tokens. Cutting the text right after the end of token k and
/// re-tokenizing is expected to yield exactly the first k+1 tokens; budget
/// truncation relies on this.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::string_view id() const noexcept = 0;
  virtual std::vector<Token> tokenize(std::string_view text) const = 0;
  virtual std::size_t count(std::string_view text) const {
    return tokenize(text).size();
  }

  /// Token strings, in order.
  std::vector<std::string_view> pieces(std::string_view text) const;
};

/// Default tokenizer: simplified Unicode word segmentation.
///
/// Runs of letters, digits, marks and '_' form one token. Whitespace
/// separates tokens and is never part of one. ASCII and common Unicode
/// punctuation/symbols are single-code-point tokens, as are Han ideographs
/// and Hiragana. Invalid UTF-8 bytes are treated as one-byte letters.
class WordPunctTokenizer final : public Tokenizer {
 public:
  std::string_view id() const noexcept override { return "default"; }
  std::vector<Token> tokenize(std::string_view text) const override;
  std::size_t count(std::string_view text) const override;
};

/// Splits on ASCII whitespace only.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::string_view id() const noexcept override { return "whitespace"; }
  std::vector<Token> tokenize(std::string_view text) const override;
};

/// Returns a shared tokenizer for a registered id ("default", "whitespace").
/// Throws std::invalid_argument for unknown ids.
std::shared_ptr<const Tokenizer> make_tokenizer(std::string_view id);

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer);

/// Longest prefix of `text` holding at most `max_tokens` tokens. The cut is
/// placed at a token end so no token is split.
std::string_view truncate_to_tokens(std::string_view text, std::size_t max_tokens,
                                    const Tokenizer& tokenizer);

namespace utf8 {

/// Decodes one code point at `pos`. Invalid sequences decode to the single
/// byte value with length 1.
struct Decoded {
  char32_t cp;
  std::size_t length;
  bool valid;
};
Decoded decode(std::string_view text, std::size_t pos) noexcept;

}  // namespace utf8

}  // namespace tocrag
