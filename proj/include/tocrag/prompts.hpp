#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace tocrag {

inline constexpr std::string_view kCasualSentinel = "Disregard the reference.";
inline constexpr std::string_view kDefaultBookTitle =
    "\xed\x98\x84\xeb\x8c\x80 \xed\x95\x9c\xec\x9d\x98\xed\x95\x99\xea\xb0\x9c\xeb\xa1\xa0";

/// The three prompt templates. Placeholders: {history}, {question},
/// {index}, {context}, {book_title}, {n_headings_word}, {format}.
struct PromptTemplates {
  std::string heading_selection;
  std::string answer_with_reference;
  std::string answer_casual;
  std::string book_title = std::string(kDefaultBookTitle);

  static PromptTemplates builtin();
  /// Reads heading_selection.txt, answer_with_reference.txt and
  /// answer_casual.txt from `directory`.
  static PromptTemplates load(const std::string& directory);
};

/// Single-pass substitution of `{name}` placeholders. Substituted values are
/// never rescanned; unknown placeholders are left untouched.
std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// Inverse of substitute(): recovers placeholder values by matching the
/// literal segments of `tmpl` against `rendered` left to right. Returns
/// nullopt when the text does not fit the template.
std::optional<std::map<std::string, std::string>> extract_placeholders(std::string_view tmpl,
                                                                       std::string_view rendered);

/// "one" .. "ten", digits beyond.
std::string number_word(int n);

/// The numbered answer skeleton, "1. ---" through "n. ---".
std::string format_skeleton(int n);

std::string build_heading_prompt(const PromptTemplates& templates, std::string_view history,
                                 std::string_view question, std::string_view index,
                                 int n_headings);

/// With a reference: the reference-grounded template including the fallback
/// instruction. Without: the casual template, which has no Reference block.
std::string build_answer_prompt(const PromptTemplates& templates, std::string_view history,
                                std::optional<std::string_view> reference,
                                std::string_view question);

}  // namespace tocrag
