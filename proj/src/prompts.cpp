#include "tocrag/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace tocrag {

namespace builtin {
extern const std::string_view kHeadingSelectionTemplate;
extern const std::string_view kAnswerWithReferenceTemplate;
extern const std::string_view kAnswerCasualTemplate;
}  // namespace builtin

PromptTemplates PromptTemplates::builtin() {
  PromptTemplates t;
  t.heading_selection = std::string(builtin::kHeadingSelectionTemplate);
  t.answer_with_reference = std::string(builtin::kAnswerWithReferenceTemplate);
  t.answer_casual = std::string(builtin::kAnswerCasualTemplate);
  return t;
}

PromptTemplates PromptTemplates::load(const std::string& directory) {
  const auto read = [&](const char* name) {
    const auto path = std::filesystem::path(directory) / name;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read prompt template " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  PromptTemplates t;
  t.heading_selection = read("heading_selection.txt");
  t.answer_with_reference = read("answer_with_reference.txt");
  t.answer_casual = read("answer_casual.txt");
  return t;
}

namespace {

struct Piece {
  bool placeholder;
  std::string_view text;  // literal text, or the placeholder name
};

bool valid_name(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!((c >= 'a' && c <= 'z') || c == '_' || (c >= '0' && c <= '9'))) return false;
  }
  return true;
}

std::vector<Piece> split_template(std::string_view tmpl) {
  std::vector<Piece> pieces;
  std::size_t literal_start = 0;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) break;
    const std::string_view name = tmpl.substr(open + 1, close - open - 1);
    if (!valid_name(name)) {
      pos = open + 1;
      continue;
    }
    if (open > literal_start) {
      pieces.push_back({false, tmpl.substr(literal_start, open - literal_start)});
    }
    pieces.push_back({true, name});
    literal_start = pos = close + 1;
  }
  if (literal_start < tmpl.size()) pieces.push_back({false, tmpl.substr(literal_start)});
  return pieces;
}

}  // namespace

std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  for (const auto& piece : split_template(tmpl)) {
    if (!piece.placeholder) {
      out += piece.text;
      continue;
    }
    auto it = values.find(std::string(piece.text));
    if (it == values.end()) {
      out += '{';
      out += piece.text;
      out += '}';
    } else {
      out += it->second;
    }
  }
  return out;
}

std::optional<std::map<std::string, std::string>> extract_placeholders(std::string_view tmpl,
                                                                       std::string_view rendered) {
  const auto pieces = split_template(tmpl);
  std::map<std::string, std::string> values;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const Piece& piece = pieces[i];
    if (!piece.placeholder) {
      if (rendered.substr(pos, piece.text.size()) != piece.text) return std::nullopt;
      pos += piece.text.size();
      continue;
    }
    std::size_t end = rendered.size();
    if (i + 1 < pieces.size()) {
      // Adjacent placeholders are ambiguous; templates never have them.
      if (pieces[i + 1].placeholder) return std::nullopt;
      const std::string_view next = pieces[i + 1].text;
      // The last literal anchors at the end; others at their next occurrence.
      end = i + 2 == pieces.size() ? rendered.rfind(next) : rendered.find(next, pos);
      if (end == std::string_view::npos || end < pos) return std::nullopt;
    }
    std::string value(rendered.substr(pos, end - pos));
    auto [it, inserted] = values.emplace(std::string(piece.text), value);
    if (!inserted && it->second != value) return std::nullopt;
    pos = end;
  }
  if (pos != rendered.size()) return std::nullopt;
  return values;
}

std::string number_word(int n) {
  static constexpr const char* words[] = {"zero", "one", "two", "three", "four", "five",
                                          "six",  "seven", "eight", "nine", "ten"};
  if (n >= 0 && n <= 10) return words[n];
  return std::to_string(n);
}

std::string format_skeleton(int n) {
  std::string out;
  for (int k = 1; k <= n; ++k) {
    if (k > 1) out += "\n\n";
    out += std::to_string(k) + ". ---";
  }
  return out;
}

std::string build_heading_prompt(const PromptTemplates& templates, std::string_view history,
                                 std::string_view question, std::string_view index,
                                 int n_headings) {
  if (n_headings <= 0) throw std::invalid_argument("n_headings must be positive");
  return substitute(templates.heading_selection,
                    {{"history", std::string(history)},
                     {"question", std::string(question)},
                     {"index", std::string(index)},
                     {"n_headings_word", number_word(n_headings)},
                     {"format", format_skeleton(n_headings)},
                     {"book_title", templates.book_title}});
}

std::string build_answer_prompt(const PromptTemplates& templates, std::string_view history,
                                std::optional<std::string_view> reference,
                                std::string_view question) {
  std::map<std::string, std::string> values{{"history", std::string(history)},
                                            {"question", std::string(question)},
                                            {"book_title", templates.book_title}};
  if (reference) {
    values["context"] = std::string(*reference);
    return substitute(templates.answer_with_reference, values);
  }
  return substitute(templates.answer_casual, values);
}

}  // namespace tocrag
