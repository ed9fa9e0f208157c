#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tocrag/tokenizer.hpp"

namespace tocrag {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoHeadingsFound : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

class MalformedOutline : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

class BudgetUnsatisfiable : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

class InvalidToc : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

enum class OutlineStyle { markdown_hashes, numbered_headings, explicit_toc_file };
enum class TocDetail { titles_only, numbered_hierarchical };
enum class BudgetPurpose { toc_rendering, reference, memory, full_prompt };

std::string_view to_string(OutlineStyle style);
OutlineStyle parse_outline_style(std::string_view name);
std::string_view to_string(TocDetail detail);
TocDetail parse_toc_detail(std::string_view name);

class TokenBudget {
 public:
  TokenBudget(std::size_t max_tokens, BudgetPurpose purpose);

  std::size_t max_tokens() const noexcept { return max_tokens_; }
  BudgetPurpose purpose() const noexcept { return purpose_; }

 private:
  std::size_t max_tokens_;
  BudgetPurpose purpose_;
};

struct SourceDocument {
  std::string doc_id;
  std::string title;
  std::string body;
  std::string language_tag = "und";
};

struct Heading {
  std::string heading_id;
  std::string title;
  int depth = 1;
  std::optional<std::string> parent;
  int ordinal = 0;
  std::string doc_id;
  // Verbatim heading line including its line terminator; empty for the
  // synthetic front-matter heading.
  std::string source_line;
};

/// Ordered heading hierarchy. Construction validates the tree invariants.
class TocTree {
 public:
  TocTree() = default;
  explicit TocTree(std::vector<Heading> headings);

  const std::vector<Heading>& headings() const noexcept { return headings_; }
  std::size_t size() const noexcept { return headings_.size(); }
  bool empty() const noexcept { return headings_.empty(); }
  std::size_t root_count() const noexcept;
  int max_depth() const noexcept;

  const Heading* find(std::string_view heading_id) const noexcept;
  const Heading& at(std::string_view heading_id) const;

  /// True when `ancestor_id` lies on the parent chain of `heading_id`.
  bool is_ancestor(std::string_view ancestor_id, std::string_view heading_id) const;

  /// Keeps headings accepted by `keep`; the parent chain of every kept
  /// heading must also be kept, otherwise InvalidToc is thrown.
  TocTree filter(const std::function<bool(const Heading&)>& keep) const;

 private:
  std::vector<Heading> headings_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct Section {
  std::string heading_id;
  std::string text;
  std::size_t token_count = 0;
  // One '\n' was removed from the end of the raw slice.
  bool trailing_newline = false;
};

struct Outline {
  TocTree toc;
  std::vector<Section> sections;  // aligned with toc.headings()
};

inline constexpr std::string_view kFrontMatterTitle = "Front matter";

/// Splits a document into a heading tree plus per-heading sections.
///
/// A section holds only the text up to the next heading of any depth, so a
/// parent's section never repeats its children's text. Text before the
/// first heading becomes a synthetic "Front matter" root. `toc_file` is
/// required for OutlineStyle::explicit_toc_file: one heading per line, two
/// spaces of indentation per level.
Outline parse_outline(const SourceDocument& document, OutlineStyle style,
                      const Tokenizer& tokenizer, std::string_view toc_file = {});

/// Rebuilds the document body from an outline (inverse of parse_outline).
std::string reassemble(const Outline& outline);

std::string render_toc(const TocTree& toc, TocDetail detail);

/// Deepest uniform depth cutoff whose rendering fits the budget; falls back
/// to a prefix of the depth-1 headings.
TocTree fit_toc_to_budget(const TocTree& toc, const TokenBudget& budget,
                          const Tokenizer& tokenizer,
                          TocDetail detail = TocDetail::numbered_hierarchical);

/// Collapses runs of whitespace and trims.
std::string normalize_title(std::string_view title);
/// normalize_title plus ASCII case folding.
std::string fold_title(std::string_view title);

/// Immutable collection of ingested documents with one merged ToC.
class Corpus {
 public:
  struct DocumentInfo {
    std::string doc_id;
    std::string title;
    std::string language_tag;
  };

  struct Input {
    SourceDocument document;
    std::string toc_file;  // explicit_toc_file only
  };

  static Corpus build(const std::vector<Input>& inputs, OutlineStyle style,
                      std::shared_ptr<const Tokenizer> tokenizer);

  Corpus(std::vector<DocumentInfo> documents, TocTree toc,
         std::vector<Section> sections, OutlineStyle style,
         std::shared_ptr<const Tokenizer> tokenizer);

  const std::vector<DocumentInfo>& documents() const noexcept { return documents_; }
  const TocTree& toc() const noexcept { return toc_; }
  const std::vector<Section>& sections() const noexcept { return sections_; }
  const Section& section(std::string_view heading_id) const;
  OutlineStyle style() const noexcept { return style_; }
  const Tokenizer& tokenizer() const noexcept { return *tokenizer_; }
  std::shared_ptr<const Tokenizer> tokenizer_ptr() const noexcept { return tokenizer_; }

  /// Reassembled body of one document.
  std::string document_text(std::string_view doc_id) const;
  /// All document bodies joined by a blank line, in ingest order.
  std::string full_text() const;

 private:
  std::vector<DocumentInfo> documents_;
  TocTree toc_;
  std::vector<Section> sections_;
  std::map<std::string, std::size_t, std::less<>> section_index_;
  OutlineStyle style_;
  std::shared_ptr<const Tokenizer> tokenizer_;
};

/// Writes manifest.json plus sections/<heading_id>.txt. Output bytes depend
/// only on the corpus contents.
void save_corpus(const Corpus& corpus, const std::string& directory);
Corpus load_corpus(const std::string& directory);

}  // namespace tocrag
