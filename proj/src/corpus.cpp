#include "tocrag/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

namespace tocrag {

std::string_view to_string(OutlineStyle style) {
  switch (style) {
    case OutlineStyle::markdown_hashes: return "markdown_hashes";
    case OutlineStyle::numbered_headings: return "numbered_headings";
    case OutlineStyle::explicit_toc_file: return "explicit_toc_file";
  }
  return "markdown_hashes";
}

OutlineStyle parse_outline_style(std::string_view name) {
  if (name == "markdown_hashes" || name == "markdown") return OutlineStyle::markdown_hashes;
  if (name == "numbered_headings" || name == "numbered") return OutlineStyle::numbered_headings;
  if (name == "explicit_toc_file" || name == "toc_file") return OutlineStyle::explicit_toc_file;
  throw std::invalid_argument("unknown outline style: " + std::string(name));
}

std::string_view to_string(TocDetail detail) {
  return detail == TocDetail::titles_only ? "titles_only" : "numbered_hierarchical";
}

TocDetail parse_toc_detail(std::string_view name) {
  if (name == "titles_only") return TocDetail::titles_only;
  if (name == "numbered_hierarchical") return TocDetail::numbered_hierarchical;
  throw std::invalid_argument("unknown ToC detail: " + std::string(name));
}

TokenBudget::TokenBudget(std::size_t max_tokens, BudgetPurpose purpose)
    : max_tokens_(max_tokens), purpose_(purpose) {
  if (max_tokens == 0) throw std::invalid_argument("token budget must be positive");
}

// ---------------------------------------------------------------------------
// TocTree

TocTree::TocTree(std::vector<Heading> headings) : headings_(std::move(headings)) {
  std::set<std::pair<std::string, std::string>> titles_by_parent;
  for (std::size_t i = 0; i < headings_.size(); ++i) {
    const Heading& h = headings_[i];
    if (h.heading_id.empty()) throw InvalidToc("heading without id");
    if (!index_.emplace(h.heading_id, i).second) {
      throw InvalidToc("duplicate heading id: " + h.heading_id);
    }
    if (h.depth < 1) throw InvalidToc("heading depth must be >= 1: " + h.heading_id);
    if (normalize_title(h.title).empty()) throw InvalidToc("empty heading title: " + h.heading_id);
    if (i > 0 && h.ordinal <= headings_[i - 1].ordinal) {
      throw InvalidToc("ordinals must increase in document order: " + h.heading_id);
    }
    if (h.parent) {
      // Parents precede children, which also rules out cycles.
      auto it = index_.find(*h.parent);
      if (it == index_.end() || it->second >= i) {
        throw InvalidToc("parent of " + h.heading_id + " missing or out of order");
      }
      if (headings_[it->second].depth != h.depth - 1) {
        throw InvalidToc("depth of " + h.heading_id + " must be parent depth + 1");
      }
    } else if (h.depth != 1) {
      throw InvalidToc("root heading must have depth 1: " + h.heading_id);
    }
    if (!titles_by_parent.emplace(fold_title(h.title), h.parent.value_or("")).second) {
      throw InvalidToc("duplicate title under one parent: " + h.title);
    }
  }
}

std::size_t TocTree::root_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(
      headings_.begin(), headings_.end(), [](const Heading& h) { return !h.parent; }));
}

int TocTree::max_depth() const noexcept {
  int depth = 0;
  for (const auto& h : headings_) depth = std::max(depth, h.depth);
  return depth;
}

const Heading* TocTree::find(std::string_view heading_id) const noexcept {
  auto it = index_.find(heading_id);
  return it == index_.end() ? nullptr : &headings_[it->second];
}

const Heading& TocTree::at(std::string_view heading_id) const {
  if (const Heading* h = find(heading_id)) return *h;
  throw std::out_of_range("unknown heading id: " + std::string(heading_id));
}

bool TocTree::is_ancestor(std::string_view ancestor_id, std::string_view heading_id) const {
  const Heading* h = find(heading_id);
  while (h && h->parent) {
    if (*h->parent == ancestor_id) return true;
    h = find(*h->parent);
  }
  return false;
}

TocTree TocTree::filter(const std::function<bool(const Heading&)>& keep) const {
  std::vector<Heading> kept;
  for (const auto& h : headings_) {
    if (keep(h)) kept.push_back(h);
  }
  return TocTree(std::move(kept));
}

// ---------------------------------------------------------------------------
// Titles

std::string normalize_title(std::string_view title) {
  std::string out;
  bool pending_space = false;
  for (char c : title) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string fold_title(std::string_view title) {
  std::string out = normalize_title(title);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// ---------------------------------------------------------------------------
// Outline parsing

namespace {

struct Line {
  std::size_t begin;    // first byte of the line
  std::size_t end;      // one past the last content byte (excludes '\n')
  std::size_t next;     // start of the following line
  std::string_view content;
};

std::vector<Line> split_lines(std::string_view body) {
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos < body.size()) {
    const std::size_t nl = body.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? body.size() : nl;
    const std::size_t next = nl == std::string_view::npos ? body.size() : nl + 1;
    lines.push_back({pos, end, next, body.substr(pos, end - pos)});
    pos = next;
  }
  return lines;
}

struct RawHeading {
  std::size_t line;
  int level;
  std::string title;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<RawHeading> match_atx(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && i < 3 && line[i] == ' ') ++i;
  std::size_t hashes = 0;
  while (i + hashes < line.size() && line[i + hashes] == '#') ++hashes;
  if (hashes == 0 || hashes > 6) return std::nullopt;
  i += hashes;
  if (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') return std::nullopt;
  std::string_view rest = trim(line.substr(i));
  // Optional closing sequence: trailing '#'s preceded by whitespace.
  std::size_t j = rest.size();
  while (j > 0 && rest[j - 1] == '#') --j;
  if (j < rest.size() && (j == 0 || rest[j - 1] == ' ' || rest[j - 1] == '\t')) {
    rest = trim(rest.substr(0, j));
  }
  std::string title = normalize_title(rest);
  if (title.empty()) return std::nullopt;
  return RawHeading{0, static_cast<int>(hashes), std::move(title)};
}

bool is_fence(std::string_view line, char& fence_char) {
  std::size_t i = 0;
  while (i < line.size() && i < 3 && line[i] == ' ') ++i;
  if (i + 3 > line.size()) return false;
  const char c = line[i];
  if ((c != '`' && c != '~') || line[i + 1] != c || line[i + 2] != c) return false;
  fence_char = c;
  return true;
}

std::vector<RawHeading> detect_markdown(const std::vector<Line>& lines) {
  std::vector<RawHeading> out;
  char open_fence = 0;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    char fence = 0;
    if (is_fence(lines[n].content, fence)) {
      if (open_fence == 0) {
        open_fence = fence;
      } else if (open_fence == fence) {
        open_fence = 0;
      }
      continue;
    }
    if (open_fence != 0) continue;
    if (auto h = match_atx(lines[n].content)) {
      h->line = n;
      out.push_back(std::move(*h));
    }
  }
  return out;
}

std::vector<RawHeading> detect_numbered(const std::vector<Line>& lines) {
  // "1. Title", "1.2 Title", "1.2.3. Title". A bare "2024 text" is not a
  // heading: a single component needs a trailing dot.
  static const std::regex pattern(
      R"(^ {0,3}(\d{1,3}(?:\.\d{1,3})*)(\.?)[ \t]+(\S.*)$)");
  std::vector<RawHeading> out;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string content(lines[n].content);
    std::smatch m;
    if (!std::regex_match(content, m, pattern)) continue;
    const std::string number = m[1].str();
    const int components = 1 + static_cast<int>(std::count(number.begin(), number.end(), '.'));
    if (components == 1 && m[2].length() == 0) continue;
    std::string title = normalize_title(m[3].str());
    if (title.empty()) continue;
    out.push_back({n, components, std::move(title)});
  }
  return out;
}

std::vector<RawHeading> detect_from_toc_file(const std::vector<Line>& lines,
                                             std::string_view toc_file) {
  std::vector<RawHeading> out;
  std::size_t search_from = 0;
  std::size_t pos = 0;
  while (pos < toc_file.size()) {
    std::size_t nl = toc_file.find('\n', pos);
    if (nl == std::string_view::npos) nl = toc_file.size();
    std::string_view entry = toc_file.substr(pos, nl - pos);
    pos = nl + 1;
    if (!entry.empty() && entry.back() == '\r') entry.remove_suffix(1);
    if (trim(entry).empty()) continue;
    std::size_t indent = 0;
    while (indent < entry.size() && entry[indent] == ' ') ++indent;
    const std::string title = normalize_title(entry);
    const std::string wanted = fold_title(title);

    bool found = false;
    for (std::size_t n = search_from; n < lines.size(); ++n) {
      std::string_view content = trim(lines[n].content);
      std::string candidate = fold_title(content);
      if (candidate != wanted) {
        if (auto atx = match_atx(content)) {
          candidate = fold_title(atx->title);
        }
      }
      if (candidate == wanted) {
        out.push_back({n, static_cast<int>(indent / 2) + 1, title});
        search_from = n + 1;
        found = true;
        break;
      }
    }
    if (!found) {
      throw MalformedOutline("ToC entry not found in document body: \"" + title + "\"");
    }
  }
  return out;
}

}  // namespace

Outline parse_outline(const SourceDocument& document, OutlineStyle style,
                      const Tokenizer& tokenizer, std::string_view toc_file) {
  const std::string_view body = document.body;
  if (body.empty()) {
    throw NoHeadingsFound("document '" + document.doc_id + "' is empty");
  }
  const auto lines = split_lines(body);

  std::vector<RawHeading> raw;
  switch (style) {
    case OutlineStyle::markdown_hashes: raw = detect_markdown(lines); break;
    case OutlineStyle::numbered_headings: raw = detect_numbered(lines); break;
    case OutlineStyle::explicit_toc_file:
      if (trim(toc_file).empty()) throw MalformedOutline("explicit ToC file is empty");
      raw = detect_from_toc_file(lines, toc_file);
      break;
  }
  if (raw.empty()) {
    throw NoHeadingsFound("no headings found in document '" + document.doc_id + "'");
  }

  const auto make_id = [&](int ordinal) {
    std::ostringstream os;
    os << document.doc_id << '-';
    os.width(4);
    os.fill('0');
    os << ordinal;
    return os.str();
  };
  const auto make_section = [&](std::string id, std::size_t from, std::size_t to) {
    std::string_view slice = body.substr(from, to - from);
    Section s;
    s.heading_id = std::move(id);
    if (!slice.empty() && slice.back() == '\n') {
      slice.remove_suffix(1);
      s.trailing_newline = true;
    }
    s.text = std::string(slice);
    s.token_count = tokenizer.count(s.text);
    return s;
  };

  std::vector<Heading> headings;
  std::vector<Section> sections;

  const std::size_t first_start = lines[raw.front().line].begin;
  if (first_start > 0) {
    Heading front;
    front.heading_id = make_id(0);
    front.title = std::string(kFrontMatterTitle);
    front.depth = 1;
    front.ordinal = 0;
    front.doc_id = document.doc_id;
    headings.push_back(front);
    sections.push_back(make_section(front.heading_id, 0, first_start));
  }

  // Parent = nearest preceding heading with a smaller marker level.
  struct Open {
    int level;
    std::size_t index;
  };
  std::vector<Open> stack;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const Line& line = lines[raw[k].line];
    while (!stack.empty() && stack.back().level >= raw[k].level) stack.pop_back();

    Heading h;
    h.ordinal = static_cast<int>(k) + 1;
    h.heading_id = make_id(h.ordinal);
    h.title = raw[k].title;
    h.doc_id = document.doc_id;
    h.source_line = std::string(body.substr(line.begin, line.next - line.begin));
    if (stack.empty()) {
      h.depth = 1;
    } else {
      const Heading& parent = headings[stack.back().index];
      h.parent = parent.heading_id;
      h.depth = parent.depth + 1;
    }
    stack.push_back({raw[k].level, headings.size()});
    headings.push_back(h);

    const std::size_t to = k + 1 < raw.size() ? lines[raw[k + 1].line].begin : body.size();
    sections.push_back(make_section(h.heading_id, line.next, to));
  }

  // Disambiguate duplicate titles with a positional suffix. Uniqueness is
  // enforced across the whole document so a title resolves to one heading.
  std::set<std::string> seen;
  for (auto& h : headings) {
    std::string candidate = h.title;
    for (int n = 2; !seen.insert(fold_title(candidate)).second; ++n) {
      candidate = h.title + " (" + std::to_string(n) + ")";
    }
    h.title = std::move(candidate);
  }

  return Outline{TocTree(std::move(headings)), std::move(sections)};
}

std::string reassemble(const Outline& outline) {
  std::string out;
  const auto& headings = outline.toc.headings();
  for (std::size_t i = 0; i < headings.size(); ++i) {
    out += headings[i].source_line;
    out += outline.sections[i].text;
    if (outline.sections[i].trailing_newline) out += '\n';
  }
  return out;
}

std::string render_toc(const TocTree& toc, TocDetail detail) {
  std::string out;
  bool first = true;
  for (const auto& h : toc.headings()) {
    if (!first) out += '\n';
    first = false;
    if (detail == TocDetail::numbered_hierarchical) {
      out.append(2 * static_cast<std::size_t>(h.depth - 1), ' ');
    }
    out += h.title;
  }
  return out;
}

TocTree fit_toc_to_budget(const TocTree& toc, const TokenBudget& budget,
                          const Tokenizer& tokenizer, TocDetail detail) {
  const auto fits = [&](const TocTree& t) {
    return tokenizer.count(render_toc(t, detail)) <= budget.max_tokens();
  };
  if (toc.empty() || fits(toc)) return toc;

  for (int depth = toc.max_depth() - 1; depth >= 1; --depth) {
    TocTree cut = toc.filter([depth](const Heading& h) { return h.depth <= depth; });
    if (fits(cut)) return cut;
  }

  // Even the depth-1 outline overflows: keep the longest fitting prefix of
  // the roots. Rendered size grows with the prefix, so binary search.
  std::vector<Heading> roots;
  for (const auto& h : toc.headings()) {
    if (h.depth == 1) roots.push_back(h);
  }
  std::size_t lo = 0;
  std::size_t hi = roots.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    TocTree prefix(std::vector<Heading>(roots.begin(), roots.begin() + static_cast<long>(mid)));
    if (fits(prefix)) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  if (lo == 0) {
    throw BudgetUnsatisfiable("not even one heading fits a ToC budget of " +
                              std::to_string(budget.max_tokens()) + " tokens");
  }
  return TocTree(std::vector<Heading>(roots.begin(), roots.begin() + static_cast<long>(lo)));
}

// ---------------------------------------------------------------------------
// Corpus

Corpus Corpus::build(const std::vector<Input>& inputs, OutlineStyle style,
                     std::shared_ptr<const Tokenizer> tokenizer) {
  static const std::regex valid_id(R"([A-Za-z0-9_.-]+)");
  std::vector<DocumentInfo> documents;
  std::vector<Heading> headings;
  std::vector<Section> sections;
  std::set<std::string> doc_ids;
  std::set<std::string> titles;

  for (const auto& input : inputs) {
    const auto& doc = input.document;
    if (!std::regex_match(doc.doc_id, valid_id)) {
      throw CorpusError("document id must match [A-Za-z0-9_.-]+: '" + doc.doc_id + "'");
    }
    if (!doc_ids.insert(doc.doc_id).second) {
      throw CorpusError("duplicate document id: " + doc.doc_id);
    }
    Outline outline = parse_outline(doc, style, *tokenizer, input.toc_file);
    documents.push_back({doc.doc_id, doc.title, doc.language_tag});
    for (std::size_t i = 0; i < outline.toc.size(); ++i) {
      Heading h = outline.toc.headings()[i];
      h.ordinal = static_cast<int>(headings.size());
      std::string candidate = h.title;
      for (int n = 2; !titles.insert(fold_title(candidate)).second; ++n) {
        candidate = h.title + " (" + std::to_string(n) + ")";
      }
      h.title = std::move(candidate);
      headings.push_back(std::move(h));
      sections.push_back(outline.sections[i]);
    }
  }
  return Corpus(std::move(documents), TocTree(std::move(headings)), std::move(sections),
                style, std::move(tokenizer));
}

Corpus::Corpus(std::vector<DocumentInfo> documents, TocTree toc,
               std::vector<Section> sections, OutlineStyle style,
               std::shared_ptr<const Tokenizer> tokenizer)
    : documents_(std::move(documents)),
      toc_(std::move(toc)),
      sections_(std::move(sections)),
      style_(style),
      tokenizer_(std::move(tokenizer)) {
  if (!tokenizer_) throw std::invalid_argument("corpus requires a tokenizer");
  if (sections_.size() != toc_.size()) {
    throw CorpusError("every heading needs exactly one section");
  }
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    if (sections_[i].heading_id != toc_.headings()[i].heading_id) {
      throw CorpusError("section order does not match heading order");
    }
    section_index_.emplace(sections_[i].heading_id, i);
  }
}

const Section& Corpus::section(std::string_view heading_id) const {
  auto it = section_index_.find(heading_id);
  if (it == section_index_.end()) {
    throw std::out_of_range("no section for heading " + std::string(heading_id));
  }
  return sections_[it->second];
}

std::string Corpus::document_text(std::string_view doc_id) const {
  std::string out;
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const Heading& h = toc_.headings()[i];
    if (h.doc_id != doc_id) continue;
    out += h.source_line;
    out += sections_[i].text;
    if (sections_[i].trailing_newline) out += '\n';
  }
  return out;
}

std::string Corpus::full_text() const {
  std::string out;
  for (const auto& doc : documents_) {
    if (!out.empty()) out += "\n\n";
    out += document_text(doc.doc_id);
  }
  return out;
}

}  // namespace tocrag
