#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tocrag/corpus.hpp"

namespace tocrag {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kManifestFormat = 1;

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CorpusError("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& directory) {
  const fs::path root(directory);
  const fs::path section_dir = root / "sections";
  fs::create_directories(section_dir);
  // Stale section files from an earlier ingest would survive otherwise.
  for (const auto& entry : fs::directory_iterator(section_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") fs::remove(entry.path());
  }

  ordered_json manifest;
  manifest["format"] = kManifestFormat;
  manifest["tokenizer"] = std::string(corpus.tokenizer().id());
  manifest["outline_style"] = std::string(to_string(corpus.style()));
  manifest["documents"] = ordered_json::array();
  for (const auto& doc : corpus.documents()) {
    manifest["documents"].push_back(
        {{"doc_id", doc.doc_id}, {"title", doc.title}, {"language_tag", doc.language_tag}});
  }
  manifest["headings"] = ordered_json::array();
  for (std::size_t i = 0; i < corpus.toc().size(); ++i) {
    const Heading& h = corpus.toc().headings()[i];
    const Section& s = corpus.sections()[i];
    ordered_json entry = {{"heading_id", h.heading_id},
                          {"title", h.title},
                          {"depth", h.depth},
                          {"parent", h.parent ? ordered_json(*h.parent) : ordered_json(nullptr)},
                          {"ordinal", h.ordinal},
                          {"doc_id", h.doc_id},
                          {"source_line", h.source_line},
                          {"section_file", "sections/" + h.heading_id + ".txt"},
                          {"token_count", s.token_count},
                          {"trailing_newline", s.trailing_newline}};
    manifest["headings"].push_back(std::move(entry));
    write_file(section_dir / (h.heading_id + ".txt"), s.text);
  }
  write_file(root / "manifest.json", manifest.dump(2) + "\n");
}

Corpus load_corpus(const std::string& directory) {
  const fs::path root(directory);
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(read_file(root / "manifest.json"));
  } catch (const ordered_json::exception& e) {
    throw CorpusError("invalid corpus manifest in " + directory + ": " + e.what());
  }
  if (manifest.value("format", 0) != kManifestFormat) {
    throw CorpusError("unsupported corpus manifest format in " + directory);
  }
  auto tokenizer = make_tokenizer(manifest.at("tokenizer").get<std::string>());
  const auto style = parse_outline_style(manifest.at("outline_style").get<std::string>());

  std::vector<Corpus::DocumentInfo> documents;
  for (const auto& d : manifest.at("documents")) {
    documents.push_back({d.at("doc_id").get<std::string>(), d.at("title").get<std::string>(),
                         d.at("language_tag").get<std::string>()});
  }
  std::vector<Heading> headings;
  std::vector<Section> sections;
  for (const auto& e : manifest.at("headings")) {
    Heading h;
    h.heading_id = e.at("heading_id").get<std::string>();
    h.title = e.at("title").get<std::string>();
    h.depth = e.at("depth").get<int>();
    if (!e.at("parent").is_null()) h.parent = e.at("parent").get<std::string>();
    h.ordinal = e.at("ordinal").get<int>();
    h.doc_id = e.at("doc_id").get<std::string>();
    h.source_line = e.at("source_line").get<std::string>();

    Section s;
    s.heading_id = h.heading_id;
    s.text = read_file(root / e.at("section_file").get<std::string>());
    s.trailing_newline = e.at("trailing_newline").get<bool>();
    s.token_count = tokenizer->count(s.text);
    if (s.token_count != e.at("token_count").get<std::size_t>()) {
      throw CorpusError("token count mismatch for section " + h.heading_id +
                        " (file edited or tokenizer changed)");
    }
    headings.push_back(std::move(h));
    sections.push_back(std::move(s));
  }
  return Corpus(std::move(documents), TocTree(std::move(headings)), std::move(sections), style,
                std::move(tokenizer));
}

}  // namespace tocrag
