#include "tocrag/audit_manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <toml.hpp>

#include "tocrag/embedding_io.hpp"

namespace tocrag {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() || base_dir.empty() ? path : (fs::path(base_dir) / p).string();
}

std::string required_string(const toml::table& t, std::string_view key, std::string_view where) {
  auto v = t[key].value<std::string>();
  if (!v) throw AuditError(std::string(where) + ": missing string '" + std::string(key) + "'");
  return *v;
}

}  // namespace

DocumentSet load_document_set(const std::string& label, const std::string& directory) {
  if (!fs::is_directory(directory)) {
    throw AuditError("missing document directory for set '" + label + "': " + directory);
  }
  DocumentSet set{label, {}};
  for (const auto& entry : fs::directory_iterator(directory)) {
    const auto ext = entry.path().extension().string();
    if (!entry.is_regular_file() || (ext != ".txt" && ext != ".md")) continue;
    set.documents.emplace_back(entry.path().stem().string(), read_text_file(entry.path().string()));
  }
  std::sort(set.documents.begin(), set.documents.end());
  if (set.documents.empty()) throw AuditError("no .txt/.md documents in " + directory);
  return set;
}

AuditInputs parse_audit_manifest(std::string_view toml_text, const std::string& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw AuditError(std::string("audit manifest: ") + std::string(e.description()));
  }
  AuditInputs in;
  if (auto v = root["family_size"].value<int64_t>()) {
    if (*v < 0) throw AuditError("family_size must be non-negative");
    in.options.family_size = static_cast<std::size_t>(*v);
  }
  if (auto v = root["linkage"].value<std::string>()) in.options.linkage = parse_linkage(*v);

  const toml::array* sets = root["set"].as_array();
  if (!sets || sets->empty()) throw AuditError("audit manifest declares no [[set]]");
  for (const auto& node : *sets) {
    const auto* t = node.as_table();
    if (!t) throw AuditError("[[set]] entries must be tables");
    const std::string label = required_string(*t, "label", "[[set]]");
    in.docsets.push_back(
        load_document_set(label, resolve(base_dir, required_string(*t, "documents", label))));
    const toml::array* raters = (*t)["raters"].as_array();
    if (!raters || raters->empty()) throw AuditError("set '" + label + "' lists no raters");
    std::vector<RelatednessSheet> sheets;
    for (const auto& r : *raters) {
      auto path = r.value<std::string>();
      if (!path) throw AuditError("set '" + label + "': raters must be paths");
      const std::string full = resolve(base_dir, *path);
      if (!fs::exists(full)) throw AuditError("missing relatedness sheet for set '" + label + "': " + full);
      sheets.push_back(parse_relatedness_csv(read_text_file(full)));
    }
    in.relatedness[label] = ingest_relatedness(sheets);
  }

  const toml::array* sources = root["source"].as_array();
  if (!sources || sources->empty()) throw AuditError("audit manifest declares no [[source]]");
  for (const auto& node : *sources) {
    const auto* t = node.as_table();
    if (!t) throw AuditError("[[source]] entries must be tables");
    EmbeddingSource src;
    src.name = required_string(*t, "name", "[[source]]");
    src.tokenizer = make_tokenizer((*t)["tokenizer"].value_or(std::string("default")));
    if (auto path = (*t)["vectors"].value<std::string>()) {
      const std::string full = resolve(base_dir, *path);
      if (!fs::exists(full)) throw AuditError("missing vectors for source '" + src.name + "': " + full);
      src.vectors = load_embedding_csv(full);
    } else if (auto dim = (*t)["stub_dimension"].value<int64_t>()) {
      if (*dim <= 0) throw AuditError("stub_dimension must be positive");
      src.vectors.model_id = "stub";
      src.vectors.dimension = static_cast<std::size_t>(*dim);
      for (const auto& set : in.docsets) {
        for (const auto& [id, text] : set.documents) {
          src.vectors.ids.push_back(id);
          src.vectors.vectors.push_back(
              stub_embedding(text, src.vectors.dimension, *src.tokenizer, "stub"));
        }
      }
    } else {
      throw AuditError("source '" + src.name + "' needs 'vectors' or 'stub_dimension'");
    }
    in.sources.push_back(std::move(src));
  }
  return in;
}

AuditInputs load_audit_manifest(const std::string& path) {
  if (!fs::exists(path)) throw AuditError("missing audit manifest: " + path);
  return parse_audit_manifest(read_text_file(path), fs::absolute(path).parent_path().string());
}

}  // namespace tocrag
