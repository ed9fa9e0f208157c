#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tocrag/audit.hpp"

namespace tocrag {

/// Everything run_audit needs, gathered from an audit manifest (TOML):
///
///   family_size = 0            # optional; 0 = |sets| x |sources|
///   linkage = "average"        # optional
///
///   [[set]]
///   label = "KM"
///   documents = "docs/km"      # *.txt / *.md files, id = file stem
///   raters = ["km_r1.csv", "km_r2.csv"]
///
///   [[source]]
///   name = "ada"
///   tokenizer = "default"
///   vectors = "ada.csv"        # embedding CSV covering every document
///
///   [[source]]
///   name = "hashed"
///   tokenizer = "default"
///   stub_dimension = 1024      # vectors computed with the stub embedder
///
/// Relative paths resolve against `base_dir`.
struct AuditInputs {
  std::vector<DocumentSet> docsets;
  std::vector<EmbeddingSource> sources;
  std::map<std::string, RelatednessMatrix> relatedness;
  AuditOptions options;
};

AuditInputs parse_audit_manifest(std::string_view toml_text, const std::string& base_dir);
AuditInputs load_audit_manifest(const std::string& path);

/// Documents of a directory sorted by id.
DocumentSet load_document_set(const std::string& label, const std::string& directory);

}  // namespace tocrag
