#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tocrag/embedding_io.hpp"
#include "tocrag/stats.hpp"
#include "tocrag/tokenizer.hpp"

namespace tocrag {

class AuditError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class EmptyDocument : public AuditError {
 public:
  using AuditError::AuditError;
};
class ShapeMismatch : public AuditError {
 public:
  using AuditError::AuditError;
};
class NonBinaryEntry : public AuditError {
 public:
  using AuditError::AuditError;
};
class MissingVector : public AuditError {
 public:
  using AuditError::AuditError;
};
class MissingRelatedness : public AuditError {
 public:
  using AuditError::AuditError;
};

struct TokenMultiset {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
};

TokenMultiset token_multiset(std::string_view text, const Tokenizer& tokenizer);

/// sum_t min(A[t], B[t]) / min(|A|, |B|), repeated tokens counted separately.
double overlap_coefficient(const TokenMultiset& a, const TokenMultiset& b);

struct PairValue {
  std::size_t i = 0;
  std::size_t j = 0;
  double value = 0.0;
};

/// Symmetric document-by-document metric.
struct PairMetricTable {
  std::string metric_name;
  std::vector<std::string> doc_ids;
  std::vector<std::vector<double>> values;

  std::size_t n_docs() const noexcept { return doc_ids.size(); }
  /// Upper triangle (i < j), row-major.
  std::vector<PairValue> pairs() const;
  std::vector<double> pair_values() const;
};

/// Pearson r between component series of every vector pair (diagonal 1).
PairMetricTable embedding_correlation_table(const std::vector<std::string>& doc_ids,
                                            const std::vector<EmbeddingVector>& vectors);

PairMetricTable overlap_table(const std::vector<std::string>& doc_ids,
                              const std::vector<TokenMultiset>& multisets);

/// One rater's 0/1 judgments over a document set.
struct RelatednessSheet {
  std::vector<std::string> doc_ids;
  std::vector<std::vector<double>> values;
};

struct RelatednessMatrix {
  std::vector<std::string> doc_ids;
  std::vector<std::vector<double>> values;  // mean over raters
  std::size_t rater_count = 0;

  PairMetricTable as_table() const;
};

RelatednessMatrix ingest_relatedness(const std::vector<RelatednessSheet>& sheets);

/// Square CSV: header row "doc_id,<id1>,...", then "<id>,<0|1>,...".
RelatednessSheet parse_relatedness_csv(std::string_view text);
std::string format_relatedness_csv(const RelatednessSheet& sheet);

enum class Linkage { average, single, complete };
std::string_view to_string(Linkage linkage);
Linkage parse_linkage(std::string_view name);

/// Agglomerative clustering of matrix rows under squared Euclidean distance.
/// The closest pair merges first (ties: lowest indices); the merged cluster
/// with the lowest original index becomes the left child. Returns leaf order.
std::vector<std::size_t> cluster_order(const std::vector<std::vector<double>>& rows,
                                       Linkage linkage = Linkage::average);
std::vector<std::string> cluster_order(const PairMetricTable& table,
                                       Linkage linkage = Linkage::average);

struct DocumentSet {
  std::string label;
  std::vector<std::pair<std::string, std::string>> documents;  // (doc_id, text)
};

/// One embedding model: vectors for every document plus the tokenizer its
/// overlap coefficients are counted with.
struct EmbeddingSource {
  std::string name;
  EmbeddingTable vectors;
  std::shared_ptr<const Tokenizer> tokenizer;
};

struct AuditOptions {
  // 0 means |sets| x |sources|, one family per analysis.
  std::size_t family_size = 0;
  Linkage linkage = Linkage::average;
};

inline constexpr std::string_view kHumanVsEmbedding = "human_vs_embedding";
inline constexpr std::string_view kEmbeddingVsOverlap = "embedding_vs_overlap";

struct AuditCell {
  std::string set_label;
  std::string source;
  std::string analysis;  // kHumanVsEmbedding (Spearman) or kEmbeddingVsOverlap (Pearson)
  CorrelationResult result;
  std::string tier;  // "", "a" (p < 0.05), "b" (< 0.005), "c" (< 0.001)
};

struct AuditReport {
  std::vector<AuditCell> cells;
  std::vector<PairMetricTable> tables;
  std::map<std::string, std::vector<std::string>> cluster_orders;  // table key -> ids
  std::size_t family_size = 0;
  Linkage linkage = Linkage::average;
};

/// Audit-table significance tier of an adjusted p.
std::string audit_tier(double p_adjusted);

/// `relatedness` is keyed by set label.
AuditReport run_audit(const std::vector<DocumentSet>& docsets,
                      const std::vector<EmbeddingSource>& sources,
                      const std::map<std::string, RelatednessMatrix>& relatedness,
                      const AuditOptions& options = {});

/// Writes summary.csv, one CSV per table under tables/, cluster_order.csv
/// and metadata.json into `directory`.
void write_audit_report(const AuditReport& report, const std::string& directory);
std::string format_audit_summary(const AuditReport& report);

}  // namespace tocrag
