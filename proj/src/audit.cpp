#include "tocrag/audit.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <regex>
#include <json.hpp>

namespace tocrag {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void check_name(const std::string& name, const char* what) {
  static const std::regex ok("[A-Za-z0-9_.-]+");
  if (!std::regex_match(name, ok)) {
    throw std::invalid_argument(std::string(what) + " name must match [A-Za-z0-9_.-]+: '" + name +
                                "'");
  }
}

std::vector<std::vector<double>> square(std::size_t n, double diagonal) {
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = diagonal;
  return m;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

std::string table_csv(const PairMetricTable& t) {
  std::vector<std::string> header{"doc_id"};
  header.insert(header.end(), t.doc_ids.begin(), t.doc_ids.end());
  std::string out = csv::join(header) + "\n";
  for (std::size_t i = 0; i < t.n_docs(); ++i) {
    std::vector<std::string> row{t.doc_ids[i]};
    for (double v : t.values[i]) row.push_back(fmt(v));
    out += csv::join(row) + "\n";
  }
  return out;
}

}  // namespace

TokenMultiset token_multiset(std::string_view text, const Tokenizer& tokenizer) {
  TokenMultiset m;
  for (std::string_view piece : tokenizer.pieces(text)) {
    ++m.counts[std::string(piece)];
    ++m.total;
  }
  return m;
}

double overlap_coefficient(const TokenMultiset& a, const TokenMultiset& b) {
  if (a.total == 0 || b.total == 0) throw EmptyDocument("overlap coefficient of an empty document");
  std::size_t shared = 0;
  const auto& small = a.counts.size() <= b.counts.size() ? a.counts : b.counts;
  const auto& large = a.counts.size() <= b.counts.size() ? b.counts : a.counts;
  for (const auto& [token, count] : small) {
    auto it = large.find(token);
    if (it != large.end()) shared += std::min(count, it->second);
  }
  return static_cast<double>(shared) / static_cast<double>(std::min(a.total, b.total));
}

std::vector<PairValue> PairMetricTable::pairs() const {
  std::vector<PairValue> out;
  for (std::size_t i = 0; i < n_docs(); ++i) {
    for (std::size_t j = i + 1; j < n_docs(); ++j) out.push_back({i, j, values[i][j]});
  }
  return out;
}

std::vector<double> PairMetricTable::pair_values() const {
  std::vector<double> out;
  for (const PairValue& p : pairs()) out.push_back(p.value);
  return out;
}

PairMetricTable embedding_correlation_table(const std::vector<std::string>& doc_ids,
                                            const std::vector<EmbeddingVector>& vectors) {
  if (doc_ids.size() != vectors.size()) throw ShapeMismatch("one vector per document expected");
  if (vectors.size() < 3) throw AuditError("embedding correlation table needs >= 3 vectors");
  for (const auto& v : vectors) {
    if (v.dimension() != vectors.front().dimension()) {
      throw ShapeMismatch("embedding vectors differ in dimension");
    }
  }
  PairMetricTable t{"embedding_correlation", doc_ids, square(vectors.size(), 1.0)};
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) {
      try {
        t.values[i][j] = t.values[j][i] = pearson(vectors[i].values, vectors[j].values).value;
      } catch (const ConstantSeries&) {
        throw ConstantSeries("constant embedding vector in pair (" + doc_ids[i] + ", " +
                             doc_ids[j] + ")");
      }
    }
  }
  return t;
}

PairMetricTable overlap_table(const std::vector<std::string>& doc_ids,
                              const std::vector<TokenMultiset>& multisets) {
  if (doc_ids.size() != multisets.size()) throw ShapeMismatch("one multiset per document expected");
  PairMetricTable t{"token_overlap", doc_ids, square(multisets.size(), 1.0)};
  for (std::size_t i = 0; i < multisets.size(); ++i) {
    if (multisets[i].total == 0) throw EmptyDocument("document has no tokens: " + doc_ids[i]);
    for (std::size_t j = i + 1; j < multisets.size(); ++j) {
      t.values[i][j] = t.values[j][i] = overlap_coefficient(multisets[i], multisets[j]);
    }
  }
  return t;
}

PairMetricTable RelatednessMatrix::as_table() const {
  return {"human_relatedness", doc_ids, values};
}

RelatednessMatrix ingest_relatedness(const std::vector<RelatednessSheet>& sheets) {
  if (sheets.empty()) throw ShapeMismatch("no relatedness sheets");
  const auto& ids = sheets.front().doc_ids;
  const std::size_t n = ids.size();
  RelatednessMatrix out{ids, square(n, 0.0), sheets.size()};
  for (const RelatednessSheet& s : sheets) {
    if (s.doc_ids != ids || s.values.size() != n) {
      throw ShapeMismatch("relatedness sheets cover different documents");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (s.values[i].size() != n) throw ShapeMismatch("relatedness sheet is not square");
      for (std::size_t j = 0; j < n; ++j) {
        const double v = s.values[i][j];
        if (v != 0.0 && v != 1.0) {
          throw NonBinaryEntry("relatedness entry (" + ids[i] + ", " + ids[j] + ") is " + fmt(v));
        }
        if (s.values[j][i] != v) {
          throw ShapeMismatch("relatedness sheet is not symmetric at (" + ids[i] + ", " + ids[j] +
                              ")");
        }
        out.values[i][j] += v;
      }
    }
  }
  for (auto& row : out.values) {
    for (double& v : row) v /= static_cast<double>(sheets.size());
  }
  return out;
}

RelatednessSheet parse_relatedness_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw ShapeMismatch("empty relatedness sheet");
  RelatednessSheet s;
  s.doc_ids.assign(rows.front().begin() + 1, rows.front().end());
  const std::size_t n = s.doc_ids.size();
  if (rows.size() != n + 1) throw ShapeMismatch("relatedness sheet is not square");
  for (std::size_t r = 1; r <= n; ++r) {
    if (rows[r].size() != n + 1) throw ShapeMismatch("relatedness row has the wrong width");
    if (rows[r][0] != s.doc_ids[r - 1]) {
      throw ShapeMismatch("relatedness row " + rows[r][0] + " does not match column order");
    }
    std::vector<double> row;
    for (std::size_t c = 1; c <= n; ++c) {
      const std::string& cell = rows[r][c];
      if (cell == "0") {
        row.push_back(0.0);
      } else if (cell == "1") {
        row.push_back(1.0);
      } else {
        throw NonBinaryEntry("relatedness entry (" + rows[r][0] + ", " + s.doc_ids[c - 1] +
                             ") is '" + cell + "'");
      }
    }
    s.values.push_back(std::move(row));
  }
  return s;
}

std::string format_relatedness_csv(const RelatednessSheet& sheet) {
  std::vector<std::string> header{"doc_id"};
  header.insert(header.end(), sheet.doc_ids.begin(), sheet.doc_ids.end());
  std::string out = csv::join(header) + "\n";
  for (std::size_t i = 0; i < sheet.doc_ids.size(); ++i) {
    std::vector<std::string> row{sheet.doc_ids[i]};
    for (double v : sheet.values[i]) row.push_back(v == 0.0 ? "0" : "1");
    out += csv::join(row) + "\n";
  }
  return out;
}

std::string_view to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::average: return "average";
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
  }
  return "?";
}

Linkage parse_linkage(std::string_view name) {
  if (name == "average") return Linkage::average;
  if (name == "single") return Linkage::single;
  if (name == "complete") return Linkage::complete;
  throw std::invalid_argument("unknown linkage: " + std::string(name));
}

std::vector<std::size_t> cluster_order(const std::vector<std::vector<double>>& rows,
                                       Linkage linkage) {
  const std::size_t n = rows.size();
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw ShapeMismatch("rows differ in length");
  }
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = squared_distance(rows[i], rows[j]);
  }
  // Each cluster keeps its leaves in dendrogram order; leaves.front() is not
  // necessarily the minimum, so track it separately.
  struct Cluster {
    std::vector<std::size_t> leaves;
    std::size_t lowest;
  };
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters.push_back({{i}, i});

  const auto linkage_distance = [&](const Cluster& a, const Cluster& b) {
    double acc = linkage == Linkage::single ? std::numeric_limits<double>::infinity()
                                            : (linkage == Linkage::complete ? -1.0 : 0.0);
    for (std::size_t p : a.leaves) {
      for (std::size_t q : b.leaves) {
        if (linkage == Linkage::single) acc = std::min(acc, d[p][q]);
        else if (linkage == Linkage::complete) acc = std::max(acc, d[p][q]);
        else acc += d[p][q];
      }
    }
    if (linkage == Linkage::average) {
      acc /= static_cast<double>(a.leaves.size() * b.leaves.size());
    }
    return acc;
  };

  while (clusters.size() > 1) {
    // Clusters are kept sorted by lowest index, so scanning (a, b) with a < b
    // in order and taking strict improvements breaks ties by lowest indices.
    std::size_t best_a = 0, best_b = 1;
    double best = linkage_distance(clusters[0], clusters[1]);
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        const double dist = linkage_distance(clusters[a], clusters[b]);
        if (dist < best) {
          best = dist;
          best_a = a;
          best_b = b;
        }
      }
    }
    Cluster merged{clusters[best_a].leaves, clusters[best_a].lowest};
    merged.leaves.insert(merged.leaves.end(), clusters[best_b].leaves.begin(),
                         clusters[best_b].leaves.end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
    clusters[best_a] = std::move(merged);
  }
  return n == 0 ? std::vector<std::size_t>{} : clusters.front().leaves;
}

std::vector<std::string> cluster_order(const PairMetricTable& table, Linkage linkage) {
  std::vector<std::string> ids;
  for (std::size_t i : cluster_order(table.values, linkage)) ids.push_back(table.doc_ids[i]);
  return ids;
}

std::string audit_tier(double p_adjusted) {
  if (p_adjusted < 0.001) return "c";
  if (p_adjusted < 0.005) return "b";
  if (p_adjusted < 0.05) return "a";
  return "";
}

AuditReport run_audit(const std::vector<DocumentSet>& docsets,
                      const std::vector<EmbeddingSource>& sources,
                      const std::map<std::string, RelatednessMatrix>& relatedness,
                      const AuditOptions& options) {
  if (docsets.empty() || sources.empty()) throw AuditError("audit needs document sets and sources");
  AuditReport report;
  report.linkage = options.linkage;
  report.family_size =
      options.family_size ? options.family_size : docsets.size() * sources.size();

  const auto add_table = [&](PairMetricTable table, const std::string& key) {
    report.cluster_orders[key] = cluster_order(table, options.linkage);
    table.metric_name = key;
    report.tables.push_back(std::move(table));
    return report.tables.back().pair_values();
  };

  for (const DocumentSet& set : docsets) {
    check_name(set.label, "document set");
    std::vector<std::string> ids;
    for (const auto& [id, text] : set.documents) ids.push_back(id);
    if (ids.size() < 3) throw AuditError("document set " + set.label + " needs >= 3 documents");

    auto rel_it = relatedness.find(set.label);
    if (rel_it == relatedness.end()) {
      throw MissingRelatedness("no relatedness sheets for set " + set.label);
    }
    // Re-index the relatedness matrix into the set's document order.
    const RelatednessMatrix& rel = rel_it->second;
    std::vector<std::size_t> pos;
    for (const std::string& id : ids) {
      auto it = std::find(rel.doc_ids.begin(), rel.doc_ids.end(), id);
      if (it == rel.doc_ids.end()) {
        throw MissingRelatedness("document " + id + " missing from relatedness of " + set.label);
      }
      pos.push_back(static_cast<std::size_t>(it - rel.doc_ids.begin()));
    }
    PairMetricTable human{"human_relatedness", ids, square(ids.size(), 0.0)};
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = 0; j < ids.size(); ++j) human.values[i][j] = rel.values[pos[i]][pos[j]];
    }
    const auto human_pairs = add_table(std::move(human), set.label + "__human_relatedness");

    for (const EmbeddingSource& source : sources) {
      check_name(source.name, "embedding source");
      if (!source.tokenizer) throw AuditError("source " + source.name + " has no tokenizer");
      std::vector<EmbeddingVector> vectors;
      std::vector<TokenMultiset> multisets;
      for (const auto& [id, text] : set.documents) {
        const EmbeddingVector* v = source.vectors.find(id);
        if (!v) throw MissingVector("source " + source.name + " has no vector for " + id);
        vectors.push_back(*v);
        multisets.push_back(token_multiset(text, *source.tokenizer));
      }
      const std::string prefix = set.label + "__" + source.name;
      const auto emb_pairs =
          add_table(embedding_correlation_table(ids, vectors), prefix + "__embedding_correlation");
      const auto overlap_pairs = add_table(overlap_table(ids, multisets), prefix + "__token_overlap");

      report.cells.push_back({set.label, source.name, std::string(kHumanVsEmbedding),
                              spearman(human_pairs, emb_pairs), ""});
      report.cells.push_back({set.label, source.name, std::string(kEmbeddingVsOverlap),
                              pearson(emb_pairs, overlap_pairs), ""});
    }
  }

  for (AuditCell& cell : report.cells) {
    const double p = cell.result.p_value;
    cell.result.p_adjusted = bonferroni(std::span<const double>(&p, 1), report.family_size)[0];
    cell.tier = audit_tier(cell.result.p_adjusted);
  }
  return report;
}

std::string format_audit_summary(const AuditReport& report) {
  std::string out =
      "source,analysis,set,kind,n,value,p_value,p_adjusted,family_size,tier\n";
  // Table layout: one block per source, analyses side by side, sets within.
  std::vector<std::string> sources, sets;
  for (const AuditCell& c : report.cells) {
    if (std::find(sources.begin(), sources.end(), c.source) == sources.end()) sources.push_back(c.source);
    if (std::find(sets.begin(), sets.end(), c.set_label) == sets.end()) sets.push_back(c.set_label);
  }
  for (const std::string& source : sources) {
    for (std::string_view analysis : {kHumanVsEmbedding, kEmbeddingVsOverlap}) {
      for (const std::string& set : sets) {
        for (const AuditCell& c : report.cells) {
          if (c.source != source || c.analysis != analysis || c.set_label != set) continue;
          out += csv::join({c.source, c.analysis, c.set_label, std::string(to_string(c.result.kind)),
                            std::to_string(c.result.n), fmt(c.result.value), fmt(c.result.p_value),
                            fmt(c.result.p_adjusted), std::to_string(report.family_size), c.tier}) +
                 "\n";
        }
      }
    }
  }
  return out;
}

void write_audit_report(const AuditReport& report, const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  write_text_file((dir / "summary.csv").string(), format_audit_summary(report));
  for (const PairMetricTable& t : report.tables) {
    write_text_file((dir / "tables" / (t.metric_name + ".csv")).string(), table_csv(t));
  }
  std::string orders = "table,position,doc_id\n";
  for (const auto& [key, ids] : report.cluster_orders) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      orders += csv::join({key, std::to_string(i), ids[i]}) + "\n";
    }
  }
  write_text_file((dir / "cluster_order.csv").string(), orders);

  nlohmann::ordered_json meta;
  meta["correction"] = "bonferroni";
  meta["family_size"] = report.family_size;
  meta["family_definition"] = "one family per analysis across all (set, source) cells";
  meta["human_vs_embedding"] = "spearman rho, average ranks, two-sided t-approximation p";
  meta["embedding_vs_overlap"] = "pearson r, two-sided t-approximation p";
  meta["tiers"] = {{"a", "p_adjusted < 0.05"}, {"b", "p_adjusted < 0.005"}, {"c", "p_adjusted < 0.001"}};
  meta["cluster_distance"] = "squared_euclidean";
  meta["cluster_linkage"] = std::string(to_string(report.linkage));
  meta["caveat"] =
      "pairwise values share documents and are not independent samples; p-values follow the "
      "conventional procedure and overstate the effective sample size";
  write_text_file((dir / "metadata.json").string(), meta.dump(2) + "\n");
}

}  // namespace tocrag
