#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "tocrag/audit.hpp"
#include "tocrag/audit_manifest.hpp"

using namespace tocrag;

namespace {

RelatednessSheet sheet(std::vector<std::vector<double>> values) {
  RelatednessSheet s;
  for (std::size_t i = 0; i < values.size(); ++i) s.doc_ids.push_back("d" + std::to_string(i));
  s.values = std::move(values);
  return s;
}

const std::vector<std::vector<double>> kFour = {{1, 1, 0, 0}, {1, 1, 1, 0}, {0, 1, 1, 1}, {0, 0, 1, 1}};

DocumentSet four_docs(const std::string& label) {
  return {label,
          {{"d0", "herbs treat cold and fever"},
           {"d1", "herbs treat fever in winter"},
           {"d2", "pulse reading in winter"},
           {"d3", "pulse reading and organ theory"}}};
}

EmbeddingSource stub_source(const std::vector<DocumentSet>& sets, std::size_t dim = 64) {
  EmbeddingSource src{"stub", {"stub", dim, {}, {}}, make_tokenizer("default")};
  for (const auto& s : sets) {
    for (const auto& [id, text] : s.documents) {
      src.vectors.ids.push_back(id);
      src.vectors.vectors.push_back(stub_embedding(text, dim, *src.tokenizer));
    }
  }
  return src;
}

}  // namespace

TEST(Overlap, RepeatedTokensAndEmpty) {
  const auto tok = make_tokenizer("whitespace");
  EXPECT_EQ(overlap_coefficient(token_multiset("a a a", *tok), token_multiset("a a b c", *tok)), 2.0 / 3.0);
  EXPECT_EQ(overlap_coefficient(token_multiset("x", *tok), token_multiset("x y z", *tok)), 1.0);
  EXPECT_THROW(overlap_coefficient(token_multiset("", *tok), token_multiset("a", *tok)), EmptyDocument);
}

TEST(Relatedness, CsvRoundTripAndValidation) {
  const auto s = sheet(kFour);
  const std::string csv = format_relatedness_csv(s);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "doc_id,d0,d1,d2,d3");
  const auto back = parse_relatedness_csv(csv);
  EXPECT_EQ(back.doc_ids, s.doc_ids);
  EXPECT_EQ(back.values, s.values);
  EXPECT_THROW(parse_relatedness_csv("doc_id,a,b\na,1,2\nb,2,1\n"), NonBinaryEntry);
  EXPECT_THROW(parse_relatedness_csv("doc_id,a,b\nb,1,0\na,0,1\n"), ShapeMismatch);
  EXPECT_THROW(parse_relatedness_csv("doc_id,a,b\na,1,0\n"), ShapeMismatch);
}

TEST(Relatedness, IngestAveragesRaters) {
  auto other = kFour;
  other[0][1] = other[1][0] = 0;
  const auto m = ingest_relatedness({sheet(kFour), sheet(other)});
  EXPECT_EQ(m.rater_count, 2u);
  EXPECT_EQ(m.values[0][1], 0.5);
  EXPECT_EQ(m.values[1][2], 1.0);
  auto asym = kFour;
  asym[0][3] = 1;
  EXPECT_THROW(ingest_relatedness({sheet(asym)}), ShapeMismatch);
  auto renamed = sheet(kFour);
  renamed.doc_ids[0] = "zz";
  EXPECT_THROW(ingest_relatedness({sheet(kFour), renamed}), ShapeMismatch);
  EXPECT_THROW(ingest_relatedness({}), ShapeMismatch);
}

TEST(Tables, PairsAreUpperTriangle) {
  const auto tok = make_tokenizer("default");
  const auto docs = four_docs("s");
  std::vector<TokenMultiset> ms;
  std::vector<std::string> ids;
  for (const auto& [id, text] : docs.documents) {
    ids.push_back(id);
    ms.push_back(token_multiset(text, *tok));
  }
  const auto t = overlap_table(ids, ms);
  const auto pairs = t.pairs();
  ASSERT_EQ(pairs.size(), 6u);
  EXPECT_EQ(pairs[0].i, 0u);
  EXPECT_EQ(pairs[0].j, 1u);
  EXPECT_EQ(pairs[5].i, 2u);
  EXPECT_EQ(t.values[0][1], 3.0 / 5.0);  // herbs treat fever
  EXPECT_EQ(t.values[0][0], 1.0);
}

TEST(Tables, EmbeddingCorrelationMatchesPearson) {
  const std::vector<EmbeddingVector> v = {{{1, 2, 3, 5}, "m"}, {{2, 1, 0, 4}, "m"}, {{0, 1, 1, 3}, "m"}};
  const auto t = embedding_correlation_table({"a", "b", "c"}, v);
  EXPECT_NEAR(t.values[0][2], oracle::pearson(v[0].values, v[2].values), 1e-12);
  EXPECT_EQ(t.values[2][0], t.values[0][2]);
  EXPECT_THROW(embedding_correlation_table({"a", "b", "c"}, {v[0], v[1], {{1, 1, 1, 1}, "m"}}), ConstantSeries);
  EXPECT_THROW(embedding_correlation_table({"a", "b"}, {v[0], v[1]}), AuditError);
}

TEST(Cluster, LinkageNamesAndTableOrder) {
  EXPECT_EQ(parse_linkage("complete"), Linkage::complete);
  EXPECT_THROW(parse_linkage("ward"), std::invalid_argument);
  PairMetricTable t{"m", {"a", "b", "c"}, {{1, 0, 0.9}, {0, 1, 0}, {0.9, 0, 1}}};
  const auto order = cluster_order(t);
  ASSERT_EQ(order.size(), 3u);
  const auto pa = std::find(order.begin(), order.end(), "a") - order.begin();
  const auto pc = std::find(order.begin(), order.end(), "c") - order.begin();
  EXPECT_EQ(std::abs(pa - pc), 1);
}

TEST(Tiers, AuditThresholds) {
  EXPECT_EQ(audit_tier(0.05), "");
  EXPECT_EQ(audit_tier(0.049), "a");
  EXPECT_EQ(audit_tier(0.004), "b");
  EXPECT_EQ(audit_tier(0.0009), "c");
}

TEST(RunAudit, FamilySizeAndErrors) {
  const std::vector<DocumentSet> sets = {four_docs("A"), four_docs("B")};
  const auto src = stub_source(sets);
  std::map<std::string, RelatednessMatrix> rel;
  for (const auto& s : sets) {
    auto sh = sheet(kFour);
    rel[s.label] = ingest_relatedness({sh});
  }
  const auto report = run_audit(sets, {src}, rel);
  EXPECT_EQ(report.family_size, 2u);
  EXPECT_EQ(report.cells.size(), 4u);
  for (const auto& c : report.cells) {
    EXPECT_EQ(c.result.p_adjusted, std::min(1.0, 2 * c.result.p_value));
    EXPECT_EQ(c.tier, audit_tier(c.result.p_adjusted));
  }
  EXPECT_EQ(run_audit(sets, {src}, rel, {7, Linkage::single}).family_size, 7u);
  EXPECT_THROW(run_audit(sets, {src}, {{"A", rel["A"]}}), MissingRelatedness);
  // Both sets reuse the ids d0..d3; drop every vector for d3.
  auto missing = src;
  missing.vectors.ids.clear();
  missing.vectors.vectors.clear();
  for (std::size_t i = 0; i < src.vectors.ids.size(); ++i) {
    if (src.vectors.ids[i] == "d3") continue;
    missing.vectors.ids.push_back(src.vectors.ids[i]);
    missing.vectors.vectors.push_back(src.vectors.vectors[i]);
  }
  EXPECT_THROW(run_audit(sets, {missing}, rel), MissingVector);
  EXPECT_FALSE(format_audit_summary(report).empty());
}

TEST(RunAudit, ReportFiles) {
  const std::vector<DocumentSet> sets = {four_docs("A")};
  const auto report = run_audit(sets, {stub_source(sets)}, {{"A", ingest_relatedness({sheet(kFour)})}});
  fixture::TempDir dir;
  write_audit_report(report, dir / "out");
  for (const char* f : {"summary.csv", "cluster_order.csv", "metadata.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / (std::string("out/") + f))) << f;
  }
  EXPECT_FALSE(std::filesystem::is_empty(dir / "out/tables"));
}

TEST(Manifest, LoadsSetsAndStubSources) {
  fixture::TempDir dir;
  for (const auto& [id, text] : four_docs("A").documents) fixture::write_file(dir / ("docs/" + id + ".txt"), text);
  fixture::write_file(dir / "docs/ignored.csv", "x");
  fixture::write_file(dir / "r1.csv", format_relatedness_csv(sheet(kFour)));
  fixture::write_file(dir / "audit.toml", R"(
family_size = 3
linkage = "single"

[[set]]
label = "A"
documents = "docs"
raters = ["r1.csv"]

[[source]]
name = "hashed"
stub_dimension = 32
)");
  const auto in = load_audit_manifest(dir / "audit.toml");
  ASSERT_EQ(in.docsets.size(), 1u);
  EXPECT_EQ(in.docsets[0].documents.size(), 4u);
  EXPECT_EQ(in.options.family_size, 3u);
  EXPECT_EQ(in.options.linkage, Linkage::single);
  EXPECT_EQ(in.sources[0].vectors.ids.size(), 4u);
  EXPECT_NO_THROW(run_audit(in.docsets, in.sources, in.relatedness, in.options));
}

TEST(Manifest, MissingArtifactsAreNamed) {
  fixture::TempDir dir;
  try {
    parse_audit_manifest("[[set]]\nlabel = \"A\"\ndocuments = \"nowhere\"\nraters = [\"r.csv\"]\n", dir.str());
    FAIL();
  } catch (const AuditError& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere"), std::string::npos);
  }
  EXPECT_THROW(load_audit_manifest(dir / "absent.toml"), AuditError);
  EXPECT_THROW(parse_audit_manifest("family_size = 1\n", dir.str()), AuditError);
}
