#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "tocrag/embedding_io.hpp"
#include "tocrag/record_json.hpp"

using namespace tocrag;

TEST(EmbeddingCsv, RoundTripIsExact) {
  EmbeddingTable t{"model-x", 3, {"a", "b,c"}, {{{0.1, -1e-300, 1.0 / 3.0}, "model-x"}, {{1, 2, 3}, "model-x"}}};
  const auto back = parse_embedding_csv(format_embedding_csv(t));
  EXPECT_EQ(back.model_id, "model-x");
  EXPECT_EQ(back.ids, t.ids);
  EXPECT_EQ(back.vectors[0].values, t.vectors[0].values);
  EXPECT_EQ(back.find("b,c")->values[2], 3.0);
  EXPECT_EQ(back.find("zz"), nullptr);
  EXPECT_ANY_THROW(parse_embedding_csv("m,2\na,1\n"));
  EXPECT_ANY_THROW(parse_embedding_csv("m,2\na,1,x\n"));
}

TEST(Csv, QuotingRoundTrip) {
  const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  const auto rows = csv::parse(csv::join(fields) + "\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0], fields);
}

TEST(TextFiles, WriteReadAndMissing) {
  fixture::TempDir dir;
  write_text_file(dir / "x/y.txt", "bytes\r\n\xed\x95\x9c");
  EXPECT_EQ(read_text_file(dir / "x/y.txt"), "bytes\r\n\xed\x95\x9c");
  EXPECT_ANY_THROW(read_text_file(dir / "missing.txt"));
}

TEST(AnswerRecordJson, RoundTrip) {
  AnswerRecord r;
  r.question = "q";
  r.answer = "a";
  r.model_id = "c50_v300";
  r.provenance = {"chunk-3"};
  r.provenance_titles = {"chunk-3"};
  r.prompt_used = PromptUsed::with_reference;
  r.latency_seconds = 0.5;
  r.retrieval = RetrievalInfo{50, 300, 12, true, 0.5};
  r.error = "boom";
  const auto back = answer_record_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.answer, "a");
  EXPECT_EQ(back.provenance, r.provenance);
  EXPECT_EQ(back.prompt_used, PromptUsed::with_reference);
  ASSERT_TRUE(back.retrieval.has_value());
  EXPECT_EQ(back.retrieval->k_used, 12u);
  EXPECT_TRUE(back.retrieval->k_clamped);
  EXPECT_EQ(back.error, "boom");
}
