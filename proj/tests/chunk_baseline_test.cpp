#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "tocrag/chunk_baseline.hpp"

using namespace tocrag;

namespace {

std::string words(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += "w" + std::to_string(i % 17) + (i % 5 == 4 ? ". " : " ");
  return s;
}

}  // namespace

TEST(Chunking, ExactRunsAndShortTail) {
  const auto tok = make_tokenizer("default");
  const auto chunks = chunk_text(words(23), 10, *tok);  // 23 words + 4 dots = 27 tokens
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[2].token_end - chunks[2].token_begin, 7u);
  EXPECT_TRUE(chunk_text("", 10, *tok).empty());
  EXPECT_THROW(chunk_text("a", 0, *tok), std::invalid_argument);
  const std::string text = words(23);
  for (const auto& c : chunks) EXPECT_EQ(text.substr(c.byte_begin, c.byte_end - c.byte_begin), c.text);
}

TEST(Cosine, Errors) {
  EXPECT_NEAR(cosine_similarity({{1, 0}, "m"}, {{1, 1}, "m"}), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_THROW(cosine_similarity({{0, 0}, "m"}, {{1, 1}, "m"}), ZeroVector);
  EXPECT_THROW(cosine_similarity({{1}, "m"}, {{1, 1}, "m"}), DimensionMismatch);
}

TEST(Mmr, LambdaZeroPrefersDiversity) {
  std::vector<Chunk> chunks(3);
  for (std::size_t i = 0; i < 3; ++i) chunks[i].chunk_id = i;
  const ChunkIndex index(chunks, {{{1, 0}, "m"}, {{0.99, 0.141}, "m"}, {{0, 1}, "m"}}, "m", 50);
  EXPECT_EQ(mmr_retrieve({{1, 0}, "m"}, index, {1.0, 2}), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(mmr_retrieve({{1, 0}, "m"}, index, {0.0, 2}), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(mmr_retrieve({{1, 0}, "m"}, index, {0.5, 10}).size(), 3u);
}

TEST(Presets, Names) {
  EXPECT_EQ(c50_v300().chunk_size, 50u);
  EXPECT_EQ(c50_v300().k, 300u);
  EXPECT_EQ(c100_v150().k, 150u);
  EXPECT_EQ(preset_by_name("C100-V150").name, "c100_v150");
  EXPECT_THROW(preset_by_name("c10"), std::invalid_argument);
}

TEST(ChunkIndex, BuildSaveLoad) {
  const auto tok = make_tokenizer("default");
  StubEmbeddingProvider embedder(16, tok);
  const auto index = ChunkIndex::build(words(130), 50, *tok, embedder, 2);
  EXPECT_EQ(index.size(), 4u);  // 156 tokens
  fixture::TempDir dir;
  index.save(dir / "idx");
  const auto loaded = ChunkIndex::load(dir / "idx");
  ASSERT_EQ(loaded.size(), index.size());
  EXPECT_EQ(loaded.chunk_size(), 50u);
  for (std::size_t i = 0; i < index.size(); ++i) {
    EXPECT_EQ(loaded.chunks()[i].text, index.chunks()[i].text);
    EXPECT_EQ(loaded.vectors()[i].values, index.vectors()[i].values);
  }
}

TEST(Baseline, ClampsKAndLabelsChunks) {
  const auto tok = make_tokenizer("default");
  StubEmbeddingProvider embedder(16, tok);
  auto index = std::make_shared<const ChunkIndex>(ChunkIndex::build(words(130), 50, *tok, embedder));
  auto generator = std::make_shared<fixture::FunctionProvider>([](const ChatRequest&) { return "ans"; });
  auto emb = std::make_shared<StubEmbeddingProvider>(16, tok);
  ChunkBaselineAnswerer a(index, c50_v300(), PipelineConfig{}, {nullptr, generator, nullptr, emb}, tok);
  Session s("x");
  const auto rec = a.ask("w3 w4", s);
  ASSERT_TRUE(rec.retrieval.has_value());
  EXPECT_EQ(rec.retrieval->k_requested, 300u);
  EXPECT_EQ(rec.retrieval->k_used, 4u);
  EXPECT_TRUE(rec.retrieval->k_clamped);
  EXPECT_EQ(rec.provenance.size(), 4u);
  EXPECT_EQ(rec.provenance[0].rfind("chunk-", 0), 0u);
  EXPECT_EQ(rec.provenance_titles, rec.provenance);
  EXPECT_EQ(rec.model_id, "c50_v300");
  EXPECT_NE(generator->requests()[0].messages[0].content.find("Reference:\n"), std::string::npos);
}
