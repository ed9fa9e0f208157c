#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"
#include "tocrag/memory.hpp"
#include "tocrag/prompts.hpp"

using namespace tocrag;

TEST(Substitute, SinglePassNoRescan) {
  EXPECT_EQ(substitute("{a} and {b}", {{"a", "{b}"}, {"b", "x"}}), "{b} and x");
  EXPECT_EQ(substitute("{unknown} {a}", {{"a", "1"}}), "{unknown} 1");
  EXPECT_EQ(substitute("{a", {{"a", "1"}}), "{a");
}

TEST(ExtractPlaceholders, InvertsSubstitute) {
  std::mt19937_64 rng(5);
  const std::string tmpl = "Q: {question}\nIndex:\n{index}\nEnd {question}";
  for (int i = 0; i < 100; ++i) {
    std::string q = "q" + std::to_string(i), idx;
    for (int k = 0; k < std::uniform_int_distribution<int>(0, 5)(rng); ++k) idx += "line " + std::to_string(k) + "\n";
    const auto rendered = substitute(tmpl, {{"question", q}, {"index", idx}});
    const auto got = extract_placeholders(tmpl, rendered);
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(got->at("question"), q);
    EXPECT_EQ(got->at("index"), idx);
  }
  EXPECT_FALSE(extract_placeholders("A {x} B", "C y D").has_value());
}

TEST(PromptHelpers, NumberWordsAndSkeleton) {
  EXPECT_EQ(number_word(5), "five");
  EXPECT_EQ(number_word(12), "12");
  EXPECT_EQ(format_skeleton(3), "1. ---\n\n2. ---\n\n3. ---");
}

TEST(Prompts, HeadingPromptCarriesEveryInput) {
  const auto t = PromptTemplates::builtin();
  const auto p = build_heading_prompt(t, "Human: hi", "Why?", "A\n  B", 2);
  const auto values = extract_placeholders(t.heading_selection, p);
  ASSERT_TRUE(values.has_value());
  EXPECT_EQ(values->at("history"), "Human: hi");
  EXPECT_EQ(values->at("question"), "Why?");
  EXPECT_EQ(values->at("index"), "A\n  B");
  EXPECT_EQ(values->at("n_headings_word"), "two");
  EXPECT_EQ(values->at("format"), "1. ---\n\n2. ---");
}

TEST(Prompts, BuiltinMatchesTemplateFiles) {
  const auto loaded = PromptTemplates::load(TOCRAG_SOURCE_DIR "/templates");
  const auto builtin = PromptTemplates::builtin();
  EXPECT_EQ(loaded.heading_selection, builtin.heading_selection);
  EXPECT_EQ(loaded.answer_with_reference, builtin.answer_with_reference);
  EXPECT_EQ(loaded.answer_casual, builtin.answer_casual);
  EXPECT_ANY_THROW(PromptTemplates::load("/nonexistent"));
}

TEST(Memory, RendersHumanAndAiLines) {
  const std::vector<Turn> turns = {{Speaker::user, "hi"}, {Speaker::assistant, "hello"}};
  EXPECT_EQ(render_history(turns), "Human: hi\nAI: hello");
  EXPECT_EQ(render_history(std::vector<Turn>{}), "");
  EXPECT_EQ(parse_speaker(to_string(Speaker::assistant)), Speaker::assistant);
}

TEST(Memory, TrimKeepsLongestFittingSuffix) {
  const auto tok = make_tokenizer("default");
  std::mt19937_64 rng(6);
  for (int i = 0; i < 300; ++i) {
    std::vector<Turn> turns;
    for (int k = std::uniform_int_distribution<int>(0, 8)(rng); k > 0; --k) {
      turns.push_back({k % 2 ? Speaker::user : Speaker::assistant,
                       std::string(static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 6)(rng)), 'w') + " x y"});
    }
    const std::size_t budget = std::uniform_int_distribution<std::size_t>(0, 40)(rng);
    const auto kept = trim_turns(turns, budget, *tok);
    ASSERT_LE(kept.size(), turns.size());
    EXPECT_TRUE(std::equal(kept.begin(), kept.end(), turns.end() - static_cast<long>(kept.size())));
    EXPECT_LE(tok->count(render_history(kept)), budget);
    if (kept.size() < turns.size()) {
      const std::vector<Turn> longer(turns.end() - static_cast<long>(kept.size()) - 1, turns.end());
      EXPECT_GT(tok->count(render_history(longer)), budget);
    }
  }
}
