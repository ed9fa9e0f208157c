#include <gtest/gtest.h>

#include <map>

#include "support/fixtures.hpp"
#include "tocrag/config.hpp"

using namespace tocrag;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& name) -> std::optional<std::string> {
    const auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

const EnvLookup kNoEnv = env_of({});

}  // namespace

TEST(Config, DefaultsMatchPipelineDefaults) {
  const auto c = default_config(kNoEnv);
  EXPECT_EQ(c.port, 8080);
  EXPECT_EQ(c.pipeline.n_headings, 5);
  EXPECT_EQ(c.pipeline.casual_context.max_tokens(), 4096u);
  EXPECT_EQ(c.embedding.kind, "stub");
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesSectionsAndResolvesPaths) {
  const auto c = parse_config(R"(
corpus_dir = "data/corpus"
session_dir = "/abs/sessions"
outline_style = "numbered_headings"

[server]
port = 9000

[pipeline]
n_headings = 3
hierarchical_rounds = 2
toc_detail = "titles_only"
generator_context = 4096
max_output_tokens = 512
book_title = "Manual"

[models]
generator = "local-model"

[baseline]
lambda = 0.25

[providers.generator]
kind = "openai"
base_url = "http://localhost:1234/v1"
max_retries = 5
max_in_flight = 4

[providers.selector]
kind = "scripted"
script = "scripts/selector.toml"
)", "/etc/tocrag", kNoEnv);
  EXPECT_EQ(c.corpus_dir, "/etc/tocrag/data/corpus");
  EXPECT_EQ(c.session_dir, "/abs/sessions");
  EXPECT_EQ(c.port, 9000);
  EXPECT_EQ(c.pipeline.n_headings, 3);
  EXPECT_EQ(c.pipeline.hierarchical_rounds, 2);
  EXPECT_EQ(c.pipeline.toc_detail, TocDetail::titles_only);
  EXPECT_EQ(c.pipeline.generator_context.max_tokens(), 4096u);
  EXPECT_EQ(c.pipeline.templates.book_title, "Manual");
  EXPECT_EQ(c.pipeline.generator_model, "local-model");
  EXPECT_EQ(c.baseline_lambda, 0.25);
  EXPECT_EQ(c.generator.kind, "openai");
  EXPECT_EQ(c.generator.http.max_retries, 5);
  EXPECT_EQ(c.generator.http.max_in_flight, 4u);
  EXPECT_EQ(c.selector.script, "/etc/tocrag/scripts/selector.toml");
}

TEST(Config, EnvironmentOverridesFile) {
  const auto c = parse_config("[server]\nport = 9000\n[providers.generator]\nkind = \"openai\"\nbase_url = \"http://a\"\n",
                              "/x",
                              env_of({{"TOCRAG_SERVER_PORT", "7000"},
                                      {"TOCRAG_PROVIDERS_GENERATOR_BASE_URL", "http://b"},
                                      {"TOCRAG_PIPELINE_N_HEADINGS", "2"}}));
  EXPECT_EQ(c.port, 7000);
  EXPECT_EQ(c.generator.http.base_url, "http://b");
  EXPECT_EQ(c.pipeline.n_headings, 2);
  EXPECT_EQ(default_config(env_of({{"TOCRAG_SERVER_HOST", "0.0.0.0"}})).host, "0.0.0.0");
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(parse_config("[server]\nport = \"x\"\n", "", kNoEnv), ConfigError);
  EXPECT_THROW(parse_config("", "", env_of({{"TOCRAG_SERVER_PORT", "80x"}})), ConfigError);
  EXPECT_THROW(parse_config("[pipeline]\nreference_budget = 0\n", "", kNoEnv), ConfigError);
  EXPECT_THROW(parse_config("[providers.generator]\nkind = \"magic\"\n", "", kNoEnv), ConfigError);
  EXPECT_THROW(parse_config("[pipeline]\nmax_output_tokens = 9000\n", "", kNoEnv), ConfigError);
  EXPECT_THROW(parse_config("not = [toml", "", kNoEnv), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/tocrag.toml", kNoEnv), ConfigError);
}

TEST(Config, LoadResolvesAgainstFileDirectory) {
  fixture::TempDir dir;
  fixture::write_file(dir / "conf/tocrag.toml", "corpus_dir = \"../corpus\"\n");
  const auto c = load_config(dir / "conf/tocrag.toml", kNoEnv);
  EXPECT_EQ(std::filesystem::weakly_canonical(c.corpus_dir), std::filesystem::weakly_canonical(dir / "corpus"));
}
