#include <gtest/gtest.h>

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "support/fixtures.hpp"
#include "tocrag/service.hpp"

using namespace tocrag;
using nlohmann::json;

namespace {

/// A running service on an ephemeral port with function-backed providers.
class ServiceFixture : public ::testing::Test {
 protected:
  void start(std::shared_ptr<const Corpus> corpus, fixture::FunctionProvider::Respond selector_reply) {
    const auto tok = make_tokenizer("default");
    selector = std::make_shared<fixture::FunctionProvider>(std::move(selector_reply));
    generator = std::make_shared<fixture::FunctionProvider>([](const ChatRequest&) { return "generated"; });
    config.corpus_dir = dir / "corpus";
    config.index_dir.clear();
    config.session_dir = dir / "sessions";
    config.pipeline.generator_context = {static_cast<std::size_t>(config.pipeline.max_output_tokens) + 400, BudgetPurpose::full_prompt};
    Providers providers{{selector, generator, generator, std::make_shared<StubEmbeddingProvider>(32, tok)}, generator};
    holder = std::make_shared<CorpusHolder>(std::move(corpus));
    service = std::make_unique<ChatService>(
        ServiceDeps{config, std::make_shared<AnswererFactory>(config, providers, tok),
                    std::make_shared<SessionStore>(config.session_dir, config.pipeline.memory_budget, tok), holder},
        4);
    port = service->bind("127.0.0.1", 0);
    server = std::thread([this] { service->run(); });
    service->wait_until_ready();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(30, 0);
  }

  void TearDown() override {
    if (service) service->stop();
    if (server.joinable()) server.join();
  }

  httplib::Result chat(const json& body) { return client->Post("/chat", body.dump(), "application/json"); }

  fixture::TempDir dir;
  AppConfig config;
  std::shared_ptr<fixture::FunctionProvider> selector, generator;
  std::shared_ptr<CorpusHolder> holder;
  std::unique_ptr<ChatService> service;
  std::thread server;
  int port = 0;
  std::unique_ptr<httplib::Client> client;
};

std::shared_ptr<const Corpus> twelve() {
  return std::make_shared<const Corpus>(fixture::build_corpus(fixture::twelve_headings()));
}

fixture::FunctionProvider::Respond reply(std::string text) {
  return [text](const ChatRequest&) { return text; };
}

}  // namespace

TEST_F(ServiceFixture, Health) {
  start(twelve(), reply("1. H2"));
  auto res = client->Get("/health");
  ASSERT_TRUE(res);
  const auto j = json::parse(res->body);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["session_concurrency"], "serialized");
  EXPECT_EQ(j["corpus"]["headings"], 12);
  EXPECT_EQ(j["modes"], json({"prompt_rag", "c50_v300", "c100_v150", "no_retrieval"}));
}

TEST_F(ServiceFixture, BadRequests) {
  start(twelve(), reply("1. H2"));
  EXPECT_EQ(client->Post("/chat", "not json", "application/json")->status, 400);
  EXPECT_EQ(chat({{"message", 5}})->status, 400);
  EXPECT_EQ(chat({{"message", "  "}})->status, 400);
  EXPECT_EQ(chat({{"message", "hi"}, {"mode", "magic"}})->status, 400);
  EXPECT_EQ(chat({{"message", "hi"}, {"session_id", "../x"}})->status, 400);
  EXPECT_EQ(client->Get("/corpus/toc?detail=verbose")->status, 400);
  EXPECT_EQ(client->Get("/sessions/none")->status, 404);
  const auto err = json::parse(chat({{"message", 5}})->body);
  EXPECT_TRUE(err.contains("error"));
}

TEST_F(ServiceFixture, NoCorpusIsConflictExceptWithoutRetrieval) {
  start(nullptr, reply("1. H2"));
  EXPECT_EQ(chat({{"message", "hi"}})->status, 409);
  EXPECT_EQ(client->Get("/corpus/toc")->status, 409);
  auto res = chat({{"message", "hi"}, {"mode", "no_retrieval"}});
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["answer"], "generated");
  EXPECT_TRUE(json::parse(client->Get("/health")->body)["corpus"].is_null());
}

TEST_F(ServiceFixture, ProviderFailureIsBadGateway) {
  start(twelve(), [](const ChatRequest&) -> std::string { throw RetriesExhausted("upstream down"); });
  EXPECT_EQ(chat({{"message", "hi"}})->status, 502);
}

TEST_F(ServiceFixture, OversizedQuestionIsUnprocessable) {
  start(twelve(), reply("1. H2"));
  std::string huge;
  for (int i = 0; i < 9000; ++i) huge += "word ";
  EXPECT_EQ(chat({{"message", huge}})->status, 422);
}

TEST_F(ServiceFixture, SessionsContinue) {
  start(twelve(), reply("1. H2"));
  const auto first = json::parse(chat({{"message", "one"}})->body);
  EXPECT_TRUE(first["created"].get<bool>());
  const std::string id = first["session_id"];
  const auto second = json::parse(chat({{"message", "two"}, {"session_id", id}})->body);
  EXPECT_FALSE(second["created"].get<bool>());
  const auto history = json::parse(client->Get("/sessions/" + id)->body);
  EXPECT_EQ(history["turns"].size(), 4u);
  EXPECT_TRUE(std::filesystem::exists(dir / ("sessions/" + id + ".jsonl")));
}

TEST_F(ServiceFixture, BaselineModeAnswers) {
  start(twelve(), reply("1. H2"));
  auto res = chat({{"message", "topic 3"}, {"mode", "c50_v300"}});
  ASSERT_EQ(res->status, 200) << res->body;
  const auto j = json::parse(res->body);
  EXPECT_EQ(j["mode"], "c50_v300");
  EXPECT_EQ(j["provenance"][0].get<std::string>().rfind("chunk-", 0), 0u);
  EXPECT_TRUE(selector->requests().empty());
}

TEST_F(ServiceFixture, IngestReplacesCorpus) {
  start(nullptr, reply("1. Alpha"));
  httplib::MultipartFormDataItems items = {{"file", "# Alpha\nfirst\n## Beta\nsecond\n", "guide.md", "text/markdown"}};
  auto res = client->Post("/corpus/ingest", items);
  ASSERT_EQ(res->status, 200) << res->body;
  const auto j = json::parse(res->body);
  EXPECT_EQ(j["documents"], 1);
  EXPECT_EQ(j["headings"], 2);
  EXPECT_EQ(holder->snapshot()->toc().headings()[0].heading_id, "guide-0001");
  EXPECT_TRUE(std::filesystem::exists(dir / "corpus/manifest.json"));
  EXPECT_EQ(chat({{"message", "alpha?"}})->status, 200);

  httplib::MultipartFormDataItems empty = {{"file", "no headings at all\n", "plain.md", "text/markdown"}};
  EXPECT_EQ(client->Post("/corpus/ingest", empty)->status, 422);
  EXPECT_EQ(holder->snapshot()->toc().size(), 2u);
  EXPECT_EQ(client->Post("/corpus/ingest", "{}", "application/json")->status, 400);
  httplib::MultipartFormDataItems style = {{"file", "1. One\nx\n", "n.txt", "text/plain"}, {"style", "numbered_headings", "", ""}};
  res = client->Post("/corpus/ingest", style);
  ASSERT_EQ(res->status, 200) << res->body;
  EXPECT_EQ(holder->snapshot()->toc().headings()[0].title, "One");
}
