#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <sys/wait.h>

#include "support/fixtures.hpp"
#include "tocrag/audit.hpp"
#include "tocrag/eval.hpp"

namespace {

struct Run {
  int status;
  std::string output;
};

/// Runs the CLI with stdout and stderr captured; stdin comes from `input`.
Run run(const std::string& args, const std::string& input = "") {
  fixture::TempDir io;
  fixture::write_file(io / "stdin", input);
  const std::string cmd = std::string("'") + TOCRAG_BINARY + "' " + args + " < '" + (io / "stdin") + "' 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::string out;
  std::array<char, 4096> buf{};
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int rc = pclose(pipe);
  return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, out};
}

class CliFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    fixture::write_file(dir / "book.md", fixture::markdown(fixture::twelve_headings()));
    fixture::write_file(dir / "script.toml", R"(
[[rule]]
match = "Table of Contents"
response = "1. H2"

[[rule]]
match = "."
response = "scripted reply"
)");
    fixture::write_file(dir / "tocrag.toml", R"(
corpus_dir = "corpus"
session_dir = "sessions"
index_dir = "index"

[providers.selector]
script = "script.toml"
[providers.generator]
script = "script.toml"
[providers.casual]
script = "script.toml"
[providers.direct]
script = "script.toml"
)");
    config = "--config '" + (dir / "tocrag.toml") + "' ";
  }

  fixture::TempDir dir;
  std::string config;
};

}  // namespace

TEST_F(CliFixture, IngestPrintsSummary) {
  const auto r = run(config + "ingest '" + (dir / "book.md") + "'");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("documents: 1"), std::string::npos);
  EXPECT_NE(r.output.find("headings: 12"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "corpus/manifest.json"));
}

TEST_F(CliFixture, IngestOfHeadinglessFileFails) {
  fixture::write_file(dir / "empty.md", "");
  const auto r = run(config + "ingest '" + (dir / "empty.md") + "'");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("error:"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "corpus"));
}

TEST_F(CliFixture, ChatAnswersAndResumes) {
  ASSERT_EQ(run(config + "ingest '" + (dir / "book.md") + "'").status, 0);
  const auto first = run(config + "chat --session cli1", "What is topic 2?\n");
  ASSERT_EQ(first.status, 0) << first.output;
  EXPECT_NE(first.output.find("session: cli1 (new)"), std::string::npos);
  EXPECT_NE(first.output.find("scripted reply"), std::string::npos);
  EXPECT_NE(first.output.find("[headings: H2]"), std::string::npos);
  EXPECT_NE(first.output.find("[latency: "), std::string::npos);
  const auto second = run(config + "chat --session cli1 --mode no_retrieval", "again\n");
  EXPECT_NE(second.output.find("session: cli1 (resumed)"), std::string::npos);
  EXPECT_NE(second.output.find("[no reference used]"), std::string::npos);
}

TEST_F(CliFixture, ChatWithoutCorpusFails) {
  EXPECT_NE(run(config + "chat", "hi\n").status, 0);
}

TEST_F(CliFixture, AuditIsDeterministic) {
  const std::vector<std::string> texts = {"herbs treat cold", "herbs treat fever", "pulse in winter", "pulse and organ"};
  tocrag::RelatednessSheet sheet;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    fixture::write_file(dir / ("docs/d" + std::to_string(i) + ".txt"), texts[i]);
    sheet.doc_ids.push_back("d" + std::to_string(i));
    sheet.values.push_back(std::vector<double>(texts.size(), 0.0));
    sheet.values[i][i] = 1;
  }
  sheet.values[0][1] = sheet.values[1][0] = sheet.values[2][3] = sheet.values[3][2] = 1;
  fixture::write_file(dir / "r1.csv", tocrag::format_relatedness_csv(sheet));
  fixture::write_file(dir / "audit.toml",
                      "[[set]]\nlabel = \"A\"\ndocuments = \"docs\"\nraters = [\"r1.csv\"]\n"
                      "[[source]]\nname = \"hashed\"\nstub_dimension = 64\n");
  const auto a = run("audit '" + (dir / "audit.toml") + "' --out '" + (dir / "out1") + "'");
  const auto b = run("audit '" + (dir / "audit.toml") + "' --out '" + (dir / "out2") + "'");
  ASSERT_EQ(a.status, 0) << a.output;
  EXPECT_EQ(fixture::read_file(dir / "out1/summary.csv"), fixture::read_file(dir / "out2/summary.csv"));
  EXPECT_EQ(fixture::read_file(dir / "out1/metadata.json"), fixture::read_file(dir / "out2/metadata.json"));
  const auto missing = run("audit '" + (dir / "nope.toml") + "'");
  EXPECT_NE(missing.status, 0);
  EXPECT_NE(missing.output.find("nope.toml"), std::string::npos);
}

TEST_F(CliFixture, EvalRunAndReport) {
  ASSERT_EQ(run(config + "ingest '" + (dir / "book.md") + "'").status, 0);
  const std::string questions = TOCRAG_SOURCE_DIR "/data/questions.example.json";
  const auto battery = run(config + "eval run --questions '" + questions + "' --models prompt_rag,no_retrieval --out '" +
                           (dir / "battery.jsonl") + "'");
  ASSERT_EQ(battery.status, 0) << battery.output;
  EXPECT_NE(battery.output.find("records: 60"), std::string::npos);
  EXPECT_EQ(tocrag::parse_battery_jsonl(fixture::read_file(dir / "battery.jsonl")).size(), 60u);

  const auto qs = tocrag::load_questions(questions);
  std::string csv = "rater_id,qid,model_id,relevance,readability,informativeness\n";
  for (const auto& q : qs.questions) {
    for (const char* m : {"prompt_rag", "no_retrieval"}) {
      csv += "r1," + std::to_string(q.qid) + "," + m + "," + std::to_string(q.qid % 3) + ",1,2\n";
    }
  }
  fixture::write_file(dir / "scores.csv", csv);
  const auto report = run("eval report --questions '" + questions + "' --scores '" + (dir / "scores.csv") +
                          "' --battery '" + (dir / "battery.jsonl") + "' --models prompt_rag,no_retrieval --out '" +
                          (dir / "report") + "'");
  ASSERT_EQ(report.status, 0) << report.output;
  EXPECT_TRUE(std::filesystem::exists(dir / "report/table5.csv"));

  const auto missing = run("eval report --questions '" + questions + "' --scores '" + (dir / "absent.csv") + "'");
  EXPECT_NE(missing.status, 0);
  fixture::write_file(dir / "partial.csv", csv.substr(0, csv.find('\n', 200)));
  const auto partial = run("eval report --questions '" + questions + "' --scores '" + (dir / "partial.csv") +
                           "' --models prompt_rag,no_retrieval");
  EXPECT_NE(partial.status, 0);
  EXPECT_NE(partial.output.find("error:"), std::string::npos);
}

TEST_F(CliFixture, UnknownCommandFails) {
  EXPECT_NE(run("frobnicate").status, 0);
  EXPECT_NE(run("").status, 0);
}
