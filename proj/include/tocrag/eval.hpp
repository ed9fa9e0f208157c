#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tocrag/pipeline.hpp"
#include "tocrag/stats.hpp"

namespace tocrag {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DuplicateQid : public EvalError {
 public:
  using EvalError::EvalError;
};
class DanglingDependency : public EvalError {
 public:
  using EvalError::EvalError;
};
class RatioViolation : public EvalError {
 public:
  using EvalError::EvalError;
};
class IncompleteScores : public EvalError {
 public:
  using EvalError::EvalError;
};
class InvalidScore : public EvalError {
 public:
  using EvalError::EvalError;
};

enum class QuestionType { direct_retrieval, comprehensive_understanding, functional_robustness };
inline constexpr std::array<QuestionType, 3> kQuestionTypes{
    QuestionType::direct_retrieval, QuestionType::comprehensive_understanding,
    QuestionType::functional_robustness};

std::string_view to_string(QuestionType type);
QuestionType parse_question_type(std::string_view name);

struct Question {
  int qid = 0;
  std::string text;
  QuestionType qtype = QuestionType::direct_retrieval;
  std::string subtype;
  std::optional<std::string> no_rag_variant;
  std::optional<int> depends_on;
};

struct QuestionSet {
  std::vector<Question> questions;  // sorted by qid
  std::array<int, 3> declared_ratio{4, 4, 2};

  const Question* find(int qid) const noexcept;
};

/// Checks qid uniqueness, that every dependency points to an earlier qid
/// present in the set, and (when enforcing) that the per-type counts are
/// exactly proportional to the declared ratio. Returns questions in qid order.
QuestionSet validate_questions(QuestionSet set, bool enforce_ratio = true);

/// JSON: {"ratio": [4, 4, 2], "questions": [{"qid": 1, "text": "...",
/// "qtype": "direct_retrieval", "subtype": "factual", "no_rag_variant": "...",
/// "depends_on": 8}, ...]}
QuestionSet parse_questions(std::string_view json_text, bool enforce_ratio = true);
QuestionSet load_questions(const std::string& path, bool enforce_ratio = true);

struct SessionPolicy {
  // One persistent session per model across the whole battery.
  bool persistent = true;
  TokenBudget memory_budget{1500, BudgetPurpose::memory};
};

struct BatteryRecord {
  std::string model_id;
  int qid = 0;
  std::string asked;  // text actually sent (may be the no-retrieval variant)
  AnswerRecord record;
};

/// Asks every question in qid order, per model. Retrieval-free models get
/// the no_rag_variant when one exists. Failures are kept with an error.
std::vector<BatteryRecord> run_battery(const std::vector<Answerer*>& models,
                                       const QuestionSet& questions,
                                       const SessionPolicy& policy = {});

std::string format_battery_jsonl(const std::vector<BatteryRecord>& records);
std::vector<BatteryRecord> parse_battery_jsonl(std::string_view text);

struct ScoreRecord {
  std::string rater_id;
  int qid = 0;
  std::string model_id;
  int relevance = 0;
  int readability = 0;
  int informativeness = 0;
};

/// CSV with header rater_id,qid,model_id,relevance,readability,informativeness.
std::vector<ScoreRecord> parse_scores(std::string_view csv_text);
std::vector<ScoreRecord> load_scores(const std::vector<std::string>& paths);

inline constexpr std::array<std::string_view, 3> kCriteria{"relevance", "readability",
                                                           "informativeness"};

struct ModelSummary {
  std::string model_id;
  std::array<double, 3> criterion_means{};  // kCriteria order
  std::array<double, 3> qtype_means{};      // kQuestionTypes order; per-question summed score
  std::array<std::size_t, 3> qtype_questions{};
  std::optional<double> latency_mean;
  std::size_t cells = 0;  // rater x question pairs
};

struct TestCell {
  std::string model_id;
  std::string family;  // "criterion", "qtype" or "latency"
  std::string name;    // criterion, question type or "latency_seconds"
  std::string test;    // "welch_t" or "mann_whitney_u"
  double statistic = 0.0;
  std::optional<double> df;
  std::string mode;
  double p = 1.0;
  double p_adjusted = 1.0;
  std::string tier;  // "", "a" < 0.05, "b" < 0.01, "c" < 0.005, "d" < 0.001
  std::optional<std::string> error;
};

struct ComparisonOptions {
  // 0: number of models compared against the reference (one family per
  // criterion / question type).
  std::size_t family_size = 0;
  MwuMode mwu_mode = MwuMode::automatic;
  double jitter_epsilon = 0.0;
};

struct ComparisonReport {
  std::string reference_model;
  std::vector<ModelSummary> summaries;
  std::vector<TestCell> tests;
  std::size_t family_size = 0;
  ComparisonOptions options;
};

std::string comparison_tier(double p_adjusted);

/// Per-model means over every (rater, question) cell. Throws IncompleteScores
/// when some model lacks a score for a (rater, question) seen anywhere.
/// `latencies` maps model id to per-answer seconds (optional).
std::vector<ModelSummary> aggregate(const std::vector<ScoreRecord>& scores,
                                    const QuestionSet& questions,
                                    const std::vector<std::string>& models,
                                    const std::map<std::string, std::vector<double>>& latencies = {});

/// Welch per criterion on pooled (rater x question) scores and on latency;
/// Mann-Whitney U per question type on per-question summed scores averaged
/// over raters. Bonferroni within each (family, name).
ComparisonReport compare_models(const std::vector<ScoreRecord>& scores,
                                const QuestionSet& questions,
                                const std::vector<std::string>& models,
                                const std::string& reference_model,
                                const std::map<std::string, std::vector<double>>& latencies = {},
                                const ComparisonOptions& options = {});

/// report.md, table5.csv, qtypes.csv, tests.csv and metadata.json.
void write_comparison_report(const ComparisonReport& report, const std::string& directory);
std::string format_comparison_markdown(const ComparisonReport& report);

std::map<std::string, std::vector<double>> latencies_by_model(
    const std::vector<BatteryRecord>& records);

}  // namespace tocrag
