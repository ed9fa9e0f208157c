#include "tocrag/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <set>
#include <tuple>
#include <json.hpp>

#include "tocrag/embedding_io.hpp"
#include "tocrag/record_json.hpp"

namespace tocrag {

namespace {

std::string fmt(double v, const char* spec = "%.12g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::size_t type_index(QuestionType t) { return static_cast<std::size_t>(t); }

int parse_int(const std::string& s, const char* what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw InvalidScore(std::string(what) + " is not an integer: '" + s + "'");
  return v;
}

// (rater, qid, model) -> record
using ScoreKey = std::tuple<std::string, int, std::string>;

std::map<ScoreKey, const ScoreRecord*> index_scores(const std::vector<ScoreRecord>& scores) {
  std::map<ScoreKey, const ScoreRecord*> out;
  for (const ScoreRecord& s : scores) {
    if (!out.emplace(ScoreKey{s.rater_id, s.qid, s.model_id}, &s).second) {
      throw InvalidScore("duplicate score for rater " + s.rater_id + ", qid " +
                         std::to_string(s.qid) + ", model " + s.model_id);
    }
  }
  return out;
}

std::vector<std::string> raters_of(const std::vector<ScoreRecord>& scores) {
  std::set<std::string> raters;
  for (const ScoreRecord& s : scores) raters.insert(s.rater_id);
  return {raters.begin(), raters.end()};
}

int criterion(const ScoreRecord& s, std::size_t c) {
  return c == 0 ? s.relevance : (c == 1 ? s.readability : s.informativeness);
}

struct ModelData {
  std::array<std::vector<double>, 3> pooled;        // per criterion, rater x question
  std::array<std::vector<double>, 3> per_question;  // per qtype, mean over raters of summed score
};

ModelData collect(const std::map<ScoreKey, const ScoreRecord*>& index,
                  const std::vector<std::string>& raters, const QuestionSet& questions,
                  const std::string& model) {
  ModelData d;
  for (const Question& q : questions.questions) {
    double summed = 0;
    for (const std::string& rater : raters) {
      auto it = index.find(ScoreKey{rater, q.qid, model});
      if (it == index.end()) {
        throw IncompleteScores("no score from rater " + rater + " for qid " +
                               std::to_string(q.qid) + ", model " + model);
      }
      for (std::size_t c = 0; c < 3; ++c) {
        d.pooled[c].push_back(criterion(*it->second, c));
        summed += criterion(*it->second, c);
      }
    }
    d.per_question[type_index(q.qtype)].push_back(summed / static_cast<double>(raters.size()));
  }
  return d;
}

TestCell make_cell(const std::string& model, std::string family, std::string name) {
  TestCell cell;
  cell.model_id = model;
  cell.family = std::move(family);
  cell.name = std::move(name);
  return cell;
}

void check_scores(const std::vector<ScoreRecord>& scores, const QuestionSet& questions) {
  for (const ScoreRecord& s : scores) {
    if (!questions.find(s.qid)) {
      throw InvalidScore("score for unknown qid " + std::to_string(s.qid));
    }
  }
}

}  // namespace

std::string_view to_string(QuestionType type) {
  switch (type) {
    case QuestionType::direct_retrieval: return "direct_retrieval";
    case QuestionType::comprehensive_understanding: return "comprehensive_understanding";
    case QuestionType::functional_robustness: return "functional_robustness";
  }
  return "?";
}

QuestionType parse_question_type(std::string_view name) {
  for (QuestionType t : kQuestionTypes) {
    if (to_string(t) == name) return t;
  }
  throw EvalError("unknown question type: " + std::string(name));
}

const Question* QuestionSet::find(int qid) const noexcept {
  for (const Question& q : questions) {
    if (q.qid == qid) return &q;
  }
  return nullptr;
}

QuestionSet validate_questions(QuestionSet set, bool enforce_ratio) {
  std::sort(set.questions.begin(), set.questions.end(),
            [](const Question& a, const Question& b) { return a.qid < b.qid; });
  std::array<int, 3> counts{};
  for (std::size_t i = 0; i < set.questions.size(); ++i) {
    const Question& q = set.questions[i];
    if (i > 0 && set.questions[i - 1].qid == q.qid) {
      throw DuplicateQid("duplicate qid " + std::to_string(q.qid));
    }
    if (q.text.empty()) throw EvalError("question " + std::to_string(q.qid) + " has no text");
    ++counts[type_index(q.qtype)];
  }
  for (const Question& q : set.questions) {
    if (!q.depends_on) continue;
    if (*q.depends_on >= q.qid || !set.find(*q.depends_on)) {
      throw DanglingDependency("question " + std::to_string(q.qid) + " depends on " +
                               std::to_string(*q.depends_on) +
                               ", which is not an earlier question in the set");
    }
  }
  if (enforce_ratio) {
    const int ratio_total = set.declared_ratio[0] + set.declared_ratio[1] + set.declared_ratio[2];
    const int total = counts[0] + counts[1] + counts[2];
    if (ratio_total <= 0) throw RatioViolation("declared ratio sums to zero");
    for (std::size_t t = 0; t < 3; ++t) {
      if (counts[t] * ratio_total != total * set.declared_ratio[t]) {
        throw RatioViolation("question type counts " + std::to_string(counts[0]) + "/" +
                             std::to_string(counts[1]) + "/" + std::to_string(counts[2]) +
                             " are not in the ratio " + std::to_string(set.declared_ratio[0]) +
                             ":" + std::to_string(set.declared_ratio[1]) + ":" +
                             std::to_string(set.declared_ratio[2]));
      }
    }
  }
  return set;
}

QuestionSet parse_questions(std::string_view json_text, bool enforce_ratio) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(std::string("question file is not valid JSON: ") + e.what());
  }
  QuestionSet set;
  if (j.contains("ratio")) {
    const auto r = j["ratio"].get<std::vector<int>>();
    if (r.size() != 3) throw EvalError("ratio must have three entries");
    set.declared_ratio = {r[0], r[1], r[2]};
  }
  for (const auto& e : j.at("questions")) {
    Question q;
    q.qid = e.at("qid").get<int>();
    q.text = e.at("text").get<std::string>();
    q.qtype = parse_question_type(e.at("qtype").get<std::string>());
    q.subtype = e.value("subtype", "");
    if (e.contains("no_rag_variant") && !e["no_rag_variant"].is_null()) {
      q.no_rag_variant = e["no_rag_variant"].get<std::string>();
    }
    if (e.contains("depends_on") && !e["depends_on"].is_null()) {
      q.depends_on = e["depends_on"].get<int>();
    }
    set.questions.push_back(std::move(q));
  }
  return validate_questions(std::move(set), enforce_ratio);
}

QuestionSet load_questions(const std::string& path, bool enforce_ratio) {
  try {
    return parse_questions(read_text_file(path), enforce_ratio);
  } catch (const EvalError& e) {
    throw;
  } catch (const std::exception& e) {
    throw EvalError(path + ": " + e.what());
  }
}

std::vector<BatteryRecord> run_battery(const std::vector<Answerer*>& models,
                                       const QuestionSet& questions,
                                       const SessionPolicy& policy) {
  std::vector<BatteryRecord> out;
  for (Answerer* model : models) {
    auto session = std::make_unique<Session>(model->model_id(), policy.memory_budget);
    for (const Question& q : questions.questions) {
      if (!policy.persistent) {
        session = std::make_unique<Session>(model->model_id(), policy.memory_budget);
      }
      BatteryRecord br;
      br.model_id = model->model_id();
      br.qid = q.qid;
      br.asked = !model->uses_retrieval() && q.no_rag_variant ? *q.no_rag_variant : q.text;
      const auto start = std::chrono::steady_clock::now();
      try {
        br.record = model->ask(br.asked, *session);
      } catch (const std::exception& e) {
        br.record.question = br.asked;
        br.record.model_id = br.model_id;
        br.record.error = e.what();
        br.record.latency_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      out.push_back(std::move(br));
    }
  }
  return out;
}

std::string format_battery_jsonl(const std::vector<BatteryRecord>& records) {
  std::string out;
  for (const BatteryRecord& r : records) {
    nlohmann::ordered_json j;
    j["model_id"] = r.model_id;
    j["qid"] = r.qid;
    j["asked"] = r.asked;
    j["record"] = to_json(r.record);
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<BatteryRecord> parse_battery_jsonl(std::string_view text) {
  std::vector<BatteryRecord> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto j = nlohmann::json::parse(line);
    BatteryRecord r;
    r.model_id = j.at("model_id").get<std::string>();
    r.qid = j.at("qid").get<int>();
    r.asked = j.value("asked", "");
    r.record = answer_record_from_json(j.at("record"));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ScoreRecord> parse_scores(std::string_view csv_text) {
  const auto rows = csv::parse(csv_text);
  const std::vector<std::string> header{"rater_id",  "qid",         "model_id",
                                        "relevance", "readability", "informativeness"};
  if (rows.empty() || rows.front() != header) {
    throw InvalidScore("score sheet header must be " + csv::join(header));
  }
  std::vector<ScoreRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw InvalidScore("score row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                         " fields");
    }
    ScoreRecord s{row[0], parse_int(row[1], "qid"), row[2], parse_int(row[3], "relevance"),
                  parse_int(row[4], "readability"), parse_int(row[5], "informativeness")};
    for (int v : {s.relevance, s.readability, s.informativeness}) {
      if (v < 0 || v > 2) {
        throw InvalidScore("score row " + std::to_string(r) + ": scores must be 0, 1 or 2");
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ScoreRecord> load_scores(const std::vector<std::string>& paths) {
  std::vector<ScoreRecord> out;
  for (const std::string& path : paths) {
    try {
      for (auto& s : parse_scores(read_text_file(path))) out.push_back(std::move(s));
    } catch (const InvalidScore& e) {
      throw InvalidScore(path + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw EvalError(e.what());
    }
  }
  return out;
}

std::string comparison_tier(double p) {
  if (p < 0.001) return "d";
  if (p < 0.005) return "c";
  if (p < 0.01) return "b";
  if (p < 0.05) return "a";
  return "";
}

std::vector<ModelSummary> aggregate(const std::vector<ScoreRecord>& scores,
                                    const QuestionSet& questions,
                                    const std::vector<std::string>& models,
                                    const std::map<std::string, std::vector<double>>& latencies) {
  check_scores(scores, questions);
  const auto index = index_scores(scores);
  const auto raters = raters_of(scores);
  if (raters.empty()) throw IncompleteScores("no scores");
  std::vector<ModelSummary> out;
  for (const std::string& model : models) {
    const ModelData d = collect(index, raters, questions, model);
    ModelSummary s;
    s.model_id = model;
    s.cells = d.pooled[0].size();
    for (std::size_t c = 0; c < 3; ++c) s.criterion_means[c] = mean(d.pooled[c]);
    for (std::size_t t = 0; t < 3; ++t) {
      s.qtype_questions[t] = d.per_question[t].size();
      s.qtype_means[t] = d.per_question[t].empty() ? 0.0 : mean(d.per_question[t]);
    }
    auto it = latencies.find(model);
    if (it != latencies.end() && !it->second.empty()) s.latency_mean = mean(it->second);
    out.push_back(std::move(s));
  }
  return out;
}

ComparisonReport compare_models(const std::vector<ScoreRecord>& scores,
                                const QuestionSet& questions,
                                const std::vector<std::string>& models,
                                const std::string& reference_model,
                                const std::map<std::string, std::vector<double>>& latencies,
                                const ComparisonOptions& options) {
  if (std::find(models.begin(), models.end(), reference_model) == models.end()) {
    throw EvalError("reference model " + reference_model + " is not among the compared models");
  }
  ComparisonReport report;
  report.reference_model = reference_model;
  report.options = options;
  report.summaries = aggregate(scores, questions, models, latencies);
  report.family_size = options.family_size ? options.family_size : models.size() - 1;

  const auto index = index_scores(scores);
  const auto raters = raters_of(scores);
  const ModelData ref = collect(index, raters, questions, reference_model);
  const auto ref_latency = latencies.find(reference_model);

  const auto welch_cell = [&](TestCell cell, const std::vector<double>& x,
                              const std::vector<double>& y) {
    cell.test = "welch_t";
    try {
      const WelchResult w = welch_t_test(x, y, options.jitter_epsilon);
      cell.statistic = w.t;
      cell.df = w.df;
      cell.p = w.p;
      cell.mode = w.jittered ? "jittered" : "plain";
    } catch (const StatsError& e) {
      cell.error = e.what();
    }
    return cell;
  };

  for (const std::string& model : models) {
    if (model == reference_model) continue;
    const ModelData other = collect(index, raters, questions, model);
    for (std::size_t c = 0; c < 3; ++c) {
      report.tests.push_back(welch_cell(make_cell(model, "criterion", std::string(kCriteria[c])),
                                        ref.pooled[c], other.pooled[c]));
    }
    const auto lat = latencies.find(model);
    if (ref_latency != latencies.end() && lat != latencies.end() &&
        ref_latency->second.size() >= 2 && lat->second.size() >= 2) {
      report.tests.push_back(
          welch_cell(make_cell(model, "latency", "latency_seconds"), ref_latency->second, lat->second));
    }
    for (QuestionType t : kQuestionTypes) {
      TestCell cell = make_cell(model, "qtype", std::string(to_string(t)));
      cell.test = "mann_whitney_u";
      const auto& x = ref.per_question[type_index(t)];
      const auto& y = other.per_question[type_index(t)];
      try {
        if (x.empty()) throw StatsError("no questions of this type");
        const MwuResult m = mann_whitney_u(x, y, options.mwu_mode);
        cell.statistic = m.u;
        cell.p = m.p;
        cell.mode = std::string(to_string(m.mode));
      } catch (const StatsError& e) {
        cell.error = e.what();
      }
      report.tests.push_back(std::move(cell));
    }
  }

  for (TestCell& cell : report.tests) {
    if (cell.error) continue;
    cell.p_adjusted = bonferroni(std::span<const double>(&cell.p, 1), report.family_size)[0];
    cell.tier = comparison_tier(cell.p_adjusted);
  }
  return report;
}

std::map<std::string, std::vector<double>> latencies_by_model(
    const std::vector<BatteryRecord>& records) {
  std::map<std::string, std::vector<double>> out;
  for (const BatteryRecord& r : records) {
    if (!r.record.error) out[r.model_id].push_back(r.record.latency_seconds);
  }
  return out;
}

namespace {

const TestCell* find_test(const ComparisonReport& report, const std::string& model,
                          std::string_view family, std::string_view name) {
  for (const TestCell& t : report.tests) {
    if (t.model_id == model && t.family == family && t.name == name) return &t;
  }
  return nullptr;
}

std::string marker(const TestCell* t) {
  if (!t) return "";
  if (t->error) return "!";
  return t->tier;
}

}  // namespace

std::string format_comparison_markdown(const ComparisonReport& report) {
  std::string md = "# Model comparison\n\nReference model: `" + report.reference_model + "`\n\n";
  md += "| Model | Relevance | Readability | Informativeness | Response time (s) |\n";
  md += "|---|---|---|---|---|\n";
  for (const ModelSummary& s : report.summaries) {
    md += "| " + s.model_id;
    for (std::size_t c = 0; c < 3; ++c) {
      md += " | " + fmt(s.criterion_means[c], "%.3f");
      const std::string m = marker(find_test(report, s.model_id, "criterion", kCriteria[c]));
      if (!m.empty()) md += " ^" + m;
    }
    md += " | ";
    if (s.latency_mean) {
      md += fmt(*s.latency_mean, "%.3f");
      const std::string m = marker(find_test(report, s.model_id, "latency", "latency_seconds"));
      if (!m.empty()) md += " ^" + m;
    } else {
      md += "-";
    }
    md += " |\n";
  }
  md += "\n| Model | Direct retrieval | Comprehensive understanding | Functional robustness |\n";
  md += "|---|---|---|---|\n";
  for (const ModelSummary& s : report.summaries) {
    md += "| " + s.model_id;
    for (QuestionType t : kQuestionTypes) {
      md += " | " + fmt(s.qtype_means[type_index(t)], "%.3f");
      const std::string m = marker(find_test(report, s.model_id, "qtype", to_string(t)));
      if (!m.empty()) md += " ^" + m;
    }
    md += " |\n";
  }
  md += "\nSuperscripts mark Bonferroni-adjusted significance against the reference model: "
        "^a p < 0.05, ^b p < 0.01, ^c p < 0.005, ^d p < 0.001; ^! marks a test that could not "
        "be computed (see tests.csv).\n\n";
  md += "Family size " + std::to_string(report.family_size) +
        " per criterion and per question type. Criteria use Welch t-tests on pooled "
        "(rater x question) scores; question types use Mann-Whitney U on per-question summed "
        "scores averaged over raters (mode " +
        std::string(to_string(report.options.mwu_mode)) + ").\n";
  return md;
}

void write_comparison_report(const ComparisonReport& report, const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  write_text_file((dir / "report.md").string(), format_comparison_markdown(report));

  std::string table5 =
      "model_id,relevance,relevance_tier,readability,readability_tier,informativeness,"
      "informativeness_tier,latency_seconds,latency_tier\n";
  std::string qtypes = "model_id,qtype,questions,mean_summed_score,tier\n";
  for (const ModelSummary& s : report.summaries) {
    std::vector<std::string> row{s.model_id};
    for (std::size_t c = 0; c < 3; ++c) {
      row.push_back(fmt(s.criterion_means[c]));
      row.push_back(marker(find_test(report, s.model_id, "criterion", kCriteria[c])));
    }
    row.push_back(s.latency_mean ? fmt(*s.latency_mean) : "");
    row.push_back(marker(find_test(report, s.model_id, "latency", "latency_seconds")));
    table5 += csv::join(row) + "\n";
    for (QuestionType t : kQuestionTypes) {
      qtypes += csv::join({s.model_id, std::string(to_string(t)),
                           std::to_string(s.qtype_questions[type_index(t)]),
                           fmt(s.qtype_means[type_index(t)]),
                           marker(find_test(report, s.model_id, "qtype", to_string(t)))}) +
                "\n";
    }
  }
  write_text_file((dir / "table5.csv").string(), table5);
  write_text_file((dir / "qtypes.csv").string(), qtypes);

  std::string tests =
      "model_id,family,name,test,statistic,df,mode,p,p_adjusted,tier,error\n";
  for (const TestCell& t : report.tests) {
    tests += csv::join({t.model_id, t.family, t.name, t.test, fmt(t.statistic),
                        t.df ? fmt(*t.df) : "", t.mode, t.error ? "" : fmt(t.p),
                        t.error ? "" : fmt(t.p_adjusted), t.tier, t.error.value_or("")}) +
             "\n";
  }
  write_text_file((dir / "tests.csv").string(), tests);

  nlohmann::ordered_json meta;
  meta["reference_model"] = report.reference_model;
  meta["correction"] = "bonferroni";
  meta["family_size"] = report.family_size;
  meta["family_definition"] = "one family per criterion and per question type across compared models";
  meta["t_test"] = "welch (unequal variances) on pooled rater x question scores";
  meta["mann_whitney_mode"] = std::string(to_string(report.options.mwu_mode));
  meta["jitter_epsilon"] = report.options.jitter_epsilon;
  meta["session_policy"] = "one persistent session per model, questions in qid order";
  meta["tiers"] = {{"a", "p < 0.05"}, {"b", "p < 0.01"}, {"c", "p < 0.005"}, {"d", "p < 0.001"}};
  write_text_file((dir / "metadata.json").string(), meta.dump(2) + "\n");
}

}  // namespace tocrag
