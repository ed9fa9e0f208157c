#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <pthread.h>
#include <set>
#include <thread>

#include "tocrag/app.hpp"
#include "tocrag/audit_manifest.hpp"
#include "tocrag/embedding_io.hpp"
#include "tocrag/eval.hpp"
#include "tocrag/service.hpp"
#include "tocrag/session_store.hpp"

namespace fs = std::filesystem;
using namespace tocrag;

namespace {

AppConfig config_from(const std::string& path) {
  return path.empty() ? default_config() : load_config(path);
}

std::shared_ptr<const Corpus> try_load_corpus(const AppConfig& config) {
  if (!fs::exists(fs::path(config.corpus_dir) / "manifest.json")) return nullptr;
  return std::make_shared<const Corpus>(load_corpus(config.corpus_dir));
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string::npos ? text.size() : comma;
    if (end > start) out.push_back(text.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int cmd_ingest(const std::string& config_path, const std::vector<std::string>& files,
               const std::string& style_name, const std::string& toc_file,
               const std::string& out_dir) {
  const AppConfig config = config_from(config_path);
  const OutlineStyle style = parse_outline_style(style_name.empty() ? config.outline_style : style_name);
  const std::string toc_text = toc_file.empty() ? "" : read_text_file(toc_file);
  std::vector<Corpus::Input> inputs;
  for (const auto& path : files) {
    Corpus::Input in;
    in.document.doc_id = doc_id_from_filename(path);
    in.document.title = fs::path(path).stem().string();
    try {
      in.document.body = read_text_file(path);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": " + e.what());
    }
    in.toc_file = toc_text;
    inputs.push_back(std::move(in));
  }
  const Corpus corpus = Corpus::build(inputs, style, make_tokenizer(config.tokenizer));
  const std::string target = out_dir.empty() ? config.corpus_dir : out_dir;
  publish_corpus(corpus, target);
  const CorpusSummary s = summarize(corpus, config.pipeline);
  std::cout << "corpus: " << target << "\n"
            << "documents: " << s.documents << "\n"
            << "headings: " << s.headings << "\n"
            << "sections: " << s.sections << "\n"
            << "toc_tokens: " << s.toc_tokens << "\n";
  return 0;
}

struct Runtime {
  AppConfig config;
  std::shared_ptr<const Tokenizer> tokenizer;
  std::shared_ptr<AnswererFactory> factory;
  std::shared_ptr<SessionStore> sessions;
  std::shared_ptr<const Corpus> corpus;
};

Runtime make_runtime(const std::string& config_path) {
  Runtime rt;
  rt.config = config_from(config_path);
  rt.tokenizer = make_tokenizer(rt.config.tokenizer);
  rt.factory = std::make_shared<AnswererFactory>(
      rt.config, build_providers(rt.config, rt.tokenizer), rt.tokenizer);
  rt.sessions = std::make_shared<SessionStore>(rt.config.session_dir,
                                               rt.config.pipeline.memory_budget, rt.tokenizer);
  rt.corpus = try_load_corpus(rt.config);
  return rt;
}

int cmd_chat(const std::string& config_path, const std::string& session_id, const std::string& mode) {
  Runtime rt = make_runtime(config_path);
  auto lookup = rt.sessions->get_or_create(
      session_id.empty() ? std::nullopt : std::optional<std::string>(session_id));
  auto answerer = rt.factory->make(mode, rt.corpus);
  std::cout << "session: " << lookup.session->id << (lookup.created ? " (new)" : " (resumed)")
            << std::endl;
  std::string line;
  while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const AnswerRecord r = answerer->ask(line, *lookup.session);
      std::cout << r.answer << "\n";
      if (r.prompt_used == PromptUsed::casual) {
        std::cout << "[no reference used]\n";
      } else {
        std::cout << "[headings: " << join(r.provenance_titles, "; ") << "]\n";
      }
      std::cout << "[latency: " << std::fixed << std::setprecision(3) << r.latency_seconds
                << "s]" << std::defaultfloat << std::endl;
    } catch (const std::exception& e) {
      std::cout << "error: " << e.what() << std::endl;
    }
  }
  std::cout << std::endl;
  return 0;
}

int cmd_serve(const std::string& config_path, const std::string& host_override, int port_override,
              std::size_t threads) {
  // Block the stop signals before any worker thread exists so only the
  // waiter below receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Runtime rt = make_runtime(config_path);
  const std::string host = host_override.empty() ? rt.config.host : host_override;
  const int port = port_override >= 0 ? port_override : rt.config.port;
  ChatService service({rt.config, rt.factory, rt.sessions, std::make_shared<CorpusHolder>(rt.corpus)},
                      threads);
  const int bound = service.bind(host, port);
  std::cout << "listening on " << host << ":" << bound << std::endl;

  std::thread waiter([&service, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  waiter.detach();
  service.run();
  std::cout << "stopped" << std::endl;
  return 0;
}

int cmd_audit(const std::string& manifest, const std::string& out_dir, std::size_t family_size,
              const std::string& linkage) {
  AuditInputs in = load_audit_manifest(manifest);
  if (family_size > 0) in.options.family_size = family_size;
  if (!linkage.empty()) in.options.linkage = parse_linkage(linkage);
  const AuditReport report = run_audit(in.docsets, in.sources, in.relatedness, in.options);
  write_audit_report(report, out_dir);
  std::cout << format_audit_summary(report);
  return 0;
}

int cmd_eval_run(const std::string& config_path, const std::string& questions_path,
                 const std::string& models, const std::string& out_path, bool enforce_ratio) {
  Runtime rt = make_runtime(config_path);
  const QuestionSet qset = load_questions(questions_path, enforce_ratio);
  std::vector<std::unique_ptr<Answerer>> owned;
  std::vector<Answerer*> answerers;
  for (const auto& mode : split_list(models)) {
    owned.push_back(rt.factory->make(mode, rt.corpus));
    answerers.push_back(owned.back().get());
  }
  if (answerers.empty()) throw std::invalid_argument("no models given");
  SessionPolicy policy;
  policy.memory_budget = rt.config.pipeline.memory_budget;
  const auto records = run_battery(answerers, qset, policy);
  write_text_file(out_path, format_battery_jsonl(records));
  std::size_t failures = 0;
  for (const auto& r : records) failures += r.record.error ? 1 : 0;
  std::cout << "records: " << records.size() << "\nfailures: " << failures << "\n";
  return 0;
}

int cmd_eval_report(const std::string& questions_path, const std::vector<std::string>& score_paths,
                    const std::string& battery_path, const std::string& reference,
                    const std::string& models_arg, const std::string& out_dir,
                    std::size_t family_size, const std::string& mwu_mode, double jitter,
                    bool enforce_ratio) {
  const QuestionSet qset = load_questions(questions_path, enforce_ratio);
  const auto scores = load_scores(score_paths);
  std::vector<std::string> models = split_list(models_arg);
  if (models.empty()) {
    std::set<std::string> seen;
    for (const auto& s : scores) seen.insert(s.model_id);
    if (!seen.count(reference)) throw EvalError("reference model '" + reference + "' has no scores");
    models.push_back(reference);
    for (const auto& m : seen) {
      if (m != reference) models.push_back(m);
    }
  }
  std::map<std::string, std::vector<double>> latencies;
  if (!battery_path.empty()) {
    latencies = latencies_by_model(parse_battery_jsonl(read_text_file(battery_path)));
  }
  ComparisonOptions options;
  options.family_size = family_size;
  options.jitter_epsilon = jitter;
  if (mwu_mode == "exact") {
    options.mwu_mode = MwuMode::exact;
  } else if (mwu_mode == "normal_approx") {
    options.mwu_mode = MwuMode::normal_approx;
  } else if (mwu_mode != "automatic") {
    throw std::invalid_argument("--mwu-mode must be automatic, exact or normal_approx");
  }
  const ComparisonReport report = compare_models(scores, qset, models, reference, latencies, options);
  write_comparison_report(report, out_dir);
  std::cout << format_comparison_markdown(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Table-of-contents retrieval chatbot, chunk baseline, embedding audit and evaluation"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "TOML configuration file")->check(CLI::ExistingFile);

  auto* ingest = app.add_subcommand("ingest", "Parse documents into the corpus directory");
  std::vector<std::string> files;
  std::string style, toc_file, ingest_out;
  ingest->add_option("files", files, "Document files")->required()->check(CLI::ExistingFile);
  ingest->add_option("--style", style, "markdown_hashes | numbered_headings | explicit_toc_file");
  ingest->add_option("--toc-file", toc_file, "Heading list for explicit_toc_file")
      ->check(CLI::ExistingFile);
  ingest->add_option("--out", ingest_out, "Corpus directory (default: corpus_dir)");

  auto* chat = app.add_subcommand("chat", "Interactive chat on stdin/stdout");
  std::string session_id, mode = std::string(kModePromptRag);
  chat->add_option("--session", session_id, "Resume or name a session");
  chat->add_option("--mode", mode, "prompt_rag | c50_v300 | c100_v150 | no_retrieval");

  auto* serve = app.add_subcommand("serve", "Run the HTTP chat service");
  std::string host;
  int port = -1;
  std::size_t threads = 16;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--threads", threads)->check(CLI::PositiveNumber);

  auto* audit = app.add_subcommand("audit", "Embedding representativeness audit");
  std::string manifest, audit_out = "audit_report", linkage;
  std::size_t audit_family = 0;
  audit->add_option("manifest", manifest, "Audit manifest (TOML)")->required();
  audit->add_option("--out", audit_out, "Report directory");
  audit->add_option("--family-size", audit_family, "Bonferroni family size (0: sets x sources)");
  audit->add_option("--linkage", linkage, "average | single | complete");

  auto* eval = app.add_subcommand("eval", "Question battery and score comparison");
  eval->require_subcommand(1);
  bool loose_ratio = false;
  eval->add_flag("--no-ratio-check", loose_ratio, "Skip the question-type ratio check");
  std::string questions;
  auto* run = eval->add_subcommand("run", "Ask the battery to each model");
  std::string models = "prompt_rag", battery_out = "battery.jsonl";
  run->add_option("--questions", questions)->required()->check(CLI::ExistingFile);
  run->add_option("--models", models, "Comma-separated modes");
  run->add_option("--out", battery_out, "Battery JSONL output");

  auto* report = eval->add_subcommand("report", "Compare scored models against a reference");
  std::vector<std::string> scores;
  std::string battery_in, reference = std::string(kModePromptRag), report_models,
                          report_out = "eval_report", mwu_mode = "automatic";
  std::size_t eval_family = 0;
  double jitter = 0.0;
  report->add_option("--questions", questions)->required()->check(CLI::ExistingFile);
  report->add_option("--scores", scores, "Score sheet CSV (repeatable)")->required();
  report->add_option("--battery", battery_in, "Battery JSONL for latencies");
  report->add_option("--reference", reference);
  report->add_option("--models", report_models, "Comma-separated; reference first");
  report->add_option("--out", report_out);
  report->add_option("--family-size", eval_family);
  report->add_option("--mwu-mode", mwu_mode);
  report->add_option("--jitter", jitter)->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(config_path, files, style, toc_file, ingest_out);
    if (*chat) return cmd_chat(config_path, session_id, mode);
    if (*serve) return cmd_serve(config_path, host, port, threads);
    if (*audit) return cmd_audit(manifest, audit_out, audit_family, linkage);
    if (*run) return cmd_eval_run(config_path, questions, models, battery_out, !loose_ratio);
    if (*report) {
      return cmd_eval_report(questions, scores, battery_in, reference, report_models, report_out,
                             eval_family, mwu_mode, jitter, !loose_ratio);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
