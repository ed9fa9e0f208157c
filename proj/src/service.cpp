#include "tocrag/service.hpp"

#include <httplib.h>

#include <json.hpp>
#include <mutex>

#include "tocrag/corpus.hpp"

namespace tocrag {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  ordered_json body;
  body["error"] = message;
  send_json(res, status, body);
}

ordered_json heading_json(const Heading& h) {
  ordered_json j;
  j["heading_id"] = h.heading_id;
  j["title"] = h.title;
  j["depth"] = h.depth;
  j["parent"] = h.parent ? ordered_json(*h.parent) : ordered_json(nullptr);
  j["doc_id"] = h.doc_id;
  return j;
}

bool is_mode(const std::string& mode) {
  for (const auto& m : all_modes()) {
    if (m == mode) return true;
  }
  return false;
}

}  // namespace

struct ChatService::Impl {
  ServiceDeps deps;
  httplib::Server server;
  std::mutex ingest_mutex;

  Impl(ServiceDeps d, std::size_t threads) : deps(std::move(d)) {
    const std::size_t n = threads == 0 ? 1 : threads;
    server.new_task_queue = [n] { return new httplib::ThreadPool(n); };
    server.set_payload_max_length(64u << 20);
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) { health(res); });
    server.Post("/chat", [this](const httplib::Request& req, httplib::Response& res) {
      chat(req, res);
    });
    server.Get("/corpus/toc", [this](const httplib::Request& req, httplib::Response& res) {
      toc(req, res);
    });
    server.Get("/sessions/:id", [this](const httplib::Request& req, httplib::Response& res) {
      session(req, res);
    });
    server.Post("/corpus/ingest", [this](const httplib::Request& req, httplib::Response& res) {
      ingest(req, res);
    });
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            send_error(res, 500, e.what());
          } catch (...) {
            send_error(res, 500, "unknown error");
          }
        });
  }

  void health(httplib::Response& res) {
    ordered_json j;
    j["status"] = "ok";
    j["version"] = std::string(kVersion);
    j["session_concurrency"] = "serialized";
    j["modes"] = all_modes();
    if (auto corpus = deps.corpus->snapshot()) {
      j["corpus"] = {{"documents", corpus->documents().size()},
                     {"headings", corpus->toc().size()}};
    } else {
      j["corpus"] = nullptr;
    }
    send_json(res, 200, j);
  }

  void chat(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return send_error(res, 400, "request body is not valid JSON");
    }
    if (!body.is_object()) return send_error(res, 400, "request body must be a JSON object");
    if (!body.contains("message") || !body["message"].is_string()) {
      return send_error(res, 400, "'message' must be a string");
    }
    const std::string message = body["message"].get<std::string>();
    if (message.find_first_not_of(" \t\r\n") == std::string::npos) {
      return send_error(res, 400, "'message' is empty");
    }
    std::string mode(kModePromptRag);
    if (body.contains("mode") && !body["mode"].is_null()) {
      if (!body["mode"].is_string()) return send_error(res, 400, "'mode' must be a string");
      mode = body["mode"].get<std::string>();
    }
    if (!is_mode(mode)) return send_error(res, 400, "unknown mode '" + mode + "'");
    std::optional<std::string> session_id;
    if (body.contains("session_id") && !body["session_id"].is_null()) {
      if (!body["session_id"].is_string()) return send_error(res, 400, "'session_id' must be a string");
      session_id = body["session_id"].get<std::string>();
    }

    auto corpus = deps.corpus->snapshot();
    if (!corpus && mode != kModeNoRetrieval) {
      return send_error(res, 409, "no corpus has been ingested");
    }
    SessionStore::Lookup lookup;
    try {
      lookup = deps.sessions->get_or_create(session_id);
    } catch (const InvalidSessionId& e) {
      return send_error(res, 400, e.what());
    }

    AnswerRecord record;
    try {
      auto answerer = deps.factory->make(mode, corpus);
      record = answerer->ask(message, *lookup.session);
    } catch (const BudgetUnsatisfiable& e) {
      return send_error(res, 422, e.what());
    } catch (const GatewayError& e) {
      return send_error(res, 502, e.what());
    } catch (const PipelineError& e) {
      return send_error(res, 502, e.what());
    } catch (const std::invalid_argument& e) {
      return send_error(res, 400, e.what());
    }

    ordered_json j;
    j["session_id"] = lookup.session->id;
    j["created"] = lookup.created;
    j["mode"] = mode;
    j["answer"] = record.answer;
    j["selected_headings"] = record.provenance_titles;
    j["provenance"] = record.provenance;
    j["prompt_used"] = std::string(to_string(record.prompt_used));
    j["latency_seconds"] = record.latency_seconds;
    j["selection_fallback"] = record.selection_fallback;
    j["reference_truncated"] = record.reference_truncated;
    send_json(res, 200, j);
  }

  void toc(const httplib::Request& req, httplib::Response& res) {
    auto corpus = deps.corpus->snapshot();
    if (!corpus) return send_error(res, 409, "no corpus has been ingested");
    TocDetail detail = deps.config.pipeline.toc_detail;
    if (req.has_param("detail")) {
      try {
        detail = parse_toc_detail(req.get_param_value("detail"));
      } catch (const std::exception& e) {
        return send_error(res, 400, e.what());
      }
    }
    ordered_json j;
    j["detail"] = std::string(to_string(detail));
    j["rendered"] = render_toc(corpus->toc(), detail);
    j["headings"] = ordered_json::array();
    for (const auto& h : corpus->toc().headings()) j["headings"].push_back(heading_json(h));
    send_json(res, 200, j);
  }

  void session(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    auto log = deps.sessions->history(id);
    if (!log) return send_error(res, 404, "unknown session '" + id + "'");
    ordered_json j;
    j["session_id"] = id;
    j["turns"] = ordered_json::array();
    for (const auto& e : *log) j["turns"].push_back(to_json(e));
    send_json(res, 200, j);
  }

  void ingest(const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data() || !req.has_file("file")) {
      return send_error(res, 400, "expected multipart form data with a 'file' part");
    }
    OutlineStyle style;
    try {
      style = parse_outline_style(req.has_file("style") ? req.get_file_value("style").content
                                                        : deps.config.outline_style);
    } catch (const std::exception& e) {
      return send_error(res, 400, e.what());
    }
    const std::string toc_file = req.has_file("toc_file") ? req.get_file_value("toc_file").content : "";

    std::vector<Corpus::Input> inputs;
    for (const auto& part : req.get_file_values("file")) {
      Corpus::Input in;
      in.document.doc_id = doc_id_from_filename(part.filename.empty() ? part.name : part.filename);
      in.document.title = in.document.doc_id;
      in.document.body = part.content;
      in.toc_file = toc_file;
      inputs.push_back(std::move(in));
    }

    std::lock_guard lock(ingest_mutex);
    std::shared_ptr<const Corpus> corpus;
    try {
      corpus = std::make_shared<const Corpus>(
          Corpus::build(inputs, style, make_tokenizer(deps.config.tokenizer)));
    } catch (const CorpusError& e) {
      return send_error(res, 422, e.what());
    }
    if (!deps.config.corpus_dir.empty()) publish_corpus(*corpus, deps.config.corpus_dir);
    deps.corpus->replace(corpus);

    const CorpusSummary s = summarize(*corpus, deps.config.pipeline);
    ordered_json j;
    j["documents"] = s.documents;
    j["headings"] = s.headings;
    j["sections"] = s.sections;
    j["toc_tokens"] = s.toc_tokens;
    send_json(res, 200, j);
  }
};

ChatService::ChatService(ServiceDeps deps, std::size_t threads)
    : impl_(std::make_unique<Impl>(std::move(deps), threads)) {}

ChatService::~ChatService() { stop(); }

int ChatService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ChatService::run() {
  if (!impl_->server.listen_after_bind() && impl_->server.is_running()) {
    throw std::runtime_error("server stopped unexpectedly");
  }
}

void ChatService::stop() {
  if (impl_) impl_->server.stop();
}

void ChatService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace tocrag
