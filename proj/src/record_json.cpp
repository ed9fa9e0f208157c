#include "tocrag/record_json.hpp"

namespace tocrag {

nlohmann::ordered_json to_json(const AnswerRecord& r) {
  nlohmann::ordered_json j;
  j["model_id"] = r.model_id;
  j["question"] = r.question;
  j["answer"] = r.answer;
  j["prompt_used"] = std::string(to_string(r.prompt_used));
  j["selection"] = {{"kind", std::string(to_string(r.selection.kind))},
                    {"headings", r.selection.headings},
                    {"raw_response", r.selection.raw_response}};
  j["provenance"] = r.provenance;
  j["provenance_titles"] = r.provenance_titles;
  j["latency_seconds"] = r.latency_seconds;
  j["selection_fallback"] = r.selection_fallback;
  j["reference_truncated"] = r.reference_truncated;
  j["reference_tokens"] = r.reference_tokens;
  if (r.retrieval) {
    j["retrieval"] = {{"chunk_size", r.retrieval->chunk_size},
                      {"k_requested", r.retrieval->k_requested},
                      {"k_used", r.retrieval->k_used},
                      {"k_clamped", r.retrieval->k_clamped},
                      {"lambda", r.retrieval->lambda}};
  }
  if (r.error) j["error"] = *r.error;
  return j;
}

AnswerRecord answer_record_from_json(const nlohmann::json& j) {
  AnswerRecord r;
  r.model_id = j.value("model_id", "");
  r.question = j.at("question").get<std::string>();
  r.answer = j.value("answer", "");
  r.prompt_used =
      j.value("prompt_used", "casual") == "with_reference" ? PromptUsed::with_reference : PromptUsed::casual;
  if (j.contains("selection")) {
    const auto& s = j["selection"];
    r.selection.kind = s.value("kind", "casual") == "selected" ? SelectionKind::selected
                                                                : SelectionKind::casual;
    r.selection.headings = s.value("headings", std::vector<std::string>{});
    r.selection.raw_response = s.value("raw_response", "");
  }
  r.provenance = j.value("provenance", std::vector<std::string>{});
  r.provenance_titles = j.value("provenance_titles", std::vector<std::string>{});
  r.latency_seconds = j.value("latency_seconds", 0.0);
  r.selection_fallback = j.value("selection_fallback", false);
  r.reference_truncated = j.value("reference_truncated", false);
  r.reference_tokens = j.value("reference_tokens", std::size_t{0});
  if (j.contains("retrieval")) {
    const auto& q = j["retrieval"];
    r.retrieval = RetrievalInfo{q.at("chunk_size").get<std::size_t>(),
                                q.at("k_requested").get<std::size_t>(),
                                q.at("k_used").get<std::size_t>(), q.at("k_clamped").get<bool>(),
                                q.at("lambda").get<double>()};
  }
  if (j.contains("error")) r.error = j["error"].get<std::string>();
  return r;
}

}  // namespace tocrag
