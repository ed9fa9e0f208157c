#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tocrag/corpus.hpp"
#include "tocrag/gateway.hpp"
#include "tocrag/memory.hpp"
#include "tocrag/prompts.hpp"

namespace tocrag {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyResponse : public PipelineError {
 public:
  using PipelineError::PipelineError;
};

class NoResolvableHeadings : public PipelineError {
 public:
  using PipelineError::PipelineError;
};

class SelectionUnparseable : public PipelineError {
 public:
  SelectionUnparseable(const std::string& what, std::string raw_response)
      : PipelineError(what), raw_response(std::move(raw_response)) {}
  std::string raw_response;
};

enum class SelectionKind { selected, casual };
enum class PromptUsed { with_reference, casual };

std::string_view to_string(SelectionKind kind);
std::string_view to_string(PromptUsed used);

struct HeadingSelection {
  SelectionKind kind = SelectionKind::casual;
  std::vector<std::string> headings;  // heading ids, importance order
  std::string raw_response;
};

struct Reference {
  std::string text;
  std::vector<std::string> provenance;
  std::size_t token_count = 0;
  bool truncated = false;
};

struct PipelineConfig {
  int n_headings = 5;
  int hierarchical_rounds = 1;
  TocDetail toc_detail = TocDetail::numbered_hierarchical;
  TokenBudget toc_budget{6000, BudgetPurpose::toc_rendering};
  TokenBudget reference_budget{12000, BudgetPurpose::reference};
  TokenBudget memory_budget{1500, BudgetPurpose::memory};
  // Whole context windows; prompts get the window minus max_output_tokens.
  TokenBudget selector_context{8192, BudgetPurpose::full_prompt};
  TokenBudget generator_context{16384, BudgetPurpose::full_prompt};
  TokenBudget casual_context{4096, BudgetPurpose::full_prompt};
  int max_output_tokens = 1024;
  double temperature = 0.0;
  std::string selector_model = "gpt-4-0613";
  std::string generator_model = "gpt-3.5-turbo-16k-0613";
  std::string casual_model = "gpt-3.5-turbo-0613";
  PromptTemplates templates = PromptTemplates::builtin();

  void validate() const;
  std::size_t selector_prompt_limit() const;
  std::size_t generator_prompt_limit() const;
  std::size_t casual_prompt_limit() const;
};

/// Retrieval settings of the chunk baseline, copied into its records.
struct RetrievalInfo {
  std::size_t chunk_size = 0;
  std::size_t k_requested = 0;
  std::size_t k_used = 0;
  bool k_clamped = false;
  double lambda = 0.5;
};

struct AnswerRecord {
  std::string question;
  std::string answer;
  std::string model_id;
  HeadingSelection selection;
  std::vector<std::string> provenance;
  std::vector<std::string> provenance_titles;
  PromptUsed prompt_used = PromptUsed::casual;
  double latency_seconds = 0.0;
  bool selection_fallback = false;
  bool reference_truncated = false;
  std::size_t reference_tokens = 0;
  std::optional<RetrievalInfo> retrieval;
  std::optional<std::string> error;
};

/// One conversation. `mutex` is held for the whole of an answer, so calls on
/// the same session queue up behind each other.
struct Session {
  explicit Session(std::string id, TokenBudget memory_budget = {1500, BudgetPurpose::memory});
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  std::string id;
  ConversationBuffer buffer;
  std::chrono::system_clock::time_point created_at;
  std::chrono::system_clock::time_point updated_at;
  // Called under the lock after the turns of an answer were appended.
  std::function<void(const Session&, const AnswerRecord&)> on_answer;
  mutable std::mutex mutex;
};

HeadingSelection parse_heading_response(std::string_view response, const TocTree& toc,
                                        int n_headings);

/// Runs config.hierarchical_rounds selection calls, each over a narrower ToC.
/// Throws SelectionUnparseable when a round's response cannot be resolved.
HeadingSelection select_headings(std::string_view question, const std::vector<Turn>& history,
                                 const Corpus& corpus, const PipelineConfig& config,
                                 ChatProvider& selector);

/// Sections in selection order joined by a blank line, tail-truncated to the
/// budget. Empty sections are skipped.
Reference assemble_reference(const HeadingSelection& selection, const Corpus& corpus,
                             const TokenBudget& budget, const Tokenizer& tokenizer);

/// Concatenates `parts` in order with blank lines between them and truncates
/// to `max_tokens`. Provenance keeps the labels of the parts that survive.
Reference concat_reference(const std::vector<std::pair<std::string, std::string>>& parts,
                           std::size_t max_tokens, const Tokenizer& tokenizer);

/// The full ToC-selection answer flow for one question.
AnswerRecord answer(std::string_view question, Session& session, const Corpus& corpus,
                    const PipelineConfig& config, const Gateway& gateway);

/// Prompt 1 generation over an already assembled reference, shrinking history
/// and then the reference so the prompt fits the generator window. Shared
/// with the chunk baseline.
struct GenerationResult {
  std::string answer;
  Reference reference;  // what was actually sent
};
GenerationResult generate_with_reference(
    std::string_view question, const std::vector<Turn>& history,
    const std::function<Reference(std::size_t max_tokens)>& make_reference,
    const PipelineConfig& config, ChatProvider& generator, const Tokenizer& tokenizer);

/// Appends the exchange, re-trims the buffer and fires the session hook.
/// Caller holds the session lock.
void commit_turns(Session& session, const AnswerRecord& record, const Tokenizer& tokenizer);

/// Anything that can answer a question inside a session.
class Answerer {
 public:
  virtual ~Answerer() = default;
  virtual std::string model_id() const = 0;
  /// False for plain chat models, which get the no-retrieval question variant.
  virtual bool uses_retrieval() const { return true; }

  /// Locks the session for the duration of the call.
  AnswerRecord ask(std::string_view question, Session& session);

 protected:
  virtual AnswerRecord answer_locked(std::string_view question, Session& session) = 0;
};

class PromptRagAnswerer final : public Answerer {
 public:
  PromptRagAnswerer(std::shared_ptr<const Corpus> corpus, PipelineConfig config, Gateway gateway,
                    std::string model_id = "prompt_rag");
  std::string model_id() const override { return model_id_; }

 protected:
  AnswerRecord answer_locked(std::string_view question, Session& session) override;

 private:
  std::shared_ptr<const Corpus> corpus_;
  PipelineConfig config_;
  Gateway gateway_;
  std::string model_id_;
};

/// Retrieval-free chat: prior turns as chat messages plus the question.
class DirectChatAnswerer final : public Answerer {
 public:
  DirectChatAnswerer(std::string model_id, std::shared_ptr<ChatProvider> provider,
                     std::size_t context_tokens, int max_output_tokens,
                     std::shared_ptr<const Tokenizer> tokenizer);
  std::string model_id() const override { return model_id_; }
  bool uses_retrieval() const override { return false; }

 protected:
  AnswerRecord answer_locked(std::string_view question, Session& session) override;

 private:
  std::string model_id_;
  std::shared_ptr<ChatProvider> provider_;
  std::size_t context_tokens_;
  int max_output_tokens_;
  std::shared_ptr<const Tokenizer> tokenizer_;
};

}  // namespace tocrag
