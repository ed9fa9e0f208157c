#include "tocrag/pipeline.hpp"

#include <algorithm>
#include <regex>
#include <set>

namespace tocrag {

std::string_view to_string(SelectionKind kind) {
  return kind == SelectionKind::selected ? "selected" : "casual";
}

std::string_view to_string(PromptUsed used) {
  return used == PromptUsed::with_reference ? "with_reference" : "casual";
}

void PipelineConfig::validate() const {
  if (n_headings <= 0) throw std::invalid_argument("n_headings must be positive");
  if (hierarchical_rounds < 1) throw std::invalid_argument("hierarchical_rounds must be >= 1");
  if (max_output_tokens <= 0) throw std::invalid_argument("max_output_tokens must be positive");
  if (temperature < 0) throw std::invalid_argument("temperature must be >= 0");
  const auto out = static_cast<std::size_t>(max_output_tokens);
  for (const TokenBudget* b : {&selector_context, &generator_context, &casual_context}) {
    if (b->max_tokens() <= out) {
      throw std::invalid_argument("context window must exceed max_output_tokens");
    }
  }
}

std::size_t PipelineConfig::selector_prompt_limit() const {
  return selector_context.max_tokens() - static_cast<std::size_t>(max_output_tokens);
}
std::size_t PipelineConfig::generator_prompt_limit() const {
  return generator_context.max_tokens() - static_cast<std::size_t>(max_output_tokens);
}
std::size_t PipelineConfig::casual_prompt_limit() const {
  return casual_context.max_tokens() - static_cast<std::size_t>(max_output_tokens);
}

Session::Session(std::string id_, TokenBudget memory_budget)
    : id(std::move(id_)),
      buffer{{}, memory_budget},
      created_at(std::chrono::system_clock::now()),
      updated_at(created_at) {}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

// Drops wrapping quotes, backticks and bold markers the models like to add.
std::string_view clean_title(std::string_view s) {
  s = trim(s);
  const std::string_view wrap = "'\"`*";
  while (!s.empty() && wrap.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  while (!s.empty() && wrap.find(s.back()) != std::string_view::npos) s.remove_suffix(1);
  return trim(s);
}

bool is_placeholder_line(std::string_view s) {
  return !s.empty() && s.find_first_not_of('-') == std::string_view::npos;
}

class HeadingResolver {
 public:
  explicit HeadingResolver(const TocTree& toc) : toc_(toc) {
    folded_.reserve(toc.size());
    for (const Heading& h : toc.headings()) folded_.push_back(fold_title(h.title));
  }

  const Heading* resolve(std::string_view title) const {
    const auto& hs = toc_.headings();
    for (const Heading& h : hs) {
      if (h.title == title) return &h;
    }
    const std::string key = fold_title(title);
    if (key.empty()) return nullptr;
    for (std::size_t i = 0; i < hs.size(); ++i) {
      if (folded_[i] == key) return &hs[i];
    }
    const Heading* hit = nullptr;
    for (std::size_t i = 0; i < hs.size(); ++i) {
      if (folded_[i].empty()) continue;
      if (folded_[i].find(key) != std::string::npos || key.find(folded_[i]) != std::string::npos) {
        if (hit) return nullptr;  // ambiguous
        hit = &hs[i];
      }
    }
    return hit;
  }

 private:
  const TocTree& toc_;
  std::vector<std::string> folded_;
};

std::vector<Turn> suffix_from(const std::vector<Turn>& turns, std::size_t first) {
  return {turns.begin() + static_cast<std::ptrdiff_t>(first), turns.end()};
}

ChatRequest single_prompt(const std::string& model, std::string prompt,
                          const PipelineConfig& config) {
  ChatRequest request;
  request.model_id = model;
  request.messages.push_back({Role::user, std::move(prompt)});
  request.temperature = config.temperature;
  request.max_output_tokens = config.max_output_tokens;
  return request;
}

struct FittedHeadingPrompt {
  std::string text;
  TocTree toc;
};

// History goes first, then the index shrinks.
FittedHeadingPrompt fit_heading_prompt(const PipelineConfig& config,
                                       const std::vector<Turn>& history,
                                       std::string_view question, const TocTree& shown,
                                       const Tokenizer& tokenizer) {
  const std::size_t limit = config.selector_prompt_limit();
  const auto build = [&](std::string_view hist, std::string_view index) {
    return build_heading_prompt(config.templates, hist, question, index, config.n_headings);
  };
  TocTree toc = fit_toc_to_budget(shown, config.toc_budget, tokenizer, config.toc_detail);
  const std::string index = render_toc(toc, config.toc_detail);
  for (std::size_t first = 0; first <= history.size(); ++first) {
    std::string prompt = build(render_history(suffix_from(history, first)), index);
    if (tokenizer.count(prompt) <= limit) return {std::move(prompt), std::move(toc)};
  }
  const std::size_t base = tokenizer.count(build("", ""));
  if (base >= limit) {
    throw BudgetUnsatisfiable("heading-selection prompt does not fit the selector window");
  }
  std::size_t room = std::min(limit - base, config.toc_budget.max_tokens());
  while (room > 0) {
    toc = fit_toc_to_budget(shown, TokenBudget(room, BudgetPurpose::toc_rendering), tokenizer,
                            config.toc_detail);
    std::string prompt = build("", render_toc(toc, config.toc_detail));
    const std::size_t n = tokenizer.count(prompt);
    if (n <= limit) return {std::move(prompt), std::move(toc)};
    room = room > n - limit ? room - (n - limit) : 0;
  }
  throw BudgetUnsatisfiable("heading-selection prompt does not fit the selector window");
}

std::string fit_casual_prompt(const PipelineConfig& config, const std::vector<Turn>& history,
                              std::string_view question, const Tokenizer& tokenizer) {
  const std::size_t limit = config.casual_prompt_limit();
  for (std::size_t first = 0; first <= history.size(); ++first) {
    std::string prompt = build_answer_prompt(
        config.templates, render_history(suffix_from(history, first)), std::nullopt, question);
    if (tokenizer.count(prompt) <= limit) return prompt;
  }
  throw BudgetUnsatisfiable("casual prompt does not fit the casual model window");
}

TocTree round_toc(const TocTree& full, int round, bool final_round,
                  const std::set<std::string>& chosen) {
  if (round == 1 && final_round) return full;
  return full.filter([&](const Heading& h) {
    if (round > 1) {
      bool in_subtree = false;
      bool above = false;
      for (const std::string& c : chosen) {
        if (c == h.heading_id || full.is_ancestor(c, h.heading_id)) in_subtree = true;
        if (full.is_ancestor(h.heading_id, c)) above = true;
      }
      if (!in_subtree) return above;
    }
    return final_round || h.depth <= round;
  });
}

std::vector<std::pair<std::string, std::string>> selected_parts(
    const HeadingSelection& selection, const Corpus& corpus) {
  std::vector<std::pair<std::string, std::string>> parts;
  for (const std::string& id : selection.headings) {
    const Section& s = corpus.section(id);
    if (!s.text.empty()) parts.emplace_back(id, s.text);
  }
  return parts;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

AnswerRecord run_prompt_rag(std::string_view question, Session& session, const Corpus& corpus,
                            const PipelineConfig& config, const Gateway& gateway,
                            const std::string& model_id) {
  config.validate();
  if (!gateway.selector || !gateway.generator) {
    throw std::invalid_argument("gateway needs selector and generator providers");
  }
  ChatProvider& casual = gateway.casual ? *gateway.casual : *gateway.generator;
  const auto start = std::chrono::steady_clock::now();
  const Tokenizer& tokenizer = corpus.tokenizer();
  const std::vector<Turn> history = session.buffer.turns;

  AnswerRecord record;
  record.question = std::string(question);
  record.model_id = model_id;
  try {
    record.selection = select_headings(question, history, corpus, config, *gateway.selector);
  } catch (const SelectionUnparseable& e) {
    record.selection = {SelectionKind::casual, {}, e.raw_response};
    record.selection_fallback = true;
  }

  if (record.selection.kind == SelectionKind::casual) {
    std::string prompt = fit_casual_prompt(config, history, question, tokenizer);
    record.answer =
        chat_complete(single_prompt(config.casual_model, std::move(prompt), config), casual).text;
    record.prompt_used = PromptUsed::casual;
  } else {
    const auto parts = selected_parts(record.selection, corpus);
    const auto make = [&](std::size_t max_tokens) {
      return concat_reference(parts, max_tokens, tokenizer);
    };
    GenerationResult gen =
        generate_with_reference(question, history, make, config, *gateway.generator, tokenizer);
    record.answer = std::move(gen.answer);
    record.prompt_used = PromptUsed::with_reference;
    record.provenance = gen.reference.provenance;
    for (const std::string& id : record.provenance) {
      record.provenance_titles.push_back(corpus.toc().at(id).title);
    }
    record.reference_truncated = gen.reference.truncated;
    record.reference_tokens = gen.reference.token_count;
  }
  record.latency_seconds = seconds_since(start);
  commit_turns(session, record, tokenizer);
  return record;
}

}  // namespace

HeadingSelection parse_heading_response(std::string_view response, const TocTree& toc,
                                        int n_headings) {
  if (n_headings <= 0) throw std::invalid_argument("n_headings must be positive");
  if (trim(response).empty()) throw EmptyResponse("empty heading-selection response");

  HeadingSelection selection;
  selection.raw_response = std::string(response);
  if (response.find(kCasualSentinel) != std::string_view::npos) {
    selection.kind = SelectionKind::casual;
    return selection;
  }

  static const std::regex numbered(R"(^\s*\d+\s*[.)]\s*(.*)$)");
  std::vector<std::string> numbered_titles;
  std::vector<std::string> bare_titles;
  std::size_t pos = 0;
  while (pos <= response.size()) {
    std::size_t nl = response.find('\n', pos);
    if (nl == std::string_view::npos) nl = response.size();
    const std::string line(response.substr(pos, nl - pos));
    pos = nl + 1;
    std::smatch m;
    if (std::regex_match(line, m, numbered)) {
      numbered_titles.emplace_back(clean_title(m.str(1)));
    } else if (!clean_title(line).empty()) {
      bare_titles.emplace_back(clean_title(line));
    }
  }
  // Unnumbered lines count only when the model ignored the numbered format.
  const auto& titles = numbered_titles.empty() ? bare_titles : numbered_titles;

  const HeadingResolver resolver(toc);
  std::set<std::string> seen;
  for (const std::string& title : titles) {
    if (title.empty() || is_placeholder_line(title)) continue;
    const Heading* h = resolver.resolve(title);
    if (!h || !seen.insert(h->heading_id).second) continue;
    selection.headings.push_back(h->heading_id);
    if (selection.headings.size() == static_cast<std::size_t>(n_headings)) break;
  }
  if (selection.headings.empty()) {
    throw NoResolvableHeadings("no line of the response names a known heading");
  }
  selection.kind = SelectionKind::selected;
  return selection;
}

HeadingSelection select_headings(std::string_view question, const std::vector<Turn>& history,
                                 const Corpus& corpus, const PipelineConfig& config,
                                 ChatProvider& selector) {
  config.validate();
  const TocTree& full = corpus.toc();
  std::set<std::string> chosen;
  HeadingSelection result;
  for (int round = 1; round <= config.hierarchical_rounds; ++round) {
    const bool final_round = round == config.hierarchical_rounds;
    const TocTree shown = round_toc(full, round, final_round, chosen);
    FittedHeadingPrompt prompt =
        fit_heading_prompt(config, history, question, shown, corpus.tokenizer());
    const ChatResponse response = chat_complete(
        single_prompt(config.selector_model, std::move(prompt.text), config), selector);
    try {
      result = parse_heading_response(response.text, prompt.toc, config.n_headings);
    } catch (const PipelineError& e) {
      throw SelectionUnparseable(e.what(), response.text);
    }
    if (result.kind == SelectionKind::casual) return result;
    chosen = std::set<std::string>(result.headings.begin(), result.headings.end());
  }
  return result;
}

Reference concat_reference(const std::vector<std::pair<std::string, std::string>>& parts,
                           std::size_t max_tokens, const Tokenizer& tokenizer) {
  std::string full;
  std::vector<std::size_t> starts;
  for (const auto& [label, text] : parts) {
    if (!full.empty()) full += "\n\n";
    starts.push_back(full.size());
    full += text;
  }
  Reference ref;
  const std::string_view kept = truncate_to_tokens(full, max_tokens, tokenizer);
  ref.truncated = kept.size() < full.size();
  ref.text = std::string(kept);
  ref.token_count = tokenizer.count(ref.text);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (starts[i] < ref.text.size() && !parts[i].second.empty()) {
      ref.provenance.push_back(parts[i].first);
    }
  }
  return ref;
}

Reference assemble_reference(const HeadingSelection& selection, const Corpus& corpus,
                             const TokenBudget& budget, const Tokenizer& tokenizer) {
  if (selection.kind != SelectionKind::selected) {
    throw std::invalid_argument("assemble_reference needs a selected heading list");
  }
  return concat_reference(selected_parts(selection, corpus), budget.max_tokens(), tokenizer);
}

GenerationResult generate_with_reference(
    std::string_view question, const std::vector<Turn>& history,
    const std::function<Reference(std::size_t max_tokens)>& make_reference,
    const PipelineConfig& config, ChatProvider& generator, const Tokenizer& tokenizer) {
  const std::size_t limit = config.generator_prompt_limit();
  const auto build = [&](std::string_view hist, std::string_view context) {
    return build_answer_prompt(config.templates, hist, context, question);
  };
  const auto send = [&](std::string prompt, Reference ref) {
    GenerationResult out;
    out.answer =
        chat_complete(single_prompt(config.generator_model, std::move(prompt), config), generator)
            .text;
    out.reference = std::move(ref);
    return out;
  };

  Reference ref = make_reference(config.reference_budget.max_tokens());
  for (std::size_t first = 0; first <= history.size(); ++first) {
    std::string prompt = build(render_history(suffix_from(history, first)), ref.text);
    if (tokenizer.count(prompt) <= limit) return send(std::move(prompt), std::move(ref));
  }
  const std::size_t base = tokenizer.count(build("", ""));
  if (base >= limit) {
    throw BudgetUnsatisfiable("answer prompt does not fit the generator window");
  }
  std::size_t room = std::min(limit - base, config.reference_budget.max_tokens());
  for (;;) {
    ref = make_reference(room);
    std::string prompt = build("", ref.text);
    const std::size_t n = tokenizer.count(prompt);
    if (n <= limit) return send(std::move(prompt), std::move(ref));
    if (room == 0) break;
    room = room > n - limit ? room - (n - limit) : 0;
  }
  throw BudgetUnsatisfiable("answer prompt does not fit the generator window");
}

void commit_turns(Session& session, const AnswerRecord& record, const Tokenizer& tokenizer) {
  session.buffer.turns.push_back({Speaker::user, record.question});
  session.buffer.turns.push_back({Speaker::assistant, record.answer});
  session.buffer = trim_memory(session.buffer, tokenizer);
  session.updated_at = std::chrono::system_clock::now();
  if (session.on_answer) session.on_answer(session, record);
}

AnswerRecord answer(std::string_view question, Session& session, const Corpus& corpus,
                    const PipelineConfig& config, const Gateway& gateway) {
  std::lock_guard lock(session.mutex);
  return run_prompt_rag(question, session, corpus, config, gateway, "prompt_rag");
}

AnswerRecord Answerer::ask(std::string_view question, Session& session) {
  std::lock_guard lock(session.mutex);
  return answer_locked(question, session);
}

PromptRagAnswerer::PromptRagAnswerer(std::shared_ptr<const Corpus> corpus, PipelineConfig config,
                                     Gateway gateway, std::string model_id)
    : corpus_(std::move(corpus)),
      config_(std::move(config)),
      gateway_(std::move(gateway)),
      model_id_(std::move(model_id)) {
  if (!corpus_) throw std::invalid_argument("PromptRagAnswerer needs a corpus");
  config_.validate();
}

AnswerRecord PromptRagAnswerer::answer_locked(std::string_view question, Session& session) {
  return run_prompt_rag(question, session, *corpus_, config_, gateway_, model_id_);
}

DirectChatAnswerer::DirectChatAnswerer(std::string model_id,
                                       std::shared_ptr<ChatProvider> provider,
                                       std::size_t context_tokens, int max_output_tokens,
                                       std::shared_ptr<const Tokenizer> tokenizer)
    : model_id_(std::move(model_id)),
      provider_(std::move(provider)),
      context_tokens_(context_tokens),
      max_output_tokens_(max_output_tokens),
      tokenizer_(std::move(tokenizer)) {
  if (!provider_ || !tokenizer_) throw std::invalid_argument("DirectChatAnswerer needs a provider");
  if (max_output_tokens_ <= 0 || context_tokens_ <= static_cast<std::size_t>(max_output_tokens_)) {
    throw std::invalid_argument("context window must exceed max_output_tokens");
  }
}

AnswerRecord DirectChatAnswerer::answer_locked(std::string_view question, Session& session) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t limit = context_tokens_ - static_cast<std::size_t>(max_output_tokens_);
  const auto& turns = session.buffer.turns;
  ChatRequest request;
  request.model_id = model_id_;
  request.max_output_tokens = max_output_tokens_;
  bool fits = false;
  for (std::size_t first = 0; first <= turns.size() && !fits; ++first) {
    request.messages.clear();
    for (std::size_t i = first; i < turns.size(); ++i) {
      request.messages.push_back(
          {turns[i].speaker == Speaker::user ? Role::user : Role::assistant, turns[i].text});
    }
    request.messages.push_back({Role::user, std::string(question)});
    fits = tokenizer_->count(request.prompt_text()) <= limit;
  }
  if (!fits) throw BudgetUnsatisfiable("question does not fit the chat model window");

  AnswerRecord record;
  record.question = std::string(question);
  record.model_id = model_id_;
  record.answer = chat_complete(request, *provider_).text;
  record.prompt_used = PromptUsed::casual;
  record.latency_seconds = seconds_since(start);
  commit_turns(session, record, *tokenizer_);
  return record;
}

}  // namespace tocrag
