#include "tocrag/memory.hpp"

#include <stdexcept>

namespace tocrag {

std::string_view to_string(Speaker speaker) {
  return speaker == Speaker::user ? "user" : "assistant";
}

Speaker parse_speaker(std::string_view name) {
  if (name == "user") return Speaker::user;
  if (name == "assistant") return Speaker::assistant;
  throw std::invalid_argument("unknown speaker: " + std::string(name));
}

std::string render_history(const std::vector<Turn>& turns) {
  std::string out;
  for (const Turn& turn : turns) {
    if (!out.empty()) out += '\n';
    out += turn.speaker == Speaker::user ? "Human: " : "AI: ";
    out += turn.text;
  }
  return out;
}

std::vector<Turn> trim_turns(const std::vector<Turn>& turns, std::size_t max_tokens,
                             const Tokenizer& tokenizer) {
  // Token counts of a render are not additive across the joining newline in
  // general, so re-render each candidate suffix.
  for (std::size_t first = 0; first < turns.size(); ++first) {
    std::vector<Turn> suffix(turns.begin() + static_cast<std::ptrdiff_t>(first), turns.end());
    if (tokenizer.count(render_history(suffix)) <= max_tokens) return suffix;
  }
  return {};
}

ConversationBuffer trim_memory(const ConversationBuffer& buffer, const Tokenizer& tokenizer) {
  return ConversationBuffer{trim_turns(buffer.turns, buffer.budget.max_tokens(), tokenizer),
                            buffer.budget};
}

}  // namespace tocrag
