#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tocrag/corpus.hpp"

namespace tocrag {

enum class Speaker { user, assistant };

std::string_view to_string(Speaker speaker);
Speaker parse_speaker(std::string_view name);

struct Turn {
  Speaker speaker = Speaker::user;
  std::string text;

  friend bool operator==(const Turn&, const Turn&) = default;
};

/// Chat transcript fed into the {history} placeholder.
struct ConversationBuffer {
  std::vector<Turn> turns;
  TokenBudget budget{2048, BudgetPurpose::memory};
};

/// "Human: ...\nAI: ..." one line per turn, oldest first.
std::string render_history(const std::vector<Turn>& turns);
inline std::string render_history(const ConversationBuffer& buffer) {
  return render_history(buffer.turns);
}

/// Drops the oldest whole turns until the rendered history fits `max_tokens`.
/// The result is always a suffix of the input.
std::vector<Turn> trim_turns(const std::vector<Turn>& turns, std::size_t max_tokens,
                             const Tokenizer& tokenizer);

ConversationBuffer trim_memory(const ConversationBuffer& buffer, const Tokenizer& tokenizer);

}  // namespace tocrag
