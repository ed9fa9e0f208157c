#pragma once

#include <mutex>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "tocrag/gateway.hpp"

namespace tocrag {

struct ScriptedRule {
  std::string matcher;  // ECMAScript regex, searched in the prompt text
  std::string response;
  bool one_shot = false;
  double delay_seconds = 0.0;
};

/// Offline chat double. Rules are tried in order and the first match wins;
/// a one-shot rule is retired after its first use. Every request is kept so
/// tests can inspect the prompts that were sent.
class ScriptedChatProvider final : public ChatProvider {
 public:
  explicit ScriptedChatProvider(std::vector<ScriptedRule> rules,
                                std::shared_ptr<const Tokenizer> tokenizer = nullptr);

  ChatResponse complete(const ChatRequest& request) override;

  std::vector<ChatRequest> captured() const;
  std::size_t call_count() const;
  void clear_captured();

 private:
  struct CompiledRule {
    ScriptedRule rule;
    std::regex pattern;
    bool spent = false;
  };

  mutable std::mutex mutex_;
  std::vector<CompiledRule> rules_;
  std::vector<ChatRequest> captured_;
  std::shared_ptr<const Tokenizer> tokenizer_;
};

/// Parses a script file (TOML):
///
///   [[rule]]
///   match = "Table of Contents"
///   response = "1. Overview"
///   one_shot = false        # optional
///   delay_seconds = 0.0     # optional
std::vector<ScriptedRule> parse_script(std::string_view toml_text);
std::vector<ScriptedRule> load_script(const std::string& path);

}  // namespace tocrag
