#include "tocrag/scripted_provider.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <toml.hpp>

namespace tocrag {

ScriptedChatProvider::ScriptedChatProvider(std::vector<ScriptedRule> rules,
                                           std::shared_ptr<const Tokenizer> tokenizer)
    : tokenizer_(tokenizer ? std::move(tokenizer) : make_tokenizer("default")) {
  for (auto& rule : rules) {
    if (rule.delay_seconds < 0.0) throw std::invalid_argument("rule delay must be >= 0");
    try {
      std::regex pattern(rule.matcher, std::regex::ECMAScript);
      rules_.push_back({std::move(rule), std::move(pattern), false});
    } catch (const std::regex_error& e) {
      throw std::invalid_argument("invalid script matcher '" + rule.matcher + "': " + e.what());
    }
  }
}

ChatResponse ScriptedChatProvider::complete(const ChatRequest& request) {
  const std::string prompt = request.prompt_text();
  std::string response;
  double delay = 0.0;
  {
    std::lock_guard lock(mutex_);
    captured_.push_back(request);
    CompiledRule* hit = nullptr;
    for (auto& r : rules_) {
      if (r.spent) continue;
      if (std::regex_search(prompt, r.pattern)) {
        hit = &r;
        break;
      }
    }
    if (!hit) throw ProviderRejected("no scripted rule matched the prompt");
    if (hit->rule.one_shot) hit->spent = true;
    response = hit->rule.response;
    delay = hit->rule.delay_seconds;
  }
  if (delay > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(delay));

  ChatResponse out;
  out.text = std::move(response);
  out.prompt_tokens = static_cast<long>(tokenizer_->count(prompt));
  out.completion_tokens = static_cast<long>(tokenizer_->count(out.text));
  return out;
}

std::vector<ChatRequest> ScriptedChatProvider::captured() const {
  std::lock_guard lock(mutex_);
  return captured_;
}

std::size_t ScriptedChatProvider::call_count() const {
  std::lock_guard lock(mutex_);
  return captured_.size();
}

void ScriptedChatProvider::clear_captured() {
  std::lock_guard lock(mutex_);
  captured_.clear();
}

std::vector<ScriptedRule> parse_script(std::string_view toml_text) {
  toml::table doc;
  try {
    doc = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw std::invalid_argument(std::string("invalid script file: ") + std::string(e.description()));
  }
  std::vector<ScriptedRule> rules;
  const toml::array* entries = doc["rule"].as_array();
  if (!entries) return rules;
  for (const auto& node : *entries) {
    const toml::table* t = node.as_table();
    if (!t) throw std::invalid_argument("script rule must be a table");
    ScriptedRule rule;
    auto match = (*t)["match"].value<std::string>();
    auto response = (*t)["response"].value<std::string>();
    if (!match || !response) throw std::invalid_argument("script rule needs 'match' and 'response'");
    rule.matcher = *match;
    rule.response = *response;
    rule.one_shot = (*t)["one_shot"].value_or(false);
    rule.delay_seconds = (*t)["delay_seconds"].value_or(0.0);
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<ScriptedRule> load_script(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read script file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_script(os.str());
}

}  // namespace tocrag
