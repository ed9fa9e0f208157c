#include "tocrag/session_store.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

namespace tocrag {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<SessionLogEntry> entries_for(const AnswerRecord& record) {
  const std::string now = utc_timestamp(std::chrono::system_clock::now());
  SessionLogEntry user{now, Speaker::user, record.question, {}, {}, std::nullopt, std::nullopt,
                       record.model_id};
  SessionLogEntry assistant{now,
                            Speaker::assistant,
                            record.answer,
                            record.provenance,
                            record.provenance_titles,
                            std::string(to_string(record.prompt_used)),
                            record.latency_seconds,
                            record.model_id};
  return {std::move(user), std::move(assistant)};
}

}  // namespace

bool valid_session_id(std::string_view id) {
  static const std::regex re("[A-Za-z0-9_-]{1,64}");
  return std::regex_match(id.begin(), id.end(), re);
}

std::string new_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream out;
  out << std::hex;
  for (int i = 0; i < 2; ++i) {
    const auto v = rng();
    for (int shift = 60; shift >= 0; shift -= 4) out << ((v >> shift) & 0xf);
  }
  return out.str();
}

ordered_json to_json(const SessionLogEntry& e) {
  ordered_json j;
  j["timestamp"] = e.timestamp;
  j["speaker"] = std::string(to_string(e.speaker));
  j["text"] = e.text;
  j["provenance"] = e.provenance;
  j["titles"] = e.titles;
  j["prompt_used"] = e.prompt_used ? ordered_json(*e.prompt_used) : ordered_json(nullptr);
  j["latency"] = e.latency_seconds ? ordered_json(*e.latency_seconds) : ordered_json(nullptr);
  j["mode"] = e.mode;
  return j;
}

SessionLogEntry session_log_entry_from_json(const json& j) {
  SessionLogEntry e;
  e.timestamp = j.value("timestamp", "");
  e.speaker = parse_speaker(j.at("speaker").get<std::string>());
  e.text = j.at("text").get<std::string>();
  e.provenance = j.value("provenance", std::vector<std::string>{});
  e.titles = j.value("titles", std::vector<std::string>{});
  if (j.contains("prompt_used") && !j["prompt_used"].is_null()) {
    e.prompt_used = j["prompt_used"].get<std::string>();
  }
  if (j.contains("latency") && !j["latency"].is_null()) e.latency_seconds = j["latency"].get<double>();
  e.mode = j.value("mode", "");
  return e;
}

SessionStore::SessionStore(std::string directory, TokenBudget memory_budget,
                           std::shared_ptr<const Tokenizer> tokenizer)
    : directory_(std::move(directory)),
      memory_budget_(memory_budget),
      tokenizer_(std::move(tokenizer)) {
  if (!tokenizer_) throw std::invalid_argument("SessionStore: tokenizer is required");
  if (!directory_.empty()) fs::create_directories(directory_);
}

std::string SessionStore::log_path(const std::string& id) const {
  return (fs::path(directory_) / (id + ".jsonl")).string();
}

void SessionStore::attach_hook(const std::shared_ptr<Slot>& slot) {
  // The hook runs under the session lock, so appends stay in answer order.
  std::weak_ptr<Slot> weak = slot;
  const std::string path = directory_.empty() ? std::string() : log_path(slot->session->id);
  slot->session->on_answer = [weak, path](const Session&, const AnswerRecord& record) {
    auto s = weak.lock();
    if (!s) return;
    auto entries = entries_for(record);
    if (!path.empty()) {
      std::ofstream out(path, std::ios::binary | std::ios::app);
      if (!out) throw std::runtime_error("cannot append to " + path);
      for (const auto& e : entries) out << to_json(e).dump() << '\n';
    }
    for (auto& e : entries) s->log.push_back(std::move(e));
  };
}

std::shared_ptr<SessionStore::Slot> SessionStore::create_locked(const std::string& id) {
  auto slot = std::make_shared<Slot>();
  slot->session = std::make_shared<Session>(id, memory_budget_);
  attach_hook(slot);
  slots_[id] = slot;
  return slot;
}

std::shared_ptr<SessionStore::Slot> SessionStore::restore_locked(const std::string& id) {
  if (directory_.empty()) return nullptr;
  const std::string path = log_path(id);
  std::ifstream in(path, std::ios::binary);
  if (!in) return nullptr;
  auto slot = std::make_shared<Slot>();
  slot->session = std::make_shared<Session>(id, memory_budget_);
  std::vector<Turn> turns;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SessionLogEntry e;
    try {
      e = session_log_entry_from_json(json::parse(line));
    } catch (const std::exception& ex) {
      throw std::runtime_error(path + ": corrupt log line: " + ex.what());
    }
    turns.push_back({e.speaker, e.text});
    slot->log.push_back(std::move(e));
  }
  slot->session->buffer.turns = trim_turns(turns, memory_budget_.max_tokens(), *tokenizer_);
  attach_hook(slot);
  slots_[id] = slot;
  return slot;
}

SessionStore::Lookup SessionStore::get_or_create(const std::optional<std::string>& id) {
  std::lock_guard lock(mutex_);
  if (!id) {
    std::string fresh;
    do {
      fresh = new_session_id();
    } while (slots_.count(fresh) || (!directory_.empty() && fs::exists(log_path(fresh))));
    return {create_locked(fresh)->session, true};
  }
  if (!valid_session_id(*id)) throw InvalidSessionId("invalid session id: '" + *id + "'");
  if (auto it = slots_.find(*id); it != slots_.end()) return {it->second->session, false};
  if (auto slot = restore_locked(*id)) return {slot->session, false};
  return {create_locked(*id)->session, true};
}

std::shared_ptr<Session> SessionStore::find(const std::string& id) {
  if (!valid_session_id(id)) return nullptr;
  std::lock_guard lock(mutex_);
  if (auto it = slots_.find(id); it != slots_.end()) return it->second->session;
  auto slot = restore_locked(id);
  return slot ? slot->session : nullptr;
}

std::optional<std::vector<SessionLogEntry>> SessionStore::history(const std::string& id) {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(mutex_);
    if (!valid_session_id(id)) return std::nullopt;
    if (auto it = slots_.find(id); it != slots_.end()) {
      slot = it->second;
    } else {
      slot = restore_locked(id);
    }
  }
  if (!slot) return std::nullopt;
  std::lock_guard session_lock(slot->session->mutex);
  return slot->log;
}

std::size_t SessionStore::live_count() const {
  std::lock_guard lock(mutex_);
  return slots_.size();
}

}  // namespace tocrag
