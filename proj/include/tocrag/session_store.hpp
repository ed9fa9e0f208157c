#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tocrag/pipeline.hpp"

namespace tocrag {

class InvalidSessionId : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// [A-Za-z0-9_-]{1,64}; ids double as file names.
bool valid_session_id(std::string_view id);
std::string new_session_id();

/// One logged turn. Assistant entries carry the answer metadata.
struct SessionLogEntry {
  std::string timestamp;  // UTC, ISO 8601
  Speaker speaker = Speaker::user;
  std::string text;
  std::vector<std::string> provenance;
  std::vector<std::string> titles;
  std::optional<std::string> prompt_used;
  std::optional<double> latency_seconds;
  std::string mode;
};

nlohmann::ordered_json to_json(const SessionLogEntry& entry);
SessionLogEntry session_log_entry_from_json(const nlohmann::json& j);

/// Live sessions plus an append-only JSONL log per session
/// (<directory>/<id>.jsonl). With an empty directory nothing is written.
/// Sessions whose log exists are restored by replaying it and trimming the
/// buffer to the memory budget.
class SessionStore {
 public:
  SessionStore(std::string directory, TokenBudget memory_budget,
               std::shared_ptr<const Tokenizer> tokenizer);

  struct Lookup {
    std::shared_ptr<Session> session;
    bool created = false;
  };

  /// No id: a fresh random id. Unknown id: restored from disk, else created.
  Lookup get_or_create(const std::optional<std::string>& id);
  /// Null when the id is neither live nor on disk.
  std::shared_ptr<Session> find(const std::string& id);
  /// Full log, oldest first; nullopt for unknown sessions.
  std::optional<std::vector<SessionLogEntry>> history(const std::string& id);

  std::size_t live_count() const;

 private:
  struct Slot {
    std::shared_ptr<Session> session;
    std::vector<SessionLogEntry> log;
  };

  std::shared_ptr<Slot> restore_locked(const std::string& id);
  std::shared_ptr<Slot> create_locked(const std::string& id);
  void attach_hook(const std::shared_ptr<Slot>& slot);
  std::string log_path(const std::string& id) const;

  std::string directory_;
  TokenBudget memory_budget_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

}  // namespace tocrag
