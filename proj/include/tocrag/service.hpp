#pragma once

#include <memory>
#include <string>

#include "tocrag/app.hpp"
#include "tocrag/session_store.hpp"

namespace tocrag {

struct ServiceDeps {
  AppConfig config;
  std::shared_ptr<AnswererFactory> factory;
  std::shared_ptr<SessionStore> sessions;
  std::shared_ptr<CorpusHolder> corpus;
};

/// JSON HTTP API for the chat client:
///   GET  /health
///   POST /chat            {session_id?, message, mode?}
///   GET  /corpus/toc      ?detail=titles_only|numbered_hierarchical
///   GET  /sessions/{id}
///   POST /corpus/ingest   multipart: file (one or more), style, toc_file?
///
/// Requests on one session queue behind each other (the session lock);
/// distinct sessions run in parallel on the worker pool.
class ChatService {
 public:
  explicit ChatService(ServiceDeps deps, std::size_t threads = 16);
  ~ChatService();
  ChatService(const ChatService&) = delete;
  ChatService& operator=(const ChatService&) = delete;

  /// Binds the listening socket; port 0 picks a free one. Returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Requires bind().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tocrag
