#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tocrag/gateway.hpp"

namespace tocrag {

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  double timeout_seconds = 60.0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Connection-level failure (refused, reset, DNS).
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TransportTimeout : public TransportError {
 public:
  using TransportError::TransportError;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// Real HTTP(S) transport backed by cpp-httplib (lives in tocrag_net).
std::shared_ptr<Transport> make_http_transport();

using Sleeper = std::function<void(double seconds)>;
Sleeper real_sleeper();

/// OpenAI-compatible JSON payloads. `extra` holds the object as it was
/// parsed; serialize() writes the modelled fields back into it so unknown
/// fields and key order survive a parse/serialize round trip.
namespace wire {

using nlohmann::ordered_json;

struct Message {
  std::string role;
  std::string content;
  ordered_json extra = ordered_json::object();
};

struct ChatCompletionRequest {
  std::string model;
  std::vector<Message> messages;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  ordered_json extra = ordered_json::object();
};

struct Choice {
  int index = 0;
  Message message;
  ordered_json extra = ordered_json::object();
};

struct Usage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
  ordered_json extra = ordered_json::object();
};

struct ChatCompletionResponse {
  std::vector<Choice> choices;
  std::optional<Usage> usage;
  ordered_json extra = ordered_json::object();
};

struct EmbeddingRequest {
  std::string model;
  std::vector<std::string> input;
  ordered_json extra = ordered_json::object();
};

struct EmbeddingDatum {
  int index = 0;
  std::vector<double> embedding;
  ordered_json extra = ordered_json::object();
};

struct EmbeddingResponse {
  std::vector<EmbeddingDatum> data;
  std::string model;
  ordered_json extra = ordered_json::object();
};

ChatCompletionRequest parse_chat_request(const ordered_json& j);
ordered_json serialize(const ChatCompletionRequest& r);
ChatCompletionResponse parse_chat_response(const ordered_json& j);
ordered_json serialize(const ChatCompletionResponse& r);
EmbeddingRequest parse_embedding_request(const ordered_json& j);
ordered_json serialize(const EmbeddingRequest& r);
EmbeddingResponse parse_embedding_response(const ordered_json& j);
ordered_json serialize(const EmbeddingResponse& r);

}  // namespace wire

/// Sends `body` to `url` with retry: timeouts, connection errors, 429 and
/// 5xx are retried up to config.max_retries times, sleeping base, 2*base,
/// 4*base, ... between attempts. Returns the 2xx response body.
std::string post_with_retries(Transport& transport, const ProviderConfig& config,
                              const std::string& url, const std::string& body,
                              const Sleeper& sleep);

class OpenAiChatProvider final : public ChatProvider {
 public:
  OpenAiChatProvider(ProviderConfig config, std::shared_ptr<Transport> transport,
                     Sleeper sleep = real_sleeper());
  ChatResponse complete(const ChatRequest& request) override;

 private:
  ProviderConfig config_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleep_;
};

class OpenAiEmbeddingProvider final : public EmbeddingProvider {
 public:
  OpenAiEmbeddingProvider(ProviderConfig config, std::string model_id,
                          std::shared_ptr<Transport> transport, std::size_t batch_size = 64,
                          Sleeper sleep = real_sleeper());

  std::string model_id() const override { return model_id_; }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

 private:
  ProviderConfig config_;
  std::string model_id_;
  std::shared_ptr<Transport> transport_;
  std::size_t batch_size_;
  Sleeper sleep_;
};

}  // namespace tocrag
