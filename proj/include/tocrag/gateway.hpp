#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tocrag/tokenizer.hpp"

namespace tocrag {

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProviderTimeout : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// Non-retryable provider failure (4xx other than 429, malformed payloads,
/// no matching script rule).
class ProviderRejected : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class RetriesExhausted : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view name);

struct ChatMessage {
  Role role = Role::user;
  std::string content;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_output_tokens = 1024;

  /// Throws std::invalid_argument when the request breaks its invariants.
  void validate() const;
  /// Message contents joined by newlines; what scripted rules match against.
  std::string prompt_text() const;
};

struct ChatResponse {
  std::string text;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  double latency_seconds = 0.0;
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_id;

  std::size_t dimension() const noexcept { return values.size(); }
};

struct ProviderConfig {
  std::string base_url;
  std::string api_key_env;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double backoff_base_seconds = 1.0;
  // 0 disables the cap.
  std::size_t max_in_flight = 0;

  void validate() const;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string model_id() const = 0;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

/// Validates the request, calls the provider and stamps the measured
/// wall-clock latency on the response.
ChatResponse chat_complete(const ChatRequest& request, ChatProvider& provider);

/// One vector per input in input order; all of one dimension.
std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                         EmbeddingProvider& provider);

/// 64-bit FNV-1a; the bucket hash of the stub embedding.
std::uint64_t stub_token_hash(std::string_view token) noexcept;

/// Hashed bag-of-tokens vector normalized to unit length. Token t adds its
/// multiplicity to bucket stub_token_hash(t) % dimension.
EmbeddingVector stub_embedding(std::string_view text, std::size_t dimension,
                               const Tokenizer& tokenizer, std::string model_id = "stub");

class StubEmbeddingProvider final : public EmbeddingProvider {
 public:
  StubEmbeddingProvider(std::size_t dimension, std::shared_ptr<const Tokenizer> tokenizer,
                        std::string model_id = "stub");

  std::string model_id() const override { return model_id_; }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  std::size_t dimension() const noexcept { return dimension_; }

 private:
  std::size_t dimension_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  std::string model_id_;
};

/// Counting gate: at most `capacity` holders at a time; others block.
class InFlightGate {
 public:
  explicit InFlightGate(std::size_t capacity);

  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t capacity_;
  std::size_t in_use_ = 0;
};

/// Serializes calls beyond `max_in_flight` concurrent requests.
class LimitedChatProvider final : public ChatProvider {
 public:
  LimitedChatProvider(std::shared_ptr<ChatProvider> inner, std::size_t max_in_flight);
  ChatResponse complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<ChatProvider> inner_;
  InFlightGate gate_;
};

/// Model roles used by the answer pipeline and the baselines.
struct Gateway {
  std::shared_ptr<ChatProvider> selector;
  std::shared_ptr<ChatProvider> generator;
  std::shared_ptr<ChatProvider> casual;
  std::shared_ptr<EmbeddingProvider> embedder;
};

}  // namespace tocrag
