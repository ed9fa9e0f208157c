#include "tocrag/gateway.hpp"

#include <chrono>
#include <cmath>

namespace tocrag {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view name) {
  if (name == "system") return Role::system;
  if (name == "user") return Role::user;
  if (name == "assistant") return Role::assistant;
  throw std::invalid_argument("unknown chat role: " + std::string(name));
}

void ChatRequest::validate() const {
  if (messages.empty()) throw std::invalid_argument("chat request needs at least one message");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (max_output_tokens <= 0) throw std::invalid_argument("max_output_tokens must be > 0");
}

std::string ChatRequest::prompt_text() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out += '\n';
    out += messages[i].content;
  }
  return out;
}

void ProviderConfig::validate() const {
  if (!(timeout_seconds > 0.0)) throw std::invalid_argument("provider timeout must be positive");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
  if (backoff_base_seconds < 0.0) throw std::invalid_argument("backoff base must be >= 0");
}

ChatResponse chat_complete(const ChatRequest& request, ChatProvider& provider) {
  request.validate();
  const auto start = std::chrono::steady_clock::now();
  ChatResponse response = provider.complete(request);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  response.latency_seconds = elapsed.count();
  if (response.prompt_tokens < 0 || response.completion_tokens < 0) {
    throw ProviderRejected("provider reported negative token usage");
  }
  return response;
}

std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                         EmbeddingProvider& provider) {
  if (texts.empty()) throw std::invalid_argument("embed_texts needs at least one text");
  auto vectors = provider.embed(texts);
  if (vectors.size() != texts.size()) {
    throw ProviderRejected("embedding provider returned " + std::to_string(vectors.size()) +
                           " vectors for " + std::to_string(texts.size()) + " inputs");
  }
  const std::size_t dim = vectors.front().dimension();
  for (const auto& v : vectors) {
    if (v.dimension() == 0 || v.dimension() != dim) {
      throw ProviderRejected("embedding provider returned inconsistent dimensions");
    }
  }
  return vectors;
}

std::uint64_t stub_token_hash(std::string_view token) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

EmbeddingVector stub_embedding(std::string_view text, std::size_t dimension,
                               const Tokenizer& tokenizer, std::string model_id) {
  if (dimension == 0) throw std::invalid_argument("embedding dimension must be positive");
  EmbeddingVector v;
  v.model_id = std::move(model_id);
  v.values.assign(dimension, 0.0);
  for (const auto& piece : tokenizer.pieces(text)) {
    v.values[stub_token_hash(piece) % dimension] += 1.0;
  }
  double norm = 0.0;
  for (double x : v.values) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v.values) x /= norm;
  }
  return v;
}

StubEmbeddingProvider::StubEmbeddingProvider(std::size_t dimension,
                                             std::shared_ptr<const Tokenizer> tokenizer,
                                             std::string model_id)
    : dimension_(dimension), tokenizer_(std::move(tokenizer)), model_id_(std::move(model_id)) {
  if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
  if (!tokenizer_) throw std::invalid_argument("stub embedding needs a tokenizer");
}

std::vector<EmbeddingVector> StubEmbeddingProvider::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(stub_embedding(t, dimension_, *tokenizer_, model_id_));
  return out;
}

InFlightGate::InFlightGate(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("in-flight capacity must be positive");
}

void InFlightGate::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return in_use_ < capacity_; });
  ++in_use_;
}

void InFlightGate::release() {
  {
    std::lock_guard lock(mutex_);
    --in_use_;
  }
  cv_.notify_one();
}

LimitedChatProvider::LimitedChatProvider(std::shared_ptr<ChatProvider> inner,
                                         std::size_t max_in_flight)
    : inner_(std::move(inner)), gate_(max_in_flight) {}

ChatResponse LimitedChatProvider::complete(const ChatRequest& request) {
  gate_.acquire();
  struct Release {
    InFlightGate& gate;
    ~Release() { gate.release(); }
  } release{gate_};
  return inner_->complete(request);
}

}  // namespace tocrag
