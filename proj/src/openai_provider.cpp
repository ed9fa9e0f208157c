#include "tocrag/openai_provider.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace tocrag {

Sleeper real_sleeper() {
  return [](double seconds) {
    if (seconds > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  };
}

namespace wire {

namespace {

ordered_json object_or_empty(const ordered_json& j) {
  if (!j.is_object()) throw ProviderRejected("expected a JSON object in provider payload");
  return j;
}

// Overwrites `key` only when the stored value differs, so numbers keep the
// spelling they were parsed with (0 vs 0.0).
template <typename T>
void put(ordered_json& out, const char* key, const T& value) {
  auto it = out.find(key);
  if (it != out.end()) {
    try {
      if (it->template get<T>() == value) return;
    } catch (const ordered_json::exception&) {
    }
  }
  out[key] = value;
}

template <typename T>
void put_optional(ordered_json& out, const char* key, const std::optional<T>& value) {
  if (value) {
    put(out, key, *value);
  } else {
    out.erase(key);
  }
}

Message parse_message(const ordered_json& j) {
  Message m;
  m.extra = object_or_empty(j);
  m.role = j.at("role").get<std::string>();
  const auto& content = j.at("content");
  m.content = content.is_null() ? std::string() : content.get<std::string>();
  return m;
}

ordered_json serialize(const Message& m) {
  ordered_json out = m.extra.is_object() ? m.extra : ordered_json::object();
  put(out, "role", m.role);
  auto it = out.find("content");
  if (!(it != out.end() && it->is_null() && m.content.empty())) put(out, "content", m.content);
  return out;
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const ordered_json::exception& e) {
    throw ProviderRejected(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

ChatCompletionRequest parse_chat_request(const ordered_json& j) {
  return guarded("chat request", [&] {
    ChatCompletionRequest r;
    r.extra = object_or_empty(j);
    r.model = j.at("model").get<std::string>();
    for (const auto& m : j.at("messages")) r.messages.push_back(parse_message(m));
    if (j.contains("temperature")) r.temperature = j.at("temperature").get<double>();
    if (j.contains("max_tokens")) r.max_tokens = j.at("max_tokens").get<int>();
    return r;
  });
}

ordered_json serialize(const ChatCompletionRequest& r) {
  ordered_json out = r.extra.is_object() ? r.extra : ordered_json::object();
  put(out, "model", r.model);
  ordered_json messages = ordered_json::array();
  for (const auto& m : r.messages) messages.push_back(serialize(m));
  out["messages"] = std::move(messages);
  put_optional(out, "temperature", r.temperature);
  put_optional(out, "max_tokens", r.max_tokens);
  return out;
}

ChatCompletionResponse parse_chat_response(const ordered_json& j) {
  return guarded("chat response", [&] {
    ChatCompletionResponse r;
    r.extra = object_or_empty(j);
    for (const auto& c : j.at("choices")) {
      Choice choice;
      choice.extra = object_or_empty(c);
      choice.index = c.value("index", 0);
      choice.message = parse_message(c.at("message"));
      r.choices.push_back(std::move(choice));
    }
    if (j.contains("usage") && j.at("usage").is_object()) {
      const auto& u = j.at("usage");
      Usage usage;
      usage.extra = u;
      usage.prompt_tokens = u.value("prompt_tokens", 0L);
      usage.completion_tokens = u.value("completion_tokens", 0L);
      r.usage = usage;
    }
    return r;
  });
}

ordered_json serialize(const ChatCompletionResponse& r) {
  ordered_json out = r.extra.is_object() ? r.extra : ordered_json::object();
  ordered_json choices = ordered_json::array();
  for (const auto& c : r.choices) {
    ordered_json entry = c.extra.is_object() ? c.extra : ordered_json::object();
    put(entry, "index", c.index);
    entry["message"] = serialize(c.message);
    choices.push_back(std::move(entry));
  }
  out["choices"] = std::move(choices);
  if (r.usage) {
    ordered_json usage = r.usage->extra.is_object() ? r.usage->extra : ordered_json::object();
    put(usage, "prompt_tokens", r.usage->prompt_tokens);
    put(usage, "completion_tokens", r.usage->completion_tokens);
    out["usage"] = std::move(usage);
  } else {
    out.erase("usage");
  }
  return out;
}

EmbeddingRequest parse_embedding_request(const ordered_json& j) {
  return guarded("embedding request", [&] {
    EmbeddingRequest r;
    r.extra = object_or_empty(j);
    r.model = j.at("model").get<std::string>();
    const auto& input = j.at("input");
    if (input.is_string()) {
      r.input.push_back(input.get<std::string>());
    } else {
      r.input = input.get<std::vector<std::string>>();
    }
    return r;
  });
}

ordered_json serialize(const EmbeddingRequest& r) {
  ordered_json out = r.extra.is_object() ? r.extra : ordered_json::object();
  put(out, "model", r.model);
  auto it = out.find("input");
  const bool scalar = it != out.end() && it->is_string() && r.input.size() == 1;
  if (scalar) {
    put(out, "input", r.input.front());
  } else {
    out["input"] = r.input;
  }
  return out;
}

EmbeddingResponse parse_embedding_response(const ordered_json& j) {
  return guarded("embedding response", [&] {
    EmbeddingResponse r;
    r.extra = object_or_empty(j);
    r.model = j.value("model", std::string());
    for (const auto& d : j.at("data")) {
      EmbeddingDatum datum;
      datum.extra = object_or_empty(d);
      datum.index = d.value("index", static_cast<int>(r.data.size()));
      datum.embedding = d.at("embedding").get<std::vector<double>>();
      r.data.push_back(std::move(datum));
    }
    return r;
  });
}

ordered_json serialize(const EmbeddingResponse& r) {
  ordered_json out = r.extra.is_object() ? r.extra : ordered_json::object();
  ordered_json data = ordered_json::array();
  for (const auto& d : r.data) {
    ordered_json entry = d.extra.is_object() ? d.extra : ordered_json::object();
    put(entry, "index", d.index);
    put(entry, "embedding", d.embedding);
    data.push_back(std::move(entry));
  }
  out["data"] = std::move(data);
  if (!r.model.empty() || out.contains("model")) put(out, "model", r.model);
  return out;
}

}  // namespace wire

namespace {

bool retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

std::string join_url(const std::string& base, std::string_view path) {
  std::string out = base;
  while (!out.empty() && out.back() == '/') out.pop_back();
  out += path;
  return out;
}

HttpRequest make_request(const ProviderConfig& config, const std::string& url,
                         const std::string& body) {
  HttpRequest req;
  req.url = url;
  req.body = body;
  req.timeout_seconds = config.timeout_seconds;
  req.headers.emplace_back("Content-Type", "application/json");
  if (!config.api_key_env.empty()) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (!key || !*key) {
      throw ProviderRejected("API key environment variable " + config.api_key_env + " is not set");
    }
    req.headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  return req;
}

}  // namespace

std::string post_with_retries(Transport& transport, const ProviderConfig& config,
                              const std::string& url, const std::string& body,
                              const Sleeper& sleep) {
  config.validate();
  const HttpRequest request = make_request(config, url, body);
  std::string last_error;
  bool last_was_timeout = false;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) sleep(config.backoff_base_seconds * std::pow(2.0, attempt - 1));
    try {
      const HttpResponse response = transport.post(request);
      if (response.status >= 200 && response.status < 300) return response.body;
      last_was_timeout = false;
      last_error = "HTTP " + std::to_string(response.status) + ": " + response.body.substr(0, 300);
      if (!retryable_status(response.status)) {
        throw ProviderRejected(url + " rejected the request (" + last_error + ")");
      }
    } catch (const TransportTimeout& e) {
      last_was_timeout = true;
      last_error = e.what();
    } catch (const TransportError& e) {
      last_was_timeout = false;
      last_error = e.what();
    }
  }
  if (config.max_retries == 0 && last_was_timeout) {
    throw ProviderTimeout(url + " timed out: " + last_error);
  }
  throw RetriesExhausted(url + " failed after " + std::to_string(config.max_retries + 1) +
                         " attempt(s); last error: " + last_error);
}

OpenAiChatProvider::OpenAiChatProvider(ProviderConfig config,
                                       std::shared_ptr<Transport> transport, Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
  config_.validate();
  if (!transport_) throw std::invalid_argument("chat provider needs a transport");
}

ChatResponse OpenAiChatProvider::complete(const ChatRequest& request) {
  wire::ChatCompletionRequest payload;
  payload.model = request.model_id;
  for (const auto& m : request.messages) {
    payload.messages.push_back({std::string(to_string(m.role)), m.content, {}});
  }
  payload.temperature = request.temperature;
  payload.max_tokens = request.max_output_tokens;

  const std::string body = post_with_retries(*transport_, config_,
                                             join_url(config_.base_url, "/chat/completions"),
                                             wire::serialize(payload).dump(), sleep_);
  wire::ordered_json json;
  try {
    json = wire::ordered_json::parse(body);
  } catch (const wire::ordered_json::exception& e) {
    throw ProviderRejected(std::string("chat response is not JSON: ") + e.what());
  }
  const auto parsed = wire::parse_chat_response(json);
  if (parsed.choices.empty()) throw ProviderRejected("chat response has no choices");

  ChatResponse out;
  out.text = parsed.choices.front().message.content;
  if (parsed.usage) {
    out.prompt_tokens = parsed.usage->prompt_tokens;
    out.completion_tokens = parsed.usage->completion_tokens;
  }
  return out;
}

OpenAiEmbeddingProvider::OpenAiEmbeddingProvider(ProviderConfig config, std::string model_id,
                                                 std::shared_ptr<Transport> transport,
                                                 std::size_t batch_size, Sleeper sleep)
    : config_(std::move(config)),
      model_id_(std::move(model_id)),
      transport_(std::move(transport)),
      batch_size_(batch_size == 0 ? 1 : batch_size),
      sleep_(std::move(sleep)) {
  config_.validate();
  if (!transport_) throw std::invalid_argument("embedding provider needs a transport");
}

std::vector<EmbeddingVector> OpenAiEmbeddingProvider::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    const std::size_t end = std::min(texts.size(), start + batch_size_);
    wire::EmbeddingRequest payload;
    payload.model = model_id_;
    payload.input.assign(texts.begin() + static_cast<long>(start),
                         texts.begin() + static_cast<long>(end));
    const std::string body =
        post_with_retries(*transport_, config_, join_url(config_.base_url, "/embeddings"),
                          wire::serialize(payload).dump(), sleep_);
    wire::ordered_json json;
    try {
      json = wire::ordered_json::parse(body);
    } catch (const wire::ordered_json::exception& e) {
      throw ProviderRejected(std::string("embedding response is not JSON: ") + e.what());
    }
    auto parsed = wire::parse_embedding_response(json);
    const std::size_t n = end - start;
    if (parsed.data.size() != n) {
      throw ProviderRejected("embedding response size does not match the batch");
    }
    std::vector<EmbeddingVector> batch(n);
    std::vector<bool> filled(n, false);
    for (auto& d : parsed.data) {
      if (d.index < 0 || static_cast<std::size_t>(d.index) >= n || filled[d.index]) {
        throw ProviderRejected("embedding response has an invalid index");
      }
      filled[d.index] = true;
      batch[d.index] = EmbeddingVector{std::move(d.embedding), model_id_};
    }
    for (auto& v : batch) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace tocrag
