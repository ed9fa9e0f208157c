#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tocrag/gateway.hpp"
#include "tocrag/pipeline.hpp"

namespace tocrag {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How one model role is served.
///   kind = "openai"   OpenAI-compatible HTTP endpoint (`http` settings)
///   kind = "scripted" offline script file (`script`)
///   kind = "stub"     hashed bag-of-tokens embeddings (embedding role only)
struct ProviderSettings {
  std::string kind = "scripted";
  ProviderConfig http;
  std::string script;
  std::size_t dimension = 256;
  std::size_t batch_size = 64;
};

struct AppConfig {
  std::string corpus_dir = "corpus";
  std::string session_dir = "sessions";
  std::string index_dir = "index";
  std::string tokenizer = "default";
  std::string outline_style = "markdown_hashes";
  std::string host = "127.0.0.1";
  int port = 8080;

  PipelineConfig pipeline;
  std::string templates_dir;  // empty: built-in templates
  std::string direct_model = "gpt-3.5-turbo-0613";
  double baseline_lambda = 0.5;

  ProviderSettings selector;
  ProviderSettings generator;
  ProviderSettings casual;
  ProviderSettings direct;
  ProviderSettings embedding{"stub", {}, "", 256, 64};
  std::string embedding_model = "stub";

  void validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;
EnvLookup process_env();

/// Parses TOML. Every key can be overridden by an environment variable named
/// TOCRAG_ + the dotted key path upper-cased with '.' replaced by '_', e.g.
/// TOCRAG_SERVER_PORT or TOCRAG_PROVIDERS_GENERATOR_BASE_URL. Relative paths
/// are resolved against `base_dir`.
AppConfig parse_config(std::string_view toml_text, const std::string& base_dir,
                       const EnvLookup& env = process_env());
AppConfig load_config(const std::string& path, const EnvLookup& env = process_env());
/// Defaults plus environment overrides, for running without a file.
AppConfig default_config(const EnvLookup& env = process_env());

}  // namespace tocrag
