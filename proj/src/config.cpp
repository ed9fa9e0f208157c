#include "tocrag/config.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <toml.hpp>

#include "tocrag/embedding_io.hpp"

namespace tocrag {

namespace {

std::string env_name(std::string_view path) {
  std::string out = "TOCRAG_";
  for (char c : path) {
    out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

// Reads dotted keys from the TOML document, letting the environment win.
class Reader {
 public:
  Reader(const toml::table& root, const EnvLookup& env) : root_(root), env_(env) {}

  void get(std::string_view path, std::string& out) const {
    if (auto v = env_(env_name(path))) {
      out = *v;
    } else if (auto node = root_.at_path(path)) {
      if (auto s = node.value<std::string>()) {
        out = *s;
      } else {
        throw ConfigError(std::string(path) + " must be a string");
      }
    }
  }

  template <class Number>
  void get_number(std::string_view path, Number& out) const {
    if (auto v = env_(env_name(path))) {
      try {
        std::size_t used = 0;
        const double d = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument("trailing text");
        out = static_cast<Number>(d);
      } catch (const std::exception&) {
        throw ConfigError(env_name(path) + " is not a number: '" + *v + "'");
      }
    } else if (auto node = root_.at_path(path)) {
      if (auto d = node.value<double>()) {
        out = static_cast<Number>(*d);
      } else {
        throw ConfigError(std::string(path) + " must be a number");
      }
    }
  }

  void get_size(std::string_view path, std::size_t& out) const {
    double d = static_cast<double>(out);
    get_number(path, d);
    if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d))) {
      throw ConfigError(std::string(path) + " must be a non-negative integer");
    }
    out = static_cast<std::size_t>(d);
  }

  void get_budget(std::string_view path, TokenBudget& budget) const {
    std::size_t v = budget.max_tokens();
    get_size(path, v);
    if (v == 0) throw ConfigError(std::string(path) + " must be positive");
    budget = TokenBudget(v, budget.purpose());
  }

 private:
  const toml::table& root_;
  const EnvLookup& env_;
};

void read_provider(const Reader& r, const std::string& role, ProviderSettings& p) {
  const std::string base = "providers." + role + ".";
  r.get(base + "kind", p.kind);
  r.get(base + "base_url", p.http.base_url);
  r.get(base + "api_key_env", p.http.api_key_env);
  r.get_number(base + "timeout_seconds", p.http.timeout_seconds);
  r.get_number(base + "max_retries", p.http.max_retries);
  r.get_number(base + "backoff_base_seconds", p.http.backoff_base_seconds);
  r.get_size(base + "max_in_flight", p.http.max_in_flight);
  r.get(base + "script", p.script);
  r.get_size(base + "dimension", p.dimension);
  r.get_size(base + "batch_size", p.batch_size);
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

void AppConfig::validate() const {
  pipeline.validate();
  if (port < 0 || port > 65535) throw ConfigError("server.port out of range");
  if (baseline_lambda < 0 || baseline_lambda > 1) throw ConfigError("baseline.lambda must be in [0,1]");
  make_tokenizer(tokenizer);
  parse_outline_style(outline_style);
  for (const ProviderSettings* p : {&selector, &generator, &casual, &direct}) {
    if (p->kind == "openai") {
      p->http.validate();
    } else if (p->kind != "scripted") {
      throw ConfigError("chat provider kind must be 'openai' or 'scripted', got '" + p->kind + "'");
    }
  }
  if (embedding.kind == "openai") {
    embedding.http.validate();
  } else if (embedding.kind != "stub") {
    throw ConfigError("embedding provider kind must be 'openai' or 'stub'");
  }
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

AppConfig parse_config(std::string_view toml_text, const std::string& base_dir,
                       const EnvLookup& env) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("config: ") + std::string(e.description()));
  }
  const Reader r(root, env);
  AppConfig c;
  r.get("corpus_dir", c.corpus_dir);
  r.get("session_dir", c.session_dir);
  r.get("index_dir", c.index_dir);
  r.get("tokenizer", c.tokenizer);
  r.get("outline_style", c.outline_style);
  r.get("server.host", c.host);
  r.get_number("server.port", c.port);

  PipelineConfig& p = c.pipeline;
  r.get_number("pipeline.n_headings", p.n_headings);
  r.get_number("pipeline.hierarchical_rounds", p.hierarchical_rounds);
  std::string detail(to_string(p.toc_detail));
  r.get("pipeline.toc_detail", detail);
  p.toc_detail = parse_toc_detail(detail);
  r.get_budget("pipeline.toc_budget", p.toc_budget);
  r.get_budget("pipeline.reference_budget", p.reference_budget);
  r.get_budget("pipeline.memory_budget", p.memory_budget);
  r.get_budget("pipeline.selector_context", p.selector_context);
  r.get_budget("pipeline.generator_context", p.generator_context);
  r.get_budget("pipeline.casual_context", p.casual_context);
  r.get_number("pipeline.max_output_tokens", p.max_output_tokens);
  r.get_number("pipeline.temperature", p.temperature);
  r.get("pipeline.templates_dir", c.templates_dir);
  std::string book_title = p.templates.book_title;
  r.get("pipeline.book_title", book_title);

  r.get("models.selector", p.selector_model);
  r.get("models.generator", p.generator_model);
  r.get("models.casual", p.casual_model);
  r.get("models.direct", c.direct_model);
  r.get("models.embedding", c.embedding_model);
  r.get_number("baseline.lambda", c.baseline_lambda);

  read_provider(r, "selector", c.selector);
  read_provider(r, "generator", c.generator);
  read_provider(r, "casual", c.casual);
  read_provider(r, "direct", c.direct);
  read_provider(r, "embedding", c.embedding);

  c.corpus_dir = resolve(base_dir, c.corpus_dir);
  c.session_dir = resolve(base_dir, c.session_dir);
  c.index_dir = resolve(base_dir, c.index_dir);
  c.templates_dir = resolve(base_dir, c.templates_dir);
  for (ProviderSettings* s : {&c.selector, &c.generator, &c.casual, &c.direct, &c.embedding}) {
    s->script = resolve(base_dir, s->script);
  }
  if (!c.templates_dir.empty()) p.templates = PromptTemplates::load(c.templates_dir);
  p.templates.book_title = book_title;
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

AppConfig load_config(const std::string& path, const EnvLookup& env) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const auto dir = std::filesystem::absolute(path).parent_path().string();
  try {
    return parse_config(text, dir, env);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

AppConfig default_config(const EnvLookup& env) {
  return parse_config("", std::filesystem::current_path().string(), env);
}

}  // namespace tocrag
