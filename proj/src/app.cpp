#include "tocrag/app.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "tocrag/embedding_io.hpp"
#include "tocrag/scripted_provider.hpp"

namespace tocrag {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<ChatProvider> limit(std::shared_ptr<ChatProvider> p, const ProviderSettings& s) {
  if (s.kind == "openai" && s.http.max_in_flight > 0) {
    return std::make_shared<LimitedChatProvider>(std::move(p), s.http.max_in_flight);
  }
  return p;
}

}  // namespace

Providers build_providers(const AppConfig& config, std::shared_ptr<const Tokenizer> tokenizer,
                          std::shared_ptr<Transport> transport) {
  std::map<std::string, std::shared_ptr<ChatProvider>> scripted;
  auto chat = [&](const ProviderSettings& s) -> std::shared_ptr<ChatProvider> {
    if (s.kind == "scripted") {
      auto& slot = scripted[s.script];
      if (!slot) {
        auto rules = s.script.empty() ? std::vector<ScriptedRule>{} : load_script(s.script);
        slot = std::make_shared<ScriptedChatProvider>(std::move(rules), tokenizer);
      }
      return slot;
    }
    if (!transport) transport = make_http_transport();
    return limit(std::make_shared<OpenAiChatProvider>(s.http, transport), s);
  };

  Providers out;
  out.gateway.selector = chat(config.selector);
  out.gateway.generator = chat(config.generator);
  out.gateway.casual = chat(config.casual);
  out.direct = chat(config.direct);
  if (config.embedding.kind == "stub") {
    out.gateway.embedder = std::make_shared<StubEmbeddingProvider>(config.embedding.dimension,
                                                                   tokenizer, config.embedding_model);
  } else {
    if (!transport) transport = make_http_transport();
    out.gateway.embedder = std::make_shared<OpenAiEmbeddingProvider>(
        config.embedding.http, config.embedding_model, transport, config.embedding.batch_size);
  }
  return out;
}

std::vector<std::string> all_modes() {
  return {std::string(kModePromptRag), c50_v300().name, c100_v150().name,
          std::string(kModeNoRetrieval)};
}

std::string corpus_fingerprint(const Corpus& corpus, std::string_view embedding_model) {
  std::string key = corpus.full_text();
  key += '\0';
  key += embedding_model;
  key += '\0';
  key += corpus.tokenizer().id();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(stub_token_hash(key)));
  return buf;
}

AnswererFactory::AnswererFactory(AppConfig config, Providers providers,
                                 std::shared_ptr<const Tokenizer> tokenizer)
    : config_(std::move(config)), providers_(std::move(providers)), tokenizer_(std::move(tokenizer)) {}

std::shared_ptr<const ChunkIndex> AnswererFactory::index_for(
    const BaselinePreset& preset, const std::shared_ptr<const Corpus>& corpus) {
  // Held across the build so concurrent first requests embed only once.
  std::lock_guard lock(mutex_);
  const auto key = std::make_pair(corpus.get(), preset.chunk_size);
  if (auto it = indexes_.find(key); it != indexes_.end()) return it->second.second;

  const std::string fingerprint = corpus_fingerprint(*corpus, config_.embedding_model);
  std::shared_ptr<const ChunkIndex> index;
  fs::path dir;
  if (!config_.index_dir.empty()) {
    dir = fs::path(config_.index_dir) / ("c" + std::to_string(preset.chunk_size));
    const fs::path stamp = dir / "fingerprint.txt";
    if (fs::exists(stamp) && read_text_file(stamp.string()) == fingerprint + "\n") {
      index = std::make_shared<const ChunkIndex>(ChunkIndex::load(dir.string()));
    }
  }
  if (!index) {
    index = std::make_shared<const ChunkIndex>(
        ChunkIndex::build(corpus->full_text(), preset.chunk_size, *tokenizer_,
                          *providers_.gateway.embedder, config_.embedding.batch_size));
    if (!dir.empty()) {
      index->save(dir.string());
      write_text_file((dir / "fingerprint.txt").string(), fingerprint + "\n");
    }
  }
  indexes_[key] = {corpus, index};
  return index;
}

std::unique_ptr<Answerer> AnswererFactory::make(std::string_view mode,
                                                std::shared_ptr<const Corpus> corpus) {
  if (mode == kModeNoRetrieval) {
    return std::make_unique<DirectChatAnswerer>(
        config_.direct_model, providers_.direct, config_.pipeline.casual_context.max_tokens(),
        config_.pipeline.max_output_tokens, tokenizer_);
  }
  if (!corpus) throw std::invalid_argument("no corpus has been ingested");
  if (mode == kModePromptRag) {
    return std::make_unique<PromptRagAnswerer>(std::move(corpus), config_.pipeline,
                                               providers_.gateway, std::string(kModePromptRag));
  }
  BaselinePreset preset;
  try {
    preset = preset_by_name(mode);
  } catch (const std::exception&) {
    throw std::invalid_argument("unknown mode '" + std::string(mode) + "'");
  }
  preset.lambda = config_.baseline_lambda;
  auto index = index_for(preset, corpus);
  return std::make_unique<ChunkBaselineAnswerer>(std::move(index), preset, config_.pipeline,
                                                 providers_.gateway, tokenizer_);
}

std::string doc_id_from_filename(std::string_view filename) {
  std::string stem = fs::path(std::string(filename)).stem().string();
  for (char& c : stem) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
    if (!ok) c = '_';
  }
  if (stem.empty()) stem = "document";
  return stem;
}

void publish_corpus(const Corpus& corpus, const std::string& directory) {
  const fs::path target = fs::absolute(directory).lexically_normal();
  const fs::path parent = target.parent_path();
  fs::create_directories(parent);
  const fs::path staging = parent / (target.filename().string() + ".staging");
  const fs::path retired = parent / (target.filename().string() + ".retired");
  fs::remove_all(staging);
  fs::remove_all(retired);
  save_corpus(corpus, staging.string());
  if (fs::exists(target)) fs::rename(target, retired);
  fs::rename(staging, target);
  fs::remove_all(retired);
}

CorpusSummary summarize(const Corpus& corpus, const PipelineConfig& config) {
  const TocTree fitted =
      fit_toc_to_budget(corpus.toc(), config.toc_budget, corpus.tokenizer(), config.toc_detail);
  return {corpus.documents().size(), corpus.toc().size(), corpus.sections().size(),
          count_tokens(render_toc(fitted, config.toc_detail), corpus.tokenizer())};
}

CorpusHolder::CorpusHolder(std::shared_ptr<const Corpus> corpus) : corpus_(std::move(corpus)) {}

std::shared_ptr<const Corpus> CorpusHolder::snapshot() const {
  std::lock_guard lock(mutex_);
  return corpus_;
}

void CorpusHolder::replace(std::shared_ptr<const Corpus> corpus) {
  std::lock_guard lock(mutex_);
  corpus_ = std::move(corpus);
}

}  // namespace tocrag
