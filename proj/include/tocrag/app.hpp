#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "tocrag/chunk_baseline.hpp"
#include "tocrag/config.hpp"
#include "tocrag/openai_provider.hpp"
#include "tocrag/pipeline.hpp"

namespace tocrag {

inline constexpr std::string_view kVersion = "0.1.0";

/// Chat and embedding providers for every role, built from configuration.
/// Roles pointing at the same script share one scripted provider.
struct Providers {
  Gateway gateway;
  std::shared_ptr<ChatProvider> direct;
};

/// `transport` defaults to the real HTTP transport.
Providers build_providers(const AppConfig& config, std::shared_ptr<const Tokenizer> tokenizer,
                          std::shared_ptr<Transport> transport = nullptr);

inline constexpr std::string_view kModePromptRag = "prompt_rag";
inline constexpr std::string_view kModeNoRetrieval = "no_retrieval";
std::vector<std::string> all_modes();

/// Fingerprint of a corpus and embedding model, used to tell whether a
/// stored chunk index still matches.
std::string corpus_fingerprint(const Corpus& corpus, std::string_view embedding_model);

/// Builds answerers for each mode. Chunk indexes are built on first use per
/// corpus snapshot and cached; when `index_dir` is set they are also stored
/// there and reused while the fingerprint matches.
class AnswererFactory {
 public:
  AnswererFactory(AppConfig config, Providers providers,
                  std::shared_ptr<const Tokenizer> tokenizer);

  /// Throws std::invalid_argument for unknown modes.
  std::unique_ptr<Answerer> make(std::string_view mode, std::shared_ptr<const Corpus> corpus);
  std::shared_ptr<const ChunkIndex> index_for(const BaselinePreset& preset,
                                              const std::shared_ptr<const Corpus>& corpus);

  const AppConfig& config() const noexcept { return config_; }
  const Providers& providers() const noexcept { return providers_; }

 private:
  AppConfig config_;
  Providers providers_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  std::mutex mutex_;
  // Keyed by (corpus snapshot, chunk size); the corpus is kept alive by the key.
  std::map<std::pair<const Corpus*, std::size_t>,
           std::pair<std::shared_ptr<const Corpus>, std::shared_ptr<const ChunkIndex>>>
      indexes_;
};

/// File stem with characters outside [A-Za-z0-9_.-] replaced by '_'.
std::string doc_id_from_filename(std::string_view filename);

/// Saves into a sibling temporary directory and renames it into place, so a
/// reader of `directory` never sees a half-written corpus.
void publish_corpus(const Corpus& corpus, const std::string& directory);

struct CorpusSummary {
  std::size_t documents = 0;
  std::size_t headings = 0;
  std::size_t sections = 0;
  std::size_t toc_tokens = 0;  // rendered ToC after fitting to the ToC budget
};
CorpusSummary summarize(const Corpus& corpus, const PipelineConfig& config);

/// The currently served corpus. Readers take a snapshot; ingest swaps in a
/// new immutable Corpus without touching the one in use.
class CorpusHolder {
 public:
  explicit CorpusHolder(std::shared_ptr<const Corpus> corpus = nullptr);
  std::shared_ptr<const Corpus> snapshot() const;
  void replace(std::shared_ptr<const Corpus> corpus);

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const Corpus> corpus_;
};

}  // namespace tocrag
