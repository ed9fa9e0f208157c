#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tocrag/gateway.hpp"
#include "tocrag/pipeline.hpp"

namespace tocrag {

class ZeroVector : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Chunk {
  std::size_t chunk_id = 0;
  std::string text;
  std::size_t token_begin = 0;  // token offsets, [begin, end)
  std::size_t token_end = 0;
  std::size_t byte_begin = 0;  // offsets of `text` in the source
  std::size_t byte_end = 0;
};

/// Greedy runs of exactly `size` tokens; the last run may be shorter. Chunk
/// text is the source slice from the first token's start to the last token's
/// end.
std::vector<Chunk> chunk_text(std::string_view text, std::size_t size,
                              const Tokenizer& tokenizer);

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

inline constexpr double kMmrTieTolerance = 1e-12;

struct MmrParams {
  double lambda = 0.5;
  std::size_t k = 1;
};

class ChunkIndex {
 public:
  ChunkIndex(std::vector<Chunk> chunks, std::vector<EmbeddingVector> vectors,
             std::string model_id, std::size_t chunk_size);

  /// Chunks `text` and embeds every chunk, `batch` texts per call.
  static ChunkIndex build(std::string_view text, std::size_t chunk_size,
                          const Tokenizer& tokenizer, EmbeddingProvider& embedder,
                          std::size_t batch = 64);

  const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
  const std::vector<EmbeddingVector>& vectors() const noexcept { return vectors_; }
  const std::string& model_id() const noexcept { return model_id_; }
  std::size_t chunk_size() const noexcept { return chunk_size_; }
  std::size_t size() const noexcept { return chunks_.size(); }

  /// <dir>/vectors.csv (embedding CSV, ids are chunk ids) plus
  /// <dir>/chunks.json (chunk_id, token span, byte span, text).
  void save(const std::string& directory) const;
  static ChunkIndex load(const std::string& directory);

 private:
  std::vector<Chunk> chunks_;
  std::vector<EmbeddingVector> vectors_;
  std::string model_id_;
  std::size_t chunk_size_;
};

/// Greedy maximal marginal relevance. The first pick maximizes similarity to
/// the query; later picks maximize
///   lambda * sim(query, c) - (1 - lambda) * max_s sim(c, s)
/// over the selected s. Ties (scores within kMmrTieTolerance) go to the lower
/// chunk id.
std::vector<std::size_t> mmr_retrieve(const EmbeddingVector& query, const ChunkIndex& index,
                                      const MmrParams& params);

struct BaselinePreset {
  std::string name;
  std::size_t chunk_size = 50;
  std::size_t k = 300;
  double lambda = 0.5;
};

BaselinePreset c50_v300();
BaselinePreset c100_v150();
/// "c50_v300" / "C50-V300" and "c100_v150" / "C100-V150".
BaselinePreset preset_by_name(std::string_view name);

/// Embeds the bare question, retrieves by MMR and answers with the same
/// reference prompt as the heading pipeline. k is clamped to the chunk count.
AnswerRecord baseline_answer(std::string_view question, const std::vector<Turn>& history,
                             const ChunkIndex& index, const BaselinePreset& preset,
                             const PipelineConfig& config, const Gateway& gateway,
                             const Tokenizer& tokenizer);

class ChunkBaselineAnswerer final : public Answerer {
 public:
  ChunkBaselineAnswerer(std::shared_ptr<const ChunkIndex> index, BaselinePreset preset,
                        PipelineConfig config, Gateway gateway,
                        std::shared_ptr<const Tokenizer> tokenizer);
  std::string model_id() const override { return preset_.name; }

 protected:
  AnswerRecord answer_locked(std::string_view question, Session& session) override;

 private:
  std::shared_ptr<const ChunkIndex> index_;
  BaselinePreset preset_;
  PipelineConfig config_;
  Gateway gateway_;
  std::shared_ptr<const Tokenizer> tokenizer_;
};

}  // namespace tocrag
