#include "tocrag/chunk_baseline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <json.hpp>

#include "tocrag/embedding_io.hpp"

namespace tocrag {

std::vector<Chunk> chunk_text(std::string_view text, std::size_t size,
                              const Tokenizer& tokenizer) {
  if (size == 0) throw std::invalid_argument("chunk size must be positive");
  const std::vector<Token> tokens = tokenizer.tokenize(text);
  std::vector<Chunk> chunks;
  for (std::size_t begin = 0; begin < tokens.size(); begin += size) {
    const std::size_t end = std::min(begin + size, tokens.size());
    Chunk c;
    c.chunk_id = chunks.size();
    c.token_begin = begin;
    c.token_end = end;
    c.byte_begin = tokens[begin].begin;
    c.byte_end = tokens[end - 1].end;
    c.text = std::string(text.substr(c.byte_begin, c.byte_end - c.byte_begin));
    chunks.push_back(std::move(c));
  }
  return chunks;
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dimension() != v.dimension()) {
    throw DimensionMismatch("cosine_similarity: dimensions " + std::to_string(u.dimension()) +
                            " and " + std::to_string(v.dimension()));
  }
  double dot = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    dot += u.values[i] * v.values[i];
    uu += u.values[i] * u.values[i];
    vv += v.values[i] * v.values[i];
  }
  if (uu == 0 || vv == 0) throw ZeroVector("cosine_similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

ChunkIndex::ChunkIndex(std::vector<Chunk> chunks, std::vector<EmbeddingVector> vectors,
                       std::string model_id, std::size_t chunk_size)
    : chunks_(std::move(chunks)),
      vectors_(std::move(vectors)),
      model_id_(std::move(model_id)),
      chunk_size_(chunk_size) {
  if (chunks_.size() != vectors_.size()) {
    throw std::invalid_argument("chunk index needs one vector per chunk");
  }
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    if (chunks_[i].chunk_id != i) throw std::invalid_argument("chunk ids must be 0..n-1");
    if (vectors_[i].dimension() != vectors_.front().dimension()) {
      throw DimensionMismatch("chunk index vectors differ in dimension");
    }
  }
}

ChunkIndex ChunkIndex::build(std::string_view text, std::size_t chunk_size,
                             const Tokenizer& tokenizer, EmbeddingProvider& embedder,
                             std::size_t batch) {
  if (batch == 0) throw std::invalid_argument("batch must be positive");
  std::vector<Chunk> chunks = chunk_text(text, chunk_size, tokenizer);
  std::vector<EmbeddingVector> vectors;
  vectors.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); i += batch) {
    std::vector<std::string> texts;
    for (std::size_t j = i; j < std::min(i + batch, chunks.size()); ++j) {
      texts.push_back(chunks[j].text);
    }
    for (auto& v : embed_texts(texts, embedder)) vectors.push_back(std::move(v));
  }
  return ChunkIndex(std::move(chunks), std::move(vectors), embedder.model_id(), chunk_size);
}

void ChunkIndex::save(const std::string& directory) const {
  namespace fs = std::filesystem;
  EmbeddingTable table;
  table.model_id = model_id_;
  table.dimension = vectors_.empty() ? 1 : vectors_.front().dimension();
  nlohmann::ordered_json manifest;
  manifest["format"] = 1;
  manifest["model_id"] = model_id_;
  manifest["chunk_size"] = chunk_size_;
  auto& list = manifest["chunks"] = nlohmann::ordered_json::array();
  for (const Chunk& c : chunks_) {
    table.ids.push_back(std::to_string(c.chunk_id));
    table.vectors.push_back(vectors_[c.chunk_id]);
    list.push_back({{"chunk_id", c.chunk_id},
                    {"token_span", {c.token_begin, c.token_end}},
                    {"byte_span", {c.byte_begin, c.byte_end}},
                    {"text", c.text}});
  }
  save_embedding_csv(table, (fs::path(directory) / "vectors.csv").string());
  write_text_file((fs::path(directory) / "chunks.json").string(), manifest.dump(2) + "\n");
}

ChunkIndex ChunkIndex::load(const std::string& directory) {
  namespace fs = std::filesystem;
  const EmbeddingTable table = load_embedding_csv((fs::path(directory) / "vectors.csv").string());
  const auto manifest =
      nlohmann::json::parse(read_text_file((fs::path(directory) / "chunks.json").string()));
  std::vector<Chunk> chunks;
  std::vector<EmbeddingVector> vectors;
  for (const auto& entry : manifest.at("chunks")) {
    Chunk c;
    c.chunk_id = entry.at("chunk_id").get<std::size_t>();
    c.token_begin = entry.at("token_span").at(0).get<std::size_t>();
    c.token_end = entry.at("token_span").at(1).get<std::size_t>();
    c.byte_begin = entry.at("byte_span").at(0).get<std::size_t>();
    c.byte_end = entry.at("byte_span").at(1).get<std::size_t>();
    c.text = entry.at("text").get<std::string>();
    const EmbeddingVector* v = table.find(std::to_string(c.chunk_id));
    if (!v) throw std::runtime_error("chunk index: no vector for chunk " + std::to_string(c.chunk_id));
    vectors.push_back(*v);
    chunks.push_back(std::move(c));
  }
  return ChunkIndex(std::move(chunks), std::move(vectors), table.model_id,
                    manifest.at("chunk_size").get<std::size_t>());
}

std::vector<std::size_t> mmr_retrieve(const EmbeddingVector& query, const ChunkIndex& index,
                                      const MmrParams& params) {
  if (params.lambda < 0 || params.lambda > 1) throw std::invalid_argument("lambda must be in [0,1]");
  if (params.k == 0) throw std::invalid_argument("k must be positive");
  const auto& vectors = index.vectors();
  const std::size_t n = vectors.size();
  const std::size_t k = std::min(params.k, n);

  std::vector<double> relevance(n);
  for (std::size_t i = 0; i < n; ++i) relevance[i] = cosine_similarity(query, vectors[i]);
  // Highest similarity to anything selected so far, per candidate.
  std::vector<double> redundancy(n, -std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> order;
  order.reserve(k);
  while (order.size() < k) {
    std::size_t best = n;
    double best_score = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double score = order.empty()
                               ? relevance[i]
                               : params.lambda * relevance[i] - (1 - params.lambda) * redundancy[i];
      // Scores equal up to rounding count as ties and keep the lower id.
      if (best == n || score > best_score + kMmrTieTolerance) {
        best = i;
        best_score = score;
      }
    }
    taken[best] = true;
    order.push_back(best);
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) redundancy[i] = std::max(redundancy[i], cosine_similarity(vectors[i], vectors[best]));
    }
  }
  return order;
}

BaselinePreset c50_v300() { return {"c50_v300", 50, 300, 0.5}; }
BaselinePreset c100_v150() { return {"c100_v150", 100, 150, 0.5}; }

BaselinePreset preset_by_name(std::string_view name) {
  if (name == "c50_v300" || name == "C50-V300") return c50_v300();
  if (name == "c100_v150" || name == "C100-V150") return c100_v150();
  throw std::invalid_argument("unknown baseline preset: " + std::string(name));
}

AnswerRecord baseline_answer(std::string_view question, const std::vector<Turn>& history,
                             const ChunkIndex& index, const BaselinePreset& preset,
                             const PipelineConfig& config, const Gateway& gateway,
                             const Tokenizer& tokenizer) {
  config.validate();
  if (!gateway.embedder || !gateway.generator) {
    throw std::invalid_argument("baseline needs embedder and generator providers");
  }
  if (index.size() == 0) throw std::invalid_argument("chunk index is empty");
  const auto start = std::chrono::steady_clock::now();

  AnswerRecord record;
  record.question = std::string(question);
  record.model_id = preset.name;
  RetrievalInfo info;
  info.chunk_size = index.chunk_size();
  info.k_requested = preset.k;
  info.k_used = std::min(preset.k, index.size());
  info.k_clamped = info.k_used < preset.k;
  info.lambda = preset.lambda;

  const auto query = embed_texts({std::string(question)}, *gateway.embedder);
  const auto ids = mmr_retrieve(query.front(), index, {preset.lambda, info.k_used});
  std::vector<std::pair<std::string, std::string>> parts;
  for (std::size_t id : ids) {
    parts.emplace_back("chunk-" + std::to_string(id), index.chunks()[id].text);
  }
  const auto make = [&](std::size_t max_tokens) {
    return concat_reference(parts, max_tokens, tokenizer);
  };
  GenerationResult gen =
      generate_with_reference(question, history, make, config, *gateway.generator, tokenizer);

  record.answer = std::move(gen.answer);
  record.prompt_used = PromptUsed::with_reference;
  record.selection.kind = SelectionKind::selected;
  record.selection.headings = gen.reference.provenance;
  record.provenance = gen.reference.provenance;
  record.provenance_titles = gen.reference.provenance;
  record.reference_truncated = gen.reference.truncated;
  record.reference_tokens = gen.reference.token_count;
  record.retrieval = info;
  record.latency_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

ChunkBaselineAnswerer::ChunkBaselineAnswerer(std::shared_ptr<const ChunkIndex> index,
                                             BaselinePreset preset, PipelineConfig config,
                                             Gateway gateway,
                                             std::shared_ptr<const Tokenizer> tokenizer)
    : index_(std::move(index)),
      preset_(std::move(preset)),
      config_(std::move(config)),
      gateway_(std::move(gateway)),
      tokenizer_(std::move(tokenizer)) {
  if (!index_ || !tokenizer_) throw std::invalid_argument("baseline answerer needs an index");
}

AnswerRecord ChunkBaselineAnswerer::answer_locked(std::string_view question, Session& session) {
  AnswerRecord record = baseline_answer(question, session.buffer.turns, *index_, preset_, config_,
                                        gateway_, *tokenizer_);
  commit_turns(session, record, *tokenizer_);
  return record;
}

}  // namespace tocrag
