#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tocrag/gateway.hpp"

namespace tocrag {

/// Vectors keyed by document (or chunk) id, as stored in embedding CSVs.
struct EmbeddingTable {
  std::string model_id;
  std::size_t dimension = 0;
  std::vector<std::string> ids;
  std::vector<EmbeddingVector> vectors;

  const EmbeddingVector* find(std::string_view id) const noexcept;
};

/// CSV layout:
///   <model_id>,<dimension>
///   <id>,<v1>,...,<vd>
/// Values are written with 17 significant digits so they round-trip.
std::string format_embedding_csv(const EmbeddingTable& table);
EmbeddingTable parse_embedding_csv(std::string_view text);
EmbeddingTable load_embedding_csv(const std::string& path);
void save_embedding_csv(const EmbeddingTable& table, const std::string& path);

/// Minimal RFC 4180 reader/writer shared by the CSV formats.
namespace csv {
std::vector<std::vector<std::string>> parse(std::string_view text);
std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);
}  // namespace csv

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace tocrag
