#include "tocrag/embedding_io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tocrag {

const EmbeddingVector* EmbeddingTable::find(std::string_view id) const noexcept {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return &vectors[i];
  }
  return nullptr;
}

namespace csv {

std::vector<std::vector<std::string>> parse(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
      if (!(row.size() == 1 && row.front().empty())) rows.push_back(std::move(row));
      row.clear();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quoted CSV field");
  if (field_started || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += escape(fields[i]);
  }
  return out;
}

}  // namespace csv

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, std::size_t row) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && *begin == ' ') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("embedding CSV row " + std::to_string(row) +
                                ": not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_embedding_csv(const EmbeddingTable& table) {
  std::string out = csv::join({table.model_id, std::to_string(table.dimension)}) + "\n";
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    std::vector<std::string> fields{table.ids[i]};
    for (double v : table.vectors[i].values) fields.push_back(format_double(v));
    out += csv::join(fields) + "\n";
  }
  return out;
}

EmbeddingTable parse_embedding_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows.front().size() != 2) {
    throw std::invalid_argument("embedding CSV header must be '<model_id>,<dimension>'");
  }
  EmbeddingTable table;
  table.model_id = rows.front()[0];
  const std::string& dim_text = rows.front()[1];
  std::size_t dim = 0;
  auto [ptr, ec] = std::from_chars(dim_text.data(), dim_text.data() + dim_text.size(), dim);
  if (ec != std::errc() || ptr != dim_text.data() + dim_text.size() || dim == 0) {
    throw std::invalid_argument("embedding CSV header has an invalid dimension: " + dim_text);
  }
  table.dimension = dim;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != dim + 1) {
      throw std::invalid_argument("embedding CSV row " + std::to_string(r) + " has " +
                                  std::to_string(row.size() - 1) + " components, expected " +
                                  std::to_string(dim));
    }
    if (!seen.insert(row[0]).second) {
      throw std::invalid_argument("embedding CSV has duplicate id: " + row[0]);
    }
    EmbeddingVector v;
    v.model_id = table.model_id;
    v.values.reserve(dim);
    for (std::size_t k = 1; k <= dim; ++k) v.values.push_back(parse_double(row[k], r));
    table.ids.push_back(row[0]);
    table.vectors.push_back(std::move(v));
  }
  return table;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

EmbeddingTable load_embedding_csv(const std::string& path) {
  try {
    return parse_embedding_csv(read_text_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void save_embedding_csv(const EmbeddingTable& table, const std::string& path) {
  write_text_file(path, format_embedding_csv(table));
}

}  // namespace tocrag
