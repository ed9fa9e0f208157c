#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tocrag/corpus.hpp"
#include "tocrag/gateway.hpp"
#include "tocrag/tokenizer.hpp"

namespace fixture {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "tocrag-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// One heading of a synthetic markdown document.
struct Node {
  std::string title;
  int depth;
  std::string body;  // text under the heading line, ends with '\n'
};

inline std::string markdown(const std::vector<Node>& nodes) {
  std::string out;
  for (const auto& n : nodes) {
    out += std::string(static_cast<std::size_t>(n.depth), '#') + " " + n.title + "\n";
    out += n.body + "\n";
  }
  return out;
}

/// Twelve headings H1..H12 over three levels:
///   H1 (H2, H3 (H4)), H5 (H6, H7), H8 (H9 (H10, H11)), H12
inline std::vector<Node> twelve_headings() {
  const int depths[12] = {1, 2, 2, 3, 1, 2, 2, 1, 2, 3, 3, 1};
  std::vector<Node> nodes;
  for (int i = 0; i < 12; ++i) {
    const std::string k = std::to_string(i + 1);
    nodes.push_back({"H" + k, depths[i], "Section " + k + " explains topic " + k + " in detail.\n"});
  }
  return nodes;
}

inline tocrag::Corpus build_corpus(const std::vector<Node>& nodes, const std::string& doc_id = "book") {
  tocrag::Corpus::Input in;
  in.document.doc_id = doc_id;
  in.document.title = doc_id;
  in.document.body = markdown(nodes);
  return tocrag::Corpus::build({in}, tocrag::OutlineStyle::markdown_hashes,
                               tocrag::make_tokenizer("default"));
}

/// Records every request and answers with `respond(request)`.
class FunctionProvider final : public tocrag::ChatProvider {
 public:
  using Respond = std::function<std::string(const tocrag::ChatRequest&)>;
  explicit FunctionProvider(Respond respond) : respond_(std::move(respond)) {}

  tocrag::ChatResponse complete(const tocrag::ChatRequest& request) override {
    {
      std::lock_guard lock(mutex_);
      requests_.push_back(request);
    }
    return {respond_(request), 0, 0, 0.0};
  }

  std::vector<tocrag::ChatRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  Respond respond_;
  mutable std::mutex mutex_;
  std::vector<tocrag::ChatRequest> requests_;
};

inline std::string text_between(const std::string& s, const std::string& open, const std::string& close) {
  const auto a = s.find(open);
  if (a == std::string::npos) return {};
  const auto b = s.find(close, a + open.size());
  return s.substr(a + open.size(), b == std::string::npos ? std::string::npos : b - a - open.size());
}

}  // namespace fixture
