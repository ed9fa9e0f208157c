#include <httplib.h>

#include <cctype>
#include <cmath>
#include <regex>

#include "tocrag/openai_provider.hpp"

namespace tocrag {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw TransportError("unsupported URL: " + url);
  return {m.str(1), m[2].matched ? m.str(2) : "/"};
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

class HttplibTransport final : public Transport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    const SplitUrl url = split_url(request.url);
    httplib::Client client(url.origin);
    const double t = std::max(request.timeout_seconds, 0.001);
    const auto sec = static_cast<time_t>(std::floor(t));
    const auto usec = static_cast<time_t>((t - std::floor(t)) * 1e6);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : request.headers) {
      if (lower(k) == "content-type") {
        content_type = v;
      } else {
        headers.emplace(k, v);
      }
    }
    auto result = client.Post(url.path, headers, request.body, content_type);
    if (!result) {
      const httplib::Error err = result.error();
      const std::string what = "POST " + request.url + ": " + httplib::to_string(err);
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
          err == httplib::Error::Write) {
        throw TransportTimeout(what);
      }
      throw TransportError(what);
    }
    return {result->status, result->body};
  }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

}  // namespace tocrag
