#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace echoreason {

// Plain-HTTP endpoint parsed from a URL such as http://host:8080/prefix.
struct HttpEndpoint {
  std::string host;
  int port = 80;
  std::string base_path;
};

HttpEndpoint parse_endpoint(std::string_view url);

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string transport_error;  // non-empty when no response was received

  bool received() const noexcept { return transport_error.empty(); }
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

HttpResponse http_post(const HttpEndpoint& endpoint, const std::string& path, const std::string& body,
                       const std::string& content_type, const HttpHeaders& headers,
                       std::chrono::milliseconds timeout);

}  // namespace echoreason
