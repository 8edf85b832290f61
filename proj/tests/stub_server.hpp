#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

namespace echoreason::fixtures {

struct StubRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> headers;
  std::string body;
};

struct StubResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Loopback HTTP server on an ephemeral port answering every POST/GET with
// the handler's response.
class StubServer {
 public:
  using Handler = std::function<StubResponse(const StubRequest&)>;
  explicit StubServer(Handler handler);
  ~StubServer();
  int port() const noexcept { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

struct HttpReply {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
};

// Plain client helpers for exercising the service.
HttpReply http_get(int port, const std::string& path, const std::map<std::string, std::string>& headers = {});
HttpReply http_post_json(int port, const std::string& path, const std::string& body);

}  // namespace echoreason::fixtures
