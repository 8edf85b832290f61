#include "echoreason/http.hpp"

#include "echoreason/error.hpp"
#include "httplib.h"

namespace echoreason {

HttpEndpoint parse_endpoint(std::string_view url) {
  constexpr std::string_view kScheme = "http://";
  if (url.substr(0, kScheme.size()) != kScheme) {
    throw Error(Errc::ConfigError, "only http:// endpoints are supported: '" + std::string(url) + "'");
  }
  std::string_view rest = url.substr(kScheme.size());
  const auto slash = rest.find('/');
  std::string_view authority = rest.substr(0, slash);
  HttpEndpoint ep;
  if (slash != std::string_view::npos) ep.base_path = std::string(rest.substr(slash));
  while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  const auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    ep.host = std::string(authority.substr(0, colon));
    try {
      ep.port = std::stoi(std::string(authority.substr(colon + 1)));
    } catch (const std::exception&) {
      throw Error(Errc::ConfigError, "bad port in '" + std::string(url) + "'");
    }
  } else {
    ep.host = std::string(authority);
  }
  if (ep.host.empty()) throw Error(Errc::ConfigError, "missing host in '" + std::string(url) + "'");
  return ep;
}

HttpResponse http_post(const HttpEndpoint& endpoint, const std::string& path, const std::string& body,
                       const std::string& content_type, const HttpHeaders& headers,
                       std::chrono::milliseconds timeout) {
  httplib::Client client(endpoint.host, endpoint.port);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  HttpResponse out;
  auto res = client.Post(endpoint.base_path + path, h, body, content_type);
  if (!res) {
    out.transport_error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

}  // namespace echoreason
