#include "stub_server.hpp"

#include <httplib.h>

#include <thread>

namespace echoreason::fixtures {

struct StubServer::Impl {
  httplib::Server server;
  std::thread thread;
};

StubServer::StubServer(Handler handler) : impl_(std::make_unique<Impl>()) {
  auto serve = [handler](const httplib::Request& req, httplib::Response& res) {
    StubRequest r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.headers) r.headers[k] = v;
    const StubResponse out = handler(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  impl_->server.Post(R"(/.*)", serve);
  impl_->server.Get(R"(/.*)", serve);
  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

StubServer::~StubServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

namespace {

HttpReply convert(const httplib::Result& r) {
  HttpReply out;
  if (!r) return out;
  out.status = r->status;
  out.body = r->body;
  for (const auto& [k, v] : r->headers) out.headers[k] = v;
  return out;
}

}  // namespace

HttpReply http_get(int port, const std::string& path, const std::map<std::string, std::string>& headers) {
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(30, 0);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  return convert(cli.Get(path, h));
}

HttpReply http_post_json(int port, const std::string& path, const std::string& body) {
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(120, 0);
  return convert(cli.Post(path, body, "application/json"));
}

}  // namespace echoreason::fixtures
