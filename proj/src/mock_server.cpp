// Copyright 2026 The ctnarr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "ctn/mock_server.hpp"

#include <thread>

#include <nlohmann/json.hpp>

#include "ctn/embedding.hpp"
#include "ctn/error.hpp"

#include <httplib.h>

namespace ctn {

struct MockProviderServer::Impl {
  MockServerOptions options;
  httplib::Server server;
  std::thread worker;
  std::atomic<std::size_t> count{0};

  bool inject_fault(httplib::Response& res) {
    const auto n = count.fetch_add(1);
    if (n < static_cast<std::size_t>(options.fail_first)) {
      res.status = options.fail_status;
      if (options.fail_status == 429) res.set_header("Retry-After", "0");
      res.set_content(R"({"error":"injected"})", "application/json");
      return true;
    }
    return false;
  }

  void routes() {
    server.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      if (inject_fault(res)) return;
      try {
        const auto texts = decode_embed_request(req.body);
        MockEmbeddingProvider provider(options.embed_dim, options.embed_model);
        res.set_content(encode_embed_response(provider.embed(texts)), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
    });
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      if (inject_fault(res)) return;
      try {
        const ChatRequest request = decode_chat_request(req.body);
        res.set_content(encode_chat_response(MockChatProvider::respond(request, options.chat_mode), request.model),
                        "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
    });
  }
};

MockProviderServer::MockProviderServer(MockServerOptions options) : impl_(new Impl) {
  impl_->options = std::move(options);
  impl_->routes();
}

MockProviderServer::~MockProviderServer() { stop(); }

int MockProviderServer::bind() {
  int port = impl_->options.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->options.host);
  } else if (!impl_->server.bind_to_port(impl_->options.host, port)) {
    port = -1;
  }
  if (port < 0) fail(ErrorCode::io, "mock provider cannot bind " + impl_->options.host);
  return port;
}

void MockProviderServer::serve() { impl_->server.listen_after_bind(); }

int MockProviderServer::start() {
  const int port = bind();
  impl_->worker = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
  return port;
}

void MockProviderServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

std::size_t MockProviderServer::requests() const { return impl_->count.load(); }

}  // namespace ctn
