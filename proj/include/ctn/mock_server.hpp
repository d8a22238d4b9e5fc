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


#pragma once

// Offline HTTP stand-ins for the embedding and chat providers, speaking the
// same wire formats as the real clients. Used by the smoke tests and the
// `mock-provider` subcommand.

#include <atomic>
#include <memory>
#include <string>

#include "ctn/llm.hpp"

namespace ctn {

struct MockServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  int embed_dim = 64;
  std::string embed_model = "mock-hash-bow";
  MockChatProvider::Mode chat_mode = MockChatProvider::Mode::keyword;
  // Fault injection: the first `fail_first` requests get `fail_status`.
  int fail_first = 0;
  int fail_status = 503;
};

class MockProviderServer {
 public:
  explicit MockProviderServer(MockServerOptions options);
  ~MockProviderServer();

  int bind();
  void serve();  // blocks
  // bind() + serve() on a background thread; returns the port.
  int start();
  void stop();

  std::size_t requests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ctn
