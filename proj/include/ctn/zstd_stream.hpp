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

#include <istream>
#include <memory>
#include <streambuf>
#include <string>
#include <string_view>
#include <vector>

namespace ctn {

// std::streambuf that decompresses a zstd stream (any number of frames) read
// from another istream. Long-window archives (up to 2^31) are accepted.
class ZstdInputBuf : public std::streambuf {
 public:
  explicit ZstdInputBuf(std::istream& compressed);
  ~ZstdInputBuf() override;

  ZstdInputBuf(const ZstdInputBuf&) = delete;
  ZstdInputBuf& operator=(const ZstdInputBuf&) = delete;

 protected:
  int_type underflow() override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Single-shot compression, used by tests and fixture tooling.
std::string zstd_compress(std::string_view data, int level = 3);

bool has_zstd_magic(std::istream& in);

}  // namespace ctn
