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

#include "ctn/zstd_stream.hpp"

#include <cstddef>

#include "ctn/error.hpp"

// Stable libzstd API (>= 1.4.0). The runtime library is linked directly.
extern "C" {
struct ZSTD_DCtx_s;
typedef struct ZSTD_DCtx_s ZSTD_DCtx;
typedef struct ZSTD_inBuffer_s {
  const void* src;
  size_t size;
  size_t pos;
} ZSTD_inBuffer;
typedef struct ZSTD_outBuffer_s {
  void* dst;
  size_t size;
  size_t pos;
} ZSTD_outBuffer;
typedef enum { ZSTD_d_windowLogMax = 100 } ZSTD_dParameter;

ZSTD_DCtx* ZSTD_createDCtx(void);
size_t ZSTD_freeDCtx(ZSTD_DCtx* dctx);
size_t ZSTD_DCtx_setParameter(ZSTD_DCtx* dctx, ZSTD_dParameter param, int value);
size_t ZSTD_decompressStream(ZSTD_DCtx* zds, ZSTD_outBuffer* output, ZSTD_inBuffer* input);
size_t ZSTD_DStreamInSize(void);
size_t ZSTD_DStreamOutSize(void);
unsigned ZSTD_isError(size_t code);
const char* ZSTD_getErrorName(size_t code);
size_t ZSTD_compressBound(size_t srcSize);
size_t ZSTD_compress(void* dst, size_t dstCapacity, const void* src, size_t srcSize, int compressionLevel);
}

namespace ctn {

struct ZstdInputBuf::Impl {
  std::istream* source = nullptr;
  ZSTD_DCtx* dctx = nullptr;
  std::vector<char> in_buf;
  std::vector<char> out_buf;
  ZSTD_inBuffer input{nullptr, 0, 0};
  size_t last_ret = 0;
  bool source_done = false;
};

ZstdInputBuf::ZstdInputBuf(std::istream& compressed) : impl_(std::make_unique<Impl>()) {
  impl_->source = &compressed;
  impl_->dctx = ZSTD_createDCtx();
  if (impl_->dctx == nullptr) fail(ErrorCode::io, "zstd: cannot allocate decompression context");
  ZSTD_DCtx_setParameter(impl_->dctx, ZSTD_d_windowLogMax, 31);
  impl_->in_buf.resize(ZSTD_DStreamInSize());
  impl_->out_buf.resize(ZSTD_DStreamOutSize());
  impl_->input = {impl_->in_buf.data(), 0, 0};
  setg(nullptr, nullptr, nullptr);
}

ZstdInputBuf::~ZstdInputBuf() {
  if (impl_ && impl_->dctx) ZSTD_freeDCtx(impl_->dctx);
}

ZstdInputBuf::int_type ZstdInputBuf::underflow() {
  if (gptr() < egptr()) return traits_type::to_int_type(*gptr());
  Impl& s = *impl_;
  for (;;) {
    if (s.input.pos == s.input.size && !s.source_done) {
      s.source->read(s.in_buf.data(), static_cast<std::streamsize>(s.in_buf.size()));
      const auto got = static_cast<size_t>(s.source->gcount());
      if (s.source->bad()) fail(ErrorCode::io, "zstd: read error on compressed stream");
      if (got == 0) s.source_done = true;
      s.input = {s.in_buf.data(), got, 0};
    }
    if (s.input.pos == s.input.size && s.source_done) {
      if (s.last_ret != 0) fail(ErrorCode::io, "zstd: truncated compressed stream");
      return traits_type::eof();
    }
    ZSTD_outBuffer output{s.out_buf.data(), s.out_buf.size(), 0};
    const size_t ret = ZSTD_decompressStream(s.dctx, &output, &s.input);
    if (ZSTD_isError(ret)) fail(ErrorCode::io, std::string("zstd: ") + ZSTD_getErrorName(ret));
    s.last_ret = ret;
    if (output.pos > 0) {
      setg(s.out_buf.data(), s.out_buf.data(), s.out_buf.data() + output.pos);
      return traits_type::to_int_type(*gptr());
    }
  }
}

std::string zstd_compress(std::string_view data, int level) {
  std::string out(ZSTD_compressBound(data.size()), '\0');
  const size_t n = ZSTD_compress(out.data(), out.size(), data.data(), data.size(), level);
  if (ZSTD_isError(n)) fail(ErrorCode::io, std::string("zstd: ") + ZSTD_getErrorName(n));
  out.resize(n);
  return out;
}

bool has_zstd_magic(std::istream& in) {
  unsigned char magic[4] = {0, 0, 0, 0};
  const auto start = in.tellg();
  in.read(reinterpret_cast<char*>(magic), 4);
  const bool ok = in.gcount() == 4 && magic[0] == 0x28 && magic[1] == 0xB5 && magic[2] == 0x2F &&
                  magic[3] == 0xFD;
  in.clear();
  in.seekg(start);
  return ok;
}

}  // namespace ctn
