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

#include "ctn/error.hpp"

namespace ctn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::io: return "io_error";
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::permission: return "permission_error";
    case ErrorCode::dimension: return "dimension_error";
    case ErrorCode::domain: return "domain_error";
    case ErrorCode::size: return "size_error";
    case ErrorCode::state: return "state_error";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::integrity: return "integrity_error";
    case ErrorCode::transport: return "transport_error";
    case ErrorCode::parameter: return "parameter_error";
    case ErrorCode::degenerate: return "degenerate_training";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::undefined: return "undefined";
    case ErrorCode::auth: return "auth_error";
    case ErrorCode::forbidden: return "forbidden";
  }
  return "unknown";
}

}  // namespace ctn
