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

#include "ctn/types.hpp"

namespace ctn {

std::string_view to_string(Label l) noexcept { return l == Label::CT ? "CT" : "NonCT"; }

std::string_view to_string(Verdict v) noexcept { return v == Verdict::Yes ? "Yes" : "No"; }

std::optional<Label> parse_label(std::string_view s) noexcept {
  if (s == "CT" || s == "ct" || s == "1" || s == "Yes" || s == "yes") return Label::CT;
  if (s == "NonCT" || s == "nonct" || s == "non-CT" || s == "0" || s == "No" || s == "no")
    return Label::NonCT;
  return std::nullopt;
}

std::optional<Verdict> parse_verdict_word(std::string_view s) noexcept {
  if (s == "Yes" || s == "yes" || s == "YES") return Verdict::Yes;
  if (s == "No" || s == "no" || s == "NO") return Verdict::No;
  return std::nullopt;
}

}  // namespace ctn
