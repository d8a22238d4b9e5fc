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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ctn {

// Post-level ground truth.
enum class Label : std::uint8_t { NonCT = 0, CT = 1 };

// A coder's or model's yes/no answer to "is this a conspiracy theory?".
enum class Verdict : std::uint8_t { No = 0, Yes = 1 };

constexpr Label to_label(Verdict v) noexcept { return v == Verdict::Yes ? Label::CT : Label::NonCT; }
constexpr Verdict to_verdict(Label l) noexcept { return l == Label::CT ? Verdict::Yes : Verdict::No; }
constexpr int as_int(Label l) noexcept { return static_cast<int>(l); }

std::string_view to_string(Label l) noexcept;
std::string_view to_string(Verdict v) noexcept;
std::optional<Label> parse_label(std::string_view s) noexcept;
std::optional<Verdict> parse_verdict_word(std::string_view s) noexcept;

}  // namespace ctn
