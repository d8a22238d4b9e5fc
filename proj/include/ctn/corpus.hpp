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

// Post-dump ingestion: newline-delimited JSON submissions (optionally zstd
// compressed) are parsed into Posts, removed/deleted posts are dropped, and
// the remainder become normalized Documents.

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ctn {

inline constexpr std::array<std::string_view, 2> kRemovedBodySentinels = {"[removed]", "[deleted]"};
inline constexpr std::string_view kDeletedAuthor = "[deleted]";
inline constexpr std::size_t kDefaultMinChars = 30;

struct Post {
  std::string id;
  std::string subreddit;
  std::string author;
  std::string title;
  std::string body;
  std::int64_t created_utc = 0;
  std::int64_t num_comments = 0;
  std::int64_t score = 0;
  bool retrieved_removed = false;
};

struct Document {
  std::string post_id;
  std::string subreddit;
  std::string text;
  std::size_t char_len = 0;
  std::int64_t num_comments = 0;
  std::int64_t karma = 0;
  std::int64_t created_utc = 0;

  bool operator==(const Document&) const = default;
};

bool is_removal_sentinel(std::string_view body) noexcept;

// Number of Unicode scalar values in a UTF-8 string.
std::size_t utf8_length(std::string_view s) noexcept;

// Thread-safe skip accounting for stream_dump.
struct StreamCounters {
  std::atomic<std::size_t> lines{0};
  std::atomic<std::size_t> parsed{0};
  std::atomic<std::size_t> malformed{0};
  std::atomic<std::size_t> missing_field{0};

  std::size_t skipped() const noexcept { return malformed + missing_field; }
};

// Parses one dump line. Returns nullopt for malformed JSON or invalid fields;
// `missing_field` is set when the line parsed but lacks id or subreddit.
std::optional<Post> parse_post_line(std::string_view line, bool* missing_field = nullptr);

// Streams Posts from newline-delimited JSON in input order. Blank lines are
// ignored; malformed lines and lines missing id/subreddit are counted and skipped.
void stream_dump(std::istream& in, const std::function<void(Post&&)>& sink, StreamCounters& counters);

std::vector<Post> stream_dump(std::istream& in, StreamCounters& counters);

// Opens `path` (decompressing when `zstd` is set or the file carries the zstd
// magic number) and streams its posts. Unreadable files throw io.
std::vector<Post> read_dump_file(const std::filesystem::path& path, bool zstd, StreamCounters& counters);

struct FilterReport {
  std::size_t full_count = 0;
  std::size_t clean_count = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_subreddit;  // full, clean
};

// Drops posts whose body is a removal sentinel or whose author is deleted.
std::vector<Post> filter_posts(std::vector<Post> posts, FilterReport* report = nullptr);

struct Rejected {
  enum class Reason { too_short, sentinel_text };
  Reason reason = Reason::too_short;
  std::size_t char_len = 0;
};

// text = trim(title) + "\n" + trim(body) (separator omitted when either part
// is empty); karma = max(score, 0).
std::variant<Document, Rejected> to_document(const Post& post, std::size_t min_chars = kDefaultMinChars);

struct IngestOptions {
  std::size_t min_chars = kDefaultMinChars;
  std::optional<std::int64_t> since;  // inclusive, unix seconds
  std::optional<std::int64_t> until;  // inclusive
  bool force_zstd = false;
  std::size_t parallel_files = 1;
};

struct IngestReport {
  std::size_t lines = 0;
  std::size_t parsed = 0;
  std::size_t skipped_malformed = 0;
  std::size_t skipped_missing_field = 0;
  std::size_t duplicates = 0;
  std::size_t out_of_window = 0;
  std::size_t full_count = 0;
  std::size_t clean_count = 0;
  std::size_t too_short = 0;
  std::size_t documents = 0;
  struct PerSubreddit {
    std::size_t full = 0;
    std::size_t clean = 0;
    std::size_t documents = 0;
  };
  std::map<std::string, PerSubreddit> per_subreddit;
};

// Full ingestion over several files: stream, window, de-duplicate ids (first
// occurrence wins), filter and convert. Output order follows input file order.
std::vector<Document> ingest_files(const std::vector<std::filesystem::path>& paths,
                                   const IngestOptions& options, IngestReport& report);

}  // namespace ctn
