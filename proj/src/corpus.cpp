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

#include "ctn/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ctn/error.hpp"
#include "ctn/zstd_stream.hpp"

namespace ctn {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Dump fields are sometimes numbers, sometimes numeric strings, sometimes null.
std::optional<std::int64_t> integer_field(const json& obj, const char* key, bool& invalid) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_number_integer()) return it->get<std::int64_t>();
  if (it->is_number_float()) return static_cast<std::int64_t>(it->get<double>());
  if (it->is_string()) {
    try {
      std::size_t used = 0;
      const auto& str = it->get_ref<const std::string&>();
      const double v = std::stod(str, &used);
      if (used == str.size()) return static_cast<std::int64_t>(v);
    } catch (const std::exception&) {
    }
  }
  invalid = true;
  return std::nullopt;
}

std::string string_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

}  // namespace

bool is_removal_sentinel(std::string_view body) noexcept {
  return std::find(kRemovedBodySentinels.begin(), kRemovedBodySentinels.end(), body) !=
         kRemovedBodySentinels.end();
}

std::size_t utf8_length(std::string_view s) noexcept {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::optional<Post> parse_post_line(std::string_view line, bool* missing_field) {
  if (missing_field) *missing_field = false;
  json obj = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded() || !obj.is_object()) return std::nullopt;

  Post p;
  p.id = string_field(obj, "id");
  p.subreddit = string_field(obj, "subreddit");
  if (p.id.empty() || p.subreddit.empty()) {
    if (missing_field) *missing_field = true;
    return std::nullopt;
  }
  p.author = string_field(obj, "author");
  p.title = string_field(obj, "title");
  p.body = string_field(obj, "selftext");
  bool invalid = false;
  p.created_utc = integer_field(obj, "created_utc", invalid).value_or(0);
  p.num_comments = integer_field(obj, "num_comments", invalid).value_or(0);
  p.score = integer_field(obj, "score", invalid).value_or(0);
  if (invalid || p.num_comments < 0) return std::nullopt;
  p.retrieved_removed = is_removal_sentinel(p.body);
  return p;
}

void stream_dump(std::istream& in, const std::function<void(Post&&)>& sink, StreamCounters& counters) {
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++counters.lines;
    bool missing = false;
    auto post = parse_post_line(line, &missing);
    if (!post) {
      ++(missing ? counters.missing_field : counters.malformed);
      continue;
    }
    ++counters.parsed;
    sink(std::move(*post));
  }
  if (in.bad()) fail(ErrorCode::io, "stream_dump: read error");
}

std::vector<Post> stream_dump(std::istream& in, StreamCounters& counters) {
  std::vector<Post> out;
  stream_dump(in, [&](Post&& p) { out.push_back(std::move(p)); }, counters);
  return out;
}

std::vector<Post> read_dump_file(const std::filesystem::path& path, bool zstd, StreamCounters& counters) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail(ErrorCode::io, "cannot open input " + path.string());
  if (zstd || path.extension() == ".zst" || has_zstd_magic(file)) {
    ZstdInputBuf buf(file);
    std::istream decompressed(&buf);
    return stream_dump(decompressed, counters);
  }
  return stream_dump(file, counters);
}

std::vector<Post> filter_posts(std::vector<Post> posts, FilterReport* report) {
  std::vector<Post> kept;
  kept.reserve(posts.size());
  for (auto& p : posts) {
    const bool removed = is_removal_sentinel(p.body) || p.author == kDeletedAuthor;
    if (report) {
      ++report->full_count;
      ++report->per_subreddit[p.subreddit].first;
      if (!removed) {
        ++report->clean_count;
        ++report->per_subreddit[p.subreddit].second;
      }
    }
    if (!removed) kept.push_back(std::move(p));
  }
  return kept;
}

std::variant<Document, Rejected> to_document(const Post& post, std::size_t min_chars) {
  const auto title = trim(post.title);
  const auto body = trim(post.body);
  if (is_removal_sentinel(title) || is_removal_sentinel(body))
    return Rejected{Rejected::Reason::sentinel_text, 0};

  Document d;
  d.text.reserve(title.size() + body.size() + 1);
  d.text.append(title);
  if (!title.empty() && !body.empty()) d.text.push_back('\n');
  d.text.append(body);
  d.char_len = utf8_length(d.text);
  if (d.char_len < min_chars) return Rejected{Rejected::Reason::too_short, d.char_len};
  d.post_id = post.id;
  d.subreddit = post.subreddit;
  d.num_comments = post.num_comments;
  d.karma = std::max<std::int64_t>(post.score, 0);
  d.created_utc = post.created_utc;
  return d;
}

std::vector<Document> ingest_files(const std::vector<std::filesystem::path>& paths,
                                   const IngestOptions& options, IngestReport& report) {
  StreamCounters counters;
  std::vector<std::vector<Post>> per_file(paths.size());
  const std::size_t width = std::max<std::size_t>(1, options.parallel_files);
  for (std::size_t start = 0; start < paths.size(); start += width) {
    std::vector<std::future<std::vector<Post>>> jobs;
    const std::size_t end = std::min(paths.size(), start + width);
    for (std::size_t i = start; i < end; ++i)
      jobs.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred,
                                [&, i] { return read_dump_file(paths[i], options.force_zstd, counters); }));
    for (std::size_t i = start; i < end; ++i) per_file[i] = jobs[i - start].get();
  }
  report.lines = counters.lines;
  report.parsed = counters.parsed;
  report.skipped_malformed = counters.malformed;
  report.skipped_missing_field = counters.missing_field;

  std::vector<Post> posts;
  std::unordered_set<std::string> seen;
  for (auto& file_posts : per_file) {
    for (auto& p : file_posts) {
      if ((options.since && p.created_utc < *options.since) || (options.until && p.created_utc > *options.until)) {
        ++report.out_of_window;
        continue;
      }
      if (!seen.insert(p.id).second) {
        ++report.duplicates;
        continue;
      }
      posts.push_back(std::move(p));
    }
  }

  FilterReport filter;
  auto clean = filter_posts(std::move(posts), &filter);
  report.full_count = filter.full_count;
  report.clean_count = filter.clean_count;
  for (const auto& [sub, fc] : filter.per_subreddit) {
    report.per_subreddit[sub].full = fc.first;
    report.per_subreddit[sub].clean = fc.second;
  }

  std::vector<Document> docs;
  docs.reserve(clean.size());
  for (const auto& p : clean) {
    auto result = to_document(p, options.min_chars);
    if (auto* doc = std::get_if<Document>(&result)) {
      ++report.per_subreddit[doc->subreddit].documents;
      docs.push_back(std::move(*doc));
    } else {
      ++report.too_short;
    }
  }
  report.documents = docs.size();
  return docs;
}

}  // namespace ctn
