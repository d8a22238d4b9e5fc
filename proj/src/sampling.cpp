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

#include "ctn/sampling.hpp"

#include <algorithm>

#include "ctn/error.hpp"
#include "ctn/random.hpp"

namespace ctn {

std::vector<std::string> sample_ids(std::vector<std::string> eligible, std::size_t n, std::uint64_t seed) {
  std::sort(eligible.begin(), eligible.end());
  eligible.erase(std::unique(eligible.begin(), eligible.end()), eligible.end());
  if (eligible.size() < n)
    fail(ErrorCode::size, "sample: requested " + std::to_string(n) + " but only " + std::to_string(eligible.size()) +
                              " eligible (short by " + std::to_string(n - eligible.size()) + ")");
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(eligible));
  eligible.resize(n);
  return eligible;
}

std::vector<std::string> sample_for_annotation(const DatasetStore& store, std::size_t n,
                                               const std::set<std::string>& subreddits, std::uint64_t seed) {
  DocumentFilter filter;
  filter.subreddits = subreddits;
  std::vector<std::string> eligible;
  for (const auto& d : store.get_documents(filter)) eligible.push_back(d.post_id);
  return sample_ids(std::move(eligible), n, seed);
}

std::vector<SplitAssignment> make_stratified_folds(std::span<const LabeledSample> labels, int k,
                                                   std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::parameter, "split: k must be >= 2");
  std::vector<std::string> pos, neg;
  for (const auto& s : labels) (s.label == Label::CT ? pos : neg).push_back(s.post_id);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  if (std::adjacent_find(pos.begin(), pos.end()) != pos.end() ||
      std::adjacent_find(neg.begin(), neg.end()) != neg.end())
    fail(ErrorCode::domain, "split: duplicate post_id in labels");
  const auto uk = static_cast<std::size_t>(k);
  if (pos.size() < uk || neg.size() < uk)
    fail(ErrorCode::size, "split: stratification needs >= " + std::to_string(k) + " members per class (CT " +
                              std::to_string(pos.size()) + ", NonCT " + std::to_string(neg.size()) + ")");
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(pos));
  rng.shuffle(std::span<std::string>(neg));

  std::vector<SplitAssignment> out;
  out.reserve(pos.size() + neg.size());
  std::size_t slot = 0;
  for (const auto* group : {&pos, &neg})
    for (const auto& id : *group) out.push_back({id, static_cast<int>(slot++ % uk)});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.post_id < b.post_id; });
  return out;
}

}  // namespace ctn
