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
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ctn/store.hpp"

namespace ctn {

// n distinct document ids drawn uniformly without replacement from the named
// subreddits (all subreddits when empty). Candidates are ordered by id before
// shuffling, so the result depends only on the eligible set and the seed.
std::vector<std::string> sample_for_annotation(const DatasetStore& store, std::size_t n,
                                               const std::set<std::string>& subreddits, std::uint64_t seed);

std::vector<std::string> sample_ids(std::vector<std::string> eligible, std::size_t n, std::uint64_t seed);

// Shuffled stratified k-fold assignment. Samples are ordered by post_id, each
// class is shuffled, then positives followed by negatives are dealt
// round-robin over the folds. Fold sizes and per-class counts differ by at
// most one across folds.
std::vector<SplitAssignment> make_stratified_folds(std::span<const LabeledSample> labels, int k,
                                                   std::uint64_t seed);

}  // namespace ctn
