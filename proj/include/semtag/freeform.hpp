// Copyright 2026 The semtag Authors
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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "semtag/corpus.hpp"
#include "semtag/embedding.hpp"
#include "semtag/gateway.hpp"

namespace semtag {

/// Lowercase (ASCII), trim, collapse inner whitespace runs to one space.
std::string normalize_tag(std::string_view tag);

struct FreeformTagTable {
    std::map<std::string, std::vector<std::string>> tags;
    /// Number of items carrying each tag.
    std::map<std::string, std::size_t> frequency;
    std::size_t n_failed = 0;

    void rebuild_frequency();
    /// JSONL {"item_id", "tags": [...]}.
    void write(const std::filesystem::path& path) const;
    static FreeformTagTable read(const std::filesystem::path& path);
};

struct FreeformOptions {
    std::size_t n_tags = 3;
    std::size_t parallelism = 8;
    std::size_t char_budget = 1500;
};

/// One FreeformTag call per item. Tags are normalized, deduplicated and cut
/// to n_tags; a failed item gets an empty list and is counted.
FreeformTagTable generate_freeform(const Corpus& corpus, Gateway& gateway, const FreeformOptions& options = {},
                                   CallLedger* scope = nullptr);

struct FrequencyBins {
    /// Eligible tags by frequency descending, ties by tag.
    std::vector<std::string> ranked;
    /// Bin of ranked[i]; bin 0 holds the most frequent tags.
    std::vector<std::size_t> bin_of;
    std::map<std::string, std::size_t> bin_by_tag;
    /// Per item: the most frequent tag from each bin it touches, bin 0 first.
    std::map<std::string, std::vector<std::string>> sequences;
};

/// Equal-population bins over tags with min_f <= frequency <= max_f.
/// Throws InvalidArgument unless min_f < max_f and n_bins >= 1, EmptyInput
/// when no tag is eligible.
FrequencyBins prune_frequency_bins(const FreeformTagTable& table, std::size_t min_f = 10, std::size_t max_f = 2000,
                                   std::size_t n_bins = 4);

struct KMeansTags {
    /// Distinct tags in ascending order and their centroid.
    std::vector<std::string> tags;
    std::vector<std::size_t> centroid_of;
    /// Per item: centroid ids in tag order, duplicates dropped.
    std::map<std::string, std::vector<std::size_t>> sequences;
    std::size_t k = 0;
};

/// Throws InvalidArgument when there are fewer distinct tags than k.
KMeansTags prune_kmeans(const FreeformTagTable& table, const EmbeddingProvider& provider, std::size_t k,
                        std::uint64_t seed);

/// Writes pruned sequences as {"item_id", "tokens": [...], "path_names": [...]}.
void write_pruned_bins(const FrequencyBins& bins, const std::filesystem::path& path);
void write_pruned_kmeans(const KMeansTags& km, const std::filesystem::path& path);

}  // namespace semtag
