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

#include <atomic>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "semtag/assignment.hpp"
#include "semtag/corpus.hpp"
#include "semtag/embedding.hpp"
#include "semtag/gateway.hpp"
#include "semtag/surrogate.hpp"
#include "semtag/trie.hpp"
#include "semtag/tree.hpp"

namespace semtag {

struct ScoredItem {
    std::string item_id;
    double score = 0.0;

    bool operator==(const ScoredItem&) const = default;
};

/// Trie-constrained beam search. At most `beam` unfinished hypotheses
/// survive each step (score, then token order); every hypothesis that takes
/// EOS at a terminal is kept. Scores are raw cumulative log-probabilities.
/// Result is sorted by score descending, ties by item_id. With
/// `allowed_level1` the first token is restricted to that set.
/// Throws InvalidArgument for beam < 1, an empty allowed set, or an allowed
/// token that is not a level-1 token of the trie.
std::vector<ScoredItem> beam_decode(const SurrogateModel& model, std::span<const int> prefix,
                                    const DescriptorTrie& trie, std::size_t beam,
                                    const std::optional<std::set<int>>& allowed_level1 = std::nullopt);

/// Scores every terminal directly; the reference ranking for beam_decode.
std::vector<ScoredItem> exhaustive_rank(const SurrogateModel& model, std::span<const int> prefix,
                                        const DescriptorTrie& trie);

enum class SimulatorMode { Oracle, Llm };

struct SimulatorOptions {
    SimulatorMode mode = SimulatorMode::Oracle;
    /// Oracle mode: also allow this many level-1 siblings nearest to the
    /// target's level-1 descriptor.
    std::size_t k_siblings = 0;
    /// Llm mode: fall back to the oracle answer when the reply is unusable.
    bool fallback = true;
    std::size_t char_budget = 1500;
};

/// Picks the allowed level-1 tokens for a target item.
class CritiqueSimulator {
public:
    /// `gateway` is required in llm mode; `provider` when k_siblings > 0.
    CritiqueSimulator(const VocabularyTree& tree, const SemIdTable& table, const Corpus& corpus,
                      SimulatorOptions options, Gateway* gateway = nullptr,
                      const EmbeddingProvider* provider = nullptr);

    /// Throws UnknownItem for an item without a semantic id and InvalidArgument
    /// when the item has no level-1 descriptor.
    std::set<int> allowed(const std::string& item_id) const;
    std::set<int> oracle(const std::string& item_id) const;

    std::size_t fallbacks() const noexcept { return fallbacks_.load(); }

private:
    const VocabularyTree& tree_;
    const SemIdTable& table_;
    const Corpus& corpus_;
    SimulatorOptions options_;
    Gateway* gateway_;
    std::vector<std::string> level1_;
    std::string level1_names_;
    /// level1_ index -> other indices by distance.
    std::vector<std::vector<std::size_t>> nearest_;
    mutable std::atomic<std::size_t> fallbacks_{0};
};

}  // namespace semtag
