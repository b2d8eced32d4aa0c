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
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "semtag/corpus.hpp"
#include "semtag/gateway.hpp"

namespace semtag {

// A planted world is a synthetic corpus generated from a hidden taxonomy.
// Item text repeats the keywords of every node on the item's path, so the
// hashing embedder separates branches, and the mock backend can answer every
// prompt from the ground truth.

struct PlantedWorldConfig {
    /// Children per node at each depth; {4, 4, 4} is a 4x4x4 taxonomy.
    std::vector<std::size_t> branching = {4, 4, 4};
    std::size_t n_items = 2000;
    /// Items that belong to no planted node.
    std::size_t n_aliens = 0;
    std::size_t keywords_per_node = 3;
    std::size_t noise_words = 6;
    std::size_t noise_vocab = 400;
    std::size_t n_users = 600;
    std::size_t min_history = 5;
    std::size_t max_history = 12;
    /// Probability that a user's next item comes from their favourite level-1 branch.
    double p_favourite = 0.8;
    std::uint64_t seed = 7;
};

struct PlantedNode {
    std::string key;  // "root", "2", "2.0", "2.0.3", ...
    std::string name;
    std::vector<std::string> keywords;
    int parent = -1;
    std::size_t depth = 0;
    std::vector<int> children;
};

struct PlantedItem {
    std::string item_id;
    int leaf = -1;  // -1 for aliens
};

class PlantedWorld {
public:
    static PlantedWorld generate(const PlantedWorldConfig& config);

    const PlantedWorldConfig& config() const noexcept { return config_; }
    const std::vector<PlantedNode>& nodes() const noexcept { return nodes_; }
    const PlantedNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
    const std::vector<PlantedItem>& items() const noexcept { return items_; }
    const Corpus& corpus() const noexcept { return corpus_; }
    const std::vector<Interaction>& interactions() const noexcept { return interactions_; }

    /// Planted node indices from level 1 down to the leaf; empty for aliens
    /// and unknown ids.
    const std::vector<int>& path_of(std::string_view item_id) const;
    /// -1 when no planted node has this name.
    int node_by_name(std::string_view name) const;
    std::vector<int> nodes_at_depth(std::size_t depth) const;
    std::size_t depth() const noexcept { return config_.branching.size(); }

    /// Rule text "Name: INCLUDES: ... EXCLUDES: ..." for a planted node.
    std::string rule_text(int node) const;

    nlohmann::json to_json() const;
    static PlantedWorld from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static PlantedWorld load(const std::filesystem::path& path);

private:
    void index();

    PlantedWorldConfig config_;
    std::vector<PlantedNode> nodes_;
    std::vector<PlantedItem> items_;
    Corpus corpus_;
    std::vector<Interaction> interactions_;
    std::unordered_map<std::string, std::vector<int>> paths_;
    std::unordered_map<std::string, int> by_name_;
};

struct MockBehavior {
    /// Per (item, planted node) probability that the annotator misses a true
    /// match during AssignItem. The draw is a fixed hash, so misses persist
    /// across refinement cycles.
    double false_negative_rate = 0.0;
    /// Planted node names the architect never proposes at initialization.
    std::set<std::string> withheld;
    /// Architect review rejects proposals of these change types.
    bool reject_create = false;
    bool reject_expand = false;
    std::uint64_t seed = 0;
};

/// Deterministic LLM stand-in: a pure function of (world, behaviour, request).
class MockBackend final : public Backend {
public:
    MockBackend(std::shared_ptr<const PlantedWorld> world, MockBehavior behavior = {});

    std::string name() const override { return "mock"; }
    BackendReply send(const LlmRequest& request) override;

    /// Response text for a request (send() without the reply wrapper).
    std::string respond(TemplateId id, std::string_view prompt) const;

private:
    std::string init(std::string_view prompt, std::string_view parent_marker) const;
    std::string assign_item(std::string_view prompt) const;
    std::string error_feedback(std::string_view prompt) const;
    std::string review(std::string_view prompt) const;
    std::string assign_level(std::string_view prompt) const;
    std::string assign_one_shot(std::string_view prompt) const;
    std::string freeform(std::string_view prompt) const;
    std::string simulate_user(std::string_view prompt) const;

    bool misses(std::string_view item_id, int node) const;

    std::shared_ptr<const PlantedWorld> world_;
    MockBehavior behavior_;
};

}  // namespace semtag
