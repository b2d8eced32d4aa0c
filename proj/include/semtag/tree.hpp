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

#include "json.hpp"
#include "semtag/protocol.hpp"

namespace semtag {

enum class NodeStatus { Active, OutliersRecorded };

struct DescriptorNode {
    std::string rule_id;
    std::string name;
    /// Full rule text, "Name: INCLUDES: ... EXCLUDES: ...".
    std::string description;
    std::string parent;  // empty for the root
    std::size_t depth = 0;
    /// Sorted item ids routed to this node.
    std::vector<std::string> items;
    /// Items the refinement loop set aside as outliers (sorted).
    std::vector<std::string> outliers;
    NodeStatus status = NodeStatus::Active;
    /// Refinement of this node has completed (children, if any, are final).
    bool expanded = false;
    bool failed = false;
    std::string failure;
    /// Refinement produced exactly one child.
    bool degenerate = false;

    bool operator==(const DescriptorNode&) const = default;
};

/// "rule_" + 8 hex chars derived from (parent, name, salt).
std::string make_rule_id(std::string_view parent_id, std::string_view name, std::uint64_t salt = 0);

/// Rule text for a proposal. A description already in strict rule form and
/// led by the proposal name is kept; otherwise one is composed.
std::string compose_rule_text(const CategoryProposal& proposal);

class VocabularyTree {
public:
    static constexpr std::string_view kRootId = "root";

    VocabularyTree();
    explicit VocabularyTree(std::vector<std::string> all_items);

    const DescriptorNode& root() const { return node(kRootId); }
    const DescriptorNode& node(std::string_view id) const;
    DescriptorNode& mutable_node(std::string_view id);
    bool contains(std::string_view id) const { return nodes_.contains(std::string(id)); }

    /// Validates parent, depth, id uniqueness and items ⊆ parent.items.
    void add_child(DescriptorNode child);

    const std::vector<std::string>& children(std::string_view id) const;
    /// Node ids in breadth-first order, root first, children in insertion order.
    std::vector<std::string> bfs() const;
    std::vector<std::string> level(std::size_t depth) const;
    std::size_t max_depth() const;
    /// Non-root nodes.
    std::size_t n_descriptors() const { return nodes_.size() - 1; }
    std::size_t size() const { return nodes_.size(); }
    const std::map<std::string, DescriptorNode>& nodes() const { return nodes_; }

    /// Throws Schema when a structural invariant does not hold.
    void validate() const;

    nlohmann::json config_snapshot;

    /// {"root", "nodes": {id: {name, description, parent, depth, item_count, ...}}}
    nlohmann::json to_json() const;
    static VocabularyTree from_json(const nlohmann::json& vocab,
                                    const std::map<std::string, std::vector<std::string>>& node_items);

    void save(const std::filesystem::path& vocab_path, const std::filesystem::path& items_path) const;
    static VocabularyTree load(const std::filesystem::path& vocab_path, const std::filesystem::path& items_path);

    bool operator==(const VocabularyTree& o) const { return nodes_ == o.nodes_ && children_ == o.children_; }

private:
    std::map<std::string, DescriptorNode> nodes_;
    std::map<std::string, std::vector<std::string>> children_;
};

/// One rule line per id (see format_rule_line).
std::string rules_text(const VocabularyTree& tree, const std::vector<std::string>& ids);

}  // namespace semtag
