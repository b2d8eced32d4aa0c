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

#include "semtag/tree.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "semtag/error.hpp"
#include "semtag/hash.hpp"
#include "semtag/io.hpp"
#include "semtag/prompts.hpp"

namespace semtag {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string_view status_name(NodeStatus s) {
    return s == NodeStatus::Active ? "active" : "ignored-outliers-recorded";
}

NodeStatus status_from(std::string_view s) {
    if (s == "active") return NodeStatus::Active;
    if (s == "ignored-outliers-recorded") return NodeStatus::OutliersRecorded;
    throw Error(ErrorCode::Schema, "unknown node status '" + std::string(s) + "'");
}

}  // namespace

std::string make_rule_id(std::string_view parent_id, std::string_view name, std::uint64_t salt) {
    const std::uint64_t h = hash_combine(hash_combine(fnv1a64(parent_id), fnv1a64(name)), salt);
    return "rule_" + hex8(h);
}

std::string compose_rule_text(const CategoryProposal& p) {
    if (is_strict_rule_text(p.description) && rule_name_of(p.description) == p.name) return p.description;
    std::string text = p.name + ": INCLUDES: " + p.description;
    if (!p.includes.empty()) text += " (" + join(p.includes, ", ") + ")";
    text += ". EXCLUDES: ";
    text += p.excludes.empty() ? std::string("products outside this category") : join(p.excludes, ", ");
    text += ".";
    return text;
}

VocabularyTree::VocabularyTree() : VocabularyTree(std::vector<std::string>{}) {}

VocabularyTree::VocabularyTree(std::vector<std::string> all_items) {
    std::sort(all_items.begin(), all_items.end());
    all_items.erase(std::unique(all_items.begin(), all_items.end()), all_items.end());
    DescriptorNode root;
    root.rule_id = std::string(kRootId);
    root.name = "All Products";
    root.description = "All Products: INCLUDES: every item in the corpus. EXCLUDES: nothing.";
    root.items = std::move(all_items);
    nodes_.emplace(root.rule_id, std::move(root));
    children_[std::string(kRootId)];
}

const DescriptorNode& VocabularyTree::node(std::string_view id) const {
    auto it = nodes_.find(std::string(id));
    if (it == nodes_.end()) throw Error(ErrorCode::NotFound, "unknown rule_id " + std::string(id));
    return it->second;
}

DescriptorNode& VocabularyTree::mutable_node(std::string_view id) {
    auto it = nodes_.find(std::string(id));
    if (it == nodes_.end()) throw Error(ErrorCode::NotFound, "unknown rule_id " + std::string(id));
    return it->second;
}

void VocabularyTree::add_child(DescriptorNode child) {
    if (child.rule_id.empty() || child.rule_id == kRootId) {
        throw Error(ErrorCode::InvalidArgument, "invalid rule_id '" + child.rule_id + "'");
    }
    if (nodes_.contains(child.rule_id)) throw Error(ErrorCode::DuplicateId, "duplicate rule_id " + child.rule_id);
    const DescriptorNode& parent = node(child.parent);
    child.depth = parent.depth + 1;
    std::sort(child.items.begin(), child.items.end());
    child.items.erase(std::unique(child.items.begin(), child.items.end()), child.items.end());
    if (!std::includes(parent.items.begin(), parent.items.end(), child.items.begin(), child.items.end())) {
        throw Error(ErrorCode::InvalidArgument, "items of " + child.rule_id + " are not a subset of its parent");
    }
    children_[child.parent].push_back(child.rule_id);
    children_[child.rule_id];
    nodes_.emplace(child.rule_id, std::move(child));
}

const std::vector<std::string>& VocabularyTree::children(std::string_view id) const {
    auto it = children_.find(std::string(id));
    if (it == children_.end()) throw Error(ErrorCode::NotFound, "unknown rule_id " + std::string(id));
    return it->second;
}

std::vector<std::string> VocabularyTree::bfs() const {
    std::vector<std::string> order;
    std::deque<std::string> queue = {std::string(kRootId)};
    while (!queue.empty()) {
        std::string id = std::move(queue.front());
        queue.pop_front();
        for (const auto& c : children(id)) queue.push_back(c);
        order.push_back(std::move(id));
    }
    return order;
}

std::vector<std::string> VocabularyTree::level(std::size_t depth) const {
    std::vector<std::string> out;
    for (const auto& id : bfs()) {
        if (node(id).depth == depth) out.push_back(id);
    }
    return out;
}

std::size_t VocabularyTree::max_depth() const {
    std::size_t d = 0;
    for (const auto& [_, n] : nodes_) d = std::max(d, n.depth);
    return d;
}

void VocabularyTree::validate() const {
    if (!nodes_.contains(std::string(kRootId))) throw Error(ErrorCode::Schema, "tree has no root");
    if (!root().parent.empty() || root().depth != 0) throw Error(ErrorCode::Schema, "malformed root");
    const auto order = bfs();
    if (order.size() != nodes_.size()) throw Error(ErrorCode::Schema, "tree has unreachable nodes or a cycle");
    for (const auto& [id, n] : nodes_) {
        if (id == kRootId) continue;
        const auto& p = node(n.parent);
        if (n.depth != p.depth + 1) throw Error(ErrorCode::Schema, "depth mismatch at " + id);
        if (!std::includes(p.items.begin(), p.items.end(), n.items.begin(), n.items.end())) {
            throw Error(ErrorCode::Schema, "items of " + id + " are not a subset of its parent");
        }
        const auto& siblings = children(n.parent);
        if (std::find(siblings.begin(), siblings.end(), id) == siblings.end()) {
            throw Error(ErrorCode::Schema, "children index misses " + id);
        }
    }
}

json VocabularyTree::to_json() const {
    json nodes = json::object();
    for (const auto& id : bfs()) {
        const auto& n = node(id);
        json j{{"name", n.name},
               {"description", n.description},
               {"parent", n.parent.empty() ? json(nullptr) : json(n.parent)},
               {"depth", n.depth},
               {"item_count", n.items.size()},
               {"status", status_name(n.status)},
               {"expanded", n.expanded},
               {"children", children(id)}};
        if (n.failed) j["failure"] = n.failure;
        if (n.degenerate) j["degenerate"] = true;
        if (!n.outliers.empty()) j["outliers"] = n.outliers;
        nodes[id] = std::move(j);
    }
    json out{{"root", std::string(kRootId)}, {"nodes", nodes}};
    if (!config_snapshot.is_null()) out["config"] = config_snapshot;
    return out;
}

VocabularyTree VocabularyTree::from_json(const json& vocab,
                                         const std::map<std::string, std::vector<std::string>>& node_items) {
    const json& nodes = vocab.at("nodes");
    auto items_of = [&](const std::string& id) {
        auto it = node_items.find(id);
        return it == node_items.end() ? std::vector<std::string>{} : it->second;
    };
    VocabularyTree tree(items_of(std::string(kRootId)));
    auto fill = [&](DescriptorNode& n, const json& j) {
        n.name = j.at("name").get<std::string>();
        n.description = j.at("description").get<std::string>();
        n.status = status_from(j.value("status", std::string("active")));
        n.expanded = j.value("expanded", false);
        n.degenerate = j.value("degenerate", false);
        if (j.contains("failure")) {
            n.failed = true;
            n.failure = j["failure"].get<std::string>();
        }
        if (j.contains("outliers")) n.outliers = j["outliers"].get<std::vector<std::string>>();
    };
    fill(tree.mutable_node(kRootId), nodes.at(std::string(kRootId)));
    std::deque<std::string> queue = {std::string(kRootId)};
    while (!queue.empty()) {
        const std::string id = queue.front();
        queue.pop_front();
        for (const auto& c : nodes.at(id).value("children", json::array())) {
            const std::string cid = c.get<std::string>();
            const json& cj = nodes.at(cid);
            DescriptorNode n;
            n.rule_id = cid;
            n.parent = id;
            fill(n, cj);
            n.items = items_of(cid);
            if (cj.at("depth").get<std::size_t>() != tree.node(id).depth + 1) {
                throw Error(ErrorCode::Schema, "depth mismatch at " + cid);
            }
            tree.add_child(std::move(n));
            queue.push_back(cid);
        }
    }
    if (tree.size() != nodes.size()) throw Error(ErrorCode::Schema, "vocabulary has unreachable nodes");
    if (vocab.contains("config")) tree.config_snapshot = vocab["config"];
    return tree;
}

void VocabularyTree::save(const std::filesystem::path& vocab_path, const std::filesystem::path& items_path) const {
    std::string lines;
    for (const auto& id : bfs()) {
        lines += json{{"rule_id", id}, {"items", node(id).items}}.dump();
        lines += '\n';
    }
    write_file_atomic(items_path, lines);
    write_file_atomic(vocab_path, to_json().dump(1));
}

VocabularyTree VocabularyTree::load(const std::filesystem::path& vocab_path,
                                    const std::filesystem::path& items_path) {
    const json vocab = json::parse(read_file(vocab_path), nullptr, false);
    if (vocab.is_discarded()) throw Error(ErrorCode::Parse, "cannot parse " + vocab_path.string());
    std::map<std::string, std::vector<std::string>> node_items;
    if (std::filesystem::exists(items_path)) {
        for_each_line(items_path, [&](std::string_view line, std::size_t no) {
            const json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) throw Error(ErrorCode::Parse, items_path.string() + ":" + std::to_string(no));
            node_items[j.at("rule_id").get<std::string>()] = j.at("items").get<std::vector<std::string>>();
        });
    }
    return from_json(vocab, node_items);
}

std::string rules_text(const VocabularyTree& tree, const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty()) out += '\n';
        out += format_rule_line(id, tree.node(id).description);
    }
    return out;
}

}  // namespace semtag
