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


#include "semtag/trie.hpp"

#include "semtag/error.hpp"

namespace semtag {

DescriptorTrie DescriptorTrie::build(const SemIdTable& table) {
    DescriptorTrie t;
    for (const auto& row : table.rows) {
        if (row.tokens.empty() || row.tokens.back() != kEos) {
            throw Error(ErrorCode::Schema, "semantic id of " + row.item_id + " does not end in EOS");
        }
        std::uint32_t at = kRoot;
        for (std::size_t i = 0; i + 1 < row.tokens.size(); ++i) {
            if (t.nodes_[at].item >= 0) {
                throw Error(ErrorCode::Collision, "sequence of " + t.items_[static_cast<std::size_t>(t.nodes_[at].item)] +
                                                      " is a prefix of " + row.item_id);
            }
            auto [it, fresh] = t.nodes_[at].children.emplace(row.tokens[i], static_cast<std::uint32_t>(t.nodes_.size()));
            if (fresh) t.nodes_.emplace_back();
            at = it->second;
        }
        Node& leaf = t.nodes_[at];
        if (leaf.item >= 0) {
            throw Error(ErrorCode::Collision, row.item_id + " repeats the sequence of " +
                                                  t.items_[static_cast<std::size_t>(leaf.item)]);
        }
        if (!leaf.children.empty()) throw Error(ErrorCode::Collision, "sequence of " + row.item_id + " is a prefix");
        leaf.item = static_cast<std::int32_t>(t.items_.size());
        t.items_.push_back(row.item_id);
        t.sequences_.emplace_back(row.tokens.begin(), row.tokens.end() - 1);
    }
    return t;
}

std::optional<std::uint32_t> DescriptorTrie::child(std::uint32_t at, int token) const {
    const auto& c = nodes_.at(at).children;
    auto it = c.find(token);
    if (it == c.end()) return std::nullopt;
    return it->second;
}

const std::string* DescriptorTrie::terminal_item(std::uint32_t at) const {
    const std::int32_t i = nodes_.at(at).item;
    return i < 0 ? nullptr : &items_[static_cast<std::size_t>(i)];
}

const std::string* DescriptorTrie::lookup(std::span<const int> tokens) const {
    if (!tokens.empty() && tokens.back() == kEos) tokens = tokens.first(tokens.size() - 1);
    std::uint32_t at = kRoot;
    for (int tok : tokens) {
        auto next = child(at, tok);
        if (!next) return nullptr;
        at = *next;
    }
    return terminal_item(at);
}

std::vector<int> DescriptorTrie::level1_tokens() const {
    std::vector<int> out;
    for (const auto& [tok, _] : nodes_[kRoot].children) out.push_back(tok);
    return out;
}

}  // namespace semtag
