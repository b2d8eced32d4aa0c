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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semtag/assignment.hpp"

namespace semtag {

/// Prefix tree over item token sequences (path + resolver, EOS dropped).
/// Node 0 is the root.
class DescriptorTrie {
public:
    struct Node {
        std::map<int, std::uint32_t> children;
        /// Index into items(), or -1.
        std::int32_t item = -1;
    };

    DescriptorTrie() : nodes_(1) {}

    /// Throws Collision on a repeated sequence or when one terminal is a
    /// prefix of another; Schema when a row does not end in EOS.
    static DescriptorTrie build(const SemIdTable& table);

    static constexpr std::uint32_t kRoot = 0;

    const Node& node(std::uint32_t i) const { return nodes_.at(i); }
    std::optional<std::uint32_t> child(std::uint32_t at, int token) const;
    /// nullptr when the node is not a terminal.
    const std::string* terminal_item(std::uint32_t at) const;
    /// Item for a sequence with or without the trailing EOS.
    const std::string* lookup(std::span<const int> tokens) const;

    std::size_t n_terminals() const noexcept { return items_.size(); }
    std::size_t n_nodes() const noexcept { return nodes_.size(); }
    const std::vector<std::string>& items() const noexcept { return items_; }
    /// Sequence stored for items()[i], EOS excluded.
    const std::vector<int>& sequence(std::size_t i) const { return sequences_.at(i); }

    /// First tokens in ascending order.
    std::vector<int> level1_tokens() const;
    std::optional<std::uint32_t> level1_subtree(int token) const { return child(kRoot, token); }

private:
    std::vector<Node> nodes_;
    std::vector<std::string> items_;
    std::vector<std::vector<int>> sequences_;
};

}  // namespace semtag
