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
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace semtag {

struct Item {
    std::string item_id;
    std::string title;
    std::string body;
    std::map<std::string, std::string> extras;

    bool operator==(const Item&) const = default;
};

/// Ordered item set with an id index. Read-only once built.
class Corpus {
public:
    Corpus() = default;

    /// Throws DuplicateId if the id exists, InvalidArgument for an empty id
    /// or an item with neither title nor body.
    void add(Item item);

    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }
    const std::vector<Item>& items() const noexcept { return items_; }
    const Item& at(std::size_t pos) const { return items_.at(pos); }

    std::optional<std::size_t> position(std::string_view id) const;
    bool contains(std::string_view id) const { return position(id).has_value(); }
    /// Throws UnknownItem.
    const Item& find(std::string_view id) const;

    bool operator==(const Corpus& other) const { return items_ == other.items_; }

private:
    std::vector<Item> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct CorpusLoadOptions {
    bool strict = true;
    /// Raw attribute fields used to build Item::title / Item::body. Body fields
    /// present on a line are joined with newlines.
    std::string title_field = "title";
    std::vector<std::string> body_fields = {"body"};
};

struct LoadReport {
    std::size_t lines = 0;
    std::size_t loaded = 0;
    std::size_t skipped_malformed = 0;
    std::size_t dropped_unknown = 0;
};

struct CorpusLoad {
    Corpus corpus;
    LoadReport report;
};

/// Items JSONL: {"item_id", "title", "body", "extras": {str: str}}.
/// Strict mode fails on the first malformed line; lenient mode skips and
/// counts it. A duplicate item_id is an error in both modes.
CorpusLoad load_corpus(const std::filesystem::path& path, const CorpusLoadOptions& options = {});
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Text shown to an LLM for an item: title, newline, body, cut to
/// `char_budget` bytes on a UTF-8 boundary.
std::string item_prompt_text(const Item& item, std::size_t char_budget = 1500);

struct Interaction {
    std::string user_id;
    std::string item_id;
    std::int64_t timestamp = 0;

    bool operator==(const Interaction&) const = default;
};

struct InteractionLoad {
    std::vector<Interaction> interactions;
    LoadReport report;
};

/// Interactions JSONL {"user_id", "item_id", "timestamp"}, returned sorted by
/// (user_id, timestamp, input order). Unknown items throw in strict mode and
/// are dropped and counted otherwise.
InteractionLoad load_interactions(const std::filesystem::path& path, const Corpus& corpus, bool strict = true);
void write_interactions(const std::vector<Interaction>& interactions, const std::filesystem::path& path);

struct SplitDataset {
    std::map<std::string, std::vector<std::string>> train;
    std::map<std::string, std::string> valid;
    std::map<std::string, std::string> test;
    std::size_t excluded_users = 0;

    bool operator==(const SplitDataset&) const = default;
};

/// Last-out split: per user the final interaction is test, the second-last is
/// validation, the rest (in time order) is train. Users with fewer than three
/// interactions are excluded and counted. Timestamp ties keep input order.
SplitDataset last_out_split(const std::vector<Interaction>& interactions);

/// Rows {"user_id", "item_id", "split": "train"|"valid"|"test", "position"}.
void write_splits(const SplitDataset& split, const std::filesystem::path& path);
SplitDataset read_splits(const std::filesystem::path& path);

}  // namespace semtag
