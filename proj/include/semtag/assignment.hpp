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
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "semtag/corpus.hpp"
#include "semtag/gateway.hpp"
#include "semtag/tree.hpp"

namespace semtag {

struct AssignmentRecord {
    std::string item_id;
    std::vector<std::string> path;
    std::size_t resolver = 0;
    /// Path is shorter than the tree depth.
    bool terminated = false;
    /// Descent stopped because of a transport or parse failure.
    bool flagged = false;
    std::string flag_reason;

    bool operator==(const AssignmentRecord&) const = default;
};

enum class AssignMode { PerLevel, OneShot };

struct AssignOptions {
    AssignMode mode = AssignMode::PerLevel;
    std::size_t parallelism = 8;
    std::size_t char_budget = 1500;
};

/// Per-level mode asks for one best child (or STOP) at each visited node;
/// one-shot mode sends the whole vocabulary once. Records are ordered by
/// item_id; resolvers are left at 0.
std::vector<AssignmentRecord> assign_paths(const Corpus& corpus, const VocabularyTree& tree, Gateway& gateway,
                                           const AssignOptions& options = {}, CallLedger* scope = nullptr);

/// Groups identical paths, orders each group by item_id and numbers it 0, 1, ...
std::vector<AssignmentRecord> resolve_collisions(std::vector<AssignmentRecord> records);

/// Throws Schema if a path does not follow tree edges from the root.
void check_paths(const std::vector<AssignmentRecord>& records, const VocabularyTree& tree);

inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kSep = 2;
inline constexpr int kNumSpecials = 3;

/// Descriptor tokens follow the specials in BFS order; resolver tokens form
/// a disjoint range after them.
class TokenMap {
public:
    TokenMap() = default;
    TokenMap(const VocabularyTree& tree, std::size_t n_resolvers);

    int descriptor_token(std::string_view rule_id) const;
    int resolver_token(std::size_t k) const;
    bool is_descriptor(int token) const noexcept;
    bool is_resolver(int token) const noexcept;
    const std::string& rule_of(int token) const;
    std::size_t resolver_of(int token) const;

    std::size_t n_descriptors() const noexcept { return rules_.size(); }
    std::size_t n_resolvers() const noexcept { return n_resolvers_; }
    std::size_t vocab_size() const noexcept { return kNumSpecials + rules_.size() + n_resolvers_; }

    /// {"<token>": "<rule_id>" | "resolver:<k>" | "<BOS>" | "<EOS>" | "<SEP>"}
    nlohmann::json to_json() const;
    static TokenMap from_json(const nlohmann::json& j);

    bool operator==(const TokenMap& o) const { return rules_ == o.rules_ && n_resolvers_ == o.n_resolvers_; }

private:
    std::vector<std::string> rules_;
    std::unordered_map<std::string, int> token_of_;
    std::size_t n_resolvers_ = 0;
};

struct SemId {
    std::string item_id;
    /// Path tokens, resolver token, EOS.
    std::vector<int> tokens;
    std::vector<std::string> path_names;

    bool operator==(const SemId&) const = default;
};

struct SemIdTable {
    TokenMap tokens;
    std::vector<SemId> rows;

    const SemId* find(std::string_view item_id) const;
    void write(const std::filesystem::path& semids_jsonl, const std::filesystem::path& token_map_json) const;
    static SemIdTable read(const std::filesystem::path& semids_jsonl, const std::filesystem::path& token_map_json);

private:
    mutable std::unordered_map<std::string, std::size_t> index_;
};

/// Throws Collision when two records share (path, resolver).
SemIdTable export_semids(const std::vector<AssignmentRecord>& records, const VocabularyTree& tree);
/// Inverse of export_semids (item_id, path, resolver; terminated recomputed).
std::vector<AssignmentRecord> decode_semids(const SemIdTable& table, const VocabularyTree& tree);

inline constexpr std::string_view kNoneSlot = "NONE";

/// Slot k holds the rule id at depth k+1, or NONE. Throws InvalidArgument
/// when a path is longer than n_slots.
std::vector<std::vector<std::string>> export_fixed_slots(const std::vector<AssignmentRecord>& records,
                                                         std::size_t n_slots);
void write_fixed_slots_csv(const std::vector<AssignmentRecord>& records,
                           const std::vector<std::vector<std::string>>& slots, const std::filesystem::path& path);

struct VocabStats {
    std::size_t n_descriptors = 0;
    std::size_t n_resolvers = 0;
    std::size_t n_used = 0;
    double utilization = 0.0;
    /// Tree descriptors per level (index 0 = level 1).
    std::vector<std::size_t> level_sizes;
    /// Distinct descriptors used per level.
    std::vector<std::size_t> level_used;
    /// items-per-descriptor -> number of descriptors.
    std::map<std::size_t, std::size_t> histogram;
    std::size_t n_terminated = 0;
    std::size_t n_flagged = 0;
    std::size_t n_empty = 0;

    /// "<descriptors>+<resolvers>", e.g. "2487+80".
    std::string vocab_size_string() const;
    /// "<levels>+1".
    std::string n_semid_string() const;
    nlohmann::json to_json() const;
};

/// Fraction of used labels (count >= 1) that are used at least twice.
double utilization(const std::map<std::string, std::size_t>& label_counts);

VocabStats vocab_stats(const std::vector<AssignmentRecord>& records, const VocabularyTree& tree);

void write_assignments(const std::vector<AssignmentRecord>& records, const std::filesystem::path& path);
std::vector<AssignmentRecord> read_assignments(const std::filesystem::path& path);

}  // namespace semtag
