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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "semtag/refinement.hpp"
#include "semtag/tree.hpp"

namespace semtag {

/// Routes covered items to children. b = 0 (unlimited) or b >= the number of
/// matches keeps every match; otherwise b matches are drawn uniformly with a
/// per-(seed, node, item) hash, so the choice is stable across runs.
std::map<std::string, std::vector<std::string>> branch_items(
    const std::string& node_id, const std::map<std::string, std::vector<std::string>>& per_item_assignments,
    std::size_t b, std::uint64_t seed);

struct BuildOptions {
    /// Where checkpoint.json and ledger.jsonl live; empty disables checkpoints.
    std::filesystem::path checkpoint_dir;
    /// Continue from checkpoint.json when it exists.
    bool resume = false;
    /// Called after each committed node with the number committed this run.
    std::function<void(std::size_t)> on_commit;
};

struct BuildReport {
    std::size_t nodes_refined = 0;
    std::size_t nodes_resumed = 0;
    std::size_t nodes_failed = 0;
    std::size_t degenerate = 0;
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
};

struct BuildResult {
    VocabularyTree tree;
    /// Refinement logs in commit order (including logs restored on resume).
    std::vector<RefinementLog> logs;
    /// Calls issued per refined node.
    std::map<std::string, CallLedger> node_calls;
    BuildReport report;
};

/// Breadth-first construction: every node at depth < d_max holding at least
/// tau_split items is refined into children. After each node a checkpoint is
/// written atomically, then a commit line is appended to ledger.jsonl. When
/// the call budget runs out the checkpoint is kept and the error rethrown.
BuildResult build_vocabulary(const Corpus& corpus, const BuildConfig& config, Gateway& gateway,
                             const EmbeddingProvider& provider, const BuildOptions& options = {});

/// Node ids with more than one commit line in ledger.jsonl.
std::vector<std::string> duplicate_commits(const std::filesystem::path& ledger_jsonl);

}  // namespace semtag
