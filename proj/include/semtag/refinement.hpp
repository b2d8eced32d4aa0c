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
#include <string>
#include <vector>

#include "json.hpp"
#include "semtag/cluster.hpp"
#include "semtag/corpus.hpp"
#include "semtag/embedding.hpp"
#include "semtag/gateway.hpp"
#include "semtag/protocol.hpp"
#include "semtag/tree.hpp"

namespace semtag {

struct BuildConfig {
    std::size_t d_max = 3;
    std::size_t tau_split = 30;
    std::size_t c_max = 3;
    /// 0 selects max(20, ceil(0.05 * |I_sub|)).
    std::size_t tau_anom = 0;
    std::size_t n_target_rules = 15;
    /// Distilled samples shown to the architect at initialization.
    std::size_t init_samples = 15;
    /// 0 = unlimited.
    std::size_t branching_factor = 0;
    double coverage_break = 0.95;
    std::size_t min_error_reports = 20;
    /// Ticket clusters per cycle and examples shown per cluster.
    std::size_t proposal_batch = 5;
    std::size_t ticket_examples = 20;
    std::uint64_t seed = 0;
    std::size_t parallelism = 8;
    std::size_t char_budget = 1500;
    KMedoidsOptions kmedoids;

    /// Throws InvalidConfig.
    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys are errors.
    static BuildConfig from_json(const nlohmann::json& j);
};

std::size_t effective_tau_anom(const BuildConfig& config, std::size_t n_sub);

/// A working descriptor during refinement.
struct Rule {
    std::string rule_id;
    std::string name;
    std::string description;

    bool operator==(const Rule&) const = default;
};

struct InitResult {
    std::vector<Rule> rules;
    std::vector<std::string> sample_ids;
    std::vector<std::string> notes;
};

/// Distills I_sub to config.init_samples texts and asks the architect for
/// sub-categories of `parent` (ArchitectInit at the root, AnnotatorPropose
/// below it). Duplicate names are merged. Throws when no categories remain.
InitResult init_vocabulary(const Corpus& corpus, const std::vector<std::string>& items, const DescriptorNode& parent,
                           const BuildConfig& config, Gateway& gateway, const EmbeddingProvider& provider,
                           CallLedger* scope = nullptr);

struct ErrorReport {
    std::string item_id;
    std::string report_text;

    bool operator==(const ErrorReport&) const = default;
};

struct AssignOutcome {
    /// Item -> matched rule ids (ascending), for covered items.
    std::map<std::string, std::vector<std::string>> assigned;
    std::vector<std::string> unassigned;
    std::vector<ErrorReport> reports;

    double coverage() const noexcept {
        const std::size_t n = assigned.size() + unassigned.size();
        return n == 0 ? 0.0 : static_cast<double>(assigned.size()) / static_cast<double>(n);
    }
};

/// One AssignItem call per item. Per-item failures become unassigned items
/// with a failure report. Output is ordered by item_id.
AssignOutcome parallel_assign(const Corpus& corpus, const std::vector<std::string>& items, const DescriptorNode& parent,
                              const std::vector<Rule>& rules, Gateway& gateway, const BuildConfig& config,
                              CallLedger* scope = nullptr);

struct ProposalBatch {
    std::vector<ChangeProposal> proposals;
    /// Report items behind each proposal (same index).
    std::vector<std::vector<std::string>> ticket_items;
    std::vector<std::string> notes;
};

/// Clusters ℰ into at most config.proposal_batch tickets, asks the annotator
/// for one change proposal per ticket, and merges proposals that create the
/// same name or expand the same rule.
ProposalBatch propose_changes(const std::vector<ErrorReport>& reports, const std::vector<Rule>& rules,
                              const std::string& node_id, std::size_t cycle, Gateway& gateway,
                              const EmbeddingProvider& provider, const BuildConfig& config,
                              CallLedger* scope = nullptr);

struct ReviewOutcome {
    std::vector<ReviewDecision> decisions;
    std::size_t created = 0;
    std::size_t expanded = 0;
    std::size_t ignored = 0;
    std::vector<std::string> outliers;
    std::vector<std::string> notes;
};

/// Auto-rejects proposals that cannot apply, sends the rest to one
/// ArchitectReview call and applies approved changes to `rules`. A review
/// that fails to parse rejects every proposal.
ReviewOutcome review_and_apply(const ProposalBatch& batch, std::vector<Rule>& rules, const std::string& node_id,
                               Gateway& gateway, CallLedger* scope = nullptr);

struct CycleRecord {
    std::size_t cycle = 0;
    double coverage = 0.0;
    std::size_t n_items = 0;
    std::size_t n_unassigned = 0;
    std::size_t n_reports = 0;
    std::size_t vocab_before = 0;
    std::size_t vocab_after = 0;
    nlohmann::json proposals = nlohmann::json::array();
    nlohmann::json decisions = nlohmann::json::array();
    std::string stop_reason;

    bool operator==(const CycleRecord&) const = default;
};

struct RefinementLog {
    std::string node_id;
    std::size_t depth = 0;
    std::vector<CycleRecord> cycles;
    std::vector<std::string> notes;

    /// One JSONL line per cycle.
    std::string to_jsonl() const;
    nlohmann::json to_json() const;
    static RefinementLog from_json(const nlohmann::json& j);
    bool operator==(const RefinementLog&) const = default;
};

struct RefineResult {
    std::vector<Rule> rules;
    AssignOutcome last;
    std::vector<std::string> outliers;
    RefinementLog log;
};

/// Full loop: init, then up to c_max rounds of assign, stop checks,
/// propose, review. The final round only assigns.
RefineResult refine(const Corpus& corpus, const std::vector<std::string>& items, const DescriptorNode& parent,
                    const BuildConfig& config, Gateway& gateway, const EmbeddingProvider& provider,
                    CallLedger* scope = nullptr);

}  // namespace semtag
