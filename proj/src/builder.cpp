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

#include "semtag/builder.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "semtag/error.hpp"
#include "semtag/hash.hpp"
#include "semtag/io.hpp"

namespace semtag {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    VocabularyTree tree;
    std::vector<RefinementLog> logs;
    std::map<std::string, CallLedger> node_calls;
};

void save_checkpoint(const std::filesystem::path& dir, const VocabularyTree& tree,
                     const std::vector<RefinementLog>& logs, const std::map<std::string, CallLedger>& calls) {
    json items = json::object();
    for (const auto& [id, n] : tree.nodes()) items[id] = n.items;
    json log_rows = json::array();
    for (const auto& l : logs) log_rows.push_back(l.to_json());
    json call_rows = json::object();
    for (const auto& [id, l] : calls) call_rows[id] = l.to_json();
    const json j{{"version", kCheckpointVersion},
                 {"tree", tree.to_json()},
                 {"node_items", items},
                 {"logs", log_rows},
                 {"node_calls", call_rows}};
    write_file_atomic(dir / "checkpoint.json", j.dump());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    const json j = json::parse(read_file(dir / "checkpoint.json"), nullptr, false);
    if (j.is_discarded() || j.value("version", 0) != kCheckpointVersion) {
        throw Error(ErrorCode::Parse, "unreadable checkpoint in " + dir.string());
    }
    std::map<std::string, std::vector<std::string>> items;
    for (const auto& [id, v] : j.at("node_items").items()) items[id] = v.get<std::vector<std::string>>();
    Checkpoint cp{VocabularyTree::from_json(j.at("tree"), items), {}, {}};
    for (const auto& l : j.at("logs")) cp.logs.push_back(RefinementLog::from_json(l));
    for (const auto& [id, v] : j.at("node_calls").items()) cp.node_calls[id] = CallLedger::from_json(v);
    return cp;
}

std::string fresh_child_id(const VocabularyTree& tree, const std::string& parent, const Rule& rule) {
    if (!tree.contains(rule.rule_id)) return rule.rule_id;
    for (std::uint64_t salt = 1;; ++salt) {
        std::string id = make_rule_id(parent, rule.name, salt);
        if (!tree.contains(id)) return id;
    }
}

}  // namespace

std::map<std::string, std::vector<std::string>> branch_items(
    const std::string& node_id, const std::map<std::string, std::vector<std::string>>& per_item_assignments,
    std::size_t b, std::uint64_t seed) {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& [item, rules] : per_item_assignments) {
        if (rules.empty()) continue;
        if (b == 0 || b >= rules.size()) {
            for (const auto& r : rules) out[r].push_back(item);
            continue;
        }
        std::vector<std::size_t> order(rules.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(hash_combine(hash_combine(seed, fnv1a64(node_id)), fnv1a64(item)));
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
            std::swap(order[i], order[j]);
            out[rules[order[i]]].push_back(item);
        }
    }
    for (auto& [_, items] : out) std::sort(items.begin(), items.end());
    return out;
}

json BuildReport::to_json() const {
    return {{"nodes_refined", nodes_refined},
            {"nodes_resumed", nodes_resumed},
            {"nodes_failed", nodes_failed},
            {"degenerate", degenerate},
            {"notes", notes}};
}

BuildResult build_vocabulary(const Corpus& corpus, const BuildConfig& config, Gateway& gateway,
                             const EmbeddingProvider& provider, const BuildOptions& options) {
    config.validate();
    if (corpus.empty()) throw Error(ErrorCode::EmptyInput, "cannot build a vocabulary from an empty corpus");
    const bool checkpoints = !options.checkpoint_dir.empty();

    BuildResult result;
    if (checkpoints && options.resume && std::filesystem::exists(options.checkpoint_dir / "checkpoint.json")) {
        Checkpoint cp = load_checkpoint(options.checkpoint_dir);
        result.tree = std::move(cp.tree);
        result.logs = std::move(cp.logs);
        result.node_calls = std::move(cp.node_calls);
        for (const auto& [id, n] : result.tree.nodes()) {
            if (n.expanded && result.node_calls.contains(id)) ++result.report.nodes_resumed;
        }
    } else {
        std::vector<std::string> ids;
        ids.reserve(corpus.size());
        for (const auto& item : corpus.items()) ids.push_back(item.item_id);
        result.tree = VocabularyTree(std::move(ids));
    }
    result.tree.config_snapshot = config.to_json();

    std::size_t committed = 0;
    auto commit = [&](const std::string& node_id) {
        if (!checkpoints) return;
        save_checkpoint(options.checkpoint_dir, result.tree, result.logs, result.node_calls);
        const auto calls = result.node_calls.find(node_id);
        append_line(options.checkpoint_dir / "ledger.jsonl",
                    json{{"event", "node_committed"},
                         {"node", node_id},
                         {"depth", result.tree.node(node_id).depth},
                         {"calls", calls == result.node_calls.end() ? json::array() : calls->second.to_json()}}
                        .dump());
    };

    for (std::size_t depth = 0; depth < config.d_max; ++depth) {
        for (const std::string& id : result.tree.level(depth)) {
            const DescriptorNode& node = result.tree.node(id);
            if (node.expanded || node.items.size() < config.tau_split) continue;

            CallLedger scope;
            RefineResult refined;
            try {
                refined = refine(corpus, node.items, node, config, gateway, provider, &scope);
            } catch (const Error& e) {
                result.node_calls[id].merge(scope);
                if (e.code() == ErrorCode::BudgetExhausted) {
                    if (checkpoints) save_checkpoint(options.checkpoint_dir, result.tree, result.logs, result.node_calls);
                    throw;
                }
                DescriptorNode& n = result.tree.mutable_node(id);
                n.failed = true;
                n.failure = std::string(code_name(e.code())) + ": " + e.what();
                n.expanded = true;
                ++result.report.nodes_failed;
                result.report.notes.push_back("refinement failed at " + id + ": " + n.failure);
                commit(id);
                if (options.on_commit) options.on_commit(++committed);
                continue;
            }

            const auto routed = branch_items(id, refined.last.assigned, config.branching_factor, config.seed);
            for (const auto& rule : refined.rules) {
                DescriptorNode child;
                child.rule_id = fresh_child_id(result.tree, id, rule);
                child.name = rule.name;
                child.description = rule.description;
                child.parent = id;
                if (auto it = routed.find(rule.rule_id); it != routed.end()) child.items = it->second;
                result.tree.add_child(std::move(child));
            }
            DescriptorNode& n = result.tree.mutable_node(id);
            n.outliers = refined.outliers;
            n.status = refined.outliers.empty() ? NodeStatus::Active : NodeStatus::OutliersRecorded;
            n.expanded = true;
            if (refined.rules.size() == 1) {
                n.degenerate = true;
                ++result.report.degenerate;
                result.report.notes.push_back("degenerate split at " + id + ": one child");
            }
            result.node_calls[id].merge(scope);
            result.logs.push_back(std::move(refined.log));
            ++result.report.nodes_refined;
            commit(id);
            if (options.on_commit) options.on_commit(++committed);
        }
    }
    result.tree.validate();
    return result;
}

std::vector<std::string> duplicate_commits(const std::filesystem::path& ledger_jsonl) {
    std::map<std::string, std::size_t> counts;
    if (std::filesystem::exists(ledger_jsonl)) {
        for_each_line(ledger_jsonl, [&](std::string_view line, std::size_t) {
            const json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || j.value("event", std::string()) != "node_committed") return;
            ++counts[j.at("node").get<std::string>()];
        });
    }
    std::vector<std::string> dups;
    for (const auto& [id, c] : counts) {
        if (c > 1) dups.push_back(id);
    }
    return dups;
}

}  // namespace semtag
