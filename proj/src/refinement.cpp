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

#include "semtag/refinement.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include "semtag/error.hpp"
#include "semtag/hash.hpp"
#include "semtag/parallel.hpp"
#include "semtag/prompts.hpp"
#include "semtag/simd.hpp"

namespace semtag {

using nlohmann::json;

namespace {

std::string fold(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty() && out.back() != ' ') out += ' ';
        } else {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string unique_rule_id(const std::string& parent_id, const std::string& name, const std::vector<Rule>& rules) {
    for (std::uint64_t salt = 0;; ++salt) {
        std::string id = make_rule_id(parent_id, name, salt);
        const bool taken = std::any_of(rules.begin(), rules.end(), [&](const Rule& r) { return r.rule_id == id; });
        if (!taken) return id;
    }
}

const Rule* find_rule(const std::vector<Rule>& rules, std::string_view id) {
    for (const auto& r : rules) {
        if (r.rule_id == id) return &r;
    }
    return nullptr;
}

bool has_name(const std::vector<Rule>& rules, std::string_view name) {
    const std::string f = fold(name);
    return std::any_of(rules.begin(), rules.end(), [&](const Rule& r) { return fold(r.name) == f; });
}

std::string item_text(const Corpus& corpus, const std::string& id, const BuildConfig& config) {
    return item_prompt_text(corpus.find(id), config.char_budget);
}

std::string rules_block(const std::vector<Rule>& rules) {
    std::string out;
    for (const auto& r : rules) {
        if (!out.empty()) out += '\n';
        out += format_rule_line(r.rule_id, r.description);
    }
    return out;
}

json decision_json(const ReviewDecision& d) {
    return {{"proposal_id", d.proposal_id},
            {"decision", d.decision == Decision::Approved ? "APPROVED" : "REJECTED"},
            {"reasoning", d.reasoning}};
}

}  // namespace

void BuildConfig::validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (d_max < 1) bad("d_max must be >= 1");
    if (tau_split < 2) bad("tau_split must be >= 2");
    if (c_max < 1) bad("c_max must be >= 1");
    if (!(coverage_break > 0.0 && coverage_break <= 1.0)) bad("coverage_break must be in (0, 1]");
    if (n_target_rules < 1) bad("n_target_rules must be >= 1");
    if (init_samples < 1) bad("init_samples must be >= 1");
    if (proposal_batch < 1) bad("proposal_batch must be >= 1");
    if (ticket_examples < 1) bad("ticket_examples must be >= 1");
    if (parallelism < 1) bad("parallelism must be >= 1");
    if (char_budget < 16) bad("char_budget must be >= 16");
}

json BuildConfig::to_json() const {
    return {{"d_max", d_max},
            {"tau_split", tau_split},
            {"c_max", c_max},
            {"tau_anom", tau_anom},
            {"n_target_rules", n_target_rules},
            {"init_samples", init_samples},
            {"branching_factor", branching_factor},
            {"coverage_break", coverage_break},
            {"min_error_reports", min_error_reports},
            {"proposal_batch", proposal_batch},
            {"ticket_examples", ticket_examples},
            {"seed", seed},
            {"parallelism", parallelism},
            {"char_budget", char_budget},
            {"kmedoids",
             {{"max_swap_iterations", kmedoids.max_swap_iterations},
              {"max_points", kmedoids.max_points},
              {"restarts", kmedoids.restarts},
              {"restart_max_points", kmedoids.restart_max_points}}}};
}

BuildConfig BuildConfig::from_json(const json& j) {
    BuildConfig c;
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "build config must be an object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "d_max") c.d_max = v.get<std::size_t>();
            else if (key == "tau_split") c.tau_split = v.get<std::size_t>();
            else if (key == "c_max") c.c_max = v.get<std::size_t>();
            else if (key == "tau_anom") c.tau_anom = v.get<std::size_t>();
            else if (key == "n_target_rules") c.n_target_rules = v.get<std::size_t>();
            else if (key == "init_samples") c.init_samples = v.get<std::size_t>();
            else if (key == "branching_factor") c.branching_factor = v.get<std::size_t>();
            else if (key == "coverage_break") c.coverage_break = v.get<double>();
            else if (key == "min_error_reports") c.min_error_reports = v.get<std::size_t>();
            else if (key == "proposal_batch") c.proposal_batch = v.get<std::size_t>();
            else if (key == "ticket_examples") c.ticket_examples = v.get<std::size_t>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "parallelism") c.parallelism = v.get<std::size_t>();
            else if (key == "char_budget") c.char_budget = v.get<std::size_t>();
            else if (key == "kmedoids") {
                c.kmedoids.max_swap_iterations = v.value("max_swap_iterations", c.kmedoids.max_swap_iterations);
                c.kmedoids.max_points = v.value("max_points", c.kmedoids.max_points);
                c.kmedoids.restarts = v.value("restarts", c.kmedoids.restarts);
                c.kmedoids.restart_max_points = v.value("restart_max_points", c.kmedoids.restart_max_points);
            } else {
                throw Error(ErrorCode::InvalidConfig, "unknown build config key '" + key + "'");
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, "build config key '" + key + "': " + e.what());
        }
    }
    c.validate();
    return c;
}

std::size_t effective_tau_anom(const BuildConfig& config, std::size_t n_sub) {
    if (config.tau_anom > 0) return config.tau_anom;
    const auto five_pct = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n_sub)));
    return std::max<std::size_t>(20, five_pct);
}

InitResult init_vocabulary(const Corpus& corpus, const std::vector<std::string>& items, const DescriptorNode& parent,
                           const BuildConfig& config, Gateway& gateway, const EmbeddingProvider& provider,
                           CallLedger* scope) {
    if (items.empty()) throw Error(ErrorCode::EmptyInput, "cannot initialize a vocabulary without items");
    std::vector<std::string> texts;
    texts.reserve(items.size());
    for (const auto& id : items) texts.push_back(item_text(corpus, id, config));
    const auto picked = distill(texts, config.init_samples, provider,
                                hash_combine(config.seed, fnv1a64(parent.rule_id)), config.kmedoids);
    InitResult out;
    std::string sample_text;
    for (std::size_t idx : picked) {
        out.sample_ids.push_back(items[idx]);
        if (!sample_text.empty()) sample_text += "\n\n";
        sample_text += format_item_block(items[idx], texts[idx]);
    }

    const bool at_root = parent.parent.empty();
    Bindings b;
    b["parent_rule_description"] = parent.description;
    b["n_target_rules"] = std::to_string(config.n_target_rules);
    b["sample_text"] = sample_text;
    if (at_root) {
        b["context_prompt"] = "";
    } else {
        b["context_prompt"] = "Parent category: \"" + parent.description + "\"\n\nProduct examples:\n" + sample_text;
    }
    const TemplateId tid = at_root ? TemplateId::ArchitectInit : TemplateId::AnnotatorPropose;
    const auto categories = gateway.complete_parsed(AgentRole::Architect, tid, render_prompt(tid, b),
                                                    parse_categories, scope);
    for (const auto& c : categories) {
        if (has_name(out.rules, c.name)) {
            out.notes.push_back("merged duplicate category '" + c.name + "'");
            continue;
        }
        Rule r;
        r.name = c.name;
        r.description = compose_rule_text(c);
        r.rule_id = unique_rule_id(parent.rule_id, r.name, out.rules);
        out.rules.push_back(std::move(r));
    }
    return out;
}

AssignOutcome parallel_assign(const Corpus& corpus, const std::vector<std::string>& items, const DescriptorNode& parent,
                              const std::vector<Rule>& rules, Gateway& gateway, const BuildConfig& config,
                              CallLedger* scope) {
    if (rules.empty()) throw Error(ErrorCode::InvalidArgument, "parallel_assign needs a non-empty vocabulary");
    std::vector<std::string> sorted = items;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    const std::string rules_str = rules_block(rules);
    std::set<std::string> known;
    for (const auto& r : rules) known.insert(r.rule_id);

    struct Slot {
        std::vector<std::string> ids;
        std::string report;
    };
    std::vector<Slot> slots(sorted.size());
    parallel_for(sorted.size(), config.parallelism, [&](std::size_t i) {
        const std::string text = item_text(corpus, sorted[i], config);
        Bindings b{{"parent_rule_description", parent.description},
                   {"rules_text", rules_str},
                   {"item_text", format_item_block(sorted[i], text)}};
        try {
            AssignResponse r = gateway.complete_parsed(AgentRole::Annotator, TemplateId::AssignItem,
                                                      render_prompt(TemplateId::AssignItem, b), parse_assign_item,
                                                      scope);
            std::vector<std::string> ids;
            for (auto& id : r.rule_ids) {
                if (known.contains(id)) ids.push_back(std::move(id));
            }
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            if (ids.empty()) {
                const std::string reason =
                    r.reason.empty() ? (r.rule_ids.empty() ? "No rule applies." : "Only unknown rule ids returned.")
                                     : r.reason;
                slots[i].report = reason + "\n" + text;
            }
            slots[i].ids = std::move(ids);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::BudgetExhausted) throw;
            slots[i].report = std::string("Annotation failed (") + std::string(code_name(e.code())) + "): " +
                              e.what() + "\n" + text;
        }
    });

    AssignOutcome out;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (!slots[i].ids.empty()) {
            out.assigned.emplace(sorted[i], std::move(slots[i].ids));
        } else {
            out.unassigned.push_back(sorted[i]);
            out.reports.push_back(ErrorReport{sorted[i], std::move(slots[i].report)});
        }
    }
    return out;
}

ProposalBatch propose_changes(const std::vector<ErrorReport>& reports, const std::vector<Rule>& rules,
                              const std::string& node_id, std::size_t cycle, Gateway& gateway,
                              const EmbeddingProvider& provider, const BuildConfig& config, CallLedger* scope) {
    ProposalBatch batch;
    if (reports.empty()) return batch;
    std::vector<std::string> texts;
    texts.reserve(reports.size());
    for (const auto& r : reports) texts.push_back(r.report_text);
    const Matrix emb = provider.embed_batch(texts);
    const std::size_t k = std::min(config.proposal_batch, reports.size());
    const ClusterResult clusters =
        k_medoids(emb, k, hash_combine(hash_combine(config.seed, fnv1a64(node_id)), cycle), config.kmedoids);

    const std::string existing = rules_block(rules);
    for (std::size_t c = 0; c < clusters.k; ++c) {
        const std::size_t medoid = clusters.medoids[c];
        std::vector<std::pair<double, std::size_t>> members;
        for (std::size_t i = 0; i < reports.size(); ++i) {
            if (clusters.assignment[i] == c) members.emplace_back(simd::l2(emb.row(i), emb.row(medoid)), i);
        }
        if (members.empty()) continue;
        std::sort(members.begin(), members.end());
        std::string examples;
        const std::size_t shown = std::min(config.ticket_examples, members.size());
        for (std::size_t m = 0; m < shown; ++m) {
            const auto& r = reports[members[m].second];
            if (!examples.empty()) examples += "\n\n";
            examples += format_item_block(r.item_id, r.report_text);
        }
        Bindings b{{"len(ticket_cluster)", std::to_string(members.size())},
                   {"existing_rules_text", existing},
                   {"ticket_examples_text", examples}};
        ChangeProposal p;
        try {
            p = gateway.complete_parsed(AgentRole::Annotator, TemplateId::AnnotatorErrorFeedback,
                                        render_prompt(TemplateId::AnnotatorErrorFeedback, b), parse_change_proposal,
                                        scope);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::BudgetExhausted) throw;
            batch.notes.push_back("ticket " + std::to_string(c) + " skipped: " + e.what());
            continue;
        }
        std::vector<std::string> ticket;
        for (const auto& [_, i] : members) ticket.push_back(reports[i].item_id);

        // Merge with an earlier proposal making the same change.
        std::size_t merged = batch.proposals.size();
        for (std::size_t q = 0; q < batch.proposals.size(); ++q) {
            const auto& prev = batch.proposals[q];
            if (prev.change_type() != p.change_type()) continue;
            bool same = false;
            if (const auto* a = std::get_if<CreatePayload>(&p.suggested_change)) {
                same = fold(rule_name_of(std::get<CreatePayload>(prev.suggested_change).new_rule_description)) ==
                       fold(rule_name_of(a->new_rule_description));
            } else if (const auto* e = std::get_if<ExpandPayload>(&p.suggested_change)) {
                same = std::get<ExpandPayload>(prev.suggested_change).rule_id_to_refine == e->rule_id_to_refine;
            } else {
                same = true;
            }
            if (same) {
                merged = q;
                break;
            }
        }
        if (merged < batch.proposals.size()) {
            auto& items = batch.ticket_items[merged];
            items.insert(items.end(), ticket.begin(), ticket.end());
            batch.notes.push_back("ticket " + std::to_string(c) + " merged into " + batch.proposals[merged].proposal_id);
            continue;
        }
        p.proposal_id = "prop_" + hex8(hash_combine(hash_combine(fnv1a64(node_id), cycle), batch.proposals.size()));
        batch.proposals.push_back(std::move(p));
        batch.ticket_items.push_back(std::move(ticket));
    }
    for (auto& items : batch.ticket_items) std::sort(items.begin(), items.end());
    return batch;
}

ReviewOutcome review_and_apply(const ProposalBatch& batch, std::vector<Rule>& rules, const std::string& node_id,
                               Gateway& gateway, CallLedger* scope) {
    ReviewOutcome out;
    if (batch.proposals.empty()) throw Error(ErrorCode::InvalidArgument, "review_and_apply needs proposals");
    std::map<std::string, ReviewDecision> decided;
    std::vector<std::size_t> to_review;
    for (std::size_t i = 0; i < batch.proposals.size(); ++i) {
        const auto& p = batch.proposals[i];
        std::string reject;
        if (const auto* e = std::get_if<ExpandPayload>(&p.suggested_change)) {
            if (!find_rule(rules, e->rule_id_to_refine)) reject = "unknown rule_id_to_refine " + e->rule_id_to_refine;
        } else if (const auto* c = std::get_if<CreatePayload>(&p.suggested_change)) {
            if (has_name(rules, rule_name_of(c->new_rule_description))) {
                reject = "a rule named '" + rule_name_of(c->new_rule_description) + "' already exists";
            }
        }
        if (!reject.empty()) {
            decided[p.proposal_id] = ReviewDecision{p.proposal_id, Decision::Rejected, "auto-rejected: " + reject};
        } else {
            to_review.push_back(i);
        }
    }

    if (!to_review.empty()) {
        std::string text;
        for (std::size_t i : to_review) {
            if (!text.empty()) text += '\n';
            text += serialize_change_proposal(batch.proposals[i]);
        }
        std::vector<ReviewDecision> reviews;
        bool ok = true;
        try {
            reviews = gateway.complete_parsed(AgentRole::Architect, TemplateId::ArchitectReview,
                                              render_prompt(TemplateId::ArchitectReview, {{"proposals_text", text}}),
                                              parse_reviews, scope);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::BudgetExhausted) throw;
            ok = false;
            out.notes.push_back(std::string("review failed, all proposals rejected: ") + e.what());
        }
        std::map<std::string, ReviewDecision> by_id;
        for (auto& r : reviews) by_id.emplace(r.proposal_id, std::move(r));
        for (std::size_t i : to_review) {
            const auto& id = batch.proposals[i].proposal_id;
            auto it = by_id.find(id);
            if (!ok) {
                decided[id] = ReviewDecision{id, Decision::Rejected, "review response unusable"};
            } else if (it == by_id.end()) {
                decided[id] = ReviewDecision{id, Decision::Rejected, "no decision returned"};
            } else {
                decided[id] = it->second;
                by_id.erase(it);
            }
        }
        for (const auto& [id, _] : by_id) out.notes.push_back("ignored decision for unknown proposal " + id);
    }

    std::set<std::string> outliers;
    for (std::size_t i = 0; i < batch.proposals.size(); ++i) {
        const auto& p = batch.proposals[i];
        ReviewDecision d = decided.at(p.proposal_id);
        if (d.decision == Decision::Approved) {
            if (const auto* c = std::get_if<CreatePayload>(&p.suggested_change)) {
                const std::string name = rule_name_of(c->new_rule_description);
                if (has_name(rules, name)) {
                    d = ReviewDecision{p.proposal_id, Decision::Rejected, "auto-rejected: duplicate name " + name};
                } else {
                    rules.push_back(Rule{unique_rule_id(node_id, name, rules), name, c->new_rule_description});
                    ++out.created;
                }
            } else if (const auto* e = std::get_if<ExpandPayload>(&p.suggested_change)) {
                for (auto& r : rules) {
                    if (r.rule_id == e->rule_id_to_refine) {
                        r.description = e->refined_description;
                        r.name = rule_name_of(e->refined_description);
                    }
                }
                ++out.expanded;
            } else {
                if (i < batch.ticket_items.size()) outliers.insert(batch.ticket_items[i].begin(), batch.ticket_items[i].end());
                ++out.ignored;
            }
        }
        out.decisions.push_back(std::move(d));
    }
    out.outliers.assign(outliers.begin(), outliers.end());
    return out;
}

std::string RefinementLog::to_jsonl() const {
    std::string out;
    for (const auto& c : cycles) {
        out += json{{"node", node_id},
                    {"depth", depth},
                    {"cycle", c.cycle},
                    {"coverage", c.coverage},
                    {"n_items", c.n_items},
                    {"n_unassigned", c.n_unassigned},
                    {"n_reports", c.n_reports},
                    {"vocab_before", c.vocab_before},
                    {"vocab_after", c.vocab_after},
                    {"proposals", c.proposals},
                    {"decisions", c.decisions},
                    {"stop_reason", c.stop_reason}}
                   .dump();
        out += '\n';
    }
    return out;
}

json RefinementLog::to_json() const {
    json cyc = json::array();
    for (const auto& c : cycles) {
        cyc.push_back({{"cycle", c.cycle},
                       {"coverage", c.coverage},
                       {"n_items", c.n_items},
                       {"n_unassigned", c.n_unassigned},
                       {"n_reports", c.n_reports},
                       {"vocab_before", c.vocab_before},
                       {"vocab_after", c.vocab_after},
                       {"proposals", c.proposals},
                       {"decisions", c.decisions},
                       {"stop_reason", c.stop_reason}});
    }
    return {{"node", node_id}, {"depth", depth}, {"cycles", cyc}, {"notes", notes}};
}

RefinementLog RefinementLog::from_json(const json& j) {
    RefinementLog log;
    log.node_id = j.at("node").get<std::string>();
    log.depth = j.at("depth").get<std::size_t>();
    log.notes = j.value("notes", std::vector<std::string>{});
    for (const auto& c : j.at("cycles")) {
        CycleRecord r;
        r.cycle = c.at("cycle").get<std::size_t>();
        r.coverage = c.at("coverage").get<double>();
        r.n_items = c.at("n_items").get<std::size_t>();
        r.n_unassigned = c.at("n_unassigned").get<std::size_t>();
        r.n_reports = c.at("n_reports").get<std::size_t>();
        r.vocab_before = c.at("vocab_before").get<std::size_t>();
        r.vocab_after = c.at("vocab_after").get<std::size_t>();
        r.proposals = c.at("proposals");
        r.decisions = c.at("decisions");
        r.stop_reason = c.at("stop_reason").get<std::string>();
        log.cycles.push_back(std::move(r));
    }
    return log;
}

RefineResult refine(const Corpus& corpus, const std::vector<std::string>& items, const DescriptorNode& parent,
                    const BuildConfig& config, Gateway& gateway, const EmbeddingProvider& provider,
                    CallLedger* scope) {
    RefineResult result;
    result.log.node_id = parent.rule_id;
    result.log.depth = parent.depth;
    InitResult init = init_vocabulary(corpus, items, parent, config, gateway, provider, scope);
    result.rules = std::move(init.rules);
    result.log.notes = std::move(init.notes);
    const std::size_t tau_anom = effective_tau_anom(config, items.size());
    std::set<std::string> outliers;

    for (std::size_t c = 1; c <= config.c_max; ++c) {
        AssignOutcome outcome = parallel_assign(corpus, items, parent, result.rules, gateway, config, scope);
        CycleRecord rec;
        rec.cycle = c;
        rec.n_items = outcome.assigned.size() + outcome.unassigned.size();
        rec.coverage = outcome.coverage();
        rec.n_unassigned = outcome.unassigned.size();
        rec.n_reports = outcome.reports.size();
        rec.vocab_before = rec.vocab_after = result.rules.size();

        if (outcome.unassigned.size() < tau_anom) rec.stop_reason = "unassigned_below_tau_anom";
        else if (rec.coverage >= config.coverage_break) rec.stop_reason = "coverage_break";
        else if (outcome.reports.size() <= config.min_error_reports) rec.stop_reason = "few_error_reports";
        else if (c == config.c_max) rec.stop_reason = "max_cycles";

        if (rec.stop_reason.empty()) {
            ProposalBatch batch =
                propose_changes(outcome.reports, result.rules, parent.rule_id, c, gateway, provider, config, scope);
            for (auto& n : batch.notes) result.log.notes.push_back("cycle " + std::to_string(c) + ": " + n);
            for (const auto& p : batch.proposals) rec.proposals.push_back(json::parse(serialize_change_proposal(p)));
            if (batch.proposals.empty()) {
                rec.stop_reason = "no_proposals";
            } else {
                ReviewOutcome review = review_and_apply(batch, result.rules, parent.rule_id, gateway, scope);
                for (const auto& d : review.decisions) rec.decisions.push_back(decision_json(d));
                for (auto& n : review.notes) result.log.notes.push_back("cycle " + std::to_string(c) + ": " + n);
                outliers.insert(review.outliers.begin(), review.outliers.end());
                rec.vocab_after = result.rules.size();
                if (review.created + review.expanded == 0) rec.stop_reason = "no_vocabulary_change";
            }
        }
        result.last = std::move(outcome);
        const bool stop = !rec.stop_reason.empty();
        result.log.cycles.push_back(std::move(rec));
        if (stop) break;
    }
    result.outliers.assign(outliers.begin(), outliers.end());
    return result;
}

}  // namespace semtag
