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

#include "semtag/assignment.hpp"

#include <algorithm>
#include <set>

#include "semtag/error.hpp"
#include "semtag/io.hpp"
#include "semtag/parallel.hpp"
#include "semtag/prompts.hpp"
#include "semtag/protocol.hpp"

namespace semtag {

using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string one_shot_vocabulary(const VocabularyTree& tree) {
    std::string out;
    for (const auto& id : tree.bfs()) {
        if (id == VocabularyTree::kRootId) continue;
        const auto& n = tree.node(id);
        if (!out.empty()) out += '\n';
        out += format_rule_line(id, "(parent: " + n.parent + ") " + n.description);
    }
    return out;
}

void descend(const Corpus& corpus, const VocabularyTree& tree, Gateway& gateway, const AssignOptions& options,
             CallLedger* scope, AssignmentRecord& rec) {
    const std::string text = format_item_block(rec.item_id, item_prompt_text(corpus.find(rec.item_id), options.char_budget));
    std::string at = std::string(VocabularyTree::kRootId);
    for (;;) {
        const auto& kids = tree.children(at);
        if (kids.empty()) return;
        const std::set<std::string> allowed(kids.begin(), kids.end());
        Bindings b{{"parent_rule_description", tree.node(at).description},
                   {"rules_text", rules_text(tree, kids)},
                   {"item_text", text}};
        auto parse = [&](std::string_view raw) {
            std::string id = parse_assign_level(raw);
            if (id != "STOP" && !allowed.contains(id)) throw Error(ErrorCode::Schema, "rule_id " + id + " is not a candidate");
            return id;
        };
        std::string choice;
        try {
            choice = gateway.complete_parsed(AgentRole::Annotator, TemplateId::AssignLevel,
                                             render_prompt(TemplateId::AssignLevel, b), parse, scope);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::BudgetExhausted) throw;
            rec.flagged = true;
            rec.flag_reason = std::string(code_name(e.code())) + ": " + e.what();
            if (e.code() == ErrorCode::Transport || e.code() == ErrorCode::Refusal) rec.path.clear();
            return;
        }
        if (choice == "STOP") return;
        rec.path.push_back(choice);
        at = choice;
    }
}

void one_shot(const Corpus& corpus, const VocabularyTree& tree, Gateway& gateway, const AssignOptions& options,
              CallLedger* scope, const std::string& vocabulary, AssignmentRecord& rec) {
    const std::string text = format_item_block(rec.item_id, item_prompt_text(corpus.find(rec.item_id), options.char_budget));
    auto parse = [&](std::string_view raw) {
        auto path = parse_path(raw);
        std::string at = std::string(VocabularyTree::kRootId);
        for (const auto& id : path) {
            if (!tree.contains(id) || tree.node(id).parent != at) {
                throw Error(ErrorCode::Schema, "path step " + id + " is not a child of " + at);
            }
            at = id;
        }
        return path;
    };
    try {
        rec.path = gateway.complete_parsed(AgentRole::Annotator, TemplateId::AssignOneShot,
                                           render_prompt(TemplateId::AssignOneShot,
                                                         {{"vocabulary_text", vocabulary}, {"item_text", text}}),
                                           parse, scope);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::BudgetExhausted) throw;
        rec.flagged = true;
        rec.flag_reason = std::string(code_name(e.code())) + ": " + e.what();
        rec.path.clear();
    }
}

}  // namespace

std::vector<AssignmentRecord> assign_paths(const Corpus& corpus, const VocabularyTree& tree, Gateway& gateway,
                                           const AssignOptions& options, CallLedger* scope) {
    std::vector<AssignmentRecord> records;
    records.reserve(corpus.size());
    for (const auto& item : corpus.items()) records.push_back(AssignmentRecord{item.item_id, {}, 0, false, false, {}});
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.item_id < b.item_id; });
    const std::size_t depth = tree.max_depth();
    const std::string vocabulary = options.mode == AssignMode::OneShot ? one_shot_vocabulary(tree) : std::string();
    parallel_for(records.size(), options.parallelism, [&](std::size_t i) {
        if (options.mode == AssignMode::PerLevel) descend(corpus, tree, gateway, options, scope, records[i]);
        else one_shot(corpus, tree, gateway, options, scope, vocabulary, records[i]);
        records[i].terminated = records[i].path.size() < depth;
    });
    return records;
}

std::vector<AssignmentRecord> resolve_collisions(std::vector<AssignmentRecord> records) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        if (a.path != b.path) return a.path < b.path;
        return a.item_id < b.item_id;
    });
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].resolver = (i > 0 && records[i].path == records[i - 1].path) ? records[i - 1].resolver + 1 : 0;
    }
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.item_id < b.item_id; });
    return records;
}

void check_paths(const std::vector<AssignmentRecord>& records, const VocabularyTree& tree) {
    for (const auto& r : records) {
        std::string at = std::string(VocabularyTree::kRootId);
        for (const auto& id : r.path) {
            if (!tree.contains(id) || tree.node(id).parent != at) {
                throw Error(ErrorCode::Schema, "item " + r.item_id + ": " + id + " is not a child of " + at);
            }
            at = id;
        }
    }
}

TokenMap::TokenMap(const VocabularyTree& tree, std::size_t n_resolvers) : n_resolvers_(n_resolvers) {
    for (const auto& id : tree.bfs()) {
        if (id == VocabularyTree::kRootId) continue;
        token_of_.emplace(id, static_cast<int>(kNumSpecials + rules_.size()));
        rules_.push_back(id);
    }
}

int TokenMap::descriptor_token(std::string_view rule_id) const {
    auto it = token_of_.find(std::string(rule_id));
    if (it == token_of_.end()) throw Error(ErrorCode::NotFound, "no token for " + std::string(rule_id));
    return it->second;
}

int TokenMap::resolver_token(std::size_t k) const {
    if (k >= n_resolvers_) throw Error(ErrorCode::NotFound, "resolver " + std::to_string(k) + " out of range");
    return static_cast<int>(kNumSpecials + rules_.size() + k);
}

bool TokenMap::is_descriptor(int t) const noexcept {
    return t >= kNumSpecials && static_cast<std::size_t>(t) < kNumSpecials + rules_.size();
}

bool TokenMap::is_resolver(int t) const noexcept {
    return t >= 0 && static_cast<std::size_t>(t) >= kNumSpecials + rules_.size() && static_cast<std::size_t>(t) < vocab_size();
}

const std::string& TokenMap::rule_of(int t) const {
    if (!is_descriptor(t)) throw Error(ErrorCode::NotFound, "token " + std::to_string(t) + " is not a descriptor");
    return rules_[static_cast<std::size_t>(t - kNumSpecials)];
}

std::size_t TokenMap::resolver_of(int t) const {
    if (!is_resolver(t)) throw Error(ErrorCode::NotFound, "token " + std::to_string(t) + " is not a resolver");
    return static_cast<std::size_t>(t) - kNumSpecials - rules_.size();
}

json TokenMap::to_json() const {
    json j = json::object();
    j[std::to_string(kBos)] = "<BOS>";
    j[std::to_string(kEos)] = "<EOS>";
    j[std::to_string(kSep)] = "<SEP>";
    for (std::size_t i = 0; i < rules_.size(); ++i) j[std::to_string(kNumSpecials + i)] = rules_[i];
    for (std::size_t k = 0; k < n_resolvers_; ++k) {
        j[std::to_string(kNumSpecials + rules_.size() + k)] = "resolver:" + std::to_string(k);
    }
    return j;
}

TokenMap TokenMap::from_json(const json& j) {
    std::map<int, std::string> by_token;
    for (const auto& [k, v] : j.items()) by_token[std::stoi(k)] = v.get<std::string>();
    TokenMap m;
    int expect = 0;
    for (const auto& [t, v] : by_token) {
        if (t != expect++) throw Error(ErrorCode::Schema, "token map is not contiguous");
        if (t < kNumSpecials) continue;
        if (v.starts_with("resolver:")) {
            ++m.n_resolvers_;
        } else {
            if (m.n_resolvers_ > 0) throw Error(ErrorCode::Schema, "descriptor token after resolver range");
            m.token_of_.emplace(v, t);
            m.rules_.push_back(v);
        }
    }
    return m;
}

const SemId* SemIdTable::find(std::string_view item_id) const {
    if (index_.size() != rows.size()) {
        index_.clear();
        for (std::size_t i = 0; i < rows.size(); ++i) index_.emplace(rows[i].item_id, i);
    }
    auto it = index_.find(std::string(item_id));
    return it == index_.end() ? nullptr : &rows[it->second];
}

void SemIdTable::write(const std::filesystem::path& semids_jsonl, const std::filesystem::path& token_map_json) const {
    std::string buf;
    for (const auto& r : rows) {
        buf += json{{"item_id", r.item_id}, {"tokens", r.tokens}, {"path_names", r.path_names}}.dump();
        buf += '\n';
    }
    write_file_atomic(semids_jsonl, buf);
    write_file_atomic(token_map_json, tokens.to_json().dump(1));
}

SemIdTable SemIdTable::read(const std::filesystem::path& semids_jsonl, const std::filesystem::path& token_map_json) {
    SemIdTable t;
    t.tokens = TokenMap::from_json(json::parse(read_file(token_map_json)));
    for_each_line(semids_jsonl, [&](std::string_view line, std::size_t) {
        const json j = json::parse(line);
        t.rows.push_back(SemId{j.at("item_id").get<std::string>(), j.at("tokens").get<std::vector<int>>(),
                               j.value("path_names", std::vector<std::string>{})});
    });
    return t;
}

SemIdTable export_semids(const std::vector<AssignmentRecord>& records, const VocabularyTree& tree) {
    std::size_t n_resolvers = 0;
    std::set<std::pair<std::vector<std::string>, std::size_t>> seen;
    for (const auto& r : records) {
        n_resolvers = std::max(n_resolvers, r.resolver + 1);
        if (!seen.emplace(r.path, r.resolver).second) {
            throw Error(ErrorCode::Collision, "unresolved collision at item " + r.item_id);
        }
    }
    SemIdTable table;
    table.tokens = TokenMap(tree, n_resolvers);
    for (const auto& r : records) {
        SemId s;
        s.item_id = r.item_id;
        for (const auto& id : r.path) {
            s.tokens.push_back(table.tokens.descriptor_token(id));
            s.path_names.push_back(tree.node(id).name);
        }
        s.tokens.push_back(table.tokens.resolver_token(r.resolver));
        s.tokens.push_back(kEos);
        table.rows.push_back(std::move(s));
    }
    return table;
}

std::vector<AssignmentRecord> decode_semids(const SemIdTable& table, const VocabularyTree& tree) {
    std::vector<AssignmentRecord> out;
    const std::size_t depth = tree.max_depth();
    for (const auto& row : table.rows) {
        if (row.tokens.size() < 2 || row.tokens.back() != kEos) {
            throw Error(ErrorCode::Schema, "semantic id of " + row.item_id + " does not end in resolver, EOS");
        }
        AssignmentRecord r;
        r.item_id = row.item_id;
        for (std::size_t i = 0; i + 2 < row.tokens.size(); ++i) r.path.push_back(table.tokens.rule_of(row.tokens[i]));
        r.resolver = table.tokens.resolver_of(row.tokens[row.tokens.size() - 2]);
        r.terminated = r.path.size() < depth;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<std::vector<std::string>> export_fixed_slots(const std::vector<AssignmentRecord>& records,
                                                         std::size_t n_slots) {
    std::vector<std::vector<std::string>> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (r.path.size() > n_slots) {
            throw Error(ErrorCode::InvalidArgument, "n_slots " + std::to_string(n_slots) + " is shorter than the path of " +
                                                        r.item_id);
        }
        std::vector<std::string> row(r.path.begin(), r.path.end());
        row.resize(n_slots, std::string(kNoneSlot));
        out.push_back(std::move(row));
    }
    return out;
}

void write_fixed_slots_csv(const std::vector<AssignmentRecord>& records,
                           const std::vector<std::vector<std::string>>& slots, const std::filesystem::path& path) {
    const std::size_t n = slots.empty() ? 0 : slots.front().size();
    std::string buf = "item_id";
    for (std::size_t k = 1; k <= n; ++k) buf += ",slot_" + std::to_string(k);
    buf += '\n';
    for (std::size_t i = 0; i < records.size(); ++i) {
        buf += csv_field(records[i].item_id);
        for (const auto& v : slots[i]) buf += "," + csv_field(v);
        buf += '\n';
    }
    write_file_atomic(path, buf);
}

std::string VocabStats::vocab_size_string() const {
    return std::to_string(n_descriptors) + "+" + std::to_string(n_resolvers);
}

std::string VocabStats::n_semid_string() const { return std::to_string(level_sizes.size()) + "+1"; }

json VocabStats::to_json() const {
    json hist = json::object();
    for (const auto& [k, v] : histogram) hist[std::to_string(k)] = v;
    return {{"n_descriptors", n_descriptors}, {"n_resolvers", n_resolvers},
            {"n_used", n_used},               {"utilization", utilization},
            {"level_sizes", level_sizes},     {"level_used", level_used},
            {"histogram", hist},              {"n_terminated", n_terminated},
            {"n_flagged", n_flagged},         {"n_empty", n_empty},
            {"vocab_size", vocab_size_string()}, {"n_semid", n_semid_string()}};
}

double utilization(const std::map<std::string, std::size_t>& label_counts) {
    std::size_t used = 0;
    std::size_t shared = 0;
    for (const auto& [_, c] : label_counts) {
        if (c >= 1) ++used;
        if (c >= 2) ++shared;
    }
    return used == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(used);
}

VocabStats vocab_stats(const std::vector<AssignmentRecord>& records, const VocabularyTree& tree) {
    VocabStats s;
    s.n_descriptors = tree.n_descriptors();
    for (std::size_t d = 1; d <= tree.max_depth(); ++d) s.level_sizes.push_back(tree.level(d).size());
    std::map<std::string, std::size_t> counts;
    std::vector<std::set<std::string>> used(s.level_sizes.size());
    for (const auto& r : records) {
        s.n_resolvers = std::max(s.n_resolvers, r.resolver + 1);
        if (r.terminated) ++s.n_terminated;
        if (r.flagged) ++s.n_flagged;
        if (r.path.empty()) ++s.n_empty;
        for (std::size_t k = 0; k < r.path.size(); ++k) {
            ++counts[r.path[k]];
            if (k < used.size()) used[k].insert(r.path[k]);
        }
    }
    for (const auto& u : used) s.level_used.push_back(u.size());
    s.n_used = counts.size();
    s.utilization = utilization(counts);
    for (const auto& [_, c] : counts) ++s.histogram[c];
    return s;
}

void write_assignments(const std::vector<AssignmentRecord>& records, const std::filesystem::path& path) {
    std::string buf;
    for (const auto& r : records) {
        json j{{"item_id", r.item_id}, {"path", r.path}, {"resolver", r.resolver}, {"terminated", r.terminated}};
        if (r.flagged) j["flag"] = r.flag_reason;
        buf += j.dump();
        buf += '\n';
    }
    write_file_atomic(path, buf);
}

std::vector<AssignmentRecord> read_assignments(const std::filesystem::path& path) {
    std::vector<AssignmentRecord> out;
    for_each_line(path, [&](std::string_view line, std::size_t) {
        const json j = json::parse(line);
        AssignmentRecord r;
        r.item_id = j.at("item_id").get<std::string>();
        r.path = j.at("path").get<std::vector<std::string>>();
        r.resolver = j.value("resolver", std::size_t{0});
        r.terminated = j.value("terminated", false);
        if (j.contains("flag")) {
            r.flagged = true;
            r.flag_reason = j["flag"].get<std::string>();
        }
        out.push_back(std::move(r));
    });
    return out;
}

}  // namespace semtag
