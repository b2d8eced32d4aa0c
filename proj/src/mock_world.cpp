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

#include "semtag/mock_world.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <map>

#include "semtag/error.hpp"
#include "semtag/hash.hpp"
#include "semtag/io.hpp"
#include "semtag/protocol.hpp"

namespace semtag {

using nlohmann::json;

namespace {

constexpr const char* kConsonants = "bdfgklmnprstvz";
constexpr const char* kVowels = "aeiou";
constexpr std::array<const char*, 6> kLevelSuffix = {"Gear", "Kits", "Parts", "Series", "Models", "Lines"};

std::string pseudo_word(Rng& rng, std::size_t syllables) {
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
        w += kConsonants[rng.below(14)];
        w += kVowels[rng.below(5)];
    }
    if (rng.below(2) == 0) w += kConsonants[rng.below(14)];
    return w;
}

std::string fresh_word(Rng& rng, std::set<std::string>& used, std::size_t syllables) {
    for (;;) {
        std::string w = pseudo_word(rng, syllables);
        if (used.insert(w).second) return w;
    }
}

std::string capitalize(std::string w) {
    if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    return w;
}

std::string item_id_for(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "item_%05zu", i);
    return buf;
}

std::string user_id_for(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "user_%04zu", i);
    return buf;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Text strictly between the first `begin` marker and the next `end` marker.
std::string_view section(std::string_view text, std::string_view begin, std::string_view end) {
    auto b = text.find(begin);
    if (b == std::string_view::npos) return {};
    b += begin.size();
    auto e = end.empty() ? std::string_view::npos : text.find(end, b);
    return text.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b);
}

std::vector<std::string> item_ids_in(std::string_view text) {
    std::vector<std::string> ids;
    constexpr std::string_view marker = "[Item ID: ";
    std::size_t pos = 0;
    while ((pos = text.find(marker, pos)) != std::string_view::npos) {
        pos += marker.size();
        const auto end = text.find(']', pos);
        if (end == std::string_view::npos) break;
        ids.emplace_back(text.substr(pos, end - pos));
        pos = end;
    }
    return ids;
}

struct RuleLine {
    std::string rule_id;
    std::string name;
};

std::vector<RuleLine> rule_lines_in(std::string_view text) {
    std::vector<RuleLine> rules;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.size() < 3 || line[0] != '[' || line.starts_with("[Item ID:")) continue;
        const auto close = line.find(']');
        if (close == std::string_view::npos) continue;
        RuleLine r;
        r.rule_id = std::string(line.substr(1, close - 1));
        std::string_view rest = line.substr(close + 1);
        while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
        if (rest.starts_with("(parent:")) {
            const auto p = rest.find(')');
            rest = p == std::string_view::npos ? std::string_view{} : rest.substr(p + 1);
        }
        r.name = rule_name_of(rest);
        rules.push_back(std::move(r));
    }
    return rules;
}

bool on_path(const std::vector<int>& path, int node) {
    return std::find(path.begin(), path.end(), node) != path.end();
}

}  // namespace

PlantedWorld PlantedWorld::generate(const PlantedWorldConfig& config) {
    if (config.branching.empty()) throw Error(ErrorCode::InvalidConfig, "planted world needs at least one level");
    for (auto b : config.branching) {
        if (b == 0) throw Error(ErrorCode::InvalidConfig, "planted branching must be positive");
    }
    if (config.n_items == 0) throw Error(ErrorCode::InvalidConfig, "planted world needs items");
    if (config.min_history == 0 || config.min_history > config.max_history) {
        throw Error(ErrorCode::InvalidConfig, "planted history bounds are invalid");
    }
    PlantedWorld w;
    w.config_ = config;
    Rng rng(mix64(config.seed));
    std::set<std::string> used;

    w.nodes_.push_back(PlantedNode{"root", "All Products", {}, -1, 0, {}});
    std::vector<int> frontier = {0};
    for (std::size_t d = 0; d < config.branching.size(); ++d) {
        std::vector<int> next;
        for (int parent : frontier) {
            for (std::size_t c = 0; c < config.branching[d]; ++c) {
                PlantedNode n;
                const auto& pk = w.nodes_[static_cast<std::size_t>(parent)].key;
                n.key = (parent == 0 ? std::string() : pk + ".") + std::to_string(c);
                for (std::size_t k = 0; k < std::max<std::size_t>(1, config.keywords_per_node); ++k) {
                    n.keywords.push_back(fresh_word(rng, used, 3));
                }
                n.name = capitalize(n.keywords[0]) + " " + kLevelSuffix[std::min(d, kLevelSuffix.size() - 1)];
                n.parent = parent;
                n.depth = d + 1;
                const int idx = static_cast<int>(w.nodes_.size());
                w.nodes_.push_back(std::move(n));
                w.nodes_[static_cast<std::size_t>(parent)].children.push_back(idx);
                next.push_back(idx);
            }
        }
        frontier = std::move(next);
    }
    const std::vector<int> leaves = frontier;

    std::vector<std::string> noise;
    for (std::size_t i = 0; i < config.noise_vocab; ++i) noise.push_back(fresh_word(rng, used, 2));
    std::vector<std::string> alien_words;
    for (std::size_t i = 0; i < 3; ++i) alien_words.push_back(fresh_word(rng, used, 4));

    auto noise_words = [&](std::size_t n) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n && !noise.empty(); ++i) out.push_back(noise[rng.below(noise.size())]);
        return out;
    };

    const std::size_t total = config.n_items + config.n_aliens;
    for (std::size_t i = 0; i < total; ++i) {
        PlantedItem item{item_id_for(i), -1};
        Item text;
        text.item_id = item.item_id;
        if (i < config.n_items) {
            item.leaf = leaves[rng.below(leaves.size())];
            std::vector<int> path;
            for (int n = item.leaf; n > 0; n = w.nodes_[static_cast<std::size_t>(n)].parent) path.push_back(n);
            std::reverse(path.begin(), path.end());
            const auto& leaf = w.nodes_[static_cast<std::size_t>(item.leaf)];
            const auto& top = w.nodes_[static_cast<std::size_t>(path.front())];
            const auto title_noise = noise_words(1);
            text.title = capitalize(leaf.keywords[0]) + " " + (title_noise.empty() ? "" : title_noise[0] + " ") +
                         top.keywords.back();
            std::vector<std::string> kws;
            for (int n : path) {
                for (const auto& k : w.nodes_[static_cast<std::size_t>(n)].keywords) kws.push_back(k);
            }
            text.body = "Keywords: " + join(kws, " ") + ". Notes: " + join(noise_words(config.noise_words), " ") + ".";
        } else {
            text.title = capitalize(alien_words[0]) + " " + noise_words(1).front();
            text.body = "Keywords: " + join(alien_words, " ") + ". Notes: " +
                        join(noise_words(config.noise_words), " ") + ".";
        }
        w.items_.push_back(item);
        w.corpus_.add(std::move(text));
    }

    // Users favour one level-1 branch and, within it, one leaf.
    std::map<int, std::vector<std::size_t>> by_leaf;
    for (std::size_t i = 0; i < config.n_items; ++i) by_leaf[w.items_[i].leaf].push_back(i);
    std::map<int, std::vector<int>> leaves_under_top;
    for (int leaf : leaves) {
        int top = leaf;
        while (w.nodes_[static_cast<std::size_t>(top)].parent != 0) top = w.nodes_[static_cast<std::size_t>(top)].parent;
        if (by_leaf.contains(leaf)) leaves_under_top[top].push_back(leaf);
    }
    std::vector<int> tops;
    for (const auto& [t, _] : leaves_under_top) tops.push_back(t);
    for (std::size_t u = 0; u < config.n_users && !tops.empty(); ++u) {
        const std::string user = user_id_for(u);
        const int top = tops[rng.below(tops.size())];
        const auto& fav_leaves = leaves_under_top[top];
        const int fav_leaf = fav_leaves[rng.below(fav_leaves.size())];
        const std::size_t len = config.min_history + rng.below(config.max_history - config.min_history + 1);
        std::int64_t t = 1'600'000'000 + static_cast<std::int64_t>(rng.below(1'000'000));
        for (std::size_t s = 0; s < len; ++s) {
            std::size_t idx = 0;
            if (rng.uniform() < config.p_favourite) {
                const int leaf = rng.uniform() < 0.5 ? fav_leaf : fav_leaves[rng.below(fav_leaves.size())];
                const auto& pool = by_leaf[leaf];
                idx = pool[rng.below(pool.size())];
            } else {
                idx = rng.below(config.n_items);
            }
            t += 1 + static_cast<std::int64_t>(rng.below(5000));
            w.interactions_.push_back(Interaction{user, w.items_[idx].item_id, t});
        }
    }
    w.index();
    return w;
}

void PlantedWorld::index() {
    paths_.clear();
    by_name_.clear();
    for (std::size_t i = 0; i < nodes_.size(); ++i) by_name_[nodes_[i].name] = static_cast<int>(i);
    for (const auto& item : items_) {
        std::vector<int> path;
        for (int n = item.leaf; n > 0; n = nodes_[static_cast<std::size_t>(n)].parent) path.push_back(n);
        std::reverse(path.begin(), path.end());
        paths_[item.item_id] = std::move(path);
    }
}

const std::vector<int>& PlantedWorld::path_of(std::string_view item_id) const {
    static const std::vector<int> kEmpty;
    auto it = paths_.find(std::string(item_id));
    return it == paths_.end() ? kEmpty : it->second;
}

int PlantedWorld::node_by_name(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    return it == by_name_.end() || it->second == 0 ? -1 : it->second;
}

std::vector<int> PlantedWorld::nodes_at_depth(std::size_t depth) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].depth == depth) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::string PlantedWorld::rule_text(int idx) const {
    const auto& n = node(idx);
    std::vector<std::string> others;
    if (n.parent >= 0) {
        for (int s : node(n.parent).children) {
            if (s != idx) others.push_back(node(s).keywords[0]);
        }
    }
    return n.name + ": INCLUDES: products characterised by " + join(n.keywords, ", ") +
           ". EXCLUDES: " + (others.empty() ? std::string("unrelated products") : join(others, ", ") + " products") +
           ".";
}

json PlantedWorld::to_json() const {
    json cfg{{"branching", config_.branching},     {"n_items", config_.n_items},
             {"n_aliens", config_.n_aliens},       {"keywords_per_node", config_.keywords_per_node},
             {"noise_words", config_.noise_words}, {"noise_vocab", config_.noise_vocab},
             {"n_users", config_.n_users},         {"min_history", config_.min_history},
             {"max_history", config_.max_history}, {"p_favourite", config_.p_favourite},
             {"seed", config_.seed}};
    json nodes = json::array();
    for (const auto& n : nodes_) {
        nodes.push_back({{"key", n.key}, {"name", n.name}, {"keywords", n.keywords}, {"parent", n.parent},
                         {"depth", n.depth}});
    }
    json items = json::array();
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto& text = corpus_.at(i);
        items.push_back({{"item_id", items_[i].item_id}, {"leaf", items_[i].leaf}, {"title", text.title},
                         {"body", text.body}});
    }
    json inter = json::array();
    for (const auto& it : interactions_) inter.push_back({it.user_id, it.item_id, it.timestamp});
    return {{"config", cfg}, {"nodes", nodes}, {"items", items}, {"interactions", inter}};
}

PlantedWorld PlantedWorld::from_json(const json& j) {
    PlantedWorld w;
    const json& c = j.at("config");
    w.config_.branching = c.at("branching").get<std::vector<std::size_t>>();
    w.config_.n_items = c.at("n_items").get<std::size_t>();
    w.config_.n_aliens = c.at("n_aliens").get<std::size_t>();
    w.config_.keywords_per_node = c.at("keywords_per_node").get<std::size_t>();
    w.config_.noise_words = c.at("noise_words").get<std::size_t>();
    w.config_.noise_vocab = c.at("noise_vocab").get<std::size_t>();
    w.config_.n_users = c.at("n_users").get<std::size_t>();
    w.config_.min_history = c.at("min_history").get<std::size_t>();
    w.config_.max_history = c.at("max_history").get<std::size_t>();
    w.config_.p_favourite = c.at("p_favourite").get<double>();
    w.config_.seed = c.at("seed").get<std::uint64_t>();
    for (const auto& n : j.at("nodes")) {
        w.nodes_.push_back(PlantedNode{n.at("key").get<std::string>(), n.at("name").get<std::string>(),
                                       n.at("keywords").get<std::vector<std::string>>(), n.at("parent").get<int>(),
                                       n.at("depth").get<std::size_t>(), {}});
    }
    for (std::size_t i = 1; i < w.nodes_.size(); ++i) {
        const int p = w.nodes_[i].parent;
        if (p < 0 || static_cast<std::size_t>(p) >= w.nodes_.size()) throw Error(ErrorCode::Schema, "bad planted parent");
        w.nodes_[static_cast<std::size_t>(p)].children.push_back(static_cast<int>(i));
    }
    for (const auto& it : j.at("items")) {
        w.items_.push_back(PlantedItem{it.at("item_id").get<std::string>(), it.at("leaf").get<int>()});
        w.corpus_.add(Item{it.at("item_id").get<std::string>(), it.at("title").get<std::string>(),
                           it.at("body").get<std::string>(), {}});
    }
    for (const auto& row : j.at("interactions")) {
        w.interactions_.push_back(
            Interaction{row.at(0).get<std::string>(), row.at(1).get<std::string>(), row.at(2).get<std::int64_t>()});
    }
    w.index();
    return w;
}

void PlantedWorld::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json().dump()); }

PlantedWorld PlantedWorld::load(const std::filesystem::path& path) {
    const json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Parse, "cannot parse planted world " + path.string());
    return from_json(j);
}

MockBackend::MockBackend(std::shared_ptr<const PlantedWorld> world, MockBehavior behavior)
    : world_(std::move(world)), behavior_(std::move(behavior)) {
    if (!world_) throw Error(ErrorCode::InvalidConfig, "mock backend needs a planted world");
}

BackendReply MockBackend::send(const LlmRequest& request) {
    BackendReply reply;
    reply.http_status = 200;
    reply.text = respond(request.template_id, request.prompt);
    return reply;
}

std::string MockBackend::respond(TemplateId id, std::string_view prompt) const {
    switch (id) {
        case TemplateId::ArchitectInit: return init(prompt, "parent category: \"");
        case TemplateId::AnnotatorPropose: return init(prompt, "found in \"");
        case TemplateId::AnnotatorErrorFeedback: return error_feedback(prompt);
        case TemplateId::ArchitectReview: return review(prompt);
        case TemplateId::AssignItem: return assign_item(prompt);
        case TemplateId::AssignLevel: return assign_level(prompt);
        case TemplateId::AssignOneShot: return assign_one_shot(prompt);
        case TemplateId::FreeformTag: return freeform(prompt);
        case TemplateId::UserSimulator: return simulate_user(prompt);
    }
    return "{}";
}

bool MockBackend::misses(std::string_view item_id, int node) const {
    if (behavior_.false_negative_rate <= 0.0) return false;
    const std::uint64_t h =
        hash_combine(hash_combine(mix64(behavior_.seed), fnv1a64(item_id)), fnv1a64(world_->node(node).name));
    return unit_from_hash(h) < behavior_.false_negative_rate;
}

std::string MockBackend::init(std::string_view prompt, std::string_view parent_marker) const {
    const std::string_view quoted = section(prompt, parent_marker, "\"");
    int parent = world_->node_by_name(rule_name_of(quoted));
    const auto samples = item_ids_in(prompt);
    if (parent < 0) {
        // Deepest common ancestor of the sampled items.
        std::vector<int> common;
        bool first = true;
        for (const auto& id : samples) {
            const auto& path = world_->path_of(id);
            if (path.empty()) continue;
            if (first) {
                common = path;
                first = false;
                continue;
            }
            std::size_t k = 0;
            while (k < common.size() && k < path.size() && common[k] == path[k]) ++k;
            common.resize(k);
        }
        parent = common.empty() ? 0 : common.back();
    }
    const std::size_t depth = world_->node(parent).depth;
    std::set<int> children;
    for (const auto& id : samples) {
        const auto& path = world_->path_of(id);
        if (path.size() <= depth) continue;
        if (depth > 0 && path[depth - 1] != parent) continue;
        children.insert(path[depth]);
    }
    json cats = json::array();
    for (int c : children) {
        const auto& n = world_->node(c);
        if (behavior_.withheld.contains(n.name)) continue;
        std::vector<std::string> excludes;
        for (int s : world_->node(parent).children) {
            if (s != c) excludes.push_back(world_->node(s).keywords[0]);
        }
        cats.push_back({{"name", n.name},
                        {"description", "Products characterised by " + join(n.keywords, ", ")},
                        {"includes", n.keywords},
                        {"excludes", excludes}});
    }
    return json{{"categories", cats}}.dump(2);
}

std::string MockBackend::assign_item(std::string_view prompt) const {
    const auto rules = rule_lines_in(section(prompt, "Candidate Category Rules:\n", "\n\nProduct:\n"));
    const auto ids = item_ids_in(section(prompt, "\n\nProduct:\n", ""));
    AssignResponse r;
    if (!ids.empty()) {
        const auto& path = world_->path_of(ids.front());
        for (const auto& rule : rules) {
            const int n = world_->node_by_name(rule.name);
            if (n >= 0 && on_path(path, n) && !misses(ids.front(), n)) r.rule_ids.push_back(rule.rule_id);
        }
    }
    if (r.rule_ids.empty()) r.reason = "None of the listed rules describes this product.";
    return serialize_assign_item(r);
}

std::string MockBackend::error_feedback(std::string_view prompt) const {
    const auto rules = rule_lines_in(section(prompt, "Existing Category Rules:\n", "\n\nAnalysis of Uncategorized Items:"));
    auto tickets = item_ids_in(section(prompt, "Analysis of Uncategorized Items:", "\n\nTask:"));
    std::sort(tickets.begin(), tickets.end());
    tickets.erase(std::unique(tickets.begin(), tickets.end()), tickets.end());

    std::map<int, std::string> rule_of_node;
    std::map<int, std::size_t> parent_votes;
    for (const auto& r : rules) {
        const int n = world_->node_by_name(r.name);
        if (n < 0) continue;
        rule_of_node.emplace(n, r.rule_id);
        ++parent_votes[world_->node(n).parent];
    }
    int parent = -1;
    std::size_t best = 0;
    for (const auto& [p, v] : parent_votes) {
        if (v > best) {
            best = v;
            parent = p;
        }
    }
    if (parent < 0) {
        std::vector<int> common;
        bool first = true;
        for (const auto& id : tickets) {
            const auto& path = world_->path_of(id);
            if (path.empty()) continue;
            if (first) {
                common = path;
                first = false;
                continue;
            }
            std::size_t k = 0;
            while (k < common.size() && k < path.size() && common[k] == path[k]) ++k;
            common.resize(k);
        }
        if (!first) parent = common.size() > 1 ? common[common.size() - 2] : 0;
    }

    std::map<int, std::size_t> missing;
    std::map<int, std::size_t> present;
    if (parent >= 0) {
        const std::size_t depth = world_->node(parent).depth;
        for (const auto& id : tickets) {
            const auto& path = world_->path_of(id);
            if (path.size() <= depth || (depth > 0 && path[depth - 1] != parent)) continue;
            const int child = path[depth];
            if (rule_of_node.contains(child)) ++present[child];
            else ++missing[child];
        }
    }
    auto top = [](const std::map<int, std::size_t>& counts) {
        int arg = -1;
        std::size_t hi = 0;
        for (const auto& [n, c] : counts) {
            if (c > hi) {
                hi = c;
                arg = n;
            }
        }
        return arg;
    };
    ChangeProposal p;
    if (const int child = top(missing); child >= 0) {
        p.problem_summary = std::to_string(missing[child]) + " products belong to an uncovered kind: " +
                            world_->node(child).name + ".";
        p.suggested_change = CreatePayload{world_->rule_text(child)};
    } else if (const int child = top(present); child >= 0) {
        const auto& n = world_->node(child);
        p.problem_summary = "The '" + n.name + "' rule is too narrow for " + std::to_string(present[child]) +
                            " products.";
        std::string text = world_->rule_text(child);
        const auto exc = text.find(". EXCLUDES:");
        text.insert(exc, ", including every " + n.keywords[0] + " variant");
        p.suggested_change = ExpandPayload{rule_of_node[child], text};
    } else {
        p.problem_summary = "The products share no planted category under this parent.";
        p.suggested_change = IgnorePayload{"Unrelated outlier products."};
    }
    return serialize_change_proposal(p);
}

std::string MockBackend::review(std::string_view prompt) const {
    const std::string_view body = section(prompt, "Proposals for Review:\n", "\n\nYour JSON Decision List:");
    std::vector<ReviewDecision> out;
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto nl = body.find('\n', pos);
        if (nl == std::string_view::npos) nl = body.size();
        const json j = json::parse(body.substr(pos, nl - pos), nullptr, false);
        pos = nl + 1;
        if (j.is_discarded() || !j.is_object() || !j.contains("proposal_id")) continue;
        ReviewDecision d;
        d.proposal_id = j["proposal_id"].is_string() ? j["proposal_id"].get<std::string>() : j["proposal_id"].dump();
        const std::string type = j.value("change_type", std::string());
        const bool reject = (type == "CREATE_NEW_CATEGORY" && behavior_.reject_create) ||
                            (type == "EXPAND_EXISTING_CATEGORY" && behavior_.reject_expand);
        d.decision = reject ? Decision::Rejected : Decision::Approved;
        d.reasoning = reject ? "Rejected by policy." : "Consistent with the taxonomy.";
        out.push_back(std::move(d));
    }
    return serialize_reviews(out);
}

std::string MockBackend::assign_level(std::string_view prompt) const {
    const auto rules = rule_lines_in(section(prompt, "Candidate Sub-categories:\n", "\n\nProduct:\n"));
    const auto ids = item_ids_in(section(prompt, "\n\nProduct:\n", ""));
    std::string choice = "STOP";
    if (!ids.empty()) {
        const auto& path = world_->path_of(ids.front());
        for (const auto& rule : rules) {
            const int n = world_->node_by_name(rule.name);
            if (n >= 0 && on_path(path, n)) {
                choice = rule.rule_id;
                break;
            }
        }
    }
    return json{{"rule_id", choice}}.dump();
}

std::string MockBackend::assign_one_shot(std::string_view prompt) const {
    const auto rules = rule_lines_in(section(prompt, "Vocabulary:\n", "\n\nProduct:\n"));
    const auto ids = item_ids_in(section(prompt, "\n\nProduct:\n", ""));
    std::vector<std::pair<std::size_t, std::string>> picked;
    if (!ids.empty()) {
        const auto& path = world_->path_of(ids.front());
        for (const auto& rule : rules) {
            const int n = world_->node_by_name(rule.name);
            if (n >= 0 && on_path(path, n)) picked.emplace_back(world_->node(n).depth, rule.rule_id);
        }
    }
    std::sort(picked.begin(), picked.end());
    std::vector<std::string> out;
    for (auto& [_, id] : picked) out.push_back(id);
    return json{{"path", out}}.dump();
}

std::string MockBackend::freeform(std::string_view prompt) const {
    std::size_t n_tags = 3;
    const std::string_view count = section(prompt, "Generate exactly ", " ");
    if (!count.empty()) n_tags = std::strtoul(std::string(count).c_str(), nullptr, 10);
    const auto ids = item_ids_in(section(prompt, "\n\nProduct:\n", ""));
    std::vector<std::string> tags;
    if (!ids.empty()) {
        const std::string& id = ids.front();
        const std::uint64_t h = hash_combine(mix64(behavior_.seed), fnv1a64(id));
        const auto& path = world_->path_of(id);
        if (!path.empty()) {
            const auto& leaf = world_->node(path.back());
            const auto& top = world_->node(path.front());
            tags.push_back(leaf.keywords[0]);
            tags.push_back(top.keywords[std::min<std::size_t>(1, top.keywords.size() - 1)] + " style " +
                           std::to_string(h % 40));
            tags.push_back("  " + capitalize(leaf.keywords.back()) + "   " + hex8(h) + " ");
        } else {
            tags.push_back("misc " + hex8(h));
        }
        for (std::size_t k = 3; k < n_tags; ++k) tags.push_back("extra " + hex8(mix64(h + k)));
    }
    if (tags.size() > n_tags) tags.resize(n_tags);
    return json{{"tags", tags}}.dump();
}

std::string MockBackend::simulate_user(std::string_view prompt) const {
    const auto ids = item_ids_in(section(prompt, "interact with next:\n", "\n\nThe recommender"));
    const std::string_view names = section(prompt, "top-level categories:\n", "\n\nSelect all");
    std::vector<std::string> listed;
    std::size_t pos = 0;
    while (pos < names.size()) {
        auto nl = names.find('\n', pos);
        if (nl == std::string_view::npos) nl = names.size();
        std::string name(names.substr(pos, nl - pos));
        if (name.starts_with("- ")) name.erase(0, 2);
        if (!name.empty()) listed.push_back(name);
        pos = nl + 1;
    }
    std::vector<std::string> selected;
    if (!ids.empty()) {
        const auto& path = world_->path_of(ids.front());
        if (!path.empty()) {
            const std::string& want = world_->node(path.front()).name;
            if (std::find(listed.begin(), listed.end(), want) != listed.end()) selected.push_back(want);
        }
    }
    return json{{"selected", selected}}.dump();
}

}  // namespace semtag
