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


#include "semtag/decode.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "semtag/error.hpp"
#include "semtag/prompts.hpp"
#include "semtag/protocol.hpp"
#include "semtag/simd.hpp"

namespace semtag {

namespace {

struct Hypothesis {
    std::uint32_t node;
    double score;
    std::vector<int> tokens;
};

bool by_score(const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
}

void sort_ranked(std::vector<ScoredItem>& items) {
    std::sort(items.begin(), items.end(), [](const ScoredItem& a, const ScoredItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item_id < b.item_id;
    });
}

}  // namespace

std::vector<ScoredItem> beam_decode(const SurrogateModel& model, std::span<const int> prefix,
                                    const DescriptorTrie& trie, std::size_t beam,
                                    const std::optional<std::set<int>>& allowed_level1) {
    if (beam < 1) throw Error(ErrorCode::InvalidArgument, "beam width must be >= 1");
    if (allowed_level1) {
        if (allowed_level1->empty()) throw Error(ErrorCode::InvalidArgument, "empty allowed level-1 set");
        for (int t : *allowed_level1) {
            if (!trie.level1_subtree(t)) {
                throw Error(ErrorCode::InvalidArgument, "token " + std::to_string(t) + " is not a level-1 token");
            }
        }
    }
    std::vector<ScoredItem> finished;
    std::vector<Hypothesis> live{{DescriptorTrie::kRoot, 0.0, {}}};
    std::vector<int> hist(prefix.begin(), prefix.end());
    const std::size_t base = hist.size();
    while (!live.empty()) {
        std::vector<Hypothesis> next;
        for (const auto& h : live) {
            hist.resize(base);
            hist.insert(hist.end(), h.tokens.begin(), h.tokens.end());
            const auto* row = model.row(model.context_of(hist));
            if (const std::string* item = trie.terminal_item(h.node)) {
                finished.push_back({*item, h.score + std::log(model.prob(row, kEos))});
            }
            for (const auto& [tok, child] : trie.node(h.node).children) {
                if (h.tokens.empty() && allowed_level1 && !allowed_level1->contains(tok)) continue;
                Hypothesis c{child, h.score + std::log(model.prob(row, tok)), h.tokens};
                c.tokens.push_back(tok);
                next.push_back(std::move(c));
            }
        }
        if (next.size() > beam) {
            std::partial_sort(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(beam), next.end(), by_score);
            next.resize(beam);
        }
        live = std::move(next);
    }
    sort_ranked(finished);
    return finished;
}

std::vector<ScoredItem> exhaustive_rank(const SurrogateModel& model, std::span<const int> prefix,
                                        const DescriptorTrie& trie) {
    std::vector<ScoredItem> out;
    out.reserve(trie.n_terminals());
    for (std::size_t i = 0; i < trie.n_terminals(); ++i) {
        std::vector<int> seq = trie.sequence(i);
        seq.push_back(kEos);
        out.push_back({trie.items()[i], model.sequence_log_prob(prefix, seq)});
    }
    sort_ranked(out);
    return out;
}

CritiqueSimulator::CritiqueSimulator(const VocabularyTree& tree, const SemIdTable& table, const Corpus& corpus,
                                     SimulatorOptions options, Gateway* gateway, const EmbeddingProvider* provider)
    : tree_(tree), table_(table), corpus_(corpus), options_(options), gateway_(gateway) {
    if (options_.mode == SimulatorMode::Llm && gateway_ == nullptr) {
        throw Error(ErrorCode::InvalidConfig, "llm simulator needs a gateway");
    }
    level1_ = tree_.level(1);
    for (const auto& id : level1_) {
        if (!level1_names_.empty()) level1_names_ += '\n';
        level1_names_ += "- " + tree_.node(id).name;
    }
    if (options_.k_siblings > 0) {
        if (provider == nullptr) throw Error(ErrorCode::InvalidConfig, "sibling expansion needs an embedding provider");
        std::vector<std::string> texts;
        for (const auto& id : level1_) texts.push_back(tree_.node(id).description);
        const Matrix m = provider->embed_batch(texts);
        nearest_.resize(level1_.size());
        for (std::size_t i = 0; i < level1_.size(); ++i) {
            std::vector<std::pair<double, std::size_t>> d;
            for (std::size_t j = 0; j < level1_.size(); ++j) {
                if (j != i) d.emplace_back(simd::l2(m.row(i), m.row(j)), j);
            }
            std::sort(d.begin(), d.end());
            for (const auto& [_, j] : d) nearest_[i].push_back(j);
        }
    }
}

std::set<int> CritiqueSimulator::oracle(const std::string& item_id) const {
    const SemId* s = table_.find(item_id);
    if (s == nullptr) throw Error(ErrorCode::UnknownItem, "no semantic id for " + item_id);
    if (s->tokens.empty() || !table_.tokens.is_descriptor(s->tokens.front())) {
        throw Error(ErrorCode::InvalidArgument, item_id + " has no level-1 descriptor");
    }
    const int first = s->tokens.front();
    std::set<int> out{first};
    if (options_.k_siblings > 0) {
        const auto pos = std::find(level1_.begin(), level1_.end(), table_.tokens.rule_of(first)) - level1_.begin();
        const auto& near = nearest_[static_cast<std::size_t>(pos)];
        for (std::size_t k = 0; k < options_.k_siblings && k < near.size(); ++k) {
            out.insert(table_.tokens.descriptor_token(level1_[near[k]]));
        }
    }
    return out;
}

std::set<int> CritiqueSimulator::allowed(const std::string& item_id) const {
    if (options_.mode == SimulatorMode::Oracle) return oracle(item_id);
    std::map<std::string, int> by_name;
    for (const auto& id : level1_) by_name.emplace(tree_.node(id).name, table_.tokens.descriptor_token(id));
    const Bindings b{
        {"target_text", format_item_block(item_id, item_prompt_text(corpus_.find(item_id), options_.char_budget))},
        {"level1_names", level1_names_}};
    auto parse = [&](std::string_view raw) {
        std::set<int> out;
        for (const auto& name : parse_selection(raw)) {
            auto it = by_name.find(name);
            if (it != by_name.end()) out.insert(it->second);
        }
        if (out.empty()) throw Error(ErrorCode::EmptyInput, "no listed top-level category was selected");
        return out;
    };
    try {
        return gateway_->complete_parsed(AgentRole::Annotator, TemplateId::UserSimulator,
                                         render_prompt(TemplateId::UserSimulator, b), parse);
    } catch (const Error& e) {
        if (!options_.fallback || e.code() == ErrorCode::BudgetExhausted) throw;
        ++fallbacks_;
        return oracle(item_id);
    }
}

}  // namespace semtag
