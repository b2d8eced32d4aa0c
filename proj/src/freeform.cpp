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


#include "semtag/freeform.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "json.hpp"
#include "semtag/cluster.hpp"
#include "semtag/error.hpp"
#include "semtag/io.hpp"
#include "semtag/parallel.hpp"
#include "semtag/prompts.hpp"
#include "semtag/protocol.hpp"

namespace semtag {

using nlohmann::json;

std::string normalize_tag(std::string_view tag) {
    std::string out;
    bool gap = false;
    for (char c : tag) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            gap = true;
            continue;
        }
        if (gap && !out.empty()) out += ' ';
        gap = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

void FreeformTagTable::rebuild_frequency() {
    frequency.clear();
    for (const auto& [_, list] : tags) {
        for (const auto& t : std::set<std::string>(list.begin(), list.end())) ++frequency[t];
    }
}

void FreeformTagTable::write(const std::filesystem::path& path) const {
    std::string buf;
    for (const auto& [id, list] : tags) {
        buf += json{{"item_id", id}, {"tags", list}}.dump();
        buf += '\n';
    }
    write_file_atomic(path, buf);
}

FreeformTagTable FreeformTagTable::read(const std::filesystem::path& path) {
    FreeformTagTable t;
    for_each_line(path, [&](std::string_view line, std::size_t) {
        const json j = json::parse(line);
        t.tags[j.at("item_id").get<std::string>()] = j.at("tags").get<std::vector<std::string>>();
    });
    t.rebuild_frequency();
    return t;
}

FreeformTagTable generate_freeform(const Corpus& corpus, Gateway& gateway, const FreeformOptions& options,
                                   CallLedger* scope) {
    const auto& items = corpus.items();
    std::vector<std::vector<std::string>> out(items.size());
    std::vector<char> failed(items.size(), 0);
    parallel_for(items.size(), options.parallelism, [&](std::size_t i) {
        const Bindings b{{"n_tags", std::to_string(options.n_tags)},
                         {"item_text", format_item_block(items[i].item_id,
                                                         item_prompt_text(items[i], options.char_budget))}};
        std::vector<std::string> raw;
        try {
            raw = gateway.complete_parsed(AgentRole::Annotator, TemplateId::FreeformTag,
                                          render_prompt(TemplateId::FreeformTag, b),
                                          [](std::string_view r) { return parse_tags(r); }, scope);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::BudgetExhausted) throw;
            failed[i] = 1;
            return;
        }
        for (const auto& t : raw) {
            std::string n = normalize_tag(t);
            if (n.empty() || std::find(out[i].begin(), out[i].end(), n) != out[i].end()) continue;
            if (out[i].size() == options.n_tags) break;
            out[i].push_back(std::move(n));
        }
    });
    FreeformTagTable table;
    for (std::size_t i = 0; i < items.size(); ++i) {
        table.tags[items[i].item_id] = std::move(out[i]);
        table.n_failed += static_cast<std::size_t>(failed[i]);
    }
    table.rebuild_frequency();
    return table;
}

FrequencyBins prune_frequency_bins(const FreeformTagTable& table, std::size_t min_f, std::size_t max_f,
                                   std::size_t n_bins) {
    if (min_f >= max_f) throw Error(ErrorCode::InvalidArgument, "min_f must be below max_f");
    if (n_bins == 0) throw Error(ErrorCode::InvalidArgument, "n_bins must be >= 1");
    FrequencyBins bins;
    for (const auto& [tag, f] : table.frequency) {
        if (f >= min_f && f <= max_f) bins.ranked.push_back(tag);
    }
    if (bins.ranked.empty()) throw Error(ErrorCode::EmptyInput, "no tag inside the frequency window");
    std::stable_sort(bins.ranked.begin(), bins.ranked.end(), [&](const std::string& a, const std::string& b) {
        return table.frequency.at(a) > table.frequency.at(b);
    });
    const std::size_t n = bins.ranked.size();
    std::map<std::string, std::size_t> rank;
    for (std::size_t r = 0; r < n; ++r) {
        bins.bin_of.push_back(r * n_bins / n);
        bins.bin_by_tag[bins.ranked[r]] = bins.bin_of.back();
        rank[bins.ranked[r]] = r;
    }
    for (const auto& [id, list] : table.tags) {
        // Best (lowest) rank per bin.
        std::map<std::size_t, std::size_t> best;
        for (const auto& t : list) {
            auto it = rank.find(t);
            if (it == rank.end()) continue;
            const std::size_t b = bins.bin_of[it->second];
            auto [slot, fresh] = best.emplace(b, it->second);
            if (!fresh) slot->second = std::min(slot->second, it->second);
        }
        auto& seq = bins.sequences[id];
        for (const auto& [_, r] : best) seq.push_back(bins.ranked[r]);
    }
    return bins;
}

KMeansTags prune_kmeans(const FreeformTagTable& table, const EmbeddingProvider& provider, std::size_t k,
                        std::uint64_t seed) {
    KMeansTags out;
    for (const auto& [tag, _] : table.frequency) out.tags.push_back(tag);
    if (k == 0 || out.tags.size() < k) {
        throw Error(ErrorCode::InvalidArgument, std::to_string(out.tags.size()) + " distinct tags for k = " +
                                                    std::to_string(k));
    }
    const ClusterResult c = k_means(provider.embed_batch(out.tags), k, seed);
    out.k = c.k;
    out.centroid_of = c.assignment;
    for (const auto& [id, list] : table.tags) {
        auto& seq = out.sequences[id];
        for (const auto& t : list) {
            const auto pos = std::lower_bound(out.tags.begin(), out.tags.end(), t) - out.tags.begin();
            const std::size_t cid = out.centroid_of[static_cast<std::size_t>(pos)];
            if (std::find(seq.begin(), seq.end(), cid) == seq.end()) seq.push_back(cid);
        }
    }
    return out;
}

void write_pruned_bins(const FrequencyBins& bins, const std::filesystem::path& path) {
    std::map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < bins.ranked.size(); ++r) index[bins.ranked[r]] = r;
    std::string buf;
    for (const auto& [id, seq] : bins.sequences) {
        std::vector<std::size_t> tokens;
        for (const auto& t : seq) tokens.push_back(index.at(t));
        buf += json{{"item_id", id}, {"tokens", tokens}, {"path_names", seq}}.dump();
        buf += '\n';
    }
    write_file_atomic(path, buf);
}

void write_pruned_kmeans(const KMeansTags& km, const std::filesystem::path& path) {
    std::string buf;
    for (const auto& [id, seq] : km.sequences) {
        std::vector<std::string> names;
        for (auto c : seq) names.push_back("centroid_" + std::to_string(c));
        buf += json{{"item_id", id}, {"tokens", seq}, {"path_names", names}}.dump();
        buf += '\n';
    }
    write_file_atomic(path, buf);
}

}  // namespace semtag
