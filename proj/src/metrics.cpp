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


#include "semtag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "semtag/error.hpp"
#include "semtag/hash.hpp"
#include "semtag/io.hpp"
#include "semtag/parallel.hpp"

namespace semtag {

using nlohmann::json;

namespace {

void check_k(std::span<const std::string> ranked, std::size_t k) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (ranked.empty()) throw Error(ErrorCode::EmptyInput, "empty ranking");
}

std::vector<std::string> history_of(const SplitDataset& split, const std::string& user) {
    std::vector<std::string> h;
    if (auto t = split.train.find(user); t != split.train.end()) h = t->second;
    if (auto v = split.valid.find(user); v != split.valid.end()) h.push_back(v->second);
    return h;
}

struct UserScore {
    bool evaluated = false;
    std::vector<double> recall;
    std::vector<double> ndcg;
};

MetricReport aggregate(const std::vector<UserScore>& users, const EvalOptions& options) {
    MetricReport r;
    r.ks = options.ks;
    r.seed = options.seed;
    r.mode = options.mode;
    r.n_negatives = options.mode == EvalMode::Sampled ? options.n_negatives : 0;
    const std::size_t nk = options.ks.size();
    r.recall.assign(nk, 0.0);
    r.ndcg.assign(nk, 0.0);
    r.recall_sd.assign(nk, 0.0);
    r.ndcg_sd.assign(nk, 0.0);
    std::vector<double> r2(nk, 0.0), n2(nk, 0.0);
    for (const auto& u : users) {
        if (!u.evaluated) {
            ++r.n_skipped;
            continue;
        }
        ++r.n_users;
        for (std::size_t i = 0; i < nk; ++i) {
            r.recall[i] += u.recall[i];
            r.ndcg[i] += u.ndcg[i];
            r2[i] += u.recall[i] * u.recall[i];
            n2[i] += u.ndcg[i] * u.ndcg[i];
        }
    }
    if (r.n_users == 0) return r;
    const double n = static_cast<double>(r.n_users);
    for (std::size_t i = 0; i < nk; ++i) {
        r.recall[i] /= n;
        r.ndcg[i] /= n;
        r.recall_sd[i] = std::sqrt(std::max(0.0, r2[i] / n - r.recall[i] * r.recall[i]));
        r.ndcg_sd[i] = std::sqrt(std::max(0.0, n2[i] / n - r.ndcg[i] * r.ndcg[i]));
    }
    return r;
}

UserScore score_ranking(std::span<const std::string> ranked, const std::string& target,
                        const std::vector<std::size_t>& ks) {
    UserScore s;
    s.evaluated = true;
    const auto rank = rank_of(ranked, target);
    for (std::size_t k : ks) {
        const bool hit = rank && *rank <= k;
        s.recall.push_back(hit ? 1.0 : 0.0);
        s.ndcg.push_back(hit ? 1.0 / std::log2(static_cast<double>(*rank) + 1.0) : 0.0);
    }
    return s;
}

std::vector<std::string> ids_of(const std::vector<ScoredItem>& items) {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& s : items) out.push_back(s.item_id);
    return out;
}

}  // namespace

std::optional<std::size_t> rank_of(std::span<const std::string> ranked, std::string_view target) {
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (ranked[i] == target) return i + 1;
    }
    return std::nullopt;
}

double recall_at_k(std::span<const std::string> ranked, std::string_view target, std::size_t k) {
    check_k(ranked, k);
    const auto r = rank_of(ranked, target);
    return r && *r <= k ? 1.0 : 0.0;
}

double ndcg_at_k(std::span<const std::string> ranked, std::string_view target, std::size_t k) {
    check_k(ranked, k);
    const auto r = rank_of(ranked, target);
    return r && *r <= k ? 1.0 / std::log2(static_cast<double>(*r) + 1.0) : 0.0;
}

double MetricReport::recall_at(std::size_t k) const {
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ks[i] == k) return recall[i];
    }
    throw Error(ErrorCode::NotFound, "K=" + std::to_string(k) + " was not evaluated");
}

double MetricReport::ndcg_at(std::size_t k) const {
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ks[i] == k) return ndcg[i];
    }
    throw Error(ErrorCode::NotFound, "K=" + std::to_string(k) + " was not evaluated");
}

json MetricReport::to_json() const {
    json metrics = json::object();
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const std::string k = std::to_string(ks[i]);
        metrics["recall@" + k] = recall[i];
        metrics["ndcg@" + k] = ndcg[i];
        metrics["recall@" + k + "_sd"] = recall_sd[i];
        metrics["ndcg@" + k + "_sd"] = ndcg_sd[i];
    }
    return {{"mode", mode == EvalMode::FullRank ? "full-rank" : "sampled"},
            {"n_negatives", n_negatives},
            {"n_users", n_users},
            {"n_skipped", n_skipped},
            {"seed", seed},
            {"metrics", metrics}};
}

SurrogateRecommender::SurrogateRecommender(const SurrogateModel& model, const SemIdTable& table,
                                           const DescriptorTrie& trie, std::size_t beam,
                                           const std::map<std::string, std::set<int>>* allowed)
    : model_(model), table_(table), trie_(trie), beam_(beam), allowed_(allowed) {}

std::vector<ScoredItem> SurrogateRecommender::rank(const std::string& user_id, std::span<const std::string> history,
                                                   std::size_t top_k) const {
    const auto prefix = encode_stream(table_, history, true);
    std::optional<std::set<int>> allowed;
    if (allowed_ != nullptr) {
        if (auto it = allowed_->find(user_id); it != allowed_->end()) allowed = it->second;
    }
    auto out = beam_decode(model_, prefix, trie_, beam_, allowed);
    if (out.size() > top_k) out.resize(top_k);
    return out;
}

double SurrogateRecommender::score(const std::string&, std::span<const std::string> history,
                                   const std::string& item_id) const {
    const SemId* s = table_.find(item_id);
    if (s == nullptr) throw Error(ErrorCode::UnknownItem, "no semantic id for " + item_id);
    return model_.sequence_log_prob(encode_stream(table_, history, true), s->tokens);
}

RandomRecommender::RandomRecommender(std::vector<std::string> catalog, std::uint64_t seed)
    : catalog_(std::move(catalog)), seed_(seed) {}

double RandomRecommender::score(const std::string& user_id, std::span<const std::string>,
                                const std::string& item_id) const {
    return unit_from_hash(hash_combine(hash_combine(seed_, fnv1a64(user_id)), fnv1a64(item_id)));
}

std::vector<ScoredItem> RandomRecommender::rank(const std::string& user_id, std::span<const std::string> history,
                                                std::size_t top_k) const {
    std::vector<ScoredItem> out;
    out.reserve(catalog_.size());
    for (const auto& id : catalog_) out.push_back({id, score(user_id, history, id)});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item_id < b.item_id;
    });
    if (out.size() > top_k) out.resize(top_k);
    return out;
}

std::vector<ScoredItem> OracleRecommender::rank(const std::string& user_id, std::span<const std::string>,
                                                std::size_t) const {
    auto it = targets_.find(user_id);
    if (it == targets_.end()) return {};
    return {{it->second, 1.0}};
}

double OracleRecommender::score(const std::string& user_id, std::span<const std::string>,
                                const std::string& item_id) const {
    auto it = targets_.find(user_id);
    return it != targets_.end() && it->second == item_id ? 1.0 : 0.0;
}

std::vector<std::string> sample_negatives(const std::vector<std::string>& catalog, const std::set<std::string>& exclude,
                                          std::size_t n, std::uint64_t seed, const std::string& user_id) {
    std::vector<std::string> pool;
    pool.reserve(catalog.size());
    for (const auto& id : catalog) {
        if (!exclude.contains(id)) pool.push_back(id);
    }
    Rng rng(hash_combine(seed, fnv1a64(user_id)));
    const std::size_t take = std::min(n, pool.size());
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(take);
    return pool;
}

MetricReport evaluate_run(const Recommender& model, const SplitDataset& split, const std::vector<std::string>& catalog,
                          const EvalOptions& options) {
    if (options.ks.empty()) throw Error(ErrorCode::InvalidArgument, "no K values");
    for (auto k : options.ks) {
        if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    }
    const std::set<std::string> in_catalog(catalog.begin(), catalog.end());
    const std::size_t top_k = *std::max_element(options.ks.begin(), options.ks.end());
    std::vector<std::pair<std::string, std::string>> users(split.test.begin(), split.test.end());
    std::vector<UserScore> scores(users.size());
    parallel_for(users.size(), options.parallelism, [&](std::size_t u) {
        const auto& [user, target] = users[u];
        if (!in_catalog.contains(target)) return;
        const auto history = history_of(split, user);
        if (options.mode == EvalMode::FullRank) {
            const auto ranked = ids_of(model.rank(user, history, top_k));
            scores[u] = score_ranking(ranked, target, options.ks);
            return;
        }
        std::set<std::string> exclude(history.begin(), history.end());
        exclude.insert(target);
        const auto negatives = sample_negatives(catalog, exclude, options.n_negatives, options.seed, user);
        const double t = model.score(user, history, target);
        std::size_t rank = 1;
        for (const auto& neg : negatives) {
            const double s = model.score(user, history, neg);
            if (s > t || (s == t && neg < target)) ++rank;
        }
        // Place the target at its rank among placeholders.
        std::vector<std::string> ranked(std::min(rank, top_k + 1));
        if (rank <= top_k) ranked[rank - 1] = target;
        scores[u] = score_ranking(ranked, target, options.ks);
    });
    return aggregate(scores, options);
}

json CritiqueReport::to_json() const {
    json gain = json::object();
    for (std::size_t i = 0; i < vanilla.ks.size(); ++i) {
        const std::string k = std::to_string(vanilla.ks[i]);
        const double v = vanilla.ndcg[i];
        gain["ndcg@" + k] = v > 0.0 ? (constrained.ndcg[i] - v) / v : 0.0;
    }
    return {{"vanilla", vanilla.to_json()},
            {"constrained", constrained.to_json()},
            {"relative_gain", gain},
            {"n_outputs", n_outputs},
            {"n_violations", n_violations},
            {"n_no_level1", n_no_level1},
            {"simulator_fallbacks", simulator_fallbacks}};
}

CritiqueReport evaluate_critique(const SurrogateModel& model, const SemIdTable& table, const DescriptorTrie& trie,
                                 const SplitDataset& split, const CritiqueSimulator& simulator, std::size_t beam,
                                 const EvalOptions& options) {
    EvalOptions opts = options;
    opts.mode = EvalMode::FullRank;
    CritiqueReport report;

    // Users whose target lacks a level-1 token are left out of both runs.
    std::vector<std::pair<std::string, std::string>> users(split.test.begin(), split.test.end());
    std::vector<std::optional<std::set<int>>> picks(users.size());
    parallel_for(users.size(), opts.parallelism, [&](std::size_t u) {
        const SemId* s = table.find(users[u].second);
        if (s == nullptr || s->tokens.empty() || !table.tokens.is_descriptor(s->tokens.front())) return;
        picks[u] = simulator.allowed(users[u].second);
    });
    SplitDataset eligible = split;
    std::map<std::string, std::set<int>> allowed;
    for (std::size_t u = 0; u < users.size(); ++u) {
        if (picks[u]) {
            allowed.emplace(users[u].first, *picks[u]);
        } else {
            eligible.test.erase(users[u].first);
            ++report.n_no_level1;
        }
    }
    const SurrogateRecommender vanilla(model, table, trie, beam);
    const SurrogateRecommender constrained(model, table, trie, beam, &allowed);
    report.vanilla = evaluate_run(vanilla, eligible, trie.items(), opts);
    report.constrained = evaluate_run(constrained, eligible, trie.items(), opts);
    report.vanilla.n_skipped += report.n_no_level1;
    report.constrained.n_skipped += report.n_no_level1;

    // Audit the hard constraint on the full constrained output.
    const std::size_t top_k = *std::max_element(opts.ks.begin(), opts.ks.end());
    for (const auto& [user, set] : allowed) {
        const auto out = constrained.rank(user, history_of(split, user), top_k);
        for (const auto& s : out) {
            ++report.n_outputs;
            const SemId* sid = table.find(s.item_id);
            if (sid == nullptr || sid->tokens.empty() || !set.contains(sid->tokens.front())) ++report.n_violations;
        }
    }
    report.simulator_fallbacks = simulator.fallbacks();
    return report;
}

std::vector<CoverageDelta> coverage_report(const std::vector<RefinementLog>& logs) {
    std::vector<CoverageDelta> rows;
    for (const auto& log : logs) {
        for (std::size_t i = 1; i < log.cycles.size(); ++i) {
            const auto& a = log.cycles[i - 1];
            const auto& b = log.cycles[i];
            rows.push_back({log.depth + 1, log.node_id, b.cycle, a.coverage, b.coverage, b.coverage - a.coverage});
        }
    }
    return rows;
}

void write_coverage_csv(const std::vector<CoverageDelta>& rows, const std::filesystem::path& path) {
    std::string buf = "level,cycle,delta,node_id,before,after\n";
    char line[160];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%zu,%zu,%.6f,%s,%.6f,%.6f\n", r.level, r.cycle, r.delta, r.node_id.c_str(),
                      r.before, r.after);
        buf += line;
    }
    write_file_atomic(path, buf);
}

double median(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "median of no values");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double hi = values[mid];
    if (values.size() % 2 == 1) return hi;
    const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return (lo + hi) / 2.0;
}

}  // namespace semtag
