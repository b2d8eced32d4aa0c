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
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "semtag/corpus.hpp"
#include "semtag/decode.hpp"
#include "semtag/refinement.hpp"

namespace semtag {

/// 1-based rank of target, or nullopt.
std::optional<std::size_t> rank_of(std::span<const std::string> ranked, std::string_view target);
/// Throws InvalidArgument for k < 1, EmptyInput for an empty ranking.
double recall_at_k(std::span<const std::string> ranked, std::string_view target, std::size_t k);
/// 1 / log2(rank + 1) when rank <= k, else 0.
double ndcg_at_k(std::span<const std::string> ranked, std::string_view target, std::size_t k);

enum class EvalMode { FullRank, Sampled };

struct MetricReport {
    std::vector<std::size_t> ks;
    std::vector<double> recall;
    std::vector<double> ndcg;
    std::vector<double> recall_sd;
    std::vector<double> ndcg_sd;
    std::size_t n_users = 0;
    std::size_t n_skipped = 0;
    std::uint64_t seed = 0;
    EvalMode mode = EvalMode::FullRank;
    std::size_t n_negatives = 0;

    double recall_at(std::size_t k) const;
    double ndcg_at(std::size_t k) const;
    nlohmann::json to_json() const;
};

class Recommender {
public:
    virtual ~Recommender() = default;
    /// Best items first, at most top_k (more is allowed when ties matter).
    virtual std::vector<ScoredItem> rank(const std::string& user_id, std::span<const std::string> history,
                                         std::size_t top_k) const = 0;
    virtual double score(const std::string& user_id, std::span<const std::string> history,
                         const std::string& item_id) const = 0;
};

/// Surrogate model behind the trie. With `allowed` set, users found in the
/// map decode under their level-1 constraint.
class SurrogateRecommender final : public Recommender {
public:
    SurrogateRecommender(const SurrogateModel& model, const SemIdTable& table, const DescriptorTrie& trie,
                         std::size_t beam, const std::map<std::string, std::set<int>>* allowed = nullptr);

    std::vector<ScoredItem> rank(const std::string& user_id, std::span<const std::string> history,
                                 std::size_t top_k) const override;
    double score(const std::string& user_id, std::span<const std::string> history,
                 const std::string& item_id) const override;

private:
    const SurrogateModel& model_;
    const SemIdTable& table_;
    const DescriptorTrie& trie_;
    std::size_t beam_;
    const std::map<std::string, std::set<int>>* allowed_;
};

/// Hash-uniform scores over the catalog.
class RandomRecommender final : public Recommender {
public:
    RandomRecommender(std::vector<std::string> catalog, std::uint64_t seed);
    std::vector<ScoredItem> rank(const std::string& user_id, std::span<const std::string> history,
                                 std::size_t top_k) const override;
    double score(const std::string& user_id, std::span<const std::string> history,
                 const std::string& item_id) const override;

private:
    std::vector<std::string> catalog_;
    std::uint64_t seed_;
};

/// Knows each user's target and ranks it first.
class OracleRecommender final : public Recommender {
public:
    explicit OracleRecommender(std::map<std::string, std::string> targets) : targets_(std::move(targets)) {}
    std::vector<ScoredItem> rank(const std::string& user_id, std::span<const std::string> history,
                                 std::size_t top_k) const override;
    double score(const std::string& user_id, std::span<const std::string> history,
                 const std::string& item_id) const override;

private:
    std::map<std::string, std::string> targets_;
};

struct EvalOptions {
    EvalMode mode = EvalMode::FullRank;
    std::size_t n_negatives = 100;
    std::vector<std::size_t> ks = {5, 10, 20, 50};
    std::uint64_t seed = 0;
    std::size_t parallelism = 8;
};

/// Last-out protocol: history = train + valid, target = test. Users whose
/// target is not in `catalog` are skipped and counted. Sampled mode ranks the
/// target against n_negatives catalog items outside the user's history
/// (ties broken by item_id).
MetricReport evaluate_run(const Recommender& model, const SplitDataset& split,
                          const std::vector<std::string>& catalog, const EvalOptions& options = {});

/// Negatives drawn for a user in sampled mode (deterministic in seed, user).
std::vector<std::string> sample_negatives(const std::vector<std::string>& catalog, const std::set<std::string>& exclude,
                                          std::size_t n, std::uint64_t seed, const std::string& user_id);

struct CritiqueReport {
    MetricReport vanilla;
    MetricReport constrained;
    std::size_t n_outputs = 0;
    /// Constrained outputs whose level-1 token is outside the allowed set.
    std::size_t n_violations = 0;
    std::size_t n_no_level1 = 0;
    std::size_t simulator_fallbacks = 0;

    nlohmann::json to_json() const;
};

/// Full-rank evaluation with and without the simulated user's level-1 choice.
CritiqueReport evaluate_critique(const SurrogateModel& model, const SemIdTable& table, const DescriptorTrie& trie,
                                 const SplitDataset& split, const CritiqueSimulator& simulator, std::size_t beam,
                                 const EvalOptions& options = {});

struct CoverageDelta {
    std::size_t level = 0;
    std::string node_id;
    std::size_t cycle = 0;
    double before = 0.0;
    double after = 0.0;
    double delta = 0.0;
};

/// One row per consecutive cycle pair; level is the depth of the descriptors
/// being refined (node depth + 1).
std::vector<CoverageDelta> coverage_report(const std::vector<RefinementLog>& logs);
/// Columns level,cycle,delta (plus node_id, before, after).
void write_coverage_csv(const std::vector<CoverageDelta>& rows, const std::filesystem::path& path);

/// Throws EmptyInput for no values.
double median(std::vector<double> values);

}  // namespace semtag
