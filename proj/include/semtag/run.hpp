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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "semtag/assignment.hpp"
#include "semtag/decode.hpp"
#include "semtag/embedding.hpp"
#include "semtag/freeform.hpp"
#include "semtag/gateway.hpp"
#include "semtag/metrics.hpp"
#include "semtag/mock_world.hpp"
#include "semtag/refinement.hpp"

namespace semtag {

struct RunConfig {
    std::filesystem::path run_dir = "run";
    std::filesystem::path items;
    std::filesystem::path interactions;

    /// "mock" or "http".
    std::string backend = "mock";
    /// Planted world behind the mock backend.
    std::filesystem::path world;
    MockBehavior mock;
    HttpChatConfig architect_http;
    HttpChatConfig annotator_http;

    /// "hashing" or "http".
    std::string embedding = "hashing";
    std::size_t embedding_dim = 256;
    HttpEmbeddingConfig embedding_http;

    GatewayConfig gateway;
    BuildConfig build;

    AssignMode assign_mode = AssignMode::PerLevel;
    std::size_t order = 3;
    double alpha = 0.1;
    std::size_t beam = 20;
    std::size_t top_k = 50;
    EvalOptions eval;
    SimulatorOptions critique;
    FreeformOptions freeform;
    std::size_t min_f = 10;
    std::size_t max_f = 2000;
    std::size_t n_bins = 4;
    /// 0 skips the k-means pruning.
    std::size_t kmeans_k = 0;

    /// Throws InvalidConfig.
    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep defaults; unknown keys are InvalidConfig.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
};

struct StageResult {
    std::string stage;
    bool skipped = false;
    nlohmann::json summary = nlohmann::json::object();
};

/// One run directory. Every stage takes the directory lock, skips itself when
/// the manifest hash of its inputs is unchanged and its outputs exist, and
/// records the new hash after success.
class Pipeline {
public:
    explicit Pipeline(RunConfig config);
    ~Pipeline();
    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    const RunConfig& config() const noexcept { return config_; }
    const std::filesystem::path& dir() const noexcept { return config_.run_dir; }

    StageResult ingest();
    /// `kill_after` raises SIGKILL once that many nodes were committed.
    StageResult build_vocab(bool resume, std::optional<std::size_t> kill_after = std::nullopt);
    StageResult assign();
    StageResult encode();
    StageResult fit();
    StageResult recommend();
    StageResult evaluate();
    StageResult critique_eval();
    StageResult baseline_freeform();
    StageResult report();

    /// Writes a planted world (items.jsonl, interactions.jsonl, world.json)
    /// into `dir` and returns a config pointing at it.
    static RunConfig plant(const std::filesystem::path& dir, const PlantedWorldConfig& world,
                           const std::filesystem::path& run_dir);

private:
    Gateway& gateway();
    const EmbeddingProvider& provider();
    bool up_to_date(const std::string& stage, const std::string& hash, const std::vector<std::string>& outputs) const;
    void mark_done(const std::string& stage, const std::string& hash);
    void log_calls(const std::string& stage, const CallLedger& calls);
    std::string hash_inputs(const std::string& stage, const nlohmann::json& fragment,
                            const std::vector<std::string>& files) const;
    void write_config() const;

    RunConfig config_;
    int lock_fd_ = -1;
    std::shared_ptr<const PlantedWorld> world_;
    std::unique_ptr<Gateway> gateway_;
    std::unique_ptr<EmbeddingProvider> provider_;
};

}  // namespace semtag
