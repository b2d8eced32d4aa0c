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


#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "semtag/error.hpp"
#include "semtag/run.hpp"

namespace {

using semtag::Error;
using semtag::ErrorCode;

std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

int fail(ErrorCode code, const std::string& message) {
    std::cerr << "error code=" << semtag::code_name(code) << " message=" << one_line(message) << "\n";
    return 1;
}

struct Overrides {
    std::string config;
    std::string run_dir;
    std::string backend;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> parallelism;
    std::optional<std::size_t> beam;
    std::optional<std::size_t> branching_factor;
    std::optional<std::size_t> depth;
    std::string simulator;
    std::string eval_mode;
    bool resume = false;
    std::optional<std::size_t> kill_after;
};

semtag::RunConfig resolve(const Overrides& o) {
    semtag::RunConfig c = o.config.empty() ? semtag::RunConfig{} : semtag::RunConfig::load(o.config);
    if (!o.run_dir.empty()) c.run_dir = o.run_dir;
    if (!o.backend.empty()) c.backend = o.backend;
    if (o.seed) {
        c.build.seed = *o.seed;
        c.eval.seed = *o.seed;
    }
    if (o.parallelism) c.build.parallelism = *o.parallelism;
    if (o.beam) c.beam = *o.beam;
    if (o.branching_factor) c.build.branching_factor = *o.branching_factor;
    if (o.depth) c.build.d_max = *o.depth;
    if (!o.simulator.empty()) {
        if (o.simulator != "oracle" && o.simulator != "llm") {
            throw Error(ErrorCode::InvalidArgument, "--simulator must be oracle or llm");
        }
        c.critique.mode = o.simulator == "oracle" ? semtag::SimulatorMode::Oracle : semtag::SimulatorMode::Llm;
    }
    if (!o.eval_mode.empty()) {
        if (o.eval_mode != "full-rank" && o.eval_mode != "sampled") {
            throw Error(ErrorCode::InvalidArgument, "--eval-mode must be full-rank or sampled");
        }
        c.eval.mode = o.eval_mode == "full-rank" ? semtag::EvalMode::FullRank : semtag::EvalMode::Sampled;
    }
    return c;
}

void print(const semtag::StageResult& r) {
    nlohmann::json j = {{"stage", r.stage}, {"status", r.skipped ? "up-to-date" : "done"}};
    if (!r.skipped) j["summary"] = r.summary;
    std::cout << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semtag: agentic descriptor vocabularies and semantic ids"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides o;
    app.add_option("--config", o.config, "RunConfig JSON file");
    app.add_option("--run-dir", o.run_dir, "Run directory (overrides config)");
    app.add_option("--backend", o.backend, "LLM backend: mock | http");
    app.add_option("--seed", o.seed, "Seed for building and evaluation");
    app.add_option("--parallelism", o.parallelism, "Concurrent LLM calls per fan-out");
    app.add_option("--beam", o.beam, "Beam width for decoding");
    app.add_option("--branching-factor", o.branching_factor, "Matches an item follows into the next level (0 = all)");
    app.add_option("--depth", o.depth, "Maximum hierarchy depth");
    app.add_flag("--resume", o.resume, "Continue an interrupted build from its checkpoint");
    app.add_option("--kill-after-nodes", o.kill_after)->group("");

    semtag::PlantedWorldConfig world;
    std::string plant_dir = "planted";
    std::vector<std::size_t> branching;
    auto* plant = app.add_subcommand("plant", "Write a synthetic planted world (items, interactions, world.json)");
    plant->add_option("--out", plant_dir, "Output directory")->capture_default_str();
    plant->add_option("--branching", branching, "Children per level, e.g. 4 4 4");
    plant->add_option("--items", world.n_items, "Number of items")->capture_default_str();
    plant->add_option("--users", world.n_users, "Number of users")->capture_default_str();
    plant->add_option("--world-seed", world.seed, "Seed of the planted world")->capture_default_str();

    auto* ingest = app.add_subcommand("ingest", "Load and validate items and interactions, write splits");
    auto* build = app.add_subcommand("build-vocab", "Build the descriptor vocabulary");
    auto* assign = app.add_subcommand("assign", "Assign every item a descriptor path");
    auto* encode = app.add_subcommand("encode", "Resolve collisions and write semantic ids");
    auto* fit = app.add_subcommand("fit", "Fit the n-gram surrogate on train histories");
    auto* recommend = app.add_subcommand("recommend", "Write top-K recommendations for test users");
    auto* evaluate = app.add_subcommand("evaluate", "Recall@K / NDCG@K on the test split");
    evaluate->add_option("--eval-mode", o.eval_mode, "full-rank | sampled");
    auto* critique = app.add_subcommand("critique-eval", "Vanilla vs level-1 constrained decoding");
    critique->add_option("--simulator", o.simulator, "oracle | llm");
    auto* freeform = app.add_subcommand("baseline-freeform", "Free-form tag baseline and pruning");
    auto* report = app.add_subcommand("report", "Summaries and coverage-delta CSV");
    auto* resume = app.add_subcommand("resume", "Resume an interrupted build-vocab");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(ErrorCode::InvalidArgument, e.what());
    }

    try {
        if (plant->parsed()) {
            if (!branching.empty()) world.branching = branching;
            const auto run_dir = o.run_dir.empty() ? std::filesystem::path("run") : std::filesystem::path(o.run_dir);
            semtag::Pipeline::plant(plant_dir, world, run_dir);
            std::cout << nlohmann::json{{"stage", "plant"},
                                        {"status", "done"},
                                        {"config", (std::filesystem::path(plant_dir) / "config.json").string()}}
                             .dump()
                      << "\n";
            return 0;
        }
        semtag::Pipeline p(resolve(o));
        if (ingest->parsed()) print(p.ingest());
        else if (build->parsed()) print(p.build_vocab(o.resume, o.kill_after));
        else if (resume->parsed()) print(p.build_vocab(true, o.kill_after));
        else if (assign->parsed()) print(p.assign());
        else if (encode->parsed()) print(p.encode());
        else if (fit->parsed()) print(p.fit());
        else if (recommend->parsed()) print(p.recommend());
        else if (evaluate->parsed()) print(p.evaluate());
        else if (critique->parsed()) print(p.critique_eval());
        else if (freeform->parsed()) print(p.baseline_freeform());
        else if (report->parsed()) print(p.report());
    } catch (const Error& e) {
        return fail(e.code(), e.what());
    } catch (const std::exception& e) {
        return fail(ErrorCode::Io, e.what());
    }
    return 0;
}
