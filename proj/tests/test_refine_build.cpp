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


#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "semtag/builder.hpp"
#include "semtag/metrics.hpp"
#include "semtag/refinement.hpp"
#include "support.hpp"

using namespace semtag;

namespace {

PlantedWorldConfig cube_world(std::size_t n_items) {
    PlantedWorldConfig wc;
    wc.branching = {4, 4, 4};
    wc.n_items = n_items;
    wc.n_users = 50;
    return wc;
}

std::vector<std::string> all_ids(const Corpus& c) {
    std::vector<std::string> ids;
    for (const auto& it : c.items()) ids.push_back(it.item_id);
    return ids;
}

struct Killed {};

}  // namespace

TEST_SUITE("refinement") {

TEST_CASE("withheld category is recovered by the loop") {
    const auto wc = cube_world(600);
    const PlantedWorld probe = PlantedWorld::generate(wc);
    MockBehavior mb;
    mb.withheld = {probe.node(probe.nodes_at_depth(1)[2]).name};
    testing::MockSetup m(wc, mb);
    BuildConfig bc;
    bc.parallelism = 2;
    const VocabularyTree tree(all_ids(m.world->corpus()));
    const RefineResult r = refine(m.world->corpus(), tree.root().items, tree.root(), bc, *m.gateway, m.provider);
    const auto& cycles = r.log.cycles;
    REQUIRE(cycles.size() >= 2);
    CHECK(cycles.size() <= bc.c_max);
    CHECK(cycles[0].coverage < 0.9);
    CHECK(cycles[1].coverage > cycles[0].coverage);
    CHECK(cycles.back().coverage >= 0.95);
    CHECK(r.rules.size() == 4);
    std::set<std::string> names;
    for (const auto& rule : r.rules) names.insert(rule.name);
    CHECK(names.contains(*mb.withheld.begin()));

    const auto deltas = coverage_report({r.log});
    CHECK(deltas.size() == cycles.size() - 1);
    for (const auto& d : deltas) {
        CHECK(d.delta >= 0.0);
        CHECK(d.level == 1);
    }
}

TEST_CASE("full initial view stops after one cycle") {
    testing::MockSetup m(testing::small_world());
    const VocabularyTree tree(all_ids(m.world->corpus()));
    const RefineResult r =
        refine(m.world->corpus(), tree.root().items, tree.root(), testing::small_build(), *m.gateway, m.provider);
    REQUIRE(r.log.cycles.size() == 1);
    CHECK(r.log.cycles[0].coverage == 1.0);
    CHECK(r.rules.size() == 3);
    CHECK(r.outliers.empty());
}

TEST_CASE("rejected creates leave coverage flat and record outliers") {
    const auto wc = testing::small_world();
    const PlantedWorld probe = PlantedWorld::generate(wc);
    MockBehavior mb;
    mb.withheld = {probe.node(probe.nodes_at_depth(1)[0]).name};
    mb.reject_create = true;
    testing::MockSetup m(wc, mb);
    const VocabularyTree tree(all_ids(m.world->corpus()));
    BuildConfig bc = testing::small_build();
    const RefineResult r = refine(m.world->corpus(), tree.root().items, tree.root(), bc, *m.gateway, m.provider);
    CHECK(r.rules.size() == 2);
    for (std::size_t i = 1; i < r.log.cycles.size(); ++i) {
        CHECK(r.log.cycles[i].coverage >= r.log.cycles[i - 1].coverage);
    }
    CHECK(r.log.cycles.back().coverage < 0.95);
}

TEST_CASE("refinement is deterministic") {
    auto run = [] {
        MockBehavior mb;
        mb.false_negative_rate = 0.1;
        mb.seed = 3;
        testing::MockSetup m(testing::small_world(), mb);
        const VocabularyTree tree(all_ids(m.world->corpus()));
        return refine(m.world->corpus(), tree.root().items, tree.root(), testing::small_build(), *m.gateway,
                      m.provider)
            .log;
    };
    CHECK(run() == run());
}

TEST_CASE("anomaly threshold default") {
    BuildConfig bc;
    CHECK(effective_tau_anom(bc, 100) == 20);
    CHECK(effective_tau_anom(bc, 1000) == 50);
    CHECK(effective_tau_anom(bc, 1001) == 51);
    bc.tau_anom = 7;
    CHECK(effective_tau_anom(bc, 1000) == 7);
}

TEST_CASE("build config json") {
    BuildConfig bc;
    bc.d_max = 2;
    bc.branching_factor = 1;
    bc.seed = 99;
    CHECK(BuildConfig::from_json(bc.to_json()).to_json() == bc.to_json());
    CHECK(BuildConfig::from_json(nlohmann::json::object()).to_json() == BuildConfig{}.to_json());
    try {
        BuildConfig::from_json({{"d_maxx", 2}});
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidConfig);
    }
    BuildConfig bad;
    bad.d_max = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("refinement log json round trip") {
    testing::MockSetup m(testing::small_world());
    const VocabularyTree tree(all_ids(m.world->corpus()));
    const RefineResult r =
        refine(m.world->corpus(), tree.root().items, tree.root(), testing::small_build(), *m.gateway, m.provider);
    CHECK(RefinementLog::from_json(r.log.to_json()) == r.log);
    const std::string lines = r.log.to_jsonl();
    CHECK(std::count(lines.begin(), lines.end(), '\n') == static_cast<long>(r.log.cycles.size()));
}

}

TEST_SUITE("builder") {

TEST_CASE("branch_items property (random assignments)") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::map<std::string, std::vector<std::string>> assigned;
        const std::size_t n_rules = 1 + rng.below(6);
        for (std::size_t i = 0; i < 40; ++i) {
            std::vector<std::string> rules;
            for (std::size_t r = 0; r < n_rules; ++r) {
                if (rng.below(2)) rules.push_back("r" + std::to_string(r));
            }
            assigned["item" + std::to_string(i)] = rules;
        }
        const std::size_t b = rng.below(4);
        const auto out = branch_items("node", assigned, b, 17);
        CHECK(out == branch_items("node", assigned, b, 17));
        std::map<std::string, std::set<std::string>> routed;
        for (const auto& [rule, items] : out) {
            CHECK(std::is_sorted(items.begin(), items.end()));
            for (const auto& it : items) routed[it].insert(rule);
        }
        for (const auto& [item, rules] : assigned) {
            const std::size_t want = b == 0 ? rules.size() : std::min(b, rules.size());
            CHECK(routed[item].size() == want);
            for (const auto& r : routed[item]) CHECK(std::find(rules.begin(), rules.end(), r) != rules.end());
        }
    }
}

TEST_CASE("small build: structure and b=1 partition") {
    testing::MockSetup m(testing::small_world());
    BuildConfig bc = testing::small_build();
    bc.branching_factor = 1;
    const BuildResult r = build_vocabulary(m.world->corpus(), bc, *m.gateway, m.provider);
    r.tree.validate();
    CHECK(r.tree.level(1).size() == 3);
    CHECK(r.tree.level(2).size() == 6);
    for (std::size_t depth = 1; depth <= 2; ++depth) {
        std::size_t total = 0;
        for (const auto& id : r.tree.level(depth)) total += r.tree.node(id).items.size();
        CHECK(total == m.world->corpus().size());
    }
    CHECK(r.report.nodes_failed == 0);
    CHECK(r.logs.size() == r.report.nodes_refined);
}

TEST_CASE("call bound with b=1") {
    const auto wc = cube_world(800);
    const PlantedWorld probe = PlantedWorld::generate(wc);
    MockBehavior mb;
    mb.withheld = {probe.node(probe.nodes_at_depth(1)[1]).name};
    testing::MockSetup m(wc, mb);
    BuildConfig bc;
    bc.branching_factor = 1;
    bc.parallelism = 2;
    const BuildResult r = build_vocabulary(m.world->corpus(), bc, *m.gateway, m.provider);
    const CallLedger& l = m.gateway->ledger();
    const std::uint64_t n = m.world->corpus().size();
    CHECK(l.calls(AgentRole::Annotator) <= bc.c_max * n * bc.d_max);
    CHECK(l.calls(AgentRole::Architect) <= r.report.nodes_refined * (1 + bc.c_max));
    CHECK(r.tree.level(1).size() == 4);
}

TEST_CASE("killed build resumes to the same tree without duplicate commits") {
    const auto wc = testing::small_world();
    BuildConfig bc = testing::small_build();

    testing::MockSetup ref(wc);
    const BuildResult whole = build_vocabulary(ref.world->corpus(), bc, *ref.gateway, ref.provider);

    const auto dir = testing::temp_dir("resume");
    {
        testing::MockSetup m(wc);
        BuildOptions opts;
        opts.checkpoint_dir = dir;
        opts.on_commit = [](std::size_t n) {
            if (n == 2) throw Killed{};
        };
        CHECK_THROWS_AS(build_vocabulary(m.world->corpus(), bc, *m.gateway, m.provider, opts), Killed);
    }
    testing::MockSetup m(wc);
    BuildOptions opts;
    opts.checkpoint_dir = dir;
    opts.resume = true;
    const BuildResult resumed = build_vocabulary(m.world->corpus(), bc, *m.gateway, m.provider, opts);
    CHECK(resumed.report.nodes_resumed == 2);
    CHECK(resumed.report.nodes_refined == whole.report.nodes_refined - 2);
    CHECK(resumed.tree.to_json() == whole.tree.to_json());
    CHECK(resumed.logs == whole.logs);
    CHECK(duplicate_commits(dir / "ledger.jsonl").empty());
    CHECK(m.gateway->ledger().total_calls() < ref.gateway->ledger().total_calls());
}

TEST_CASE("budget exhaustion keeps the checkpoint") {
    const auto wc = testing::small_world();
    const BuildConfig bc = testing::small_build();
    testing::MockSetup ref(wc);
    const BuildResult whole = build_vocabulary(ref.world->corpus(), bc, *ref.gateway, ref.provider);

    const auto dir = testing::temp_dir("budget");
    GatewayConfig gc;
    gc.max_calls = ref.gateway->ledger().total_calls() / 2;
    {
        testing::MockSetup m(wc, {}, gc);
        BuildOptions opts;
        opts.checkpoint_dir = dir;
        try {
            build_vocabulary(m.world->corpus(), bc, *m.gateway, m.provider, opts);
            FAIL("no throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::BudgetExhausted);
        }
        CHECK(m.gateway->ledger().total_calls() == gc.max_calls);
    }
    CHECK(std::filesystem::exists(dir / "checkpoint.json"));
    testing::MockSetup m(wc);
    BuildOptions opts;
    opts.checkpoint_dir = dir;
    opts.resume = true;
    const BuildResult resumed = build_vocabulary(m.world->corpus(), bc, *m.gateway, m.provider, opts);
    CHECK(resumed.tree.to_json() == whole.tree.to_json());
    CHECK(duplicate_commits(dir / "ledger.jsonl").empty());
}

TEST_CASE("empty corpus") {
    testing::MockSetup m(testing::small_world());
    try {
        build_vocabulary(Corpus{}, testing::small_build(), *m.gateway, m.provider);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyInput);
    }
}

}
