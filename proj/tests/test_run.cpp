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


#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "semtag/io.hpp"
#include "semtag/run.hpp"
#include "support.hpp"

using namespace semtag;
using nlohmann::json;

namespace {

RunConfig planted_config(const std::string& tag) {
    const auto dir = testing::temp_dir(tag);
    RunConfig rc = Pipeline::plant(dir / "data", testing::small_world(), dir / "run");
    rc.build.d_max = 2;
    rc.build.tau_split = 10;
    rc.build.parallelism = 2;
    rc.eval.parallelism = 2;
    rc.freeform.parallelism = 2;
    return rc;
}

std::vector<StageResult> run_all(Pipeline& p) {
    return {p.ingest(), p.build_vocab(false), p.assign(),         p.encode(),            p.fit(),
            p.recommend(), p.evaluate(),      p.critique_eval(), p.baseline_freeform(), p.report()};
}

}  // namespace

TEST_SUITE("run") {

TEST_CASE("config json round trip and strict keys") {
    RunConfig rc;
    rc.backend = "mock";
    rc.beam = 33;
    rc.build.branching_factor = 1;
    rc.mock.withheld = {"Tents"};
    rc.critique.k_siblings = 2;
    rc.eval.mode = EvalMode::Sampled;
    const json j = rc.to_json();
    CHECK(RunConfig::from_json(j).to_json() == j);
    for (const json& bad : {json{{"bogus", 1}}, json{{"decode", {{"beeam", 3}}}}, json{{"backend", "carrier-pigeon"}}}) {
        try {
            RunConfig::from_json(bad).validate();
            FAIL("accepted " << bad.dump());
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidConfig);
        }
    }
}

TEST_CASE("full pipeline, then a no-op rerun") {
    const RunConfig rc = planted_config("pipeline");
    {
        Pipeline p(rc);
        for (const auto& s : run_all(p)) CHECK_MESSAGE(!s.skipped, s.stage);
    }
    for (const char* f : {"vocab.json", "semids.jsonl", "token_map.json", "model.bin", "ledger.jsonl", "manifest.json",
                          "reports/metrics.json", "reports/critique.json", "reports/summary.json",
                          "reports/coverage_delta.csv", "reports/freeform.json"}) {
        CHECK_MESSAGE(std::filesystem::exists(rc.run_dir / f), f);
    }
    const std::string vocab = read_file(rc.run_dir / "vocab.json");
    {
        Pipeline p(rc);
        // report is a cheap summary and always rewrites itself.
        for (const auto& s : run_all(p)) CHECK_MESSAGE(s.skipped == (s.stage != "report"), s.stage);
    }
    CHECK(read_file(rc.run_dir / "vocab.json") == vocab);

    // A decode change reruns decoding onwards only.
    RunConfig wider = rc;
    wider.beam = 30;
    Pipeline p(wider);
    CHECK(p.ingest().skipped);
    CHECK(p.build_vocab(false).skipped);
    CHECK(p.assign().skipped);
    CHECK(p.fit().skipped);
    CHECK_FALSE(p.recommend().skipped);
}

TEST_CASE("second pipeline on a locked run dir") {
    const RunConfig rc = planted_config("lock");
    Pipeline first(rc);
    try {
        Pipeline second(rc);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Locked);
    }
}

TEST_CASE("resume after a budget stop") {
    RunConfig rc = planted_config("resume");
    rc.gateway.max_calls = 200;
    {
        Pipeline p(rc);
        p.ingest();
        try {
            p.build_vocab(false);
            FAIL("no throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::BudgetExhausted);
        }
    }
    rc.gateway.max_calls = 0;
    Pipeline p(rc);
    const StageResult r = p.build_vocab(true);
    CHECK_FALSE(r.skipped);
    CHECK(duplicate_commits(rc.run_dir / "ledger.jsonl").empty());
    p.assign();
}

TEST_CASE("stage order is enforced") {
    const RunConfig rc = planted_config("order");
    Pipeline p(rc);
    CHECK_THROWS_AS(p.fit(), Error);
}

}
