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
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "semtag/assignment.hpp"
#include "semtag/decode.hpp"
#include "semtag/io.hpp"
#include "semtag/surrogate.hpp"
#include "semtag/trie.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace semtag;
using semtag::testing::brute_rank;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

// Unseen continuations under alpha = 0 score -inf on both sides.
bool close(double a, double b) { return a == b || std::abs(a - b) <= 1e-12; }

SemIdTable hand_table(const std::vector<std::pair<std::string, std::vector<int>>>& rows) {
    SemIdTable t;
    for (const auto& [id, toks] : rows) t.rows.push_back({id, toks, {}});
    return t;
}

}  // namespace

TEST_SUITE("assignment") {

TEST_CASE("collision resolution is a bijection (randomized, forced collisions)") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const auto c = testing::random_catalog(seed, 1000 + 50 * seed, 3, 3);
        // Independent oracle: group by path, order by item id.
        std::map<std::vector<std::string>, std::vector<std::string>> groups;
        for (const auto& r : c.records) groups[r.path].push_back(r.item_id);
        std::size_t max_group = 0;
        for (auto& [_, g] : groups) {
            std::sort(g.begin(), g.end());
            max_group = std::max(max_group, g.size());
        }
        CHECK(max_group > 1);
        std::map<std::pair<std::vector<std::string>, std::size_t>, std::string> key_to_item;
        std::set<std::string> seen;
        for (const auto& r : c.records) {
            const auto& g = groups.at(r.path);
            CHECK(r.resolver == static_cast<std::size_t>(std::find(g.begin(), g.end(), r.item_id) - g.begin()));
            CHECK(key_to_item.emplace(std::make_pair(r.path, r.resolver), r.item_id).second);
            CHECK(seen.insert(r.item_id).second);
        }
        CHECK(key_to_item.size() == c.records.size());
        check_paths(c.records, c.tree);

        // encode/decode round trip.
        CHECK(decode_semids(c.table, c.tree) == c.records);
        CHECK(c.table.tokens.n_resolvers() == max_group);
        const auto trie = DescriptorTrie::build(c.table);
        CHECK(trie.n_terminals() == c.records.size());
        for (const auto& row : c.table.rows) {
            REQUIRE(trie.lookup(row.tokens) != nullptr);
            CHECK(*trie.lookup(row.tokens) == row.item_id);
        }
    }
}

TEST_CASE("resolution ignores input order") {
    auto c = testing::random_catalog(3, 300, 2, 2);
    auto shuffled = c.records;
    for (auto& r : shuffled) r.resolver = 0;
    Rng rng(9);
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    auto again = resolve_collisions(shuffled);
    std::sort(again.begin(), again.end(), [](auto& a, auto& b) { return a.item_id < b.item_id; });
    auto want = c.records;
    std::sort(want.begin(), want.end(), [](auto& a, auto& b) { return a.item_id < b.item_id; });
    CHECK(again == want);
}

TEST_CASE("unresolved duplicates are rejected") {
    auto c = testing::random_catalog(4, 50, 2, 2);
    auto recs = c.records;
    for (auto& r : recs) r.resolver = 0;
    CHECK(code_of([&] { export_semids(recs, c.tree); }) == ErrorCode::Collision);
}

TEST_CASE("token ranges are disjoint and round trip") {
    const auto c = testing::random_catalog(5, 400, 3, 3);
    const TokenMap& tm = c.table.tokens;
    const auto bfs = c.tree.bfs();
    CHECK(tm.n_descriptors() == bfs.size() - 1);
    for (std::size_t i = 1; i < bfs.size(); ++i) {
        const int t = tm.descriptor_token(bfs[i]);
        CHECK(t == kNumSpecials + static_cast<int>(i) - 1);
        CHECK(tm.is_descriptor(t));
        CHECK_FALSE(tm.is_resolver(t));
        CHECK(tm.rule_of(t) == bfs[i]);
    }
    for (std::size_t k = 0; k < tm.n_resolvers(); ++k) {
        const int t = tm.resolver_token(k);
        CHECK(tm.is_resolver(t));
        CHECK_FALSE(tm.is_descriptor(t));
        CHECK(tm.resolver_of(t) == k);
    }
    for (int s : {kBos, kEos, kSep}) {
        CHECK_FALSE(tm.is_descriptor(s));
        CHECK_FALSE(tm.is_resolver(s));
    }
    CHECK(TokenMap::from_json(tm.to_json()) == tm);

    const auto dir = testing::temp_dir("semids");
    c.table.write(dir / "semids.jsonl", dir / "token_map.json");
    const SemIdTable back = SemIdTable::read(dir / "semids.jsonl", dir / "token_map.json");
    CHECK(back.rows == c.table.rows);
    CHECK(back.tokens == c.table.tokens);
    for (const auto& row : c.table.rows) {
        CHECK(row.tokens.back() == kEos);
        CHECK(row.tokens.size() == row.path_names.size() + 2);
    }
}

TEST_CASE("fixed slots") {
    std::vector<AssignmentRecord> recs{{"a", {"r1", "r2"}, 0, false, false, {}}, {"b", {"r1"}, 0, true, false, {}}};
    const auto slots = export_fixed_slots(recs, 3);
    CHECK(slots[0] == std::vector<std::string>{"r1", "r2", "NONE"});
    CHECK(slots[1] == std::vector<std::string>{"r1", "NONE", "NONE"});
    CHECK(code_of([&] { export_fixed_slots(recs, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("utilization") {
    CHECK(utilization({{"a", 1}, {"b", 2}, {"c", 3}}) == doctest::Approx(2.0 / 3.0));
    CHECK(utilization({{"a", 0}, {"b", 5}}) == 1.0);
    CHECK(utilization({}) == 0.0);
}

TEST_CASE("assignments jsonl round trip") {
    auto c = testing::random_catalog(6, 100, 2, 2);
    c.records[3].flagged = true;
    c.records[3].flag_reason = "TRANSPORT: x";
    const auto dir = testing::temp_dir("assign");
    write_assignments(c.records, dir / "a.jsonl");
    CHECK(read_assignments(dir / "a.jsonl") == c.records);
}

TEST_CASE("mock assignment recovers planted paths in both modes") {
    testing::MockSetup m(testing::small_world());
    const BuildResult built = build_vocabulary(m.world->corpus(), testing::small_build(), *m.gateway, m.provider);
    for (AssignMode mode : {AssignMode::PerLevel, AssignMode::OneShot}) {
        CallLedger scope;
        AssignOptions ao;
        ao.mode = mode;
        ao.parallelism = 2;
        const auto recs = assign_paths(m.world->corpus(), built.tree, *m.gateway, ao, &scope);
        REQUIRE(recs.size() == m.world->corpus().size());
        std::size_t correct = 0;
        for (const auto& r : recs) {
            const auto& truth = m.world->path_of(r.item_id);
            bool same = r.path.size() == truth.size();
            for (std::size_t d = 0; same && d < truth.size(); ++d) {
                same = built.tree.node(r.path[d]).name == m.world->node(truth[d]).name;
            }
            correct += same;
        }
        CHECK(correct == recs.size());
        const std::uint64_t n = recs.size();
        CHECK(scope.total_calls() == (mode == AssignMode::OneShot ? n : 2 * n));
        check_paths(recs, built.tree);
    }
}

}

TEST_SUITE("decode") {

TEST_CASE("trie rejects collisions, prefixes and missing EOS") {
    CHECK(code_of([] { DescriptorTrie::build(hand_table({{"a", {3, 5, 1}}, {"b", {3, 5, 1}}})); }) ==
          ErrorCode::Collision);
    CHECK(code_of([] { DescriptorTrie::build(hand_table({{"a", {3, 1}}, {"b", {3, 5, 1}}})); }) ==
          ErrorCode::Collision);
    CHECK(code_of([] { DescriptorTrie::build(hand_table({{"a", {3, 5}}})); }) == ErrorCode::Schema);
    const auto trie = DescriptorTrie::build(hand_table({{"a", {3, 5, 1}}, {"b", {4, 6, 1}}, {"c", {3, 7, 1}}}));
    CHECK(trie.level1_tokens() == std::vector<int>{3, 4});
    CHECK(*trie.lookup(std::vector<int>{3, 7}) == "c");
    CHECK(trie.lookup(std::vector<int>{3}) == nullptr);
}

TEST_CASE("surrogate counts by hand") {
    // Stream: BOS 3 5 1 SEP 4 6 1
    const auto table = hand_table({{"A", {3, 5, 1}}, {"B", {4, 6, 1}}});
    const std::vector<std::string> hist{"A", "B"};
    const auto stream = encode_stream(table, hist, false);
    CHECK(stream == std::vector<int>{0, 3, 5, 1, 2, 4, 6, 1});
    CHECK(encode_stream(table, hist, true).back() == kSep);

    SurrogateModel bigram(2, 0.0, 7);
    bigram.observe(stream);
    CHECK(bigram.prob(std::vector<int>{1}, kSep) == 1.0);
    CHECK(bigram.prob(std::vector<int>{0}, 3) == 1.0);
    CHECK(bigram.prob(std::vector<int>{6}, 1) == 1.0);
    // Never seen: uniform.
    CHECK(bigram.prob(std::vector<int>{5, 6}, 4) == doctest::Approx(1.0 / 7.0));
    CHECK(bigram.row(std::vector<int>{6})->total == 1);

    SurrogateModel tri(3, 0.5, 7);
    tri.observe(stream);
    CHECK(tri.context_of(std::vector<int>{0}) == std::vector<int>{0, 0});
    // (BOS, BOS) -> 3 once.
    CHECK(tri.prob(std::vector<int>{0, 0}, 3) == doctest::Approx((1 + 0.5) / (1 + 0.5 * 7)));
    CHECK(tri.prob(std::vector<int>{0, 0}, 4) == doctest::Approx(0.5 / (1 + 0.5 * 7)));
    CHECK(tri.prob(std::vector<int>{2, 2}, 4) == doctest::Approx(1.0 / 7.0));

    CHECK(code_of([&] { fit_surrogate(SplitDataset{}, table); }) == ErrorCode::EmptyInput);
}

TEST_CASE("fit counts train streams only") {
    const auto c = testing::random_catalog(20, 60, 3, 2, 0.1, 25);
    const SurrogateModel fitted = fit_surrogate(c.split, c.table, 3, 0.5);
    SurrogateModel want(3, 0.5, c.table.tokens.vocab_size());
    for (const auto& [_, train] : c.split.train) want.observe(encode_stream(c.table, train, false));
    CHECK(fitted == want);
}

TEST_CASE("distributions are normalized over 100 contexts") {
    const auto c = testing::random_catalog(21, 120, 3, 2, 0.1, 60);
    for (double alpha : {0.0, 0.1, 1.0}) {
        const SurrogateModel m = fit_surrogate(c.split, c.table, 3, alpha);
        Rng rng(4);
        for (int i = 0; i < 100; ++i) {
            std::vector<int> ctx{static_cast<int>(rng.below(m.vocab_size())), static_cast<int>(rng.below(m.vocab_size()))};
            if (i % 3 == 0) {
                // Seen contexts too, not only random ones.
                const auto& row = c.table.rows[rng.below(c.table.rows.size())];
                ctx = {row.tokens[0], row.tokens[1]};
            }
            const auto d = m.distribution(ctx);
            double sum = 0.0;
            for (double p : d) {
                CHECK(p >= 0.0);
                sum += p;
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("model save and load") {
    const auto c = testing::random_catalog(22, 80, 3, 2, 0.1, 30);
    const SurrogateModel m = fit_surrogate(c.split, c.table);
    const auto dir = testing::temp_dir("model");
    m.save(dir / "model.bin");
    CHECK(SurrogateModel::load(dir / "model.bin") == m);
    write_file_atomic(dir / "bad.bin", "NOTAMODEL");
    CHECK_THROWS_AS(SurrogateModel::load(dir / "bad.bin"), Error);
}

TEST_CASE("beam with B >= |I| equals exhaustive enumeration") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        Rng pick(seed);
        const std::size_t n = seed == 1 ? 20 : 5 + pick.below(196);
        const auto c = testing::random_catalog(100 + seed, n, 3, 3, 0.2, 40);
        const SurrogateModel m = fit_surrogate(c.split, c.table, 2 + seed % 3, seed % 2 ? 0.1 : 0.0);
        const auto trie = DescriptorTrie::build(c.table);
        for (const auto& [user, train] : c.split.train) {
            const auto prefix = encode_stream(c.table, train, true);
            const auto beam = beam_decode(m, prefix, trie, n);
            const auto exact = exhaustive_rank(m, prefix, trie);
            const auto brute = brute_rank(m, prefix, trie);
            REQUIRE(beam.size() == n);
            REQUIRE(exact.size() == n);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(beam[i].item_id == exact[i].item_id);
                CHECK(close(beam[i].score, exact[i].score));
                CHECK(exact[i].item_id == brute[i].item_id);
                CHECK(close(exact[i].score, brute[i].score));
            }
            if (user > "u5") break;
        }
    }
}

TEST_CASE("narrow beams return sorted exact scores") {
    const auto c = testing::random_catalog(31, 150, 3, 3, 0.2, 20);
    const SurrogateModel m = fit_surrogate(c.split, c.table);
    const auto trie = DescriptorTrie::build(c.table);
    const auto prefix = encode_stream(c.table, c.split.train.begin()->second, true);
    std::map<std::string, double> exact;
    for (const auto& s : exhaustive_rank(m, prefix, trie)) exact[s.item_id] = s.score;
    for (std::size_t b : {1, 2, 5, 20}) {
        const auto out = beam_decode(m, prefix, trie, b);
        CHECK(!out.empty());
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (i > 0) CHECK(out[i - 1].score >= out[i].score);
            CHECK(std::abs(out[i].score - exact.at(out[i].item_id)) <= 1e-12);
        }
    }
}

TEST_CASE("level-1 constraint") {
    const auto c = testing::random_catalog(41, 150, 3, 3, 0.2, 20);
    const SurrogateModel m = fit_surrogate(c.split, c.table);
    const auto trie = DescriptorTrie::build(c.table);
    const auto prefix = encode_stream(c.table, c.split.train.begin()->second, true);
    const auto level1 = trie.level1_tokens();
    REQUIRE(level1.size() >= 2);
    const std::set<int> allowed{level1[1]};
    const auto out = beam_decode(m, prefix, trie, 150, allowed);
    std::vector<ScoredItem> want;
    for (const auto& s : exhaustive_rank(m, prefix, trie)) {
        if (c.table.find(s.item_id)->tokens[0] == level1[1]) want.push_back(s);
    }
    REQUIRE(out.size() == want.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].item_id == want[i].item_id);
        CHECK(std::abs(out[i].score - want[i].score) <= 1e-12);
    }
    for (const auto& s : beam_decode(m, prefix, trie, 3, allowed)) {
        CHECK(allowed.contains(c.table.find(s.item_id)->tokens[0]));
    }
    CHECK(code_of([&] { beam_decode(m, prefix, trie, 0); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { beam_decode(m, prefix, trie, 5, std::set<int>{}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { beam_decode(m, prefix, trie, 5, std::set<int>{kEos}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("critique simulator: llm mode agrees with the oracle") {
    testing::MockSetup m(testing::small_world());
    const BuildResult built = build_vocabulary(m.world->corpus(), testing::small_build(), *m.gateway, m.provider);
    const auto recs = resolve_collisions(assign_paths(m.world->corpus(), built.tree, *m.gateway));
    const SemIdTable table = export_semids(recs, built.tree);
    SimulatorOptions oracle_opts;
    const CritiqueSimulator oracle(built.tree, table, m.world->corpus(), oracle_opts);
    SimulatorOptions llm_opts;
    llm_opts.mode = SimulatorMode::Llm;
    llm_opts.fallback = false;
    const CritiqueSimulator llm(built.tree, table, m.world->corpus(), llm_opts, m.gateway.get());
    SimulatorOptions sib_opts;
    sib_opts.k_siblings = 1;
    const CritiqueSimulator sib(built.tree, table, m.world->corpus(), sib_opts, nullptr, &m.provider);
    for (std::size_t i = 0; i < 60; ++i) {
        const std::string& id = m.world->corpus().at(i).item_id;
        const auto want = oracle.allowed(id);
        CHECK(want == std::set<int>{table.find(id)->tokens[0]});
        CHECK(llm.allowed(id) == want);
        const auto wider = sib.allowed(id);
        CHECK(wider.size() == 2);
        CHECK(std::includes(wider.begin(), wider.end(), want.begin(), want.end()));
    }
    CHECK(llm.fallbacks() == 0);
    CHECK(code_of([&] { oracle.allowed("no-such-item"); }) == ErrorCode::UnknownItem);
}

}
