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
#include <vector>

#include "doctest.h"
#include "semtag/corpus.hpp"
#include "semtag/embedding.hpp"
#include "semtag/error.hpp"
#include "semtag/hash.hpp"
#include "semtag/io.hpp"
#include "support.hpp"

using namespace semtag;

TEST_SUITE("corpus") {

TEST_CASE("strict load fails on a malformed line; lenient skips and counts") {
    const auto dir = testing::temp_dir("corpus");
    write_file_atomic(dir / "items.jsonl",
                      "{\"item_id\":\"a\",\"title\":\"Alpha\",\"body\":\"x\"}\n"
                      "not json\n"
                      "{\"item_id\":\"b\",\"title\":\"\",\"body\":\"\"}\n"
                      "{\"item_id\":\"c\",\"title\":\"Gamma\"}\n");
    CHECK_THROWS_AS(load_corpus(dir / "items.jsonl"), Error);
    CorpusLoadOptions lenient;
    lenient.strict = false;
    const auto r = load_corpus(dir / "items.jsonl", lenient);
    CHECK(r.corpus.size() == 2);
    CHECK(r.report.skipped_malformed == 2);
    CHECK(r.report.lines == 4);
    CHECK(r.corpus.find("c").title == "Gamma");
    CHECK_THROWS_AS(r.corpus.find("zzz"), Error);
}

TEST_CASE("duplicate ids are rejected in both modes") {
    const auto dir = testing::temp_dir("dup");
    write_file_atomic(dir / "items.jsonl",
                      "{\"item_id\":\"a\",\"title\":\"A\"}\n{\"item_id\":\"a\",\"title\":\"B\"}\n");
    try {
        load_corpus(dir / "items.jsonl");
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DuplicateId);
    }
    CorpusLoadOptions lenient;
    lenient.strict = false;
    CHECK_THROWS_AS(load_corpus(dir / "items.jsonl", lenient), Error);
}

TEST_CASE("corpus write/read round trip") {
    const auto dir = testing::temp_dir("rt");
    Corpus c;
    c.add({"i1", "Title one", "Body\nwith lines", {{"brand", "Acme"}}});
    c.add({"i2", "", "only body", {}});
    write_corpus(c, dir / "c.jsonl");
    CHECK(load_corpus(dir / "c.jsonl").corpus == c);
}

TEST_CASE("prompt text is cut on a UTF-8 boundary") {
    Item it{"x", "caf\xc3\xa9", "\xe2\x82\xac\xe2\x82\xac\xe2\x82\xac", {}};
    for (std::size_t budget = 0; budget < 20; ++budget) {
        const std::string t = item_prompt_text(it, budget);
        CHECK(t.size() <= budget);
        // No dangling continuation bytes.
        std::size_t i = 0;
        while (i < t.size()) {
            const unsigned char c = static_cast<unsigned char>(t[i]);
            const std::size_t len = c < 0x80 ? 1 : c < 0xe0 ? 2 : c < 0xf0 ? 3 : 4;
            CHECK(i + len <= t.size());
            i += len;
        }
    }
}

TEST_CASE("last-out split matches an independent per-user sort") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        std::vector<Interaction> rows;
        const std::size_t users = 1 + rng.below(12);
        for (std::size_t u = 0; u < users; ++u) {
            const std::size_t n = rng.below(8);
            for (std::size_t k = 0; k < n; ++k) {
                rows.push_back({"u" + std::to_string(u), "i" + std::to_string(rng.below(20)),
                                static_cast<std::int64_t>(rng.below(5))});
            }
        }
        // Oracle: stable sort by (user, timestamp), then slice.
        std::vector<Interaction> sorted = rows;
        std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
            return a.user_id != b.user_id ? a.user_id < b.user_id : a.timestamp < b.timestamp;
        });
        std::map<std::string, std::vector<std::string>> seq;
        for (const auto& r : sorted) seq[r.user_id].push_back(r.item_id);
        const SplitDataset s = last_out_split(rows);
        std::size_t excluded = 0;
        for (const auto& [u, items] : seq) {
            if (items.size() < 3) {
                ++excluded;
                CHECK_FALSE(s.test.contains(u));
                continue;
            }
            CHECK(s.test.at(u) == items.back());
            CHECK(s.valid.at(u) == items[items.size() - 2]);
            CHECK(s.train.at(u) == std::vector<std::string>(items.begin(), items.end() - 2));
        }
        CHECK(s.excluded_users == excluded);
        const auto dir = testing::temp_dir("split");
        write_splits(s, dir / "s.jsonl");
        CHECK(read_splits(dir / "s.jsonl") == s);
    }
}

TEST_CASE("interactions with unknown items: strict throws, lenient drops") {
    const auto dir = testing::temp_dir("inter");
    Corpus c;
    c.add({"a", "A", "", {}});
    write_file_atomic(dir / "x.jsonl",
                      "{\"user_id\":\"u\",\"item_id\":\"a\",\"timestamp\":2}\n"
                      "{\"user_id\":\"u\",\"item_id\":\"zz\",\"timestamp\":1}\n");
    CHECK_THROWS_AS(load_interactions(dir / "x.jsonl", c, true), Error);
    const auto r = load_interactions(dir / "x.jsonl", c, false);
    CHECK(r.interactions.size() == 1);
    CHECK(r.report.dropped_unknown == 1);
}

}

TEST_SUITE("embedding") {

TEST_CASE("hashing provider is deterministic with unit rows") {
    HashingProvider hp(64);
    const std::vector<std::string> texts = {"Red running shoes", "", "red RUNNING shoes", "zzz"};
    const Matrix a = hp.embed_batch(texts);
    const Matrix b = hp.embed_batch(texts);
    CHECK(a.data == b.data);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double n = 0;
        for (double x : a.row(i)) n += x * x;
        CHECK(n == doctest::Approx(1.0));
    }
    // Case is folded by the tokenizer.
    for (std::size_t j = 0; j < a.cols; ++j) CHECK(a.row(0)[j] == a.row(2)[j]);
    CHECK(tokenize("Hello, World-42!") == std::vector<std::string>{"hello", "world", "42"});
}

TEST_CASE("cached provider memoizes and persists") {
    auto inner = std::make_shared<HashingProvider>(32);
    CachedProvider cp(inner);
    const std::vector<std::string> texts = {"one", "two", "one"};
    const Matrix m = cp.embed_batch(texts);
    CHECK(cp.cached() == 2);
    const auto dir = testing::temp_dir("cache");
    cp.save(dir / "c.jsonl");
    CachedProvider again(inner);
    again.load(dir / "c.jsonl");
    CHECK(again.cached() == 2);
    CHECK(again.embed_batch(texts).data == m.data);
}

}
