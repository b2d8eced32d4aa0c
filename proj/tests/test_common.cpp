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


#include <atomic>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "semtag/error.hpp"
#include "semtag/hash.hpp"
#include "semtag/io.hpp"
#include "semtag/parallel.hpp"
#include "support.hpp"

using namespace semtag;

TEST_SUITE("common") {

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    CHECK(hex8(0x1234abcdULL) == "1234abcd");
    CHECK(hex8(0xffffffff00000001ULL) == "00000001");
    CHECK(hex16(1) == "0000000000000001");
}

TEST_CASE("Rng is reproducible and below() stays in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    Rng r(1);
    std::vector<int> hist(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const auto v = r.below(7);
        REQUIRE(v < 7);
        ++hist[v];
    }
    // 3 sigma of a binomial(70000, 1/7) is about 280.
    for (int h : hist) CHECK(std::abs(h - 10000) < 300);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("parallel_for visits every index once") {
    for (std::size_t workers : {1, 3, 8}) {
        std::vector<std::atomic<int>> seen(1000);
        parallel_for(seen.size(), workers, [&](std::size_t i) { seen[i].fetch_add(1); });
        for (auto& s : seen) CHECK(s.load() == 1);
    }
}

TEST_CASE("parallel_for rethrows the first failure") {
    CHECK_THROWS_AS(parallel_for(50, 4,
                                 [](std::size_t i) {
                                     if (i == 17) throw Error(ErrorCode::Parse, "boom");
                                 }),
                    Error);
}

TEST_CASE("atomic writes and line reads") {
    const auto dir = testing::temp_dir("io");
    write_file_atomic(dir / "a.txt", "x\n\ny\n");
    std::vector<std::string> lines;
    for_each_line(dir / "a.txt", [&](std::string_view l, std::size_t) { lines.emplace_back(l); });
    CHECK(lines == std::vector<std::string>{"x", "y"});
    append_line(dir / "a.txt", "z");
    CHECK(read_file(dir / "a.txt") == "x\n\ny\nz\n");
    CHECK_THROWS_AS(read_file(dir / "missing"), Error);
}

TEST_CASE("error codes have stable names") {
    CHECK(code_name(ErrorCode::BudgetExhausted) == "BUDGET_EXHAUSTED");
    CHECK(code_name(ErrorCode::Collision) == "COLLISION");
    const Error e(ErrorCode::MissingSlot, "slot x");
    CHECK(e.code() == ErrorCode::MissingSlot);
}

}
