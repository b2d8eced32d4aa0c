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
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "semtag/cluster.hpp"
#include "semtag/hash.hpp"
#include "oracles.hpp"

using namespace semtag;

using namespace semtag::testing;


TEST_SUITE("cluster") {

TEST_CASE("k_medoids matches brute force for n <= 8, k <= 3 over 100 seeds") {
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed * 7919 + 1);
        const std::size_t n = 4 + rng.below(5);
        const std::size_t k = 1 + rng.below(3);
        const Matrix m = random_points(rng, n, 2);
        const auto r = k_medoids(m, k, seed);
        CAPTURE(seed);
        CHECK(r.total_cost == doctest::Approx(brute_kmedoids(m, k)).epsilon(1e-12));
        CHECK(r.medoids.size() == k);
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("k_medoids cost trace never increases and medoids are members") {
    Rng rng(11);
    const Matrix m = random_points(rng, 60, 3);
    const auto r = k_medoids(m, 4, 2);
    for (std::size_t i = 1; i < r.cost_trace.size(); ++i) CHECK(r.cost_trace[i] <= r.cost_trace[i - 1] + 1e-12);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const std::size_t c = r.assignment[i];
        for (std::size_t j = 0; j < r.medoids.size(); ++j) {
            CHECK(dist(m, i, r.medoids[c]) <= dist(m, i, r.medoids[j]) + 1e-12);
        }
    }
    CHECK(r.assignment[r.medoids[0]] == 0);
}

TEST_CASE("k_medoids is a pure function of its inputs") {
    Rng rng(4);
    const Matrix m = random_points(rng, 40, 2);
    const auto a = k_medoids(m, 3, 9);
    const auto b = k_medoids(m, 3, 9);
    CHECK(a.medoids == b.medoids);
    CHECK(a.assignment == b.assignment);
    CHECK(a.total_cost == b.total_cost);
}

TEST_CASE("k_means reaches the brute-force optimum on separated blobs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 100);
        const std::size_t k = 2 + rng.below(2);
        const Matrix m = blobs(rng, k, 3, 2);
        const auto r = k_means(m, k, seed);
        CAPTURE(seed);
        CHECK(r.total_cost == doctest::Approx(brute_kmeans(m, k)).epsilon(1e-9));
        CHECK(r.converged);
    }
}

TEST_CASE("k_means with k = n puts every distinct point alone") {
    Rng rng(8);
    const Matrix m = random_points(rng, 7, 3);
    const auto r = k_means(m, 7, 1);
    CHECK(std::set<std::size_t>(r.assignment.begin(), r.assignment.end()).size() == 7);
    CHECK(r.total_cost == doctest::Approx(0.0));
}

TEST_CASE("distill returns min(k, n) ascending representatives") {
    HashingProvider hp;
    std::vector<std::string> texts;
    for (int i = 0; i < 30; ++i) texts.push_back((i % 3 == 0 ? "red apple " : i % 3 == 1 ? "blue car " : "green tree ") + std::to_string(i));
    const auto reps = distill(texts, 3, hp, 0);
    CHECK(reps.size() == 3);
    CHECK(std::is_sorted(reps.begin(), reps.end()));
    std::set<int> groups;
    for (auto r : reps) groups.insert(static_cast<int>(r % 3));
    CHECK(groups.size() == 3);
    CHECK(distill(std::vector<std::string>{"a", "b"}, 5, hp, 0).size() == 2);
}

}
