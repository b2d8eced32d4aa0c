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


#include <cmath>
#include <vector>

#include "doctest.h"
#include "semtag/hash.hpp"
#include "semtag/simd.hpp"

using namespace semtag;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal() * 3.0;
    return v;
}

// Straight loops, no tricks.
double ref_sq(const std::vector<double>& a, const std::vector<double>& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (long double)(a[i] - b[i]) * (a[i] - b[i]);
    return static_cast<double>(s);
}

double ref_dot(const std::vector<double>& a, const std::vector<double>& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (long double)a[i] * b[i];
    return static_cast<double>(s);
}

}  // namespace

TEST_SUITE("simd") {

TEST_CASE("every available kernel agrees with the reference loop") {
    Rng rng(3);
    for (auto isa : {simd::Isa::Scalar, simd::Isa::Avx2, simd::Isa::Neon}) {
        if (!simd::isa_available(isa)) continue;
        const auto k = simd::kernels_for(isa);
        CAPTURE(simd::isa_name(isa));
        for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 255, 256, 1000}) {
            const auto a = random_vec(rng, n);
            const auto b = random_vec(rng, n);
            const double sq = ref_sq(a, b);
            const double dt = ref_dot(a, b);
            CHECK(k.squared_l2(a.data(), b.data(), n) == doctest::Approx(sq).epsilon(1e-12));
            CHECK(std::abs(k.dot(a.data(), b.data(), n) - dt) <= 1e-12 * (1.0 + ref_dot(a, a) + ref_dot(b, b)));
        }
    }
}

TEST_CASE("forced ISA changes dispatch but not results") {
    Rng rng(9);
    const auto a = random_vec(rng, 123);
    const auto b = random_vec(rng, 123);
    const simd::Isa original = simd::active_isa();
    REQUIRE(simd::force_isa(simd::Isa::Scalar));
    CHECK(simd::active_isa() == simd::Isa::Scalar);
    const double s = simd::squared_l2(a, b);
    if (simd::force_isa(simd::Isa::Avx2)) {
        CHECK(simd::squared_l2(a, b) == doctest::Approx(s).epsilon(1e-12));
        CHECK(simd::l2(a, b) == doctest::Approx(std::sqrt(s)).epsilon(1e-12));
    }
    simd::force_isa(original);
}

TEST_CASE("pairwise_l2 is symmetric with a zero diagonal") {
    Rng rng(5);
    const std::size_t n = 9, d = 13;
    std::vector<double> rows;
    for (std::size_t i = 0; i < n * d; ++i) rows.push_back(rng.normal());
    std::vector<double> out(n * n, -1.0);
    simd::pairwise_l2(rows.data(), n, d, out.data());
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(out[i * n + i] == 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(out[i * n + j] == out[j * n + i]);
            std::vector<double> a(rows.begin() + i * d, rows.begin() + (i + 1) * d);
            std::vector<double> b(rows.begin() + j * d, rows.begin() + (j + 1) * d);
            CHECK(out[i * n + j] == doctest::Approx(std::sqrt(ref_sq(a, b))).epsilon(1e-12));
        }
    }
}

}
