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

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "semtag/assignment.hpp"
#include "semtag/decode.hpp"
#include "semtag/embedding.hpp"
#include "semtag/hash.hpp"
#include "semtag/surrogate.hpp"
#include "semtag/trie.hpp"

// Reference implementations shared by the unit tests and the acceptance run.
namespace semtag::testing {

inline double dist(const Matrix& m, std::size_t i, std::size_t j) {
    double s = 0;
    for (std::size_t c = 0; c < m.cols; ++c) {
        const double d = m.row(i)[c] - m.row(j)[c];
        s += d * d;
    }
    return std::sqrt(s);
}

// Every k-subset as medoid set; cost = sum of distances to the nearest one.
inline double brute_kmedoids(const Matrix& m, std::size_t k) {
    const std::size_t n = m.rows;
    double best = std::numeric_limits<double>::infinity();
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
    do {
        double cost = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double near = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) {
                if (pick[j]) near = std::min(near, dist(m, i, j));
            }
            cost += near;
        }
        best = std::min(best, cost);
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

// Every labelling with all k labels used; SSE to the label means.
inline double brute_kmeans(const Matrix& m, std::size_t k) {
    const std::size_t n = m.rows;
    std::vector<std::size_t> label(n, 0);
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
        std::set<std::size_t> used(label.begin(), label.end());
        if (used.size() == k) {
            double sse = 0;
            for (std::size_t c = 0; c < k; ++c) {
                std::vector<double> mean(m.cols, 0.0);
                std::size_t cnt = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (label[i] != c) continue;
                    ++cnt;
                    for (std::size_t d = 0; d < m.cols; ++d) mean[d] += m.row(i)[d];
                }
                for (auto& x : mean) x /= static_cast<double>(cnt);
                for (std::size_t i = 0; i < n; ++i) {
                    if (label[i] != c) continue;
                    for (std::size_t d = 0; d < m.cols; ++d) sse += (m.row(i)[d] - mean[d]) * (m.row(i)[d] - mean[d]);
                }
            }
            best = std::min(best, sse);
        }
        std::size_t p = 0;
        while (p < n && ++label[p] == k) label[p++] = 0;
        if (p == n) break;
    }
    return best;
}

inline Matrix random_points(Rng& rng, std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (auto& x : m.data) x = rng.uniform() * 10.0;
    return m;
}

inline Matrix blobs(Rng& rng, std::size_t k, std::size_t per, std::size_t d) {
    Matrix m(k * per, d);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t p = 0; p < per; ++p) {
            for (std::size_t j = 0; j < d; ++j) m.row(c * per + p)[j] = 100.0 * static_cast<double>(c) * (j == 0) + rng.normal();
        }
    }
    return m;
}


// Brute force over the trie's item list, scored by summing log-probs one token at a time.
inline std::vector<ScoredItem> brute_rank(const SurrogateModel& m, const std::vector<int>& prefix, const DescriptorTrie& trie) {
    std::vector<ScoredItem> out;
    for (std::size_t i = 0; i < trie.n_terminals(); ++i) {
        std::vector<int> hist = prefix;
        std::vector<int> seq = trie.sequence(i);
        seq.push_back(kEos);
        double s = 0.0;
        for (int t : seq) {
            s += std::log(m.prob(m.context_of(hist), t));
            hist.push_back(t);
        }
        out.push_back({trie.items()[i], s});
    }
    std::sort(out.begin(), out.end(), [](const ScoredItem& a, const ScoredItem& b) {
        return a.score != b.score ? a.score > b.score : a.item_id < b.item_id;
    });
    return out;
}

}  // namespace semtag::testing
