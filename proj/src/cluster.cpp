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

#include "semtag/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "semtag/error.hpp"
#include "semtag/hash.hpp"
#include "semtag/simd.hpp"

namespace semtag {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_points(const Matrix& points, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    if (k > points.rows) {
        throw Error(ErrorCode::InvalidArgument,
                    "k = " + std::to_string(k) + " exceeds point count " + std::to_string(points.rows));
    }
    for (double x : points.data) {
        if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "non-finite coordinate in input");
    }
}

struct Nearest {
    std::vector<std::size_t> slot;  // position in medoid list
    std::vector<double> first;
    std::vector<double> second;
};

Nearest nearest_two(const std::vector<double>& dist, std::size_t n, const std::vector<std::size_t>& medoids) {
    Nearest nr{std::vector<std::size_t>(n, 0), std::vector<double>(n, kInf), std::vector<double>(n, kInf)};
    for (std::size_t o = 0; o < n; ++o) {
        const double* row = dist.data() + o * n;
        for (std::size_t m = 0; m < medoids.size(); ++m) {
            const double d = row[medoids[m]];
            if (d < nr.first[o]) {
                nr.second[o] = nr.first[o];
                nr.first[o] = d;
                nr.slot[o] = m;
            } else if (d < nr.second[o]) {
                nr.second[o] = d;
            }
        }
    }
    return nr;
}

// Greedy BUILD: first medoid minimizes total distance, each further medoid
// maximizes the reduction in total cost.
void build(const std::vector<double>& dist, std::size_t n, std::size_t k, std::vector<std::size_t>& medoids,
           std::vector<char>& is_medoid) {
    std::size_t best = 0;
    double best_sum = kInf;
    for (std::size_t c = 0; c < n; ++c) {
        const double* row = dist.data() + c * n;
        const double s = std::accumulate(row, row + n, 0.0);
        if (s < best_sum) {
            best_sum = s;
            best = c;
        }
    }
    medoids.push_back(best);
    is_medoid[best] = 1;
    std::vector<double> dnear(dist.begin() + static_cast<std::ptrdiff_t>(best * n),
                              dist.begin() + static_cast<std::ptrdiff_t>((best + 1) * n));

    while (medoids.size() < k) {
        std::size_t pick = n;
        double pick_gain = -1.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (is_medoid[c]) continue;
            const double* row = dist.data() + c * n;
            double gain = 0.0;
            for (std::size_t o = 0; o < n; ++o) gain += std::max(0.0, dnear[o] - row[o]);
            if (gain > pick_gain) {
                pick_gain = gain;
                pick = c;
            }
        }
        medoids.push_back(pick);
        is_medoid[pick] = 1;
        const double* row = dist.data() + pick * n;
        for (std::size_t o = 0; o < n; ++o) dnear[o] = std::min(dnear[o], row[o]);
    }
}

// PAM on a full distance matrix; returns medoid indices into [0, n).
ClusterResult pam(const std::vector<double>& dist, std::size_t n, std::size_t k, std::size_t max_iter,
                  const std::vector<std::size_t>& init) {
    ClusterResult res;
    res.k = k;
    std::vector<char> is_medoid(n, 0);
    std::vector<std::size_t> medoids;
    medoids.reserve(k);

    if (!init.empty()) {
        medoids = init;
        for (auto i : init) is_medoid[i] = 1;
    } else {
        build(dist, n, k, medoids, is_medoid);
    }

    Nearest nr = nearest_two(dist, n, medoids);
    double cost = std::accumulate(nr.first.begin(), nr.first.end(), 0.0);
    res.cost_trace.push_back(cost);

    // SWAP. For candidate h and removed medoid slot i:
    //   delta_i = sum_o min(d(o,h) - dn(o), 0)                       (shared)
    //           + sum_{o: slot(o)=i} [min(d(o,h), ds(o)) - dn(o) - min(d(o,h) - dn(o), 0)]
    std::vector<double> delta(k);
    std::size_t iter = 0;
    bool converged = false;
    for (; iter < max_iter; ++iter) {
        double best_delta = 0.0;
        std::size_t best_h = n, best_slot = k;
        for (std::size_t h = 0; h < n; ++h) {
            if (is_medoid[h]) continue;
            const double* row = dist.data() + h * n;
            std::fill(delta.begin(), delta.end(), 0.0);
            double shared = 0.0;
            for (std::size_t o = 0; o < n; ++o) {
                const double doh = row[o];
                const double dn = nr.first[o];
                const double gain = std::min(doh - dn, 0.0);
                shared += gain;
                delta[nr.slot[o]] += std::min(doh, nr.second[o]) - dn - gain;
            }
            for (std::size_t i = 0; i < k; ++i) {
                const double d = shared + delta[i];
                if (d < best_delta) {
                    best_delta = d;
                    best_h = h;
                    best_slot = i;
                }
            }
        }
        if (best_h == n || best_delta >= -1e-12 * (1.0 + cost)) {
            converged = true;
            break;
        }
        is_medoid[medoids[best_slot]] = 0;
        medoids[best_slot] = best_h;
        is_medoid[best_h] = 1;
        nr = nearest_two(dist, n, medoids);
        cost = std::accumulate(nr.first.begin(), nr.first.end(), 0.0);
        res.cost_trace.push_back(cost);
    }
    res.iterations = iter;
    res.converged = converged;
    res.medoids = std::move(medoids);
    res.assignment = std::move(nr.slot);
    res.total_cost = cost;
    return res;
}

}  // namespace

ClusterResult k_medoids(const Matrix& points, std::size_t k, std::uint64_t seed, const KMedoidsOptions& options) {
    check_points(points, k);
    const std::size_t n = points.rows;
    const std::size_t dim = points.cols;

    std::vector<std::size_t> subset(n);
    std::iota(subset.begin(), subset.end(), 0);
    const std::size_t cap = std::max(options.max_points, k);
    if (n > cap) {
        Rng rng(hash_combine(seed, 0x6b6d65646f696473ULL));
        for (std::size_t i = 0; i < cap; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
            std::swap(subset[i], subset[j]);
        }
        subset.resize(cap);
        std::sort(subset.begin(), subset.end());
    }
    const std::size_t m = subset.size();
    Matrix sub(m, dim);
    for (std::size_t i = 0; i < m; ++i) {
        const auto r = points.row(subset[i]);
        std::copy(r.begin(), r.end(), sub.row(i).begin());
    }
    std::vector<double> dist(m * m);
    simd::pairwise_l2(sub.data.data(), m, dim, dist.data());

    ClusterResult res = pam(dist, m, k, options.max_swap_iterations, {});
    {
        Rng rr(hash_combine(seed, 0x7265737461727473ULL));
        const std::size_t restarts = m <= options.restart_max_points ? options.restarts : 0;
        for (std::size_t r = 0; r < restarts; ++r) {
            std::vector<std::size_t> init(m);
            std::iota(init.begin(), init.end(), 0);
            for (std::size_t i = 0; i < k; ++i) std::swap(init[i], init[i + rr.below(m - i)]);
            init.resize(k);
            ClusterResult alt = pam(dist, m, k, options.max_swap_iterations, init);
            if (alt.total_cost < res.total_cost - 1e-12 * (1.0 + res.total_cost)) res = std::move(alt);
        }
    }
    for (auto& med : res.medoids) med = subset[med];
    if (m == n) return res;

    // Assign the full set to the medoids chosen on the subsample.
    res.assignment.assign(n, 0);
    res.total_cost = 0.0;
    for (std::size_t o = 0; o < n; ++o) {
        double bd = kInf;
        for (std::size_t c = 0; c < k; ++c) {
            const double d = simd::l2(points.row(o), points.row(res.medoids[c]));
            if (d < bd) {
                bd = d;
                res.assignment[o] = c;
            }
        }
        res.total_cost += bd;
    }
    return res;
}

ClusterResult k_means(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iters) {
    check_points(points, k);
    const std::size_t n = points.rows;
    const std::size_t dim = points.cols;
    Rng rng(hash_combine(seed, 0x6b6d65616e73ULL));

    // k-means++ seeding.
    std::vector<std::size_t> seeds;
    std::vector<char> chosen(n, 0);
    seeds.push_back(static_cast<std::size_t>(rng.below(n)));
    chosen[seeds.back()] = 1;
    std::vector<double> d2(n);
    for (std::size_t o = 0; o < n; ++o) d2[o] = simd::squared_l2(points.row(o), points.row(seeds[0]));
    while (seeds.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t o = 0; o < n; ++o) {
                if (chosen[o] || d2[o] <= 0.0) continue;
                acc += d2[o];
                if (acc > r) {
                    pick = o;
                    break;
                }
            }
            if (pick == n) {
                // Rounding left r at the very top of the range.
                for (std::size_t o = n; o-- > 0;) {
                    if (!chosen[o] && d2[o] > 0.0) {
                        pick = o;
                        break;
                    }
                }
            }
        }
        if (pick == n) {
            for (std::size_t o = 0; o < n; ++o) {
                if (!chosen[o]) {
                    pick = o;
                    break;
                }
            }
        }
        seeds.push_back(pick);
        chosen[pick] = 1;
        for (std::size_t o = 0; o < n; ++o) {
            d2[o] = std::min(d2[o], simd::squared_l2(points.row(o), points.row(pick)));
        }
    }

    ClusterResult res;
    res.k = k;
    res.centroids = Matrix(k, dim);
    for (std::size_t c = 0; c < k; ++c) {
        const auto r = points.row(seeds[c]);
        std::copy(r.begin(), r.end(), res.centroids.row(c).begin());
    }
    res.assignment.assign(n, k);  // sentinel: nothing assigned yet

    auto assign_all = [&](std::vector<std::size_t>& assign, std::vector<double>& dist) {
        bool changed = false;
        for (std::size_t o = 0; o < n; ++o) {
            std::size_t bc = 0;
            double bd = kInf;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = simd::squared_l2(points.row(o), res.centroids.row(c));
                if (d < bd) {
                    bd = d;
                    bc = c;
                }
            }
            dist[o] = bd;
            if (assign[o] != bc) {
                assign[o] = bc;
                changed = true;
            }
        }
        return changed;
    };

    std::vector<double> dist(n);
    std::vector<std::size_t> counts(k);
    std::size_t iter = 0;
    bool converged = false;
    for (; iter < max_iters; ++iter) {
        const bool changed = assign_all(res.assignment, dist);
        if (!changed && iter > 0) {
            converged = true;
            break;
        }
        // Re-seed empty clusters from the farthest points.
        std::fill(counts.begin(), counts.end(), 0);
        for (auto a : res.assignment) ++counts[a];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = 0;
            double fd = -1.0;
            for (std::size_t o = 0; o < n; ++o) {
                if (counts[res.assignment[o]] > 1 && dist[o] > fd) {
                    fd = dist[o];
                    far = o;
                }
            }
            --counts[res.assignment[far]];
            res.assignment[far] = c;
            counts[c] = 1;
            dist[far] = 0.0;
        }
        // Update step.
        std::fill(res.centroids.data.begin(), res.centroids.data.end(), 0.0);
        for (std::size_t o = 0; o < n; ++o) {
            auto crow = res.centroids.row(res.assignment[o]);
            const auto prow = points.row(o);
            for (std::size_t d = 0; d < dim; ++d) crow[d] += prow[d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            for (double& x : res.centroids.row(c)) x /= static_cast<double>(counts[c]);
        }
        double sse = 0.0;
        for (std::size_t o = 0; o < n; ++o) {
            sse += simd::squared_l2(points.row(o), res.centroids.row(res.assignment[o]));
        }
        res.cost_trace.push_back(sse);
    }
    res.iterations = iter;
    res.converged = converged;
    res.total_cost = 0.0;
    for (std::size_t o = 0; o < n; ++o) {
        res.total_cost += simd::squared_l2(points.row(o), res.centroids.row(res.assignment[o]));
    }
    return res;
}

ClusterResult cluster_texts(std::span<const std::string> texts, std::size_t k, const EmbeddingProvider& provider,
                            std::uint64_t seed, const KMedoidsOptions& options) {
    if (texts.empty()) throw Error(ErrorCode::EmptyInput, "cannot cluster an empty set");
    const Matrix emb = provider.embed_batch(texts);
    return k_medoids(emb, std::min(k, texts.size()), seed, options);
}

std::vector<std::size_t> distill(std::span<const std::string> texts, std::size_t k,
                                 const EmbeddingProvider& provider, std::uint64_t seed,
                                 const KMedoidsOptions& options) {
    if (texts.empty()) throw Error(ErrorCode::EmptyInput, "cannot distill an empty set");
    if (k >= texts.size()) {
        std::vector<std::size_t> all(texts.size());
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    auto medoids = cluster_texts(texts, k, provider, seed, options).medoids;
    std::sort(medoids.begin(), medoids.end());
    return medoids;
}

}  // namespace semtag
