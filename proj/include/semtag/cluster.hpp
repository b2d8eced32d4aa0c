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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semtag/embedding.hpp"

namespace semtag {

struct ClusterResult {
    std::size_t k = 0;
    /// K-Medoids: indices of the medoid points, in cluster order.
    std::vector<std::size_t> medoids;
    /// K-Means: centroid vectors, one row per cluster.
    Matrix centroids;
    /// Cluster index for every input point.
    std::vector<std::size_t> assignment;
    /// K-Medoids: sum of Euclidean distances to the assigned medoid.
    /// K-Means: sum of squared Euclidean distances to the assigned centroid.
    double total_cost = 0.0;
    /// Objective after BUILD and after each accepted swap / Lloyd step.
    std::vector<double> cost_trace;
    std::size_t iterations = 0;
    bool converged = false;
};

struct KMedoidsOptions {
    std::size_t max_swap_iterations = 100;
    /// Inputs larger than this are subsampled (seeded) before BUILD/SWAP;
    /// all points are then assigned to the nearest selected medoid.
    std::size_t max_points = 2000;
    /// Extra SWAP runs from seeded random initial medoid sets, applied when the
    /// (sub)sample has at most `restart_max_points` points. The lowest-cost run
    /// wins; BUILD's run wins ties.
    std::size_t restarts = 8;
    std::size_t restart_max_points = 500;
};

/// PAM: greedy BUILD followed by best-improvement SWAP (evaluated with the
/// FastPAM1 decomposition, which yields the same swap choice as classic PAM).
/// Ties resolve to the lowest index. The seed drives subsampling and the
/// restart initializations; output is a pure function of (points, k, seed).
ClusterResult k_medoids(const Matrix& points, std::size_t k, std::uint64_t seed,
                        const KMedoidsOptions& options = {});

/// k-means++ seeding then Lloyd iterations to an assignment fixpoint.
/// Empty clusters are re-seeded from the point farthest from its centroid.
ClusterResult k_means(const Matrix& points, std::size_t k, std::uint64_t seed,
                      std::size_t max_iters = 100);

/// Embeds `texts` and returns the indices of min(k, n) K-Medoids
/// representatives, ascending.
std::vector<std::size_t> distill(std::span<const std::string> texts, std::size_t k,
                                 const EmbeddingProvider& provider, std::uint64_t seed,
                                 const KMedoidsOptions& options = {});

/// Embeds and clusters `texts`; k is clamped to n.
ClusterResult cluster_texts(std::span<const std::string> texts, std::size_t k,
                            const EmbeddingProvider& provider, std::uint64_t seed,
                            const KMedoidsOptions& options = {});

}  // namespace semtag
