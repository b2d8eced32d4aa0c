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

#include <filesystem>
#include <memory>
#include <string>

#include <unistd.h>

#include "semtag/assignment.hpp"
#include "semtag/builder.hpp"
#include "semtag/corpus.hpp"
#include "semtag/gateway.hpp"
#include "semtag/hash.hpp"
#include "semtag/mock_world.hpp"

namespace semtag::testing {

struct MockSetup {
    std::shared_ptr<const PlantedWorld> world;
    std::shared_ptr<MockBackend> backend;
    std::unique_ptr<Gateway> gateway;
    HashingProvider provider;

    explicit MockSetup(PlantedWorldConfig wc = {}, MockBehavior behavior = {}, GatewayConfig gc = {})
        : world(std::make_shared<PlantedWorld>(PlantedWorld::generate(wc))),
          backend(std::make_shared<MockBackend>(world, std::move(behavior))),
          gateway(std::make_unique<Gateway>(gc, backend, backend)) {
        gateway->set_sleeper([](int) {});
    }
};

inline PlantedWorldConfig small_world(std::uint64_t seed = 7) {
    PlantedWorldConfig wc;
    wc.branching = {3, 2};
    wc.n_items = 240;
    wc.n_users = 80;
    wc.seed = seed;
    return wc;
}

inline BuildConfig small_build() {
    BuildConfig bc;
    bc.d_max = 2;
    bc.tau_split = 10;
    bc.parallelism = 2;
    return bc;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static int counter = 0;
    auto p = std::filesystem::temp_directory_path() /
             ("semtag_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Random tree, paths and train sequences without any LLM in the loop.
struct RandomCatalog {
    VocabularyTree tree;
    std::vector<AssignmentRecord> records;
    SemIdTable table;
    SplitDataset split;
};

/// Paths are drawn from a small tree so many items collide; with probability
/// `p_stop` per level a path ends early.
inline RandomCatalog random_catalog(std::uint64_t seed, std::size_t n_items, std::size_t fanout,
                                    std::size_t depth, double p_stop = 0.15, std::size_t n_users = 0) {
    Rng rng(seed);
    RandomCatalog c;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n_items; ++i) ids.push_back("it" + std::to_string(i));
    c.tree = VocabularyTree(ids);
    std::vector<std::string> frontier{std::string(VocabularyTree::kRootId)};
    for (std::size_t d = 0; d < depth; ++d) {
        std::vector<std::string> next;
        for (const auto& parent : frontier) {
            const std::size_t k = d == 0 ? 2 + rng.below(fanout) : 1 + rng.below(fanout);
            for (std::size_t j = 0; j < k; ++j) {
                DescriptorNode n;
                n.name = "N" + std::to_string(d) + "_" + std::to_string(next.size());
                n.rule_id = make_rule_id(parent, n.name);
                n.description = n.name + ": INCLUDES: x. EXCLUDES: y.";
                n.parent = parent;
                next.push_back(n.rule_id);
                c.tree.add_child(std::move(n));
            }
        }
        frontier = std::move(next);
    }
    for (const auto& id : ids) {
        AssignmentRecord r;
        r.item_id = id;
        std::string at(VocabularyTree::kRootId);
        for (std::size_t d = 0; d < depth; ++d) {
            const auto& kids = c.tree.children(at);
            if (kids.empty() || (d > 0 && rng.uniform() < p_stop)) break;
            at = kids[rng.below(kids.size())];
            r.path.push_back(at);
        }
        r.terminated = r.path.size() < depth;
        c.records.push_back(std::move(r));
    }
    c.records = resolve_collisions(std::move(c.records));
    c.table = export_semids(c.records, c.tree);
    for (std::size_t u = 0; u < n_users; ++u) {
        const std::string user = "u" + std::to_string(u);
        const std::size_t len = 3 + rng.below(8);
        // Users favour one level-1 branch so the model has something to learn.
        const std::size_t fav = rng.below(n_items);
        std::vector<std::string> seq;
        for (std::size_t k = 0; k < len; ++k) {
            const std::size_t pick = rng.uniform() < 0.5 ? (fav + rng.below(5)) % n_items : rng.below(n_items);
            seq.push_back(ids[pick]);
        }
        c.split.test[user] = seq.back();
        seq.pop_back();
        c.split.valid[user] = seq.back();
        seq.pop_back();
        c.split.train[user] = seq;
    }
    return c;
}

}  // namespace semtag::testing
